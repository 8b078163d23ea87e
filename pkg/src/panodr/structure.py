"""Dense ceiling/wall/floor segmentation of a masked panorama.

The net consumes the 4-channel masked input (RGB with the hole zeroed, plus
the hole mask) rather than the original image, so object pixels can never
leak into the structure estimate.  A frozen copy of a trained instance later
serves as the structural critic during generator training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .blocks import PanoConv2d, upsample_rows

NUM_CLASSES = 3
PROB_CLIP = 1e-7


@dataclass
class StructureNetConfig:
    base_channels: int = 32
    depth: int = 2  # number of vertical down/up levels
    in_channels: int = 4
    num_classes: int = NUM_CLASSES

    def channels_at(self, level: int) -> int:
        return min(self.base_channels * 2**level, 8 * self.base_channels)


class _ConvBlock(nn.Module):
    def __init__(self, cin, cout, stride_h=1, dilation_w=1):
        super().__init__()
        self.conv = PanoConv2d(cin, cout, stride_h=stride_h, dilation_w=dilation_w)
        self.norm = nn.InstanceNorm2d(cout, affine=True)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class StructureNet(nn.Module):
    """U-shaped encoder/decoder over vertically downsampled panoramic features."""

    def __init__(self, config: StructureNetConfig | None = None):
        super().__init__()
        self.config = config or StructureNetConfig()
        cfg = self.config

        self.stem = _ConvBlock(cfg.in_channels, cfg.channels_at(0))
        self.down = nn.ModuleList(
            _ConvBlock(cfg.channels_at(i), cfg.channels_at(i + 1), stride_h=2)
            for i in range(cfg.depth)
        )
        cb = cfg.channels_at(cfg.depth)
        self.bottleneck = nn.Sequential(
            _ConvBlock(cb, cb, dilation_w=2),
            _ConvBlock(cb, cb, dilation_w=4),
        )
        self.up = nn.ModuleList(
            _ConvBlock(cfg.channels_at(i + 1) + cfg.channels_at(i), cfg.channels_at(i))
            for i in reversed(range(cfg.depth))
        )
        self.head = PanoConv2d(cfg.channels_at(0), cfg.num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Masked 4-channel panorama -> per-pixel class probabilities (B, 3, H, W)."""
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels:
            raise ValueError(f"expected (B, {cfg.in_channels}, H, W) input, got {tuple(x.shape)}")
        h = x.shape[2]
        if h % 2**cfg.depth != 0:
            raise ValueError(f"input height {h} not divisible by 2^depth = {2 ** cfg.depth}")

        feats = self.stem(x)
        skips = [feats]
        for block in self.down:
            feats = block(feats)
            skips.append(feats)
        feats = self.bottleneck(feats)
        for i, block in enumerate(self.up):
            skip = skips[len(self.down) - 1 - i]
            feats = block(torch.cat([upsample_rows(feats), skip], dim=1))
        logits = self.head(feats)
        return torch.softmax(logits, dim=1)


def structure_forward(net: StructureNet, x: torch.Tensor) -> torch.Tensor:
    """Functional alias for net(x); returns per-pixel layout probabilities."""
    return net(x)


def layout_loss(probs: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Per-pixel cross-entropy on probabilities, clipped to [1e-7, 1]."""
    if probs.shape[-2:] != gt.shape[-2:]:
        raise ValueError(f"probs {tuple(probs.shape)} and labels {tuple(gt.shape)} disagree")
    gathered = probs.gather(1, gt.long().unsqueeze(1)).squeeze(1)
    return -torch.log(gathered.clamp(PROB_CLIP, 1.0)).mean()


def probs_to_labels(probs: torch.Tensor) -> torch.Tensor:
    return probs.argmax(dim=1)


def layout_miou(pred_labels, gt, region=None) -> float:
    """Mean IoU over the classes present in gt or pred (within `region` if given).

    Classes absent from both maps are excluded from the mean.
    """
    pred = np.asarray(pred_labels if not torch.is_tensor(pred_labels) else pred_labels.cpu().numpy())
    gt = np.asarray(gt if not torch.is_tensor(gt) else gt.cpu().numpy())
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if region is not None:
        sel = np.asarray(region if not torch.is_tensor(region) else region.cpu().numpy()).astype(bool)
        if sel.shape != gt.shape:
            raise ValueError("region shape mismatch")
        if not sel.any():
            raise ValueError("cannot score an empty region")
        pred, gt = pred[sel], gt[sel]
    ious = []
    for c in range(NUM_CLASSES):
        p = pred == c
        g = gt == c
        union = (p | g).sum()
        if union == 0:
            continue
        ious.append((p & g).sum() / union)
    return float(np.mean(ious))
