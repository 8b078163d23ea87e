"""Layout-guided panorama inpainter.

A gated-convolution encoder/decoder fills the masked hole; the decoder is
modulated by regional normalization whose scale/shift at each pixel blends
per-class style codes (one per ceiling/wall/floor) harvested from the
unmasked context.  The raw prediction is hard-composited with the input so
pixels outside the hole are untouched no matter what the net does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import PanoConv2d, upsample_rows

NUM_CLASSES = 3

_GATE_ACTS = {"elu": F.elu, "relu": F.relu, "lrelu": lambda x: F.leaky_relu(x, 0.2)}


@dataclass
class GeneratorConfig:
    base_channels: int = 32
    depth: int = 2  # vertical down/up levels
    style_dim: int = 64
    gate_activation: str = "elu"
    norm_eps: float = 1e-5
    in_channels: int = 4

    def __post_init__(self):
        if self.style_dim < 1:
            raise ValueError("style_dim must be >= 1")
        if self.norm_eps <= 0:
            raise ValueError("norm_eps must be positive")
        if self.gate_activation not in _GATE_ACTS:
            raise ValueError(f"unknown gate activation {self.gate_activation!r}")

    def channels_at(self, level: int) -> int:
        return min(self.base_channels * 2**level, 8 * self.base_channels)


class GatedConv2d(nn.Module):
    """Free-form-inpainting conv: phi(conv_f(x)) * sigmoid(conv_g(x)).

    The sigmoid gate lets the net soft-ignore hole pixels without an
    explicit validity map.
    """

    def __init__(self, cin, cout, stride_h=1, dilation_w=1, activation="elu"):
        super().__init__()
        self.conv_feat = PanoConv2d(cin, cout, stride_h=stride_h, dilation_w=dilation_w)
        self.conv_gate = PanoConv2d(cin, cout, stride_h=stride_h, dilation_w=dilation_w)
        self.act = _GATE_ACTS[activation]

    def forward(self, x):
        return self.act(self.conv_feat(x)) * torch.sigmoid(self.conv_gate(x))


def pool_to_rows(x: torch.Tensor, out_h: int) -> torch.Tensor:
    """Area-average a (B, C, H, W) map down to out_h rows (width unchanged)."""
    if x.shape[2] == out_h:
        return x
    return F.adaptive_avg_pool2d(x, (out_h, x.shape[3]))


def downsample_layout(layout: torch.Tensor, out_h: int) -> torch.Tensor:
    """Pool class probabilities vertically and renormalize the simplex."""
    pooled = pool_to_rows(layout, out_h)
    return pooled / pooled.sum(dim=1, keepdim=True).clamp_min(1e-8)


def extract_style_bank(
    context_features: torch.Tensor,
    layout: torch.Tensor,
    mask: torch.Tensor,
    defaults: torch.Tensor,
    presence_eps: float = 1e-6,
):
    """Per-class style codes as masked, layout-weighted feature means.

    style[c] = sum_p w_c(p) f(p) / sum_p w_c(p) with w_c(p) =
    layout_c(p) * (1 - mask(p)).  Classes with no unmasked support fall back
    to the learned `defaults` row and are flagged absent.

    Returns (styles (B, 3, D), present (B, 3) bool).
    """
    b, d = context_features.shape[:2]
    h, w = context_features.shape[2:]
    layout = downsample_layout(layout, h)
    mask = pool_to_rows(mask, h)
    weights = layout * (1.0 - mask)  # (B, 3, h, w)

    wsum = weights.sum(dim=(2, 3))  # (B, 3)
    feat_sum = torch.einsum("bkhw,bdhw->bkd", weights, context_features)
    present = wsum > presence_eps
    denom = wsum.clamp_min(presence_eps).unsqueeze(-1)
    styles = feat_sum / denom
    styles = torch.where(present.unsqueeze(-1), styles, defaults.unsqueeze(0).expand(b, -1, -1))
    return styles, present


class StructureNorm(nn.Module):
    """Regional normalization: instance-normalize, then apply per-pixel
    (gamma, beta) obtained by layout-weighted blending of per-class affine
    parameters predicted from the style codes."""

    def __init__(self, channels: int, style_dim: int, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.mlps = nn.ModuleList(nn.Linear(style_dim, 2 * channels) for _ in range(NUM_CLASSES))
        for mlp in self.mlps:
            nn.init.normal_(mlp.weight, std=0.02)
            with torch.no_grad():
                mlp.bias[:channels] = 1.0  # start near identity: gamma ~ 1, beta ~ 0
                mlp.bias[channels:] = 0.0

    def forward(self, x: torch.Tensor, layout: torch.Tensor, styles: torch.Tensor) -> torch.Tensor:
        mu = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
        x_hat = (x - mu) / torch.sqrt(var + self.eps)

        layout = downsample_layout(layout, x.shape[2])
        params = torch.stack([mlp(styles[:, c]) for c, mlp in enumerate(self.mlps)], dim=1)
        blended = torch.einsum("bkhw,bkc->bchw", layout, params)
        gamma, beta = blended[:, : self.channels], blended[:, self.channels :]
        return gamma * x_hat + beta


class PanoGenerator(nn.Module):
    """Gated encoder/decoder with layout-conditioned decoder normalization."""

    def __init__(self, config: GeneratorConfig | None = None):
        super().__init__()
        self.config = config or GeneratorConfig()
        cfg = self.config
        act = cfg.gate_activation

        self.stem = GatedConv2d(cfg.in_channels, cfg.channels_at(0), activation=act)
        self.down = nn.ModuleList(
            GatedConv2d(cfg.channels_at(i), cfg.channels_at(i + 1), stride_h=2, activation=act)
            for i in range(cfg.depth)
        )
        cb = cfg.channels_at(cfg.depth)
        self.bottleneck = nn.Sequential(
            GatedConv2d(cb, cb, dilation_w=2, activation=act),
            GatedConv2d(cb, cb, dilation_w=4, activation=act),
        )
        self.style_proj = PanoConv2d(cb, cfg.style_dim, kernel_size=1)
        self.default_styles = nn.Parameter(torch.zeros(NUM_CLASSES, cfg.style_dim))

        ups, norms = [], []
        for i in reversed(range(cfg.depth)):
            ups.append(
                GatedConv2d(cfg.channels_at(i + 1) + cfg.channels_at(i), cfg.channels_at(i), activation=act)
            )
            norms.append(StructureNorm(cfg.channels_at(i), cfg.style_dim, eps=cfg.norm_eps))
        self.up = nn.ModuleList(ups)
        self.norms = nn.ModuleList(norms)
        self.head = PanoConv2d(cfg.channels_at(0), 3)

    def forward(self, x: torch.Tensor, layout: torch.Tensor) -> torch.Tensor:
        """(masked RGB + mask, layout probs) -> raw full-frame RGB in [0, 1]."""
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels:
            raise ValueError(f"expected (B, {cfg.in_channels}, H, W) input, got {tuple(x.shape)}")
        if layout.shape[1] != NUM_CLASSES or layout.shape[0] != x.shape[0]:
            raise ValueError(f"layout shape {tuple(layout.shape)} incompatible with input")
        if x.shape[2] % 2**cfg.depth != 0:
            raise ValueError(f"input height {x.shape[2]} not divisible by 2^depth = {2 ** cfg.depth}")

        mask = x[:, cfg.in_channels - 1 : cfg.in_channels]
        feats = self.stem(x)
        skips = [feats]
        for block in self.down:
            feats = block(feats)
            skips.append(feats)
        feats = self.bottleneck(feats)

        style_feats = self.style_proj(feats)
        styles, _ = extract_style_bank(style_feats, layout, mask, self.default_styles)

        for i, (block, norm) in enumerate(zip(self.up, self.norms)):
            skip = skips[cfg.depth - 1 - i]
            feats = block(torch.cat([upsample_rows(feats), skip], dim=1))
            feats = norm(feats, layout, styles)
        return torch.sigmoid(self.head(feats))


def generate(net: PanoGenerator, masked_input: torch.Tensor, layout: torch.Tensor) -> torch.Tensor:
    """Functional alias for net(masked_input, layout)."""
    return net(masked_input, layout)


def composite(inp, raw, mask):
    """Hard blend: input outside the mask, raw prediction inside, exactly.

    Works for numpy arrays or torch tensors; `mask` broadcasts against the
    image arrays ((H, W) against (H, W, 3), or (B, 1, H, W) against
    (B, 3, H, W)).
    """
    if torch.is_tensor(inp):
        m = mask.to(inp.dtype)
        return inp * (1 - m) + raw * m
    m = np.asarray(mask, dtype=inp.dtype)
    if inp.ndim == 3 and m.ndim == 2:
        m = m[..., None]
    return inp * (1 - m) + raw * m


def composite_uint8(inp: np.ndarray, raw: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """8-bit composite that copies input bytes verbatim outside the mask."""
    m = mask.astype(bool)
    if inp.ndim == 3 and m.ndim == 2:
        m = m[..., None]
    return np.where(m, raw, inp)


def uniform_layout_like(layout: torch.Tensor) -> torch.Tensor:
    """Guidance ablation: replace class probabilities with flat 1/3 maps."""
    return torch.full_like(layout, 1.0 / NUM_CLASSES)
