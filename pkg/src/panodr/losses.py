"""Training losses and hole-restricted image metrics.

The generator objective combines hinge adversarial feedback from a patch
discriminator, weighted L1 reconstruction (hole pixels count more than
valid ones), a pluggable perceptual term, and a structure-consistency term
that runs a frozen segmentation net over the composited output and
penalizes layout drift inside the hole.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
from scipy.ndimage import uniform_filter

from .blocks import PanoConv2d
from .geometry import circular_pad_hw
from .structure import PROB_CLIP, StructureNet

PSNR_CAP_DB = 100.0


@dataclass
class LossWeights:
    w_adv: float = 0.1
    w_rec_hole: float = 6.0
    w_rec_valid: float = 1.0
    w_perc: float = 0.05
    w_struct: float = 1.0

    def __post_init__(self):
        vals = (self.w_adv, self.w_rec_hole, self.w_rec_valid, self.w_perc, self.w_struct)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if all(v == 0 for v in vals):
            raise ValueError("at least one loss weight must be positive")


# ---------------------------------------------------------------------------
# patch discriminator


class PatchDiscriminator(nn.Module):
    """Fully convolutional hinge critic producing a patch logit map.

    First layer carries no normalization; later stages downsample by 2 in
    both dimensions, so the logit map is roll-equivariant for shifts that
    are multiples of the total stride.
    """

    def __init__(self, in_channels: int = 3, base_channels: int = 32, n_layers: int = 3):
        super().__init__()
        layers = []
        c = in_channels
        for i in range(n_layers):
            nxt = min(base_channels * 2**i, 8 * base_channels)
            layers += [
                _StridedPanoConv(c, nxt, stride=2),
                nn.LeakyReLU(0.2),
            ]
            c = nxt
        self.features = nn.Sequential(*layers)
        self.head = PanoConv2d(c, 1)
        self.total_stride = 2**n_layers

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim != 4:
            raise ValueError(f"expected (B, C, H, W), got {tuple(image.shape)}")
        return self.head(self.features(image))


class _StridedPanoConv(nn.Module):
    """4x4 conv, stride 2 in both dims, wrap-padded horizontally."""

    def __init__(self, cin, cout, stride=2):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, 4, stride=stride, padding=0)

    def forward(self, x):
        return self.conv(circular_pad_hw(x, 1, 1))


def disc_forward(disc: PatchDiscriminator, image: torch.Tensor) -> torch.Tensor:
    return disc(image)


# ---------------------------------------------------------------------------
# scalar losses


def hinge_d_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    """mean(relu(1 - real)) + mean(relu(1 + fake))."""
    return torch.relu(1.0 - real_logits).mean() + torch.relu(1.0 + fake_logits).mean()


def hinge_g_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    """-mean(fake): push generated patches toward the real side."""
    return -fake_logits.mean()


def recon_loss(pred, target, mask, weights: LossWeights) -> torch.Tensor:
    """Weighted L1: hole pixels weigh w_rec_hole, valid pixels w_rec_valid.

    mask is (B, 1, H, W) with 1 inside the hole; result is the mean over
    batch, channels, and pixels of weight(p) * |pred - target|.
    """
    if pred.shape != target.shape:
        raise ValueError(f"pred {tuple(pred.shape)} vs target {tuple(target.shape)}")
    w = weights.w_rec_hole * mask + weights.w_rec_valid * (1.0 - mask)
    return (w * (pred - target).abs()).mean()


def pyramid_extractor(x: torch.Tensor, levels: int = 3):
    """Default perceptual features: identity plus 2x average-pool pyramid."""
    feats = [x]
    for _ in range(levels - 1):
        x = torch.nn.functional.avg_pool2d(x, 2)
        feats.append(x)
    return feats


def identity_extractor(x: torch.Tensor):
    return [x]


def perceptual_loss(pred, target, extractor=pyramid_extractor) -> torch.Tensor:
    """Sum over feature levels of mean absolute feature differences."""
    fp = extractor(pred)
    ft = extractor(target)
    total = 0.0
    for a, b in zip(fp, ft):
        if not (torch.isfinite(a).all() and torch.isfinite(b).all()):
            raise ValueError("extractor produced non-finite features")
        total = total + (a - b).abs().mean()
    return total


def structure_consistency_loss(
    pred: torch.Tensor,
    frozen_structure: StructureNet,
    gt_layout: torch.Tensor,
    mask: torch.Tensor,
) -> torch.Tensor:
    """Cross-entropy between the frozen critic's layout of `pred` and the
    ground-truth layout, restricted to hole pixels.

    `pred` should be the composited output; the critic sees it with an
    all-zero mask channel (a complete image).  Gradient reaches `pred` but
    never the critic's parameters.
    """
    if mask.sum() == 0:
        return pred.sum() * 0.0
    critic_in = torch.cat([pred, torch.zeros_like(mask)], dim=1)
    probs = frozen_structure(critic_in)
    gathered = probs.gather(1, gt_layout.long().unsqueeze(1)).clamp(PROB_CLIP, 1.0)
    ce = -torch.log(gathered)
    m = mask.to(ce.dtype)
    return (ce * m).sum() / m.sum()


def freeze_structure_net(net: StructureNet) -> StructureNet:
    """Return the net with parameters detached from training."""
    for p in net.parameters():
        p.requires_grad_(False)
    net.eval()
    return net


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricsReport:
    psnr_hole: float
    ssim_hole: float
    layout_iou_hole: float
    l1_hole: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @staticmethod
    def aggregate(reports: list["MetricsReport"]) -> "MetricsReport":
        if not reports:
            raise ValueError("cannot aggregate zero reports")
        return MetricsReport(
            psnr_hole=float(np.mean([r.psnr_hole for r in reports])),
            ssim_hole=float(np.mean([r.ssim_hole for r in reports])),
            layout_iou_hole=float(np.mean([r.layout_iou_hole for r in reports])),
            l1_hole=float(np.mean([r.l1_hole for r in reports])),
        )


def write_metrics_jsonl(path, reports: list[MetricsReport], aggregate: MetricsReport) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")
        fh.write(json.dumps({"aggregate": asdict(aggregate)}) + "\n")


def _to_numpy(x):
    return x.detach().cpu().numpy() if torch.is_tensor(x) else np.asarray(x)


def psnr_hole(pred, target, mask) -> float:
    """PSNR over hole pixels only, for [0, 1] images, capped at 100 dB."""
    pred, target, mask = _to_numpy(pred), _to_numpy(target), _to_numpy(mask)
    sel = mask.astype(bool)
    if not sel.any():
        raise ValueError("mask is empty")
    if pred.ndim == 3 and sel.ndim == 2:
        sel = np.broadcast_to(sel[..., None], pred.shape)
    mse = float(np.mean((pred[sel] - target[sel]) ** 2))
    if mse <= 10 ** (-PSNR_CAP_DB / 10):
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))


def l1_hole(pred, target, mask) -> float:
    pred, target, mask = _to_numpy(pred), _to_numpy(target), _to_numpy(mask)
    sel = mask.astype(bool)
    if not sel.any():
        raise ValueError("mask is empty")
    if pred.ndim == 3 and sel.ndim == 2:
        sel = np.broadcast_to(sel[..., None], pred.shape)
    return float(np.mean(np.abs(pred[sel] - target[sel])))


def _ssim_map(a: np.ndarray, b: np.ndarray, win: int, data_range: float = 1.0) -> np.ndarray:
    """Single-channel SSIM map with uniform windows and the usual constants."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    k1, k2 = 0.01, 0.03
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    np_win = win * win
    cov_norm = np_win / (np_win - 1)

    ua = uniform_filter(a, size=win)
    ub = uniform_filter(b, size=win)
    uaa = uniform_filter(a * a, size=win)
    ubb = uniform_filter(b * b, size=win)
    uab = uniform_filter(a * b, size=win)
    va = cov_norm * (uaa - ua * ua)
    vb = cov_norm * (ubb - ub * ub)
    vab = cov_norm * (uab - ua * ub)
    return ((2 * ua * ub + c1) * (2 * vab + c2)) / ((ua**2 + ub**2 + c1) * (va + vb + c2))


def ssim_hole(pred, target, mask, win: int = 7) -> float:
    """Mean SSIM over windows with >= 50% hole coverage.

    With an all-ones mask this reduces to whole-image SSIM with uniform
    7x7 windows (the skimage default configuration).
    """
    pred, target, mask = _to_numpy(pred), _to_numpy(target), _to_numpy(mask)
    if not mask.astype(bool).any():
        raise ValueError("mask is empty")
    if pred.ndim == 2:
        pred = pred[..., None]
        target = target[..., None]
    coverage = uniform_filter(mask.astype(np.float64), size=win)
    pad = (win - 1) // 2
    keep = coverage[pad:-pad, pad:-pad] >= 0.5
    if not keep.any():
        raise ValueError("no SSIM window reaches 50% mask coverage")
    vals = []
    for c in range(pred.shape[2]):
        s = _ssim_map(pred[..., c], target[..., c], win)[pad:-pad, pad:-pad]
        vals.append(float(np.mean(s[keep])))
    return float(np.mean(vals))
