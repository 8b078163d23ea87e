"""Segmentation net: simplex outputs, roll equivariance, loss math, mIoU."""

import math

import numpy as np
import pytest
import torch

from panodr.geometry import roll_horizontal
from panodr.structure import (
    StructureNet,
    StructureNetConfig,
    layout_loss,
    layout_miou,
    probs_to_labels,
    structure_forward,
)


def _small_net(depth=2, base=8):
    torch.manual_seed(1)
    return StructureNet(StructureNetConfig(base_channels=base, depth=depth))


def test_output_is_simplex():
    net = _small_net()
    x = torch.randn(2, 4, 16, 32)
    probs = structure_forward(net, x)
    assert probs.shape == (2, 3, 16, 32)
    assert (probs >= 0).all()
    sums = probs.sum(dim=1)
    assert torch.max(torch.abs(sums - 1.0)).item() < 1e-5


def test_roll_equivariance_arbitrary_shift():
    net = _small_net()
    net.eval()
    x = torch.randn(1, 4, 16, 32)
    rng = np.random.default_rng(0)
    with torch.no_grad():
        base = structure_forward(net, x)
        for k in rng.integers(1, 32, size=6):
            rolled = structure_forward(net, roll_horizontal(x, int(k)))
            assert torch.max(torch.abs(rolled - roll_horizontal(base, int(k)))).item() < 1e-4


def test_shape_errors_name_dimension():
    net = _small_net(depth=3)
    with pytest.raises(ValueError, match="height"):
        structure_forward(net, torch.randn(1, 4, 12, 24))
    with pytest.raises(ValueError, match="B, 4"):
        structure_forward(net, torch.randn(1, 3, 16, 32))


# ---------------------------------------------------------------------------
# loss


def test_layout_loss_perfect_prediction():
    gt = torch.randint(0, 3, (2, 8, 16))
    probs = torch.nn.functional.one_hot(gt, 3).permute(0, 3, 1, 2).double()
    assert layout_loss(probs, gt).item() <= 1e-6


def test_layout_loss_uniform_is_ln3():
    gt = torch.randint(0, 3, (1, 8, 16))
    probs = torch.full((1, 3, 8, 16), 1.0 / 3.0)
    assert layout_loss(probs, gt).item() == pytest.approx(math.log(3.0), rel=1e-6)


def test_layout_loss_permutation_consistent():
    torch.manual_seed(0)
    probs = torch.softmax(torch.randn(1, 3, 8, 16), dim=1)
    gt = torch.randint(0, 3, (1, 8, 16))
    perm = [2, 0, 1]
    probs_p = probs[:, perm]
    # relabel gt so that probs_p gathers the same values: inv[old] = new
    inv = torch.empty(3, dtype=torch.long)
    for new, old in enumerate(perm):
        inv[old] = new
    gt_p = inv[gt]
    assert layout_loss(probs_p, gt_p).item() == pytest.approx(layout_loss(probs, gt).item(), rel=1e-7)


def _central_diff_grad(f, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Independent finite-difference gradient, one coordinate at a time."""
    g = torch.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        fp = f(x).item()
        flat[i] = orig - h
        fm = f(x).item()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def test_layout_loss_gradient_matches_finite_differences():
    torch.manual_seed(0)
    gt = torch.randint(0, 3, (1, 4, 8))
    probs = torch.softmax(torch.randn(1, 3, 4, 8, dtype=torch.float64), dim=1)
    probs.requires_grad_(True)
    loss = layout_loss(probs, gt)
    loss.backward()
    fd = _central_diff_grad(lambda p: layout_loss(p, gt), probs.detach().clone())
    denom = torch.maximum(torch.abs(fd), torch.tensor(1e-8))
    rel = torch.abs(probs.grad - fd) / denom
    # only positions with nonzero gradient are informative
    assert rel[fd != 0].max().item() < 1e-3


# ---------------------------------------------------------------------------
# mIoU


def test_miou_perfect():
    gt = np.random.default_rng(0).integers(0, 3, size=(16, 32))
    assert layout_miou(gt, gt) == pytest.approx(1.0)


def test_miou_closed_form_half_wall():
    gt = np.ones((4, 8), dtype=np.int64)
    gt[2:] = 2  # bottom half floor
    pred = np.ones_like(gt)  # all wall
    assert layout_miou(pred, gt) == pytest.approx(0.25)


def test_miou_counting_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pred = rng.integers(0, 3, size=(16, 32))
        gt = rng.integers(0, 3, size=(16, 32))
        expected = []
        for c in range(3):
            inter = sum(1 for p, g in zip(pred.ravel(), gt.ravel()) if p == c and g == c)
            union = sum(1 for p, g in zip(pred.ravel(), gt.ravel()) if p == c or g == c)
            if union:
                expected.append(inter / union)
        assert layout_miou(pred, gt) == pytest.approx(float(np.mean(expected)))


def test_miou_region_restriction():
    gt = np.zeros((4, 8), dtype=np.int64)
    pred = np.zeros_like(gt)
    pred[0, 0] = 1  # wrong only outside region
    region = np.zeros_like(gt)
    region[2:] = 1
    assert layout_miou(pred, gt, region=region) == pytest.approx(1.0)


def test_miou_empty_region_raises():
    gt = np.zeros((4, 8), dtype=np.int64)
    with pytest.raises(ValueError, match="empty region"):
        layout_miou(gt, gt, region=np.zeros_like(gt))


def test_probs_to_labels():
    probs = torch.tensor([[[[0.1]], [[0.7]], [[0.2]]]])
    assert probs_to_labels(probs).item() == 1
