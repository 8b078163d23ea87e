"""Loss suite: closed forms, finite-difference gradients, frozen-critic
gradient isolation, and metric agreement with reference implementations."""

import numpy as np
import pytest
import torch
from skimage.metrics import structural_similarity

from panodr.generator import composite
from panodr.geometry import roll_horizontal
from panodr.losses import (
    LossWeights,
    MetricsReport,
    PatchDiscriminator,
    disc_forward,
    hinge_d_loss,
    hinge_g_loss,
    identity_extractor,
    l1_hole,
    perceptual_loss,
    psnr_hole,
    pyramid_extractor,
    recon_loss,
    ssim_hole,
    structure_consistency_loss,
    freeze_structure_net,
)
from panodr.structure import StructureNet, StructureNetConfig


def _fd_grad(f, x, h=1e-6):
    g = torch.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        fp = f().item()
        flat[i] = orig - h
        fm = f().item()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def _assert_grad_close(analytic, numeric, tol=1e-3):
    rel = (analytic - numeric).abs() / numeric.abs().clamp_min(1e-6)
    assert rel.max().item() < tol


# ---------------------------------------------------------------------------
# discriminator


def test_disc_roll_equivariance_multiples_of_stride():
    torch.manual_seed(0)
    d = PatchDiscriminator(base_channels=8, n_layers=2)
    d.eval()
    x = torch.randn(1, 3, 16, 32)
    with torch.no_grad():
        base = disc_forward(d, x)
        for k in (4, 8, 20, 28):
            rolled = disc_forward(d, roll_horizontal(x, k))
            assert torch.max(torch.abs(rolled - roll_horizontal(base, k // d.total_stride))).item() < 1e-4


def test_disc_finite_over_seeds():
    for seed in range(100):
        torch.manual_seed(seed)
        d = PatchDiscriminator(base_channels=4, n_layers=2)
        out = disc_forward(d, torch.randn(1, 3, 8, 16) * 5)
        assert torch.isfinite(out).all()


def test_disc_fully_convolutional_width_scaling():
    torch.manual_seed(0)
    d = PatchDiscriminator(base_channels=4, n_layers=3)
    a = disc_forward(d, torch.randn(1, 3, 32, 64))
    b = disc_forward(d, torch.randn(1, 3, 32, 128))
    assert b.shape[-1] == 2 * a.shape[-1]
    assert b.shape[-2] == a.shape[-2]


# ---------------------------------------------------------------------------
# hinge losses


def test_hinge_d_saturated():
    real = torch.full((4,), 2.0)
    fake = torch.full((4,), -2.0)
    assert hinge_d_loss(real, fake).item() == 0.0


def test_hinge_d_at_zero():
    z = torch.zeros(5)
    assert hinge_d_loss(z, z).item() == pytest.approx(2.0)


def test_hinge_d_gradient():
    torch.manual_seed(1)
    real = torch.randn(8, dtype=torch.float64, requires_grad=True)
    fake = torch.randn(8, dtype=torch.float64, requires_grad=True)
    loss = hinge_d_loss(real, fake)
    loss.backward()
    r = real.detach().clone()
    fk = fake.detach().clone()
    fd_r = _fd_grad(lambda: hinge_d_loss(r, fk), r)
    fd_f = _fd_grad(lambda: hinge_d_loss(r, fk), fk)
    nz = fd_r != 0
    _assert_grad_close(real.grad[nz], fd_r[nz])
    nz = fd_f != 0
    _assert_grad_close(fake.grad[nz], fd_f[nz])


def test_hinge_g_closed_forms():
    assert hinge_g_loss(torch.tensor([1.0, 3.0])).item() == pytest.approx(-2.0)
    assert hinge_g_loss(torch.zeros(7)).item() == 0.0


def test_hinge_g_gradient_is_uniform():
    fake = torch.randn(6, requires_grad=True)
    hinge_g_loss(fake).backward()
    assert torch.allclose(fake.grad, torch.full((6,), -1.0 / 6.0))


# ---------------------------------------------------------------------------
# reconstruction


def test_recon_zero_when_equal():
    x = torch.rand(1, 3, 4, 8)
    m = torch.ones(1, 1, 4, 8)
    assert recon_loss(x, x, m, LossWeights()).item() == 0.0


def test_recon_closed_form():
    pred = torch.zeros(1, 3, 2, 2)
    target = torch.full((1, 3, 2, 2), 0.5)
    mask = torch.tensor([[[[1.0, 1.0], [0.0, 0.0]]]])
    w = LossWeights(w_rec_hole=6.0, w_rec_valid=1.0)
    assert recon_loss(pred, target, mask, w).item() == pytest.approx(1.75)


def test_recon_gradient():
    torch.manual_seed(2)
    pred = torch.randn(1, 2, 3, 4, dtype=torch.float64, requires_grad=True)
    target = torch.randn(1, 2, 3, 4, dtype=torch.float64)
    mask = (torch.rand(1, 1, 3, 4) > 0.5).double()
    w = LossWeights()
    recon_loss(pred, target, mask, w).backward()
    p = pred.detach().clone()
    fd = _fd_grad(lambda: recon_loss(p, target, mask, w), p)
    _assert_grad_close(pred.grad, fd)


# ---------------------------------------------------------------------------
# perceptual


def test_perceptual_zero_when_equal():
    x = torch.rand(1, 3, 8, 8)
    assert perceptual_loss(x, x).item() == 0.0
    assert perceptual_loss(x, x, identity_extractor).item() == 0.0


def test_perceptual_identity_is_l1():
    a = torch.rand(1, 3, 8, 8)
    b = torch.rand(1, 3, 8, 8)
    assert perceptual_loss(a, b, identity_extractor).item() == pytest.approx(
        (a - b).abs().mean().item()
    )


def test_perceptual_pyramid_hand_computed():
    pred = torch.zeros(1, 1, 4, 4)
    target = torch.zeros(1, 1, 4, 4)
    target[0, 0, 0, 0] = 1.0
    # levels: mean|D| = 1/16; 2x2 pooled: mean = 1/16; 1x1 pooled: 1/16
    assert perceptual_loss(pred, target, pyramid_extractor).item() == pytest.approx(3 / 16)


def test_perceptual_rejects_nonfinite_extractor():
    def bad(x):
        return [x * float("nan")]

    with pytest.raises(ValueError, match="non-finite"):
        perceptual_loss(torch.rand(1, 1, 4, 4), torch.rand(1, 1, 4, 4), bad)


# ---------------------------------------------------------------------------
# structure consistency


class _OneHotCritic(torch.nn.Module):
    """Stub critic that always answers the requested one-hot layout."""

    def __init__(self, layout):
        super().__init__()
        self.probs = torch.nn.functional.one_hot(layout.long(), 3).permute(0, 3, 1, 2).float()

    def forward(self, x):
        return self.probs


def test_struct_loss_zero_for_perfect_critic():
    gt = torch.randint(0, 3, (1, 8, 16))
    critic = _OneHotCritic(gt)
    pred = torch.rand(1, 3, 8, 16)
    mask = torch.ones(1, 1, 8, 16)
    assert structure_consistency_loss(pred, critic, gt, mask).item() <= 1e-6


def test_struct_loss_empty_mask_is_zero():
    net = StructureNet(StructureNetConfig(base_channels=4, depth=1))
    pred = torch.rand(1, 3, 8, 16, requires_grad=True)
    gt = torch.randint(0, 3, (1, 8, 16))
    loss = structure_consistency_loss(pred, net, gt, torch.zeros(1, 1, 8, 16))
    assert loss.item() == 0.0


def test_struct_loss_gradient_reaches_pred_not_critic():
    torch.manual_seed(3)
    net = freeze_structure_net(StructureNet(StructureNetConfig(base_channels=4, depth=1)))
    pred = torch.rand(1, 3, 8, 16, requires_grad=True)
    gt = torch.randint(0, 3, (1, 8, 16))
    mask = torch.ones(1, 1, 8, 16)
    loss = structure_consistency_loss(pred, net, gt, mask)
    loss.backward()
    assert pred.grad is not None and pred.grad.abs().sum() > 0
    for p in net.parameters():
        assert p.grad is None


def test_struct_loss_mask_restriction():
    gt = torch.zeros(1, 4, 8).long()
    critic_gt = gt.clone()
    critic_gt[0, :, 4:] = 2  # critic wrong on right half
    critic = _OneHotCritic(critic_gt)
    pred = torch.rand(1, 3, 4, 8)
    left = torch.zeros(1, 1, 4, 8)
    left[..., :4] = 1.0
    assert structure_consistency_loss(pred, critic, gt, left).item() <= 1e-6
    right = 1.0 - left
    assert structure_consistency_loss(pred, critic, gt, right).item() > 1.0


# ---------------------------------------------------------------------------
# metrics


def test_psnr_perfect_is_capped():
    x = np.random.default_rng(0).uniform(size=(8, 16, 3))
    m = np.ones((8, 16))
    assert psnr_hole(x, x, m) == 100.0


def test_psnr_closed_form():
    pred = np.zeros((4, 8, 3))
    target = np.full((4, 8, 3), 0.1)  # mse = 0.01
    assert psnr_hole(pred, target, np.ones((4, 8))) == pytest.approx(20.0)


def test_psnr_matches_whole_image_reference():
    rng = np.random.default_rng(1)
    pred = rng.uniform(size=(8, 16, 3))
    target = rng.uniform(size=(8, 16, 3))
    ref = 10 * np.log10(1.0 / np.mean((pred - target) ** 2))
    assert psnr_hole(pred, target, np.ones((8, 16))) == pytest.approx(ref)


def test_psnr_empty_mask_errors():
    x = np.zeros((4, 8, 3))
    with pytest.raises(ValueError, match="empty"):
        psnr_hole(x, x, np.zeros((4, 8)))


def test_ssim_perfect():
    x = np.random.default_rng(2).uniform(size=(16, 32, 3))
    assert ssim_hole(x, x, np.ones((16, 32))) == pytest.approx(1.0)


def test_ssim_matches_skimage_on_full_mask():
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(24, 48, 3))
    b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
    ours = ssim_hole(a, b, np.ones((24, 48)))
    ref = structural_similarity(a, b, win_size=7, data_range=1.0, channel_axis=-1)
    assert ours == pytest.approx(ref, abs=1e-7)


def test_ssim_window_coverage_restriction():
    rng = np.random.default_rng(4)
    a = rng.uniform(size=(16, 32))
    b = rng.uniform(size=(16, 32))
    mask = np.zeros((16, 32))
    mask[4:12, 8:24] = 1
    val = ssim_hole(a, b, mask)
    assert -1.0 <= val <= 1.0
    with pytest.raises(ValueError, match="coverage"):
        tiny = np.zeros((16, 32))
        tiny[8, 8] = 1
        ssim_hole(a, b, tiny)


def test_l1_hole_restricts_to_mask():
    pred = np.zeros((4, 8, 3))
    target = np.ones((4, 8, 3))
    mask = np.zeros((4, 8))
    mask[:2] = 1
    assert l1_hole(pred, target, mask) == pytest.approx(1.0)


def test_metrics_aggregate_is_mean():
    reports = [
        MetricsReport(psnr_hole=20.0, ssim_hole=0.5, layout_iou_hole=0.8, l1_hole=0.1),
        MetricsReport(psnr_hole=30.0, ssim_hole=0.7, layout_iou_hole=0.6, l1_hole=0.3),
    ]
    agg = MetricsReport.aggregate(reports)
    assert agg.psnr_hole == pytest.approx(25.0)
    assert agg.ssim_hole == pytest.approx(0.6)
    assert agg.layout_iou_hole == pytest.approx(0.7)
    assert agg.l1_hole == pytest.approx(0.2)


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(w_adv=-0.1)
    with pytest.raises(ValueError):
        LossWeights(w_adv=0, w_rec_hole=0, w_rec_valid=0, w_perc=0, w_struct=0)


def test_weight_zero_removes_gradient_contribution():
    torch.manual_seed(5)
    pred = torch.rand(1, 3, 8, 16, dtype=torch.float64, requires_grad=True)
    target = torch.rand(1, 3, 8, 16, dtype=torch.float64)
    mask = torch.ones(1, 1, 8, 16, dtype=torch.float64)
    w = LossWeights(w_rec_hole=1.0, w_rec_valid=0.0, w_perc=0.0)
    total = recon_loss(pred, target, mask, w) + w.w_perc * perceptual_loss(pred, target)
    total.backward()
    g_with_zero_weight = pred.grad.clone()
    pred.grad = None
    recon_loss(pred, target, mask, w).backward()
    assert torch.equal(pred.grad, g_with_zero_weight)
