#!/usr/bin/env python3
"""Tour of the supervision suite: what each loss term measures and how the
hole-restricted metrics behave."""

import numpy as np
import torch

from panodr.losses import (
    LossWeights,
    PatchDiscriminator,
    hinge_d_loss,
    hinge_g_loss,
    identity_extractor,
    perceptual_loss,
    psnr_hole,
    recon_loss,
    ssim_hole,
    structure_consistency_loss,
    freeze_structure_net,
)
from panodr.structure import StructureNet, StructureNetConfig

torch.manual_seed(0)

# Hinge adversarial losses: D wants real logits above +1 and fake below -1;
# G pushes fake logits up.
real, fake = torch.full((4,), 2.0), torch.full((4,), -2.0)
print(f"hinge D loss, well-separated logits: {hinge_d_loss(real, fake).item():.3f}")
print(f"hinge D loss, undecided (all zeros): {hinge_d_loss(torch.zeros(4), torch.zeros(4)).item():.3f}")
print(f"hinge G loss for fake logits [1, 3]: {hinge_g_loss(torch.tensor([1.0, 3.0])).item():.3f}")

# Weighted reconstruction: the hole counts 6x by default.
w = LossWeights()
pred = torch.zeros(1, 3, 2, 2)
target = torch.full((1, 3, 2, 2), 0.5)
mask = torch.tensor([[[[1.0, 1.0], [0.0, 0.0]]]])
print(f"\nrecon |diff|=0.5, half-hole mask, weights 6/1: {recon_loss(pred, target, mask, w).item():.4f}")

# The default perceptual extractor is a pooled pyramid, so no pretrained
# weights are ever required; an identity extractor degenerates to plain L1.
a, b = torch.rand(1, 3, 16, 16), torch.rand(1, 3, 16, 16)
print(f"perceptual (pyramid): {perceptual_loss(a, b).item():.4f}")
print(f"perceptual (identity) == L1: {perceptual_loss(a, b, identity_extractor).item():.4f} "
      f"vs {(a - b).abs().mean().item():.4f}")

# Structure consistency: a frozen segmenter scores the composited output;
# gradient reaches the image, never the critic.
critic = freeze_structure_net(StructureNet(StructureNetConfig(base_channels=8, depth=1)))
img = torch.rand(1, 3, 16, 32, requires_grad=True)
gt = torch.randint(0, 3, (1, 16, 32))
m = torch.ones(1, 1, 16, 32)
loss = structure_consistency_loss(img, critic, gt, m)
loss.backward()
print(f"\nstructure consistency: {loss.item():.4f}")
print(f"gradient on image: {img.grad.abs().sum().item():.4f}; "
      f"critic grads: {[p.grad for p in critic.parameters()] == [None] * len(list(critic.parameters()))}")

# Hole metrics only look inside the mask.
rng = np.random.default_rng(0)
x = rng.uniform(size=(64, 128, 3))
noisy = np.clip(x + rng.normal(scale=0.05, size=x.shape), 0, 1)
hole = np.zeros((64, 128))
hole[20:40, 30:90] = 1
print(f"\npsnr_hole(noisy): {psnr_hole(noisy, x, hole):.2f} dB  (perfect -> capped at 100)")
print(f"psnr_hole(perfect): {psnr_hole(x, x, hole):.2f} dB")
print(f"ssim_hole(noisy): {ssim_hole(noisy, x, hole):.4f}")

# A patch discriminator emits a logit map, not a single scalar.
d = PatchDiscriminator(base_channels=8, n_layers=3)
logits = d(torch.rand(1, 3, 64, 128))
print(f"\npatch logit map for a 64x128 input: {tuple(logits.shape)} (stride {d.total_stride})")
