#!/usr/bin/env python3
"""End-to-end diminishment on a toy scene.

Trains both stages briefly (a few minutes on CPU), removes an object from a
held-out panorama, and writes a before/after/empty comparison sheet. For a
better-quality model simply raise `steps`.
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from panodr.dataset import load_dataset, synth_dataset
from panodr.generator import composite_uint8
from panodr.losses import freeze_structure_net, psnr_hole
from panodr.training import (
    TrainConfig,
    load_generator_checkpoint,
    load_structure_checkpoint,
    train,
)

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
data_dir = out_dir / "toy_data_dr"
if not data_dir.exists():
    synth_dataset(data_dir, count=80, height=64, seed=2)

common = dict(
    data_dir=str(data_dir),
    height=64,
    eval_every=100,
    eval_max_samples=8,
    structure_base_channels=16,
    gen_base_channels=16,
    style_dim=32,
    disc_base_channels=16,
    seed=0,
)

s_ckpt_path = out_dir / "dr_ckpt" / "structure.pt"
if not s_ckpt_path.exists():
    s_ckpt_path, _ = train(
        TrainConfig(stage="structure", batch_size=8, steps=300, target_metric=0.9,
                    ckpt_dir=str(out_dir / "dr_ckpt"), **common)
    )

g_ckpt_path = out_dir / "dr_ckpt" / "generator.pt"
if not g_ckpt_path.exists():
    g_ckpt_path, log = train(
        TrainConfig(stage="generator", batch_size=4, steps=400,
                    structure_ckpt=str(s_ckpt_path), ckpt_dir=str(out_dir / "dr_ckpt"), **common)
    )
    print("hole PSNR during training:", [round(e["metrics"]["psnr_hole"], 2) for e in log.evals])

g_net, _ = load_generator_checkpoint(g_ckpt_path)
s_net, _ = load_structure_checkpoint(s_ckpt_path)
g_net.eval()
freeze_structure_net(s_net)

sample = load_dataset(data_dir)[-1]
pano_u8 = (sample.furnished * 255).astype(np.uint8)
maskf = sample.mask.astype(np.float32)
x = np.concatenate(
    [sample.furnished.transpose(2, 0, 1) * (1 - maskf[None]), maskf[None]], axis=0
)
with torch.no_grad():
    layout = s_net(torch.from_numpy(x)[None])
    raw = g_net(torch.from_numpy(x)[None], layout)
raw_u8 = np.round(raw[0].numpy().transpose(1, 2, 0) * 255).astype(np.uint8)
result = composite_uint8(pano_u8, raw_u8, sample.mask)

print(f"\nscene {sample.scene_id}")
print(f"hole PSNR vs true empty render: {psnr_hole(result / 255.0, sample.empty, sample.mask):.2f} dB")

highlighted = pano_u8.copy()
highlighted[sample.mask == 1, 0] = 255  # paint the mask red for display
sheet = np.concatenate([highlighted, result, (sample.empty * 255).astype(np.uint8)], axis=0)
Image.fromarray(sheet).save(out_dir / "diminish_before_after.png")
print(f"wrote {out_dir}/diminish_before_after.png (masked input / our result / true empty)")
