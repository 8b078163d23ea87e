#!/usr/bin/env python3
"""Train the layout segmenter on toy rooms and inspect its predictions.

Takes about a minute on CPU; reaches ~0.9 mIoU on held-out scenes.
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from panodr.dataset import load_dataset, synth_dataset
from panodr.structure import layout_miou, probs_to_labels
from panodr.training import TrainConfig, load_structure_checkpoint, samples_to_tensors, train

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
data_dir = out_dir / "toy_data_seg"
if not data_dir.exists():
    synth_dataset(data_dir, count=60, height=64, seed=1)

cfg = TrainConfig(
    stage="structure",
    data_dir=str(data_dir),
    height=64,
    batch_size=8,
    steps=300,
    eval_every=100,
    eval_max_samples=8,
    target_metric=0.90,
    structure_base_channels=16,
    ckpt_dir=str(out_dir / "seg_ckpt"),
    seed=0,
)
ckpt, log = train(cfg)
for e in log.evals:
    print(f"step {e['step']:4d}  val mIoU {e['metrics']['val_miou']:.4f}")

net, _ = load_structure_checkpoint(ckpt)
net.eval()

sample = load_dataset(data_dir)[0]
t = samples_to_tensors([sample])
with torch.no_grad():
    probs = net(t["x"])
pred = probs_to_labels(probs)[0].numpy()
print(f"\nsample {sample.scene_id}: mIoU vs ground truth = {layout_miou(pred, sample.layout):.4f}")

# sanity: a straight-up pixel should be ceiling with high confidence
top_prob = probs[0, :, 0, 0]
print(f"zenith pixel class probs (ceiling, wall, floor): {top_prob.numpy().round(3)}")

colors = np.array([[70, 120, 220], [160, 160, 160], [80, 180, 90]], dtype=np.uint8)
panel = np.concatenate([colors[pred], colors[sample.layout]], axis=0)
Image.fromarray(panel).save(out_dir / "segmentation_pred_vs_gt.png")
print(f"wrote {out_dir}/segmentation_pred_vs_gt.png (prediction on top, ground truth below)")
