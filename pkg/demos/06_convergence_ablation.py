#!/usr/bin/env python3
"""Does structure guidance help? Train the generator twice with identical
parameter counts: once with predicted layout, once with the layout input
flattened to uniform 1/3 maps, then compare convergence.

This is a scaled-down run (expect several minutes on CPU); the acceptance
suite repeats it over three seeds.
"""

from pathlib import Path

from panodr.training import RunLog, TrainConfig, convergence_report, train

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
data_dir = out_dir / "toy_data_dr"
if not data_dir.exists():
    from panodr.dataset import synth_dataset

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

s_ckpt = out_dir / "dr_ckpt" / "structure.pt"
if not s_ckpt.exists():
    s_ckpt, _ = train(
        TrainConfig(stage="structure", batch_size=8, steps=300, target_metric=0.9,
                    ckpt_dir=str(out_dir / "dr_ckpt"), **common)
    )

logs: dict[bool, RunLog] = {}
for ablate in (False, True):
    label = "ablated" if ablate else "guided"
    print(f"training {label} generator...")
    _, log = train(
        TrainConfig(
            stage="generator",
            batch_size=4,
            steps=400,
            structure_ckpt=str(s_ckpt),
            disable_structure_guidance=ablate,
            ckpt_dir=str(out_dir / f"abl_{label}"),
            **common,
        )
    )
    logs[ablate] = log
    for e in log.evals:
        m = e["metrics"]
        print(f"  step {e['step']:4d}  psnr {m['psnr_hole']:5.2f}  layout IoU {m['layout_iou_hole']:.3f}")

report = convergence_report(
    logs[False],
    logs[True],
    psnr_threshold=17.0,
    out_json=out_dir / "ablation.json",
    out_plot=out_dir / "ablation.png",
)
print(f"\nsteps to 17 dB: guided={report['steps_to_threshold_a']} ablated={report['steps_to_threshold_b']}")
print(f"wrote {out_dir}/ablation.json and ablation.png")
