"""Command-line entry points.

Three programs ship with the package:

* ``pano``    - pure geometry utilities (perspective extraction).
* ``drdata``  - dataset synthesis, ingestion, validation.
* ``panodr``  - training, evaluation, inference, comparison, serving.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np
from PIL import Image


def _load_rgb(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def _save_rgb(arr: np.ndarray, path) -> None:
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="RGB").save(path)


# ---------------------------------------------------------------------------
# pano


@click.group()
def pano():
    """Equirectangular panorama geometry tools."""


@pano.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True), help="input 2:1 panorama PNG")
@click.option("--lon", type=float, required=True, help="view center longitude (radians)")
@click.option("--lat", type=float, required=True, help="view center latitude (radians)")
@click.option("--fov", type=float, default=90.0, show_default=True, help="horizontal FOV (degrees)")
@click.option("--size", default="640x480", show_default=True, help="output WxH in pixels")
@click.option("--out", "out_path", required=True, type=click.Path(), help="output PNG")
def perspective(in_path, lon, lat, fov, size, out_path):
    """Extract a rectilinear perspective view from a panorama."""
    from .geometry import SphericalCoord, ViewSpec, gnomonic_project

    w, h = (int(v) for v in size.lower().split("x"))
    pano_img = _load_rgb(in_path)
    view = ViewSpec(SphericalCoord(lon, lat), fov, w, h)
    _save_rgb(gnomonic_project(pano_img, view), out_path)
    click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------------------
# drdata


@click.group()
def drdata():
    """Diminished-reality dataset tools."""


@drdata.command()
@click.option("--count", type=int, default=200, show_default=True)
@click.option("--height", "-H", "height", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dilate", type=int, default=2, show_default=True, help="object mask dilation in px")
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth(count, height, seed, dilate, out_dir):
    """Generate procedural cuboid-room samples."""
    from .dataset import synth_dataset

    dirs = synth_dataset(Path(out_dir), count=count, height=height, seed=seed, dilate_px=dilate)
    click.echo(f"wrote {len(dirs)} samples under {out_dir}")


@drdata.command()
@click.option("--structured3d", "src", required=True, type=click.Path(exists=True), help="root of scene directories")
@click.option("--height", "-H", "height", type=int, default=64, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def ingest(src, height, out_dir):
    """Ingest furnished/empty render pairs into sample directories."""
    from .dataset import ingest_structured3d

    report = ingest_structured3d(Path(src), Path(out_dir), height=height)
    click.echo(json.dumps(report, indent=2))
    if report["errors"]:
        raise SystemExit(1)


@drdata.command()
@click.argument("data_dir", type=click.Path(exists=True))
def validate(data_dir):
    """Check every sample in a dataset directory against the invariants."""
    from .dataset import validate_dataset

    report = validate_dataset(Path(data_dir))
    click.echo(json.dumps(report, indent=2))
    if report["errors"]:
        raise SystemExit(1)


# ---------------------------------------------------------------------------
# panodr


@click.group()
def panodr():
    """Train, evaluate, and serve the diminished-reality pipeline."""


def _config_from_file(path) -> "TrainConfig":
    from .training import TrainConfig

    return TrainConfig.from_json(Path(path).read_text())


@panodr.command("print-config")
def print_config():
    """Print the default training configuration as JSON."""
    from .training import TrainConfig

    click.echo(TrainConfig().to_json())


@panodr.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--log-out", type=click.Path(), default=None, help="where to write the run log JSON")
def train_cmd(config_path, log_out):
    """Run the stage named in the config (structure or generator)."""
    from .training import train

    cfg = _config_from_file(config_path)
    ckpt, log = train(cfg)
    if log_out:
        log.save(log_out)
    click.echo(f"checkpoint: {ckpt}")


@panodr.command("train-structure")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--log-out", type=click.Path(), default=None)
def train_structure_cmd(config_path, log_out):
    """Train the layout segmentation stage."""
    from .training import train_structure

    cfg = _config_from_file(config_path)
    cfg.stage = "structure"
    ckpt, log = train_structure(cfg)
    if log_out:
        log.save(log_out)
    click.echo(f"checkpoint: {ckpt}")


@panodr.command("eval-structure")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", default="val", show_default=True, type=click.Choice(["train", "val", "test"]))
def eval_structure_cmd(ckpt, data_dir, split):
    """Report layout mIoU of a structure checkpoint on a split."""
    from .structure import layout_miou, probs_to_labels
    from .training import load_splits, load_structure_checkpoint, samples_to_tensors

    net, meta = load_structure_checkpoint(ckpt)
    net.eval()
    import torch

    splits = dict(zip(("train", "val", "test"), load_splits(data_dir, meta["config"]["height"])))
    chosen = splits[split]
    if not chosen:
        raise click.ClickException(f"split '{split}' is empty")
    vals = []
    with torch.no_grad():
        for s in chosen:
            t = samples_to_tensors([s])
            pred = probs_to_labels(net(t["x"]))[0].numpy()
            vals.append(layout_miou(pred, s.layout))
    click.echo(json.dumps({"split": split, "samples": len(vals), "miou": float(np.mean(vals))}))


@panodr.command("eval")
@click.option("--ckpt-g", required=True, type=click.Path(exists=True))
@click.option("--ckpt-s", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", show_default=True, type=click.Choice(["train", "val", "test"]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--max-samples", type=int, default=None)
def eval_cmd(ckpt_g, ckpt_s, data_dir, split, out_path, max_samples):
    """Evaluate a checkpoint pair; writes per-sample + aggregate JSON lines."""
    from .losses import write_metrics_jsonl
    from .training import evaluate, load_checkpoint_meta

    height = load_checkpoint_meta(ckpt_g)["config"]["height"]
    reports, agg = evaluate(ckpt_g, ckpt_s, data_dir, split=split, height=height, max_samples=max_samples)
    write_metrics_jsonl(out_path, reports, agg)
    click.echo(json.dumps(asdict(agg)))


@panodr.command("compare")
@click.option("--log-a", required=True, type=click.Path(exists=True))
@click.option("--log-b", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=22.0, show_default=True, help="hole PSNR threshold (dB)")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
def compare_cmd(log_a, log_b, threshold, out_path, plot_path):
    """Steps-to-threshold comparison of two run logs on one eval grid."""
    from .training import RunLog, convergence_report

    report = convergence_report(
        RunLog.load(log_a), RunLog.load(log_b), threshold, out_json=out_path, out_plot=plot_path
    )
    click.echo(json.dumps({k: report[k] for k in ("steps_to_threshold_a", "steps_to_threshold_b")}))


@panodr.command("diminish")
@click.option("--pano", "pano_path", required=True, type=click.Path(exists=True))
@click.option("--mask", "mask_path", required=True, type=click.Path(exists=True))
@click.option("--ckpt-g", required=True, type=click.Path(exists=True))
@click.option("--ckpt-s", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--layout-out", type=click.Path(), default=None, help="optional layout label PNG")
def diminish_cmd(pano_path, mask_path, ckpt_g, ckpt_s, out_path, layout_out):
    """Remove the masked region from a panorama and fill the background."""
    import torch

    from .generator import composite_uint8
    from .losses import freeze_structure_net
    from .training import load_generator_checkpoint, load_structure_checkpoint

    pano = np.asarray(Image.open(pano_path).convert("RGB"), dtype=np.uint8)
    mask = (np.asarray(Image.open(mask_path).convert("L")) >= 128).astype(np.uint8)
    if pano.shape[1] != 2 * pano.shape[0]:
        raise click.ClickException("panorama must be 2:1 equirectangular")
    if mask.shape != pano.shape[:2]:
        raise click.ClickException("mask size must match panorama size")

    g_net, _ = load_generator_checkpoint(ckpt_g)
    s_net, _ = load_structure_checkpoint(ckpt_s)
    g_net.eval()
    freeze_structure_net(s_net)

    rgb = pano.astype(np.float32) / 255.0
    maskf = mask.astype(np.float32)
    x = np.concatenate([rgb.transpose(2, 0, 1) * (1.0 - maskf[None]), maskf[None]], axis=0)
    xt = torch.from_numpy(x).unsqueeze(0)
    with torch.no_grad():
        layout = s_net(xt)
        raw = g_net(xt, layout)
    raw_u8 = np.round(raw[0].numpy().transpose(1, 2, 0) * 255.0).astype(np.uint8)
    Image.fromarray(composite_uint8(pano, raw_u8, mask)).save(out_path)
    if layout_out:
        labels = layout[0].argmax(dim=0).numpy().astype(np.uint8)
        Image.fromarray(labels, mode="L").save(layout_out)
    click.echo(f"wrote {out_path}")


@panodr.command("serve")
@click.option("--port", type=int, default=None, help="overrides PANODR_PORT")
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--ckpt-g", type=click.Path(exists=True), default=None, help="overrides PANODR_CKPT_G")
@click.option("--ckpt-s", type=click.Path(exists=True), default=None, help="overrides PANODR_CKPT_S")
def serve_cmd(port, host, ckpt_g, ckpt_s):
    """Run the HTTP inference service."""
    from .service import run_service

    run_service(host=host, port=port, ckpt_g=ckpt_g, ckpt_s=ckpt_s)
