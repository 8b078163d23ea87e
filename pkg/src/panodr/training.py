"""Two-stage training: segmentation first, then generator + discriminator
with a frozen structural critic.

Runs are reproducible from (config, seed): batch order comes from a seeded
generator, torch runs in deterministic mode, and the run log separates
metric content (compared bitwise by the determinism checks) from wall-clock
timestamps.  NaN anywhere aborts the run naming the offending term.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

log_ = logging.getLogger(__name__)

from .dataset import DRSample, load_dataset, make_model_input, split_dataset
from .generator import GeneratorConfig, PanoGenerator, composite, uniform_layout_like
from .losses import (
    LossWeights,
    MetricsReport,
    PatchDiscriminator,
    freeze_structure_net,
    hinge_d_loss,
    hinge_g_loss,
    l1_hole,
    perceptual_loss,
    psnr_hole,
    recon_loss,
    ssim_hole,
    structure_consistency_loss,
)
from .structure import (
    StructureNet,
    StructureNetConfig,
    layout_loss,
    layout_miou,
    probs_to_labels,
)

DEFAULT_SPLIT = (0.8, 0.1, 0.1)


@dataclass
class TrainConfig:
    stage: str = "structure"  # "structure" | "generator"
    data_dir: str = ""
    height: int = 64
    batch_size: int = 8
    steps: int = 500
    lr_g: float = 1e-4
    lr_d: float = 4e-4
    lr_s: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    eval_every: int = 100
    eval_max_samples: int = 24
    ckpt_dir: str = "checkpoints"
    structure_ckpt: str = ""
    disable_structure_guidance: bool = False
    joint_finetune: bool = False
    target_metric: float | None = None  # early stop once the val metric reaches this
    structure_base_channels: int = 24
    structure_depth: int = 2
    gen_base_channels: int = 24
    gen_depth: int = 2
    style_dim: int = 48
    disc_base_channels: int = 24
    disc_layers: int = 3

    def __post_init__(self):
        if self.stage not in ("structure", "generator"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))

    def fingerprint(self) -> str:
        """Hash of the semantically meaningful fields (output paths excluded)."""
        d = asdict(self)
        d.pop("ckpt_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def structure_config(self) -> StructureNetConfig:
        return StructureNetConfig(base_channels=self.structure_base_channels, depth=self.structure_depth)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            base_channels=self.gen_base_channels, depth=self.gen_depth, style_dim=self.style_dim
        )


@dataclass
class RunLog:
    config_fingerprint: str
    steps: list = field(default_factory=list)  # {"step": int, "losses": {name: float}}
    evals: list = field(default_factory=list)  # {"step": int, "metrics": {name: float}}
    timestamps: list = field(default_factory=list)

    def log_step(self, step: int, losses: dict) -> None:
        if self.steps and step <= self.steps[-1]["step"]:
            raise ValueError("step indices must increase")
        for name, v in losses.items():
            if not np.isfinite(v):
                raise RuntimeError(f"NaN/Inf in loss term '{name}' at step {step}")
        self.steps.append({"step": step, "losses": {k: float(v) for k, v in losses.items()}})
        self.timestamps.append(time.time())

    def log_eval(self, step: int, metrics: dict) -> None:
        self.evals.append({"step": step, "metrics": {k: float(v) for k, v in metrics.items()}})
        self.timestamps.append(time.time())

    def canonical_bytes(self) -> bytes:
        """Deterministic content only: steps, evals, config fingerprint."""
        payload = {
            "config_fingerprint": self.config_fingerprint,
            "steps": self.steps,
            "evals": self.evals,
        }
        return json.dumps(payload, sort_keys=True).encode()

    def save(self, path) -> None:
        payload = {
            "config_fingerprint": self.config_fingerprint,
            "steps": self.steps,
            "evals": self.evals,
            "timestamps": self.timestamps,
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path) -> "RunLog":
        d = json.loads(Path(path).read_text())
        return cls(
            config_fingerprint=d["config_fingerprint"],
            steps=d["steps"],
            evals=d["evals"],
            timestamps=d.get("timestamps", []),
        )


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, kind: str, model: torch.nn.Module, config: TrainConfig, step: int, metrics: dict | None = None) -> Path:
    """Write the parameter blob plus a JSON sidecar describing it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
    sidecar = {
        "kind": kind,
        "config": asdict(config),
        "step": step,
        "metrics": metrics or {},
        "fingerprint": digest,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_checkpoint_meta(path) -> dict:
    return json.loads(Path(path).with_suffix(".json").read_text())


def load_structure_checkpoint(path) -> tuple[StructureNet, dict]:
    meta = load_checkpoint_meta(path)
    cfg = TrainConfig(**meta["config"])
    net = StructureNet(cfg.structure_config())
    net.load_state_dict(torch.load(path, weights_only=True))
    return net, meta


def load_generator_checkpoint(path) -> tuple[PanoGenerator, dict]:
    meta = load_checkpoint_meta(path)
    cfg = TrainConfig(**meta["config"])
    net = PanoGenerator(cfg.generator_config())
    net.load_state_dict(torch.load(path, weights_only=True))
    return net, meta


# ---------------------------------------------------------------------------
# data plumbing


def samples_to_tensors(samples: list[DRSample]) -> dict[str, torch.Tensor]:
    """Stack samples into model-ready tensors (inputs, targets, masks, labels)."""
    xs, ts = [], []
    for s in samples:
        x, t = make_model_input(s)
        xs.append(x)
        ts.append(t)
    return {
        "x": torch.from_numpy(np.stack(xs)),
        "target": torch.from_numpy(np.stack(ts)),
        "mask": torch.from_numpy(np.stack([s.mask for s in samples])).float().unsqueeze(1),
        "layout": torch.from_numpy(np.stack([s.layout for s in samples])).long(),
        "furnished": torch.from_numpy(
            np.stack([s.furnished.transpose(2, 0, 1) for s in samples])
        ),
    }


def load_splits(data_dir, height: int):
    samples = load_dataset(data_dir)
    if not samples:
        raise FileNotFoundError(f"no samples found under {data_dir}")
    for s in samples:
        if s.height != height:
            raise ValueError(f"{s.scene_id}: height {s.height} != configured {height}")
    return split_dataset(samples, DEFAULT_SPLIT)


def _eval_subset(train_s, val_s, max_samples: int):
    if val_s:
        return val_s[:max_samples]
    log_.warning("validation split is empty; scoring a training subset instead")
    return train_s[:max_samples]


def _batches(n: int, batch_size: int, steps: int, rng: np.random.Generator):
    """Yield `steps` index batches, reshuffling each epoch."""
    produced = 0
    while produced < steps:
        order = rng.permutation(n)
        for i in range(0, n - batch_size + 1, batch_size):
            if produced >= steps:
                return
            yield order[i : i + batch_size]
            produced += 1
        if n < batch_size:
            yield rng.integers(0, n, size=batch_size)
            produced += 1


def _seed_all(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


# ---------------------------------------------------------------------------
# evaluation


def layout_labels_for(net: StructureNet, image: torch.Tensor) -> torch.Tensor:
    """Label a complete RGB panorama with the (frozen) segmentation net."""
    with torch.no_grad():
        probs = net(torch.cat([image, torch.zeros_like(image[:, :1])], dim=1))
    return probs_to_labels(probs)


def evaluate_models(
    g_net: PanoGenerator | None,
    s_net: StructureNet,
    samples: list[DRSample],
    disable_structure_guidance: bool = False,
    fill: str = "model",
) -> tuple[list[MetricsReport], MetricsReport]:
    """Metric sweep over samples; `fill="context_mean"` runs the baseline
    that floods the hole with the mean color of the unmasked context."""
    if not samples:
        raise ValueError("cannot evaluate an empty split")
    reports = []
    for s in samples:
        t = samples_to_tensors([s])
        if fill == "context_mean":
            ctx = s.furnished[s.mask == 0]
            raw = np.broadcast_to(ctx.mean(axis=0), s.furnished.shape).copy()
            comp_np = composite(s.furnished.astype(np.float64), raw, s.mask)
            comp = torch.from_numpy(comp_np.transpose(2, 0, 1)).float().unsqueeze(0)
        elif fill == "target":
            comp_np = composite(s.furnished.astype(np.float64), s.empty.astype(np.float64), s.mask)
            comp = torch.from_numpy(comp_np.transpose(2, 0, 1)).float().unsqueeze(0)
        else:
            with torch.no_grad():
                layout_in = s_net(t["x"])
                if disable_structure_guidance:
                    layout_in = uniform_layout_like(layout_in)
                raw = g_net(t["x"], layout_in)
                comp = composite(t["furnished"], raw, t["mask"])
            comp_np = comp[0].numpy().transpose(1, 2, 0)
        pred_labels = layout_labels_for(s_net, comp)[0].numpy()
        reports.append(
            MetricsReport(
                psnr_hole=psnr_hole(comp_np, s.empty, s.mask),
                ssim_hole=ssim_hole(comp_np, s.empty, s.mask),
                layout_iou_hole=layout_miou(pred_labels, s.layout, region=s.mask),
                l1_hole=l1_hole(comp_np, s.empty, s.mask),
            )
        )
    return reports, MetricsReport.aggregate(reports)


def evaluate(g_ckpt, s_ckpt, data_dir, split: str = "test", height: int = 64, max_samples: int | None = None):
    """CLI-facing evaluation of a checkpoint pair over a dataset split."""
    g_net, _ = load_generator_checkpoint(g_ckpt)
    s_net, _ = load_structure_checkpoint(s_ckpt)
    g_net.eval()
    freeze_structure_net(s_net)
    train, val, test = load_splits(data_dir, height)
    chosen = {"train": train, "val": val, "test": test}[split]
    if max_samples:
        chosen = chosen[:max_samples]
    return evaluate_models(g_net, s_net, chosen)


# ---------------------------------------------------------------------------
# training stages


def train(config: TrainConfig):
    """Run one training stage; returns (checkpoint path, RunLog)."""
    if config.stage == "structure":
        return train_structure(config)
    return train_generator(config)


def train_structure(cfg: TrainConfig):
    _seed_all(cfg.seed)
    train_s, val_s, _ = load_splits(cfg.data_dir, cfg.height)
    data = samples_to_tensors(train_s)
    val_subset = _eval_subset(train_s, val_s, cfg.eval_max_samples)

    net = StructureNet(cfg.structure_config())
    opt = torch.optim.Adam(
        net.parameters(), lr=cfg.lr_s, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps
    )
    log = RunLog(config_fingerprint=cfg.fingerprint())
    rng = np.random.default_rng(cfg.seed)
    ckpt = Path(cfg.ckpt_dir) / "structure.pt"

    step = 0
    for idx in _batches(len(train_s), cfg.batch_size, cfg.steps, rng):
        step += 1
        batch = torch.from_numpy(idx)
        probs = net(data["x"][batch])
        loss = layout_loss(probs, data["layout"][batch])
        opt.zero_grad()
        loss.backward()
        opt.step()
        log.log_step(step, {"layout_ce": loss.item()})

        if step % cfg.eval_every == 0 or step == cfg.steps:
            miou = _structure_val_miou(net, val_subset)
            log.log_eval(step, {"val_miou": miou})
            save_checkpoint(ckpt, "structure", net, cfg, step, {"val_miou": miou})
            if cfg.target_metric is not None and miou >= cfg.target_metric:
                break
    if not ckpt.exists():
        save_checkpoint(ckpt, "structure", net, cfg, step, {})
    return ckpt, log


def _structure_val_miou(net: StructureNet, samples: list[DRSample]) -> float:
    if not samples:
        return float("nan")
    net.eval()
    vals = []
    with torch.no_grad():
        for s in samples:
            t = samples_to_tensors([s])
            pred = probs_to_labels(net(t["x"]))[0].numpy()
            vals.append(layout_miou(pred, s.layout))
    net.train()
    return float(np.mean(vals))


def train_generator(cfg: TrainConfig):
    _seed_all(cfg.seed)
    if not cfg.structure_ckpt:
        raise ValueError("generator stage requires structure_ckpt")
    s_net, s_meta = load_structure_checkpoint(cfg.structure_ckpt)
    if s_meta["kind"] != "structure":
        raise ValueError(f"{cfg.structure_ckpt} is not a structure checkpoint")
    freeze_structure_net(s_net)

    guidance_net = s_net
    extra_params = []
    if cfg.joint_finetune:
        # separate trainable copy for guidance; the critic copy stays frozen
        guidance_net = StructureNet(cfg.structure_config())
        guidance_net.load_state_dict(s_net.state_dict())
        extra_params = list(guidance_net.parameters())

    train_s, val_s, _ = load_splits(cfg.data_dir, cfg.height)
    data = samples_to_tensors(train_s)
    val_subset = _eval_subset(train_s, val_s, cfg.eval_max_samples)

    g_net = PanoGenerator(cfg.generator_config())
    d_net = PatchDiscriminator(base_channels=cfg.disc_base_channels, n_layers=cfg.disc_layers)
    opt_g = torch.optim.Adam(
        list(g_net.parameters()) + extra_params,
        lr=cfg.lr_g,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.adam_eps,
    )
    opt_d = torch.optim.Adam(
        d_net.parameters(), lr=cfg.lr_d, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps
    )

    log = RunLog(config_fingerprint=cfg.fingerprint())
    rng = np.random.default_rng(cfg.seed)
    ckpt = Path(cfg.ckpt_dir) / "generator.pt"
    w = cfg.weights

    step = 0
    for idx in _batches(len(train_s), cfg.batch_size, cfg.steps, rng):
        step += 1
        batch = torch.from_numpy(idx)
        x = data["x"][batch]
        target = data["target"][batch]
        mask = data["mask"][batch]
        furnished = data["furnished"][batch]
        gt_layout = data["layout"][batch]

        if cfg.disable_structure_guidance:
            layout_in = torch.full((x.shape[0], 3, x.shape[2], x.shape[3]), 1.0 / 3.0)
        elif cfg.joint_finetune:
            layout_in = guidance_net(x)
        else:
            with torch.no_grad():
                layout_in = guidance_net(x)

        raw = g_net(x, layout_in)
        comp = composite(furnished, raw, mask)

        # one discriminator step
        d_real = d_net(target)
        d_fake = d_net(comp.detach())
        loss_d = hinge_d_loss(d_real, d_fake)
        opt_d.zero_grad()
        loss_d.backward()
        opt_d.step()

        # one generator step
        adv = hinge_g_loss(d_net(comp))
        rec = recon_loss(raw, target, mask, w)
        perc = perceptual_loss(comp, target)
        struct = structure_consistency_loss(comp, s_net, gt_layout, mask)
        loss_g = w.w_adv * adv + rec + w.w_perc * perc + w.w_struct * struct
        if cfg.joint_finetune:
            loss_g = loss_g + layout_loss(layout_in, gt_layout)
        opt_g.zero_grad()
        loss_g.backward()
        opt_g.step()

        log.log_step(
            step,
            {
                "d": loss_d.item(),
                "g_adv": adv.item(),
                "g_rec": rec.item(),
                "g_perc": perc.item(),
                "g_struct": struct.item(),
                "g_total": loss_g.item(),
            },
        )

        if step % cfg.eval_every == 0 or step == cfg.steps:
            g_net.eval()
            _, agg = evaluate_models(
                g_net, s_net, val_subset, disable_structure_guidance=cfg.disable_structure_guidance
            )
            g_net.train()
            log.log_eval(step, asdict(agg))
            save_checkpoint(ckpt, "generator", g_net, cfg, step, asdict(agg))
            if cfg.target_metric is not None and agg.psnr_hole >= cfg.target_metric:
                break
    if not ckpt.exists():
        save_checkpoint(ckpt, "generator", g_net, cfg, step, {})
    return ckpt, log


# ---------------------------------------------------------------------------
# convergence comparison


def steps_to_threshold(log: RunLog, threshold_db: float):
    for e in log.evals:
        if e["metrics"].get("psnr_hole", -np.inf) >= threshold_db:
            return e["step"]
    return None  # never reached


def convergence_report(log_a: RunLog, log_b: RunLog, psnr_threshold: float, out_json=None, out_plot=None) -> dict:
    """Compare two runs on an identical eval grid: steps to the PSNR
    threshold (None if never reached) plus per-eval metric deltas."""
    grid_a = [e["step"] for e in log_a.evals]
    grid_b = [e["step"] for e in log_b.evals]
    if grid_a != grid_b:
        raise ValueError(f"eval grids differ: {grid_a} vs {grid_b}")
    report = {
        "threshold_db": psnr_threshold,
        "steps_to_threshold_a": steps_to_threshold(log_a, psnr_threshold),
        "steps_to_threshold_b": steps_to_threshold(log_b, psnr_threshold),
        "deltas": [
            {
                "step": ea["step"],
                **{
                    f"{k}_delta": ea["metrics"][k] - eb["metrics"][k]
                    for k in ea["metrics"]
                    if k in eb["metrics"]
                },
            }
            for ea, eb in zip(log_a.evals, log_b.evals)
        ],
    }
    if out_json:
        Path(out_json).write_text(json.dumps(report, indent=2))
    if out_plot:
        _plot_convergence(log_a, log_b, psnr_threshold, out_plot)
    return report


def _plot_convergence(log_a: RunLog, log_b: RunLog, threshold: float, out_path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for log, label in ((log_a, "run A"), (log_b, "run B")):
        xs = [e["step"] for e in log.evals]
        ys = [e["metrics"].get("psnr_hole", np.nan) for e in log.evals]
        ax.plot(xs, ys, marker="o", label=label)
    ax.axhline(threshold, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("hole PSNR (dB)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
