"""Diminished-reality training data.

Two sources produce the same sample type:

* :func:`synth_room` ray-traces procedural cuboid rooms into paired
  furnished/empty panoramas with exact layout labels and object masks, so
  the whole pipeline trains and tests without downloading anything.
* :func:`load_structured3d_pair` ingests pre-rendered furnished/empty
  panorama pairs with instance and layout annotations from disk.

A sample bundles the furnished panorama (input side), the empty panorama
(reconstruction target), the binary region to diminish, and dense
ceiling/wall/floor labels.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import lonlat_grid, roll_horizontal, unit_vector

log = logging.getLogger(__name__)

LABEL_CEILING = 0
LABEL_WALL = 1
LABEL_FLOOR = 2
NUM_CLASSES = 3


# ---------------------------------------------------------------------------
# sample container


@dataclass
class DRSample:
    """One training sample: furnished/empty pair + diminish mask + layout."""

    furnished: np.ndarray  # (H, W, 3) float32 in [0, 1]
    empty: np.ndarray  # (H, W, 3) float32 in [0, 1]
    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    layout: np.ndarray  # (H, W) uint8 in {0, 1, 2}
    scene_id: str

    @property
    def height(self) -> int:
        return self.furnished.shape[0]

    @property
    def width(self) -> int:
        return self.furnished.shape[1]

    def validate(self) -> None:
        h, w = self.furnished.shape[:2]
        if w != 2 * h:
            raise ValueError(f"{self.scene_id}: W must equal 2*H, got {w}x{h}")
        for name in ("furnished", "empty"):
            img = getattr(self, name)
            if img.shape != (h, w, 3):
                raise ValueError(f"{self.scene_id}: {name} shape {img.shape} != {(h, w, 3)}")
            if img.min() < 0.0 or img.max() > 1.0:
                raise ValueError(f"{self.scene_id}: {name} values outside [0, 1]")
        if self.mask.shape != (h, w):
            raise ValueError(f"{self.scene_id}: mask shape mismatch")
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError(f"{self.scene_id}: mask must be binary")
        if self.layout.shape != (h, w):
            raise ValueError(f"{self.scene_id}: layout shape mismatch")
        if not np.isin(self.layout, (0, 1, 2)).all():
            raise ValueError(f"{self.scene_id}: layout labels must be in {{0,1,2}}")


@dataclass
class MaskPolicy:
    """How to derive the diminish region for a sample."""

    kind: str = "object_dilate"  # or "freeform_strokes"
    dilate_px: int = 0
    stroke_count: tuple[int, int] = (1, 4)
    stroke_width: tuple[int, int] = (2, 6)
    area_bounds: tuple[float, float] = (0.01, 0.40)

    def __post_init__(self):
        if self.kind not in ("object_dilate", "freeform_strokes"):
            raise ValueError(f"unknown mask policy kind {self.kind!r}")
        if self.dilate_px < 0:
            raise ValueError("dilate_px must be >= 0")
        lo, hi = self.area_bounds
        if not (0.0 < lo < hi <= 0.40):
            raise ValueError(f"area_bounds must satisfy 0 < min < max <= 0.4, got {self.area_bounds}")


# ---------------------------------------------------------------------------
# procedural cuboid rooms


@dataclass
class BoxObject:
    """Axis-aligned box resting on the floor: x in [x0, x1], z in [z0, z1], y in [0, height]."""

    x0: float
    x1: float
    z0: float
    z1: float
    height: float
    color: tuple[float, float, float] = (0.5, 0.3, 0.2)


@dataclass
class RoomSpec:
    """Cuboid room: x in [0, width], z in [0, depth], y in [0, height] (floor at y=0)."""

    width: float = 4.0
    depth: float = 4.0
    height: float = 3.0
    camera: tuple[float, float, float] = (2.0, 1.5, 2.0)
    wall_color: tuple[float, float, float] = (0.65, 0.6, 0.5)
    floor_color: tuple[float, float, float] = (0.45, 0.3, 0.2)
    ceiling_color: tuple[float, float, float] = (0.85, 0.85, 0.8)
    objects: list[BoxObject] = field(default_factory=list)

    def validate(self) -> None:
        if min(self.width, self.depth, self.height) <= 0:
            raise ValueError("room dimensions must be positive")
        cx, cy, cz = self.camera
        eps = 1e-6
        if not (eps < cx < self.width - eps and eps < cz < self.depth - eps):
            raise ValueError("camera must be strictly inside the room")
        if not (eps < cy < self.height - eps):
            raise ValueError("camera must sit strictly between floor and ceiling")
        for ob in self.objects:
            if not (0 <= ob.x0 < ob.x1 <= self.width and 0 <= ob.z0 < ob.z1 <= self.depth):
                raise ValueError("object footprint outside the room")
            if not (0 < ob.height <= self.height):
                raise ValueError("object height outside the room")
            if ob.x0 <= cx <= ob.x1 and ob.z0 <= cz <= ob.z1 and cy <= ob.height:
                raise ValueError("camera is inside an object")


_LIGHT = np.array([0.3, 0.8, 0.5]) / np.linalg.norm([0.3, 0.8, 0.5])


def _room_exit(origin: np.ndarray, dirs: np.ndarray, spec: RoomSpec):
    """First intersection of interior rays with the room shell.

    Returns (t, surface) where surface is 0 ceiling / 1 wall / 2 floor.
    """
    bounds = np.array([[0.0, spec.width], [0.0, spec.height], [0.0, spec.depth]])
    t_axis = np.full(dirs.shape[:-1] + (3,), np.inf)
    for a in range(3):
        d = dirs[..., a]
        pos = d > 1e-12
        neg = d < -1e-12
        t = np.full(d.shape, np.inf)
        t[pos] = (bounds[a, 1] - origin[a]) / d[pos]
        t[neg] = (bounds[a, 0] - origin[a]) / d[neg]
        t_axis[..., a] = t
    t_exit = t_axis.min(axis=-1)
    axis = t_axis.argmin(axis=-1)
    surface = np.full(axis.shape, LABEL_WALL, dtype=np.uint8)
    up = (axis == 1) & (dirs[..., 1] > 0)
    down = (axis == 1) & (dirs[..., 1] < 0)
    surface[up] = LABEL_CEILING
    surface[down] = LABEL_FLOOR
    return t_exit, surface


def _box_hit(origin: np.ndarray, dirs: np.ndarray, ob: BoxObject):
    """Slab-test entry distance into a box (inf where the ray misses)."""
    lo = np.array([ob.x0, 0.0, ob.z0])
    hi = np.array([ob.x1, ob.height, ob.z1])
    t_near = np.full(dirs.shape[:-1], -np.inf)
    t_far = np.full(dirs.shape[:-1], np.inf)
    near_axis = np.zeros(dirs.shape[:-1], dtype=np.int64)
    for a in range(3):
        d = dirs[..., a]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[a] - origin[a]) / d
            t2 = (hi[a] - origin[a]) / d
        t1, t2 = np.minimum(t1, t2), np.maximum(t1, t2)
        parallel = np.abs(d) < 1e-12
        inside = (lo[a] <= origin[a]) & (origin[a] <= hi[a])
        t1 = np.where(parallel, np.where(inside, -np.inf, np.inf), t1)
        t2 = np.where(parallel, np.where(inside, np.inf, -np.inf), t2)
        update = t1 > t_near
        near_axis = np.where(update, a, near_axis)
        t_near = np.maximum(t_near, t1)
        t_far = np.minimum(t_far, t2)
    hit = (t_near <= t_far) & (t_near > 1e-9)
    t = np.where(hit, t_near, np.inf)
    return t, near_axis


def _shade_surface(surface, points, spec: RoomSpec, phase: np.ndarray) -> np.ndarray:
    """Procedural albedo for the room shell, deterministic per (spec, phase)."""
    h, w = surface.shape
    img = np.zeros((h, w, 3), dtype=np.float64)
    x, y, z = points[..., 0], points[..., 1], points[..., 2]

    wall = surface == LABEL_WALL
    base = np.array(spec.wall_color)
    # vertical gradient plus a slow horizontal color drift
    grad = 0.55 + 0.45 * (y / spec.height)
    drift = 0.10 * np.sin(2 * math.pi * (x + z) / (spec.width + spec.depth) + phase[0])
    img[wall] = np.clip(base[None, :] * grad[wall, None] + drift[wall, None], 0, 1)

    floor = surface == LABEL_FLOOR
    checker = ((np.floor(x / 1.0 + phase[1]) + np.floor(z / 1.0 + phase[2])) % 2)
    tone = 0.75 + 0.25 * checker
    img[floor] = np.clip(np.array(spec.floor_color)[None, :] * tone[floor, None], 0, 1)

    ceil = surface == LABEL_CEILING
    radial = 1.0 - 0.15 * np.clip(
        np.hypot(x - spec.width / 2, z - spec.depth / 2) / max(spec.width, spec.depth), 0, 1
    )
    img[ceil] = np.clip(np.array(spec.ceiling_color)[None, :] * radial[ceil, None], 0, 1)
    return img


_BOX_NORMALS = {0: np.array([1.0, 0, 0]), 1: np.array([0, 1.0, 0]), 2: np.array([0, 0, 1.0])}


def render_room(spec: RoomSpec, h: int, seed: int = 0):
    """Ray-trace a RoomSpec at H x 2H.

    Returns (empty, furnished, object_mask, layout): the raw, undilated
    object mask marks pixels whose nearest hit is an object, and the layout
    is labeled from the empty scene.
    """
    spec.validate()
    if h < 16:
        raise ValueError("panorama height must be >= 16")
    w = 2 * h
    lon, lat = lonlat_grid(w, h)
    dirs = unit_vector(lon, lat)
    origin = np.array(spec.camera, dtype=np.float64)

    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * math.pi, size=3)

    t_room, surface = _room_exit(origin, dirs, spec)
    points = origin[None, None, :] + t_room[..., None] * dirs
    empty = _shade_surface(surface, points, spec, phase)

    furnished = empty.copy()
    t_best = t_room.copy()
    obj_mask = np.zeros((h, w), dtype=np.uint8)
    for ob in spec.objects:
        t_ob, axis = _box_hit(origin, dirs, ob)
        closer = t_ob < t_best
        if not closer.any():
            continue
        n = np.stack([_BOX_NORMALS[a] for a in axis[closer]])
        lambert = 0.6 + 0.4 * np.abs(n @ _LIGHT)
        furnished[closer] = np.clip(np.array(ob.color)[None, :] * lambert[:, None], 0, 1)
        t_best = np.where(closer, t_ob, t_best)
        obj_mask[closer] = 1

    return (
        empty.astype(np.float32),
        furnished.astype(np.float32),
        obj_mask,
        surface,
    )


def synth_room(seed: int, spec: RoomSpec, h: int, dilate_px: int = 2) -> DRSample:
    """Render a toy DR sample; deterministic given (seed, spec, h)."""
    empty, furnished, obj_mask, layout = render_room(spec, h, seed=seed)
    mask = dilate_mask(obj_mask, dilate_px)
    return DRSample(
        furnished=furnished,
        empty=empty,
        mask=mask,
        layout=layout,
        scene_id=f"toy-{seed:06d}",
    )


def random_room_spec(rng: np.random.Generator, max_objects: int = 3) -> RoomSpec:
    """Sample a plausible furnished cuboid room."""
    width = rng.uniform(3.0, 6.0)
    depth = rng.uniform(3.0, 6.0)
    height = rng.uniform(2.4, 3.2)
    cam = (
        width * rng.uniform(0.3, 0.7),
        rng.uniform(1.1, 1.7),
        depth * rng.uniform(0.3, 0.7),
    )

    def color(lo=0.2, hi=0.9):
        return tuple(rng.uniform(lo, hi, size=3).tolist())

    objects = []
    for _ in range(rng.integers(1, max_objects + 1)):
        for _ in range(20):  # rejection-sample footprints clear of the camera
            sx = rng.uniform(0.5, 1.6)
            sz = rng.uniform(0.5, 1.6)
            x0 = rng.uniform(0.1, width - sx - 0.1)
            z0 = rng.uniform(0.1, depth - sz - 0.1)
            if not (x0 - 0.2 <= cam[0] <= x0 + sx + 0.2 and z0 - 0.2 <= cam[2] <= z0 + sz + 0.2):
                break
        else:
            continue
        objects.append(
            BoxObject(
                x0=x0,
                x1=x0 + sx,
                z0=z0,
                z1=z0 + sz,
                height=rng.uniform(0.4, 1.4),
                color=color(0.1, 0.95),
            )
        )
    return RoomSpec(
        width=width,
        depth=depth,
        height=height,
        camera=cam,
        wall_color=color(0.35, 0.85),
        floor_color=color(0.2, 0.6),
        ceiling_color=color(0.7, 0.95),
        objects=objects,
    )


# ---------------------------------------------------------------------------
# masks


def dilate_mask(mask: np.ndarray, iterations: int) -> np.ndarray:
    """Binary 8-neighborhood dilation, wrapping horizontally, clamped vertically."""
    out = mask.astype(bool)
    for _ in range(iterations):
        grown = out.copy()
        grown |= roll_horizontal(out, 1) | roll_horizontal(out, -1)
        up = np.zeros_like(out)
        up[:-1] = out[1:]
        down = np.zeros_like(out)
        down[1:] = out[:-1]
        grown |= up | down
        grown |= roll_horizontal(up, 1) | roll_horizontal(up, -1)
        grown |= roll_horizontal(down, 1) | roll_horizontal(down, -1)
        out = grown
    return out.astype(np.uint8)


def _stamp_disk(mask: np.ndarray, cy: float, cx: float, radius: float) -> None:
    h, w = mask.shape
    r = int(math.ceil(radius))
    ys = np.arange(int(math.floor(cy)) - r, int(math.ceil(cy)) + r + 1)
    xs = np.arange(int(math.floor(cx)) - r, int(math.ceil(cx)) + r + 1)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    yy = np.clip(yy, 0, h - 1)
    xx = xx % w
    mask[yy[inside], xx[inside]] = 1


def _freeform_mask(h: int, w: int, policy: MaskPolicy, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros((h, w), dtype=np.uint8)
    n_strokes = int(rng.integers(policy.stroke_count[0], policy.stroke_count[1] + 1))
    for _ in range(n_strokes):
        y = rng.uniform(0.15 * h, 0.85 * h)
        x = rng.uniform(0, w)
        width = rng.uniform(policy.stroke_width[0], policy.stroke_width[1])
        angle = rng.uniform(0, 2 * math.pi)
        for _ in range(int(rng.integers(4, 9))):
            step = rng.uniform(h / 16, h / 6)
            angle += rng.uniform(-0.8, 0.8)
            ny = np.clip(y + step * math.sin(angle), 0, h - 1)
            nx = x + step * math.cos(angle)
            n_samples = max(2, int(step))
            for t in np.linspace(0, 1, n_samples):
                _stamp_disk(mask, y + (ny - y) * t, x + (nx - x) * t, width / 2)
            y, x = ny, nx
    return mask


def sample_mask(sample: DRSample, policy: MaskPolicy, seed: int) -> np.ndarray:
    """Draw a diminish mask for `sample` under `policy`; deterministic per seed."""
    h, w = sample.mask.shape
    lo, hi = policy.area_bounds
    if policy.kind == "object_dilate":
        mask = dilate_mask(sample.mask, policy.dilate_px)
        frac = mask.mean()
        if frac < lo:
            raise ValueError(f"dilated object mask area {frac:.4f} below min bound {lo}")
        if frac > hi:
            raise ValueError(f"dilated object mask area {frac:.4f} above max bound {hi}")
        return mask

    rng = np.random.default_rng(seed)
    for _ in range(50):
        mask = _freeform_mask(h, w, policy, rng)
        frac = mask.mean()
        if lo <= frac <= hi:
            return mask
    raise ValueError(
        f"no freeform mask within area bounds [{lo}, {hi}] after 50 attempts (last {frac:.4f})"
    )


# ---------------------------------------------------------------------------
# model I/O tensors


def make_model_input(sample: DRSample) -> tuple[np.ndarray, np.ndarray]:
    """Build (input, target) arrays: input = masked RGB + mask channel (4, H, W)."""
    mask = sample.mask.astype(np.float32)[None]
    rgb = sample.furnished.astype(np.float32).transpose(2, 0, 1)
    masked = rgb * (1.0 - mask)
    inp = np.concatenate([masked, mask], axis=0)
    target = sample.empty.astype(np.float32).transpose(2, 0, 1)
    return inp, target


# ---------------------------------------------------------------------------
# splits


def _scene_unit_interval(scene_id: str) -> float:
    digest = hashlib.md5(scene_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def split_dataset(samples, ratios: tuple[float, float, float]):
    """Partition samples into (train, val, test) by stable hash of scene_id.

    Every sample of a scene lands in the same split; assignment depends only
    on the scene_id string, so it is stable across runs and platforms.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    train, val, test = [], [], []
    for s in samples:
        r = _scene_unit_interval(s.scene_id)
        if r < ratios[0]:
            train.append(s)
        elif r < ratios[0] + ratios[1]:
            val.append(s)
        else:
            test.append(s)
    return train, val, test


# ---------------------------------------------------------------------------
# on-disk sample format


def save_sample(sample: DRSample, out_dir: Path, meta: dict | None = None) -> None:
    """Write one sample directory: furnished/empty/mask/layout PNGs + meta.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("furnished", "empty"):
        arr = (np.round(getattr(sample, name) * 255.0)).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(out_dir / f"{name}.png")
    Image.fromarray(sample.mask * 255, mode="L").save(out_dir / "mask.png")
    Image.fromarray(sample.layout, mode="L").save(out_dir / "layout.png")
    payload = {"scene_id": sample.scene_id}
    if meta:
        payload.update(meta)
    (out_dir / "meta.json").write_text(json.dumps(payload, indent=2))


def load_sample(sample_dir: Path) -> DRSample:
    sample_dir = Path(sample_dir)
    meta = json.loads((sample_dir / "meta.json").read_text())
    furnished = np.asarray(Image.open(sample_dir / "furnished.png"), dtype=np.float32) / 255.0
    empty = np.asarray(Image.open(sample_dir / "empty.png"), dtype=np.float32) / 255.0
    mask = (np.asarray(Image.open(sample_dir / "mask.png")) >= 128).astype(np.uint8)
    layout = np.asarray(Image.open(sample_dir / "layout.png")).astype(np.uint8)
    sample = DRSample(furnished, empty, mask, layout, meta["scene_id"])
    sample.validate()
    return sample


def list_sample_dirs(root: Path) -> list[Path]:
    root = Path(root)
    return sorted(p.parent for p in root.glob("*/meta.json"))


def load_dataset(root: Path) -> list[DRSample]:
    """Load every sample under `root`, sorted by scene_id for determinism."""
    samples = [load_sample(d) for d in list_sample_dirs(root)]
    samples.sort(key=lambda s: s.scene_id)
    return samples


def synth_dataset(out_dir: Path, count: int, height: int, seed: int, dilate_px: int = 2) -> list[Path]:
    """Generate `count` toy scenes under out_dir, one sample directory each."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    dirs = []
    for i in range(count):
        scene_seed = int(rng.integers(0, 2**31 - 1))
        spec = random_room_spec(rng)
        sample = synth_room(scene_seed, spec, height, dilate_px=dilate_px)
        sample.scene_id = f"toy-{seed:04d}-{i:05d}"
        d = out_dir / sample.scene_id
        save_sample(sample, d, meta={"seed": scene_seed, "spec": _spec_to_dict(spec)})
        dirs.append(d)
    return dirs


def _spec_to_dict(spec: RoomSpec) -> dict:
    d = asdict(spec)
    d["objects"] = [asdict(o) for o in spec.objects]
    return d


def validate_dataset(root: Path) -> dict:
    """Run the per-sample validator over a dataset directory."""
    report = {"checked": 0, "errors": []}
    for d in list_sample_dirs(root):
        try:
            load_sample(d)
            report["checked"] += 1
        except Exception as exc:  # noqa: BLE001 - collect, don't abort the scan
            report["errors"].append({"sample": str(d), "error": str(exc)})
    return report


# ---------------------------------------------------------------------------
# Structured3D-style ingestion


def _resize_rgb(img: np.ndarray, h: int, w: int) -> np.ndarray:
    pil = Image.fromarray((np.round(img * 255)).astype(np.uint8), mode="RGB")
    return np.asarray(pil.resize((w, h), Image.Resampling.BOX), dtype=np.float32) / 255.0


def _resize_labels(img: np.ndarray, h: int, w: int) -> np.ndarray:
    pil = Image.fromarray(img)
    return np.asarray(pil.resize((w, h), Image.Resampling.NEAREST))


def rasterize_layout_boundaries(ceiling_y, floor_y, h: int, w: int) -> np.ndarray:
    """Dense labels from per-column boundaries given as fractions of image height.

    Rows strictly above ceiling_y*h label ceiling, rows at/below floor_y*h
    label floor, walls in between.
    """
    ceiling_y = np.asarray(ceiling_y, dtype=np.float64)
    floor_y = np.asarray(floor_y, dtype=np.float64)
    if ceiling_y.shape != floor_y.shape or ceiling_y.ndim != 1:
        raise ValueError("boundary arrays must be 1-D with equal length")
    cols = (np.arange(w) * ceiling_y.shape[0] // w).astype(np.int64)
    cy = ceiling_y[cols] * h
    fy = floor_y[cols] * h
    rows = np.arange(h)[:, None]
    layout = np.full((h, w), LABEL_WALL, dtype=np.uint8)
    layout[rows < cy[None, :]] = LABEL_CEILING
    layout[rows >= fy[None, :]] = LABEL_FLOOR
    return layout


def load_structured3d_pair(
    scene_dir: Path,
    height: int = 64,
    min_area_frac: float = 0.002,
) -> list[DRSample]:
    """Load furnished/empty renders + annotations into one sample per instance.

    Expected files inside scene_dir: full.png, empty.png, instance.png
    (integer instance ids, 0 = structure/background), and either layout.png
    (dense labels 0/1/2) or layout.json with per-column "ceiling_y"/"floor_y"
    boundary rows.  Renders must share one resolution; everything is resized
    to height x 2*height (area-average for RGB, nearest for labels).
    """
    scene_dir = Path(scene_dir)
    w = 2 * height
    paths = {name: scene_dir / f"{name}.png" for name in ("full", "empty", "instance")}
    for name, p in paths.items():
        if not p.exists():
            raise FileNotFoundError(f"{scene_dir}: missing {name}.png")

    full = np.asarray(Image.open(paths["full"]).convert("RGB"), dtype=np.float32) / 255.0
    empty = np.asarray(Image.open(paths["empty"]).convert("RGB"), dtype=np.float32) / 255.0
    instance = np.asarray(Image.open(paths["instance"]))
    if instance.ndim == 3:
        instance = instance[..., 0]
    if full.shape != empty.shape or full.shape[:2] != instance.shape:
        raise ValueError(
            f"{scene_dir}: mismatched resolutions full={full.shape} empty={empty.shape} "
            f"instance={instance.shape}"
        )

    layout_png = scene_dir / "layout.png"
    layout_json = scene_dir / "layout.json"
    if layout_png.exists():
        layout_src = np.asarray(Image.open(layout_png)).astype(np.uint8)
        layout = _resize_labels(layout_src, height, w)
    elif layout_json.exists():
        bounds = json.loads(layout_json.read_text())
        layout = rasterize_layout_boundaries(bounds["ceiling_y"], bounds["floor_y"], height, w)
    else:
        raise FileNotFoundError(f"{scene_dir}: missing layout.png or layout.json")

    full_r = _resize_rgb(full, height, w)
    empty_r = _resize_rgb(empty, height, w)
    instance_r = _resize_labels(instance.astype(np.int32), height, w)

    ids = [i for i in np.unique(instance_r) if i != 0]
    samples = []
    for inst_id in ids:
        mask = (instance_r == inst_id).astype(np.uint8)
        if mask.mean() < min_area_frac:
            continue
        s = DRSample(
            furnished=full_r,
            empty=empty_r,
            mask=mask,
            layout=layout.astype(np.uint8),
            scene_id=f"{scene_dir.name}#i{int(inst_id)}",
        )
        s.validate()
        samples.append(s)
    if not samples:
        log.warning("%s: no object instances above area threshold; emitting no samples", scene_dir)
    return samples


def ingest_structured3d(root: Path, out_dir: Path, height: int = 64) -> dict:
    """Batch-ingest scene directories; per-scene failures are logged, not fatal."""
    root = Path(root)
    out_dir = Path(out_dir)
    report = {"scenes": 0, "samples": 0, "errors": []}
    for scene_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            samples = load_structured3d_pair(scene_dir, height=height)
        except Exception as exc:  # noqa: BLE001 - keep ingesting other scenes
            log.error("skipping %s: %s", scene_dir, exc)
            report["errors"].append({"scene": str(scene_dir), "error": str(exc)})
            continue
        report["scenes"] += 1
        for s in samples:
            save_sample(s, out_dir / s.scene_id.replace("#", "_"))
            report["samples"] += 1
    return report
