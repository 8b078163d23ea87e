"""Equirectangular panorama geometry.

Conventions used throughout the package:

* A panorama is a 2:1 equirectangular image (``W == 2 * H``), longitude on
  the x axis, latitude on the y axis.
* Pixel centers carry a half-pixel offset so that pixel <-> sphere round
  trips are exact:  ``lon = 2*pi*(u + 0.5)/W - pi`` and
  ``lat = pi/2 - pi*(v + 0.5)/H``.  Row ``v = 0`` is the zenith side.
* Longitude wraps modulo ``2*pi`` into ``[-pi, pi)``; latitude is clamped
  to ``[-pi/2, pi/2]`` and never wrapped (the poles are singular).
* Horizontal image borders are 360deg-continuous, so padding wraps columns;
  vertical borders replicate edge rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

__all__ = [
    "SphericalCoord",
    "ViewSpec",
    "pixel_to_spherical",
    "spherical_to_pixel",
    "unit_vector",
    "vector_to_lonlat",
    "bilinear_sample",
    "gnomonic_project",
    "circular_pad",
    "roll_horizontal",
]

_TWO_PI = 2.0 * math.pi


def wrap_lon(lon):
    """Wrap longitude(s) into [-pi, pi)."""
    return (lon + math.pi) % _TWO_PI - math.pi


@dataclass(frozen=True)
class SphericalCoord:
    """Direction on the unit sphere: lon in [-pi, pi), lat in [-pi/2, pi/2]."""

    lon: float
    lat: float

    def __post_init__(self):
        object.__setattr__(self, "lon", float(wrap_lon(self.lon)))
        object.__setattr__(self, "lat", float(np.clip(self.lat, -math.pi / 2, math.pi / 2)))


@dataclass(frozen=True)
class ViewSpec:
    """Perspective view request: center direction, horizontal FOV, output size."""

    center: SphericalCoord
    fov_deg: float
    out_w: int
    out_h: int

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 170.0):
            raise ValueError(f"fov_deg must lie strictly in (0, 170), got {self.fov_deg}")
        if self.out_w < 2 or self.out_h < 2:
            raise ValueError(f"output size must be >= 2x2, got {self.out_w}x{self.out_h}")


def _check_aspect(w: int, h: int) -> None:
    if w != 2 * h:
        raise ValueError(f"equirectangular image must satisfy W == 2*H, got W={w}, H={h}")


def pixel_to_spherical(u, v, w: int, h: int) -> SphericalCoord:
    """Map a pixel (column u, row v) to its center direction on the sphere."""
    _check_aspect(w, h)
    lon = _TWO_PI * (u + 0.5) / w - math.pi
    lat = math.pi / 2 - math.pi * (v + 0.5) / h
    return SphericalCoord(lon, lat)


def spherical_to_pixel(c: SphericalCoord, w: int, h: int) -> tuple[float, float]:
    """Inverse of :func:`pixel_to_spherical`; returns fractional pixel coords."""
    _check_aspect(w, h)
    u = (wrap_lon(c.lon) + math.pi) * w / _TWO_PI - 0.5
    v = (math.pi / 2 - c.lat) * h / math.pi - 0.5
    return float(u), float(v)


def lonlat_grid(w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (lon, lat) arrays of shape (h, w) at pixel centers."""
    _check_aspect(w, h)
    u = np.arange(w, dtype=np.float64)
    v = np.arange(h, dtype=np.float64)
    lon = _TWO_PI * (u + 0.5) / w - math.pi
    lat = math.pi / 2 - math.pi * (v + 0.5) / h
    return np.broadcast_to(lon, (h, w)).copy(), np.broadcast_to(lat[:, None], (h, w)).copy()


def unit_vector(lon, lat) -> np.ndarray:
    """Unit direction(s) for (lon, lat): x = cos(lat)sin(lon), y = sin(lat), z = cos(lat)cos(lon).

    +y is up; lon = 0 faces +z.  Accepts scalars or broadcastable arrays and
    returns an array with a trailing axis of size 3.
    """
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    cl = np.cos(lat)
    return np.stack([cl * np.sin(lon), np.sin(lat), cl * np.cos(lon)], axis=-1)


def vector_to_lonlat(vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`unit_vector` (input need not be normalized)."""
    vec = np.asarray(vec, dtype=np.float64)
    x, y, z = vec[..., 0], vec[..., 1], vec[..., 2]
    lon = np.arctan2(x, z)
    norm = np.sqrt(x * x + y * y + z * z)
    lat = np.arcsin(np.clip(y / np.maximum(norm, 1e-300), -1.0, 1.0))
    return lon, lat


def bilinear_sample(pano: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinearly sample an (H, W, C) or (H, W) image at fractional pixel coords.

    Columns wrap modulo W (360deg continuity); rows clamp at the poles.
    """
    h, w = pano.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    u0 = np.floor(u)
    v0 = np.floor(v)
    fu = u - u0
    fv = v - v0

    c0 = (u0.astype(np.int64)) % w
    c1 = (c0 + 1) % w
    r0 = np.clip(v0.astype(np.int64), 0, h - 1)
    r1 = np.clip(v0.astype(np.int64) + 1, 0, h - 1)

    if pano.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]

    top = pano[r0, c0] * (1.0 - fu) + pano[r0, c1] * fu
    bot = pano[r1, c0] * (1.0 - fu) + pano[r1, c1] * fu
    return top * (1.0 - fv) + bot * fv


def camera_basis(center: SphericalCoord) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roll-free camera frame at `center`: (right, up, forward) unit vectors."""
    lon0, lat0 = center.lon, center.lat
    forward = unit_vector(lon0, lat0)
    right = np.array([math.cos(lon0), 0.0, -math.sin(lon0)])
    up = np.array(
        [-math.sin(lat0) * math.sin(lon0), math.cos(lat0), -math.sin(lat0) * math.cos(lon0)]
    )
    return right, up, forward


def gnomonic_project(pano: np.ndarray, view: ViewSpec) -> np.ndarray:
    """Extract a rectilinear (tangent-plane) perspective view from a panorama.

    Straight 3D lines in the scene come out straight, which is what makes
    layout kinks in generated content visible.  Sampling is bilinear with
    horizontal wrap and vertical clamp.
    """
    _check_aspect(pano.shape[1], pano.shape[0])
    right, up, forward = camera_basis(view.center)

    # Focal length in pixels from the horizontal FOV.
    f = (view.out_w / 2.0) / math.tan(math.radians(view.fov_deg) / 2.0)
    px = (np.arange(view.out_w, dtype=np.float64) + 0.5) - view.out_w / 2.0
    py = (np.arange(view.out_h, dtype=np.float64) + 0.5) - view.out_h / 2.0

    # Ray per output pixel; py grows downward, hence the minus on `up`.
    d = (
        f * forward[None, None, :]
        + px[None, :, None] * right[None, None, :]
        - py[:, None, None] * up[None, None, :]
    )
    lon, lat = vector_to_lonlat(d)
    h, w = pano.shape[:2]
    u = (wrap_lon(lon) + math.pi) * w / _TWO_PI - 0.5
    v = (math.pi / 2 - lat) * h / math.pi - 0.5
    return bilinear_sample(pano, u, v)


def _circular_pad_torch(x: torch.Tensor, pad_h: int, pad_w: int) -> torch.Tensor:
    if pad_w > 0:
        x = torch.nn.functional.pad(x, (pad_w, pad_w, 0, 0), mode="circular")
    if pad_h > 0:
        x = torch.nn.functional.pad(x, (0, 0, pad_h, pad_h), mode="replicate")
    return x


def _circular_pad_numpy(x: np.ndarray, pad_h: int, pad_w: int) -> np.ndarray:
    spec = [(0, 0)] * (x.ndim - 2)
    if pad_w > 0:
        x = np.pad(x, spec + [(0, 0), (pad_w, pad_w)], mode="wrap")
    if pad_h > 0:
        x = np.pad(x, spec + [(pad_h, pad_h), (0, 0)], mode="edge")
    return x


def circular_pad(x, pad: int):
    """Pad a (..., H, W) array: columns wrap around the seam, rows replicate.

    Used under every convolution in this package so that features stay
    360deg-continuous.  Accepts torch tensors (keeps autograd) or numpy arrays.
    """
    return circular_pad_hw(x, pad, pad)


def circular_pad_hw(x, pad_h: int, pad_w: int):
    """Anisotropic variant of :func:`circular_pad` (used by dilated convs)."""
    if pad_h < 0 or pad_w < 0:
        raise ValueError("padding must be nonnegative")
    w = x.shape[-1]
    if pad_w > w:
        raise ValueError(f"horizontal pad {pad_w} exceeds width {w}")
    if pad_h == 0 and pad_w == 0:
        return x
    if isinstance(x, torch.Tensor):
        return _circular_pad_torch(x, pad_h, pad_w)
    return _circular_pad_numpy(np.asarray(x), pad_h, pad_w)


def roll_horizontal(x, k: int):
    """Cyclically shift columns right by k: out[..., c] = in[..., (c - k) mod W]."""
    if isinstance(x, torch.Tensor):
        return torch.roll(x, shifts=int(k), dims=-1)
    return np.roll(np.asarray(x), int(k), axis=-1)
