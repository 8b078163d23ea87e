"""Geometry tests: closed-form conventions, round trips, and a brute-force
ray oracle for the gnomonic extraction."""

import math

import numpy as np
import pytest
import torch

from panodr.geometry import (
    SphericalCoord,
    ViewSpec,
    bilinear_sample,
    circular_pad,
    gnomonic_project,
    pixel_to_spherical,
    roll_horizontal,
    spherical_to_pixel,
)


# ---------------------------------------------------------------------------
# pixel <-> spherical


def test_pixel_to_spherical_closed_forms():
    c = pixel_to_spherical(0, 0, 2, 1)
    assert c.lon == pytest.approx(-math.pi / 2, abs=1e-12)
    assert c.lat == pytest.approx(0.0, abs=1e-12)

    c = pixel_to_spherical(2, 1, 4, 2)
    assert c.lon == pytest.approx(math.pi / 4, abs=1e-12)
    assert c.lat == pytest.approx(-math.pi / 4, abs=1e-12)


def test_zenith_row_is_top():
    c = pixel_to_spherical(0, 0, 128, 64)
    assert c.lat > math.pi / 2 - math.pi / 64  # row 0 sits next to +pi/2


def test_aspect_violation_rejected():
    with pytest.raises(ValueError):
        pixel_to_spherical(0, 0, 3, 2)
    with pytest.raises(ValueError):
        spherical_to_pixel(SphericalCoord(0, 0), 10, 4)


def test_spherical_to_pixel_closed_forms():
    u, v = spherical_to_pixel(SphericalCoord(-math.pi / 2, 0.0), 2, 1)
    assert u == pytest.approx(0.0, abs=1e-12)
    assert v == pytest.approx(0.0, abs=1e-12)


def test_wraparound_just_below_pi():
    w, h = 64, 32
    u, _ = spherical_to_pixel(SphericalCoord(math.pi - 1e-9, 0.0), w, h)
    assert u == pytest.approx(w - 0.5, abs=1e-6)
    # exactly pi wraps to -pi -> u = -0.5
    u, _ = spherical_to_pixel(SphericalCoord(math.pi, 0.0), w, h)
    assert u == pytest.approx(-0.5, abs=1e-12)


def test_round_trip_exhaustive_w64():
    w, h = 64, 32
    for v in range(h):
        for u in range(w):
            c = pixel_to_spherical(u, v, w, h)
            uu, vv = spherical_to_pixel(c, w, h)
            assert abs(uu - u) < 1e-9
            assert abs(vv - v) < 1e-9


def test_round_trip_random_coords():
    rng = np.random.default_rng(0)
    w, h = 512, 256
    for _ in range(10_000 // 100):
        lon = rng.uniform(-math.pi, math.pi - 1e-6, size=100)
        lat = rng.uniform(-math.pi / 2, math.pi / 2, size=100)
        for lo, la in zip(lon, lat):
            u, v = spherical_to_pixel(SphericalCoord(lo, la), w, h)
            c = pixel_to_spherical(u, v, w, h)
            assert abs(c.lon - lo) < 1e-9
            assert abs(c.lat - la) < 1e-9


# ---------------------------------------------------------------------------
# gnomonic projection


def _rot_y(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def _ray_oracle(pano, view):
    """Per-pixel scalar ray trace, built from explicit rotation matrices and
    loop-based bilinear sampling; deliberately shares no code with the
    vectorized implementation."""
    h, w = pano.shape[:2]
    out = np.zeros((view.out_h, view.out_w, pano.shape[2]), dtype=np.float64)
    f = (view.out_w / 2.0) / math.tan(math.radians(view.fov_deg) / 2.0)
    # camera-to-world: pitch up by lat (about +x), then yaw by lon (about +y)
    m = _rot_y(view.center.lon) @ np.array(
        [
            [1, 0, 0],
            [0, math.cos(view.center.lat), math.sin(view.center.lat)],
            [0, -math.sin(view.center.lat), math.cos(view.center.lat)],
        ],
        dtype=np.float64,
    )
    for j in range(view.out_h):
        for i in range(view.out_w):
            cam = np.array([i + 0.5 - view.out_w / 2.0, -(j + 0.5 - view.out_h / 2.0), f])
            d = m @ cam
            lon = math.atan2(d[0], d[2])
            lat = math.asin(d[1] / np.linalg.norm(d))
            u = (lon + math.pi) * w / (2 * math.pi) - 0.5
            v = (math.pi / 2 - lat) * h / math.pi - 0.5
            u0, v0 = math.floor(u), math.floor(v)
            fu, fv = u - u0, v - v0
            acc = np.zeros(pano.shape[2])
            for dv, wv in ((0, 1 - fv), (1, fv)):
                for du, wu in ((0, 1 - fu), (1, fu)):
                    r = min(max(v0 + dv, 0), h - 1)
                    c = (u0 + du) % w
                    acc += wv * wu * pano[r, c]
            out[j, i] = acc
    return out


def _checkerboard_pano(h=32, w=64, cells=8):
    yy, xx = np.mgrid[0:h, 0:w]
    board = ((yy // (h // cells) + xx // (w // cells)) % 2).astype(np.float64)
    rng = np.random.default_rng(3)
    img = np.stack([board, 1 - board, rng.uniform(size=(h, w))], axis=-1)
    return img


def test_gnomonic_constant_panorama():
    pano = np.full((16, 32, 3), 0.37)
    view = ViewSpec(SphericalCoord(0.5, -0.2), 90.0, 8, 6)
    out = gnomonic_project(pano, view)
    assert np.allclose(out, 0.37, atol=1e-12)


def test_gnomonic_center_ray():
    pano = np.arange(16 * 32 * 3, dtype=np.float64).reshape(16, 32, 3) / 2000.0
    view = ViewSpec(SphericalCoord(0.0, 0.0), 60.0, 3, 3)
    out = gnomonic_project(pano, view)
    u, v = spherical_to_pixel(SphericalCoord(0.0, 0.0), 32, 16)
    expected = bilinear_sample(pano, np.array(u), np.array(v))
    assert np.allclose(out[1, 1], expected, atol=1e-12)


@pytest.mark.parametrize(
    "lon,lat,fov",
    [(0.0, 0.0, 90.0), (1.2, 0.6, 70.0), (-2.5, -0.9, 110.0), (3.0, 1.3, 50.0)],
)
def test_gnomonic_matches_ray_oracle(lon, lat, fov):
    pano = _checkerboard_pano()
    view = ViewSpec(SphericalCoord(lon, lat), fov, 12, 9)
    fast = gnomonic_project(pano, view)
    slow = _ray_oracle(pano, view)
    assert np.max(np.abs(fast - slow)) < 1e-6


def test_gnomonic_straight_lines_stay_straight():
    # paint a great-circle "wall edge" at constant latitude 0 and check the
    # projected edge is a straight row in a horizon-centered view
    h, w = 64, 128
    lat_row = np.zeros((h, w, 1))
    lat_row[h // 2 :, :, 0] = 1.0  # lower hemisphere dark
    view = ViewSpec(SphericalCoord(0.8, 0.0), 80.0, 33, 25)
    out = gnomonic_project(lat_row, view)
    edge_rows = [np.argmax(out[:, i, 0] > 0.5) for i in range(out.shape[1])]
    assert max(edge_rows) - min(edge_rows) <= 1


def test_viewspec_fov_bounds():
    with pytest.raises(ValueError):
        ViewSpec(SphericalCoord(0, 0), 170.0, 8, 8)
    with pytest.raises(ValueError):
        ViewSpec(SphericalCoord(0, 0), 0.0, 8, 8)


# ---------------------------------------------------------------------------
# circular padding / rolling


def test_circular_pad_identity():
    x = np.random.default_rng(0).normal(size=(1, 2, 3, 4))
    assert np.array_equal(circular_pad(x, 0), x)


def test_circular_pad_wrap_row():
    x = np.array([[[[1.0, 2.0, 3.0, 4.0]]]])
    padded = circular_pad(x, 1)
    assert padded.shape == (1, 1, 3, 6)
    assert np.array_equal(padded[0, 0, 1], [4.0, 1.0, 2.0, 3.0, 4.0, 1.0])
    # vertical replication
    assert np.array_equal(padded[0, 0, 0], padded[0, 0, 1])
    assert np.array_equal(padded[0, 0, 2], padded[0, 0, 1])


def test_circular_pad_interior_untouched():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 3, 8, 16))
    p = circular_pad(x, 3)
    assert np.array_equal(p[:, :, 3:-3, 3:-3], x)


def test_circular_pad_rejects_oversize():
    x = np.zeros((1, 1, 4, 8))
    with pytest.raises(ValueError):
        circular_pad(x, 9)
    with pytest.raises(ValueError):
        circular_pad(x, -1)


def test_circular_pad_torch_matches_numpy():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 3, 6, 12)).astype(np.float32)
    a = circular_pad(x, 2)
    b = circular_pad(torch.from_numpy(x), 2).numpy()
    assert np.array_equal(a, b)


def test_roll_identity_cases():
    x = np.random.default_rng(3).normal(size=(2, 3, 4, 8))
    assert np.array_equal(roll_horizontal(x, 0), x)
    assert np.array_equal(roll_horizontal(x, 8), x)


def test_roll_inverse():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(1, 2, 4, 16))
    for k in rng.integers(1, 16, size=8):
        assert np.array_equal(roll_horizontal(roll_horizontal(x, k), 16 - k), x)


def test_conv_with_circular_pad_is_roll_equivariant():
    torch.manual_seed(0)
    conv = torch.nn.Conv2d(3, 5, 3, padding=0)
    x = torch.randn(1, 3, 8, 16)

    def f(t):
        return conv(circular_pad(t, 1))

    for k in [1, 3, 7, 11]:
        a = f(roll_horizontal(x, k))
        b = roll_horizontal(f(x), k)
        assert torch.max(torch.abs(a - b)).item() < 1e-4
