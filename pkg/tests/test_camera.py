import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fisheyeflow import camera as cm


@pytest.fixture
def cam():
    return cm.FisheyeCamera()


def test_principal_point_is_optical_axis(cam):
    assert cm.project(cam, 0.0, 1.234) == (256.0, 256.0)
    d = cm.unproject(cam, 256.0, 256.0)
    assert d.theta == 0.0 and d.phi == 0.0


def test_rim_is_ninety_degrees(cam):
    x, y = cm.project(cam, math.pi / 2, 0.0)
    assert x == pytest.approx(512.0, abs=1e-12) and y == pytest.approx(256.0, abs=1e-12)
    assert cm.unproject(cam, 512.0, 256.0).theta == pytest.approx(math.pi / 2, abs=1e-15)


def test_unproject_quarter_pi_down(cam):
    # half-way to the rim, straight up in the image (negative y)
    d = cm.unproject(cam, 256.0, 128.0)
    assert d.theta == pytest.approx(math.pi / 4, abs=1e-15)
    assert d.phi == pytest.approx(3 * math.pi / 2, abs=1e-15)


def test_scale_constant(cam):
    assert abs(cam.scale - 512.0 / math.pi) / (512.0 / math.pi) < 1e-12
    # r / theta is the same constant everywhere
    theta = np.linspace(0.01, math.pi / 2, 200)
    x, y = cm.project(cam, theta, np.full_like(theta, 0.7))
    r = np.hypot(x - cam.cx, y - cam.cy)
    assert np.max(np.abs(r / theta - cam.scale)) / cam.scale < 1e-12


def test_radius_monotone_in_theta(cam):
    theta = np.linspace(0, math.pi / 2, 1000)
    x, _ = cm.project(cam, theta, np.zeros_like(theta))
    assert np.all(np.diff(x) > 0)


def test_image_circle_area(cam):
    mask = cm.image_circle_mask(cam)
    assert mask.shape == (512, 512)
    assert abs(mask.sum() - math.pi * 256**2) / (math.pi * 256**2) < 0.01
    assert not mask[0, 0] and mask[256, 256]


def test_outside_circle_raises(cam):
    with pytest.raises(cm.InvalidPixelError):
        cm.unproject(cam, 0.0, 0.0)
    with pytest.raises(cm.BehindCameraError):
        cm.project(cam, math.pi / 2 + 1e-6, 0.0)
    with pytest.raises(cm.BehindCameraError):
        cm.project(cam, -0.1, 0.0)


def test_random_round_trip_1e5(cam):
    rng = np.random.default_rng(1)
    r = cam.rim_radius * np.sqrt(rng.uniform(0, 1, 100_000))
    a = rng.uniform(0, 2 * math.pi, 100_000)
    x = cam.cx + r * np.cos(a)
    y = cam.cy + r * np.sin(a)
    theta, phi = cm.unproject(cam, x, y)
    assert np.all((phi >= 0) & (phi < 2 * math.pi))
    x2, y2 = cm.project(cam, theta, phi)
    assert np.max(np.hypot(x2 - x, y2 - y)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(theta=st.floats(0, math.pi / 2), phi=st.floats(0, 2 * math.pi, exclude_max=True))
def test_direction_round_trip(theta, phi):
    cam = cm.FisheyeCamera()
    x, y = cm.project(cam, theta, phi)
    d = cm.unproject(cam, x, y)
    assert d.theta == pytest.approx(theta, abs=1e-12)
    if theta > 1e-9:
        dphi = (d.phi - phi + math.pi) % (2 * math.pi) - math.pi
        assert abs(dphi) < 1e-9 / theta + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    w=st.integers(16, 2048), h=st.integers(16, 2048),
    frac=st.floats(0.1, 1.0), u=st.floats(0, 1), v=st.floats(0, 1),
)
def test_round_trip_other_geometries(w, h, frac, u, v):
    cam = cm.FisheyeCamera(w, h, w / 2, h / 2, frac * min(w, h) / 2)
    r = cam.rim_radius * math.sqrt(u)
    a = 2 * math.pi * v
    x, y = cam.cx + r * math.cos(a), cam.cy + r * math.sin(a)
    d = cm.unproject(cam, x, y)
    x2, y2 = cm.project(cam, d.theta, d.phi)
    assert math.hypot(x2 - x, y2 - y) < 1e-9


def test_project_points_matches_pixel_rays(cam):
    rng = np.random.default_rng(3)
    x = rng.uniform(100, 400, 500)
    y = rng.uniform(100, 400, 500)
    rays = cm.pixel_rays(cam, x, y)
    pts = cam.position + 3.7 * rays
    px, py, ok = cm.project_points(cam, pts)
    assert ok.all()
    assert np.max(np.hypot(px - x, py - y)) < 1e-9


def test_project_points_flags_behind(cam):
    _, _, ok = cm.project_points(cam, np.array([[0, 0, 5.0], [0, 0, 0.0], [10, 0, 2.5]]))
    assert ok.tolist() == [False, True, True]


def test_nadir_orientation(cam):
    # image +x is world +x, image +y is world -y
    r = cm.pixel_rays(cam, np.array([300.0, 256.0]), np.array([256.0, 300.0]))
    assert r[0, 0] > 0 and abs(r[0, 1]) < 1e-15
    assert r[1, 1] < 0 and abs(r[1, 0]) < 1e-15
    assert np.all(r[:, 2] < 0)


def test_config_round_trip(cam):
    other = cm.FisheyeCamera(640, 480, 320.5, 240.25, 200.0, position=[1, 2, 3])
    for c in (cam, other):
        assert cm.from_config(cm.to_config(c)) == c
        assert hash(cm.from_config(cm.to_config(c))) == hash(c)


@pytest.mark.parametrize("kwargs", [
    dict(width=0), dict(rim_radius=0.0), dict(cx=-1.0),
    dict(orientation=np.diag([1.0, 1.0, -1.0])),
])
def test_invalid_camera(kwargs):
    with pytest.raises(ValueError):
        cm.FisheyeCamera(**kwargs)
