import math

import numpy as np
import pytest

from fisheyeflow import camera as cm
from fisheyeflow import scene as sc

from oracles import basis_sum_point, simpson_arc_length

# Spiral constants computed with the Simpson/finite-difference oracle
# (cross-checked against the slow basis-sum evaluation).
SPIRAL_LENGTH = 50.0255414847
SPIRAL_T_HALF = 0.71416122869
SPIRAL4_F30_T = 0.28209003235
SPIRAL4_F30_XY = (-1.91809506659, -1.27955393579)


def random_curve(rng):
    p = int(rng.integers(1, 5))
    n = int(rng.integers(p + 1, p + 9))
    dim = int(rng.integers(2, 4))
    inner = np.sort(rng.uniform(0, 1, n - p - 1))
    if n - p - 1 >= 2 and rng.uniform() < 0.3:
        inner[1] = inner[0]  # a repeated interior knot
    knots = np.concatenate([np.zeros(p + 1), inner, np.ones(p + 1)])
    return sc.NurbsCurve(p, rng.normal(size=(n, dim)), rng.uniform(0.2, 3.0, n), knots)


def test_de_boor_matches_basis_sum_on_random_curves():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        c = random_curve(rng)
        t = np.concatenate([rng.uniform(0, 1, 20), [0.0, 1.0], c.knots])
        got = sc.nurbs_eval(c, t)
        for ti, g in zip(t, got):
            ref = basis_sum_point(c.control_points, c.weights, c.knots, c.degree, ti)
            worst = max(worst, float(np.max(np.abs(g - ref))))
    assert worst <= 1e-12


def test_rational_circle_radius():
    w = math.sqrt(0.5)
    pts = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)]
    c = sc.NurbsCurve(2, pts, [1, w, 1, w, 1, w, 1, w, 1],
                      [0, 0, 0, .25, .25, .5, .5, .75, .75, 1, 1, 1])
    t = np.linspace(0, 1, 10_001)
    r = np.linalg.norm(sc.nurbs_eval(c, t), axis=1)
    assert np.max(np.abs(r - 1)) <= 1e-12
    # rational parameterization is not arc length; the table still gets 2*pi
    assert sc.ArcLengthTable(c).total == pytest.approx(2 * math.pi, abs=1e-10)


def test_clamped_curve_interpolates_endpoints():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(7, 3))
    c = sc.NurbsCurve(3, pts, rng.uniform(0.5, 2, 7), sc.clamped_uniform_knots(7, 3))
    np.testing.assert_allclose(sc.nurbs_eval(c, 0.0), pts[0], atol=1e-15)
    np.testing.assert_allclose(sc.nurbs_eval(c, 1.0), pts[-1], atol=1e-15)


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(4)
    c = random_curve(rng)
    t = np.linspace(0.05, 0.95, 37)
    t = t[np.all(np.abs(t[:, None] - c.knots[None]) > 1e-4, axis=1)]
    h = 1e-6
    fd = (sc.nurbs_eval(c, t + h) - sc.nurbs_eval(c, t - h)) / (2 * h)
    np.testing.assert_allclose(sc.nurbs_derivative(c, t), fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("kwargs", [
    dict(degree=0), dict(weights=[1, 1, -1, 1]), dict(knots=[0, 0, 0, 0.5, 1, 1]),
    dict(knots=[0, 0, 0, 0.6, 0.5, 1, 1]), dict(control_points=np.zeros((2, 2))),
])
def test_invalid_curves(kwargs):
    base = dict(degree=2, control_points=np.zeros((4, 2)), weights=[1, 1, 1, 1],
                knots=[0, 0, 0, 0.5, 1, 1, 1])
    base.update(kwargs)
    with pytest.raises(ValueError):
        sc.NurbsCurve(**base)


def test_eval_outside_domain_raises():
    c = sc.make_path("linec").curve
    with pytest.raises(ValueError):
        sc.nurbs_eval(c, 1.5)


def test_spiral_length_frozen():
    path = sc.make_path("spiral")
    assert path.length == pytest.approx(SPIRAL_LENGTH, abs=1e-8)
    assert path.table.param_at(0.5 * SPIRAL_LENGTH) == pytest.approx(SPIRAL_T_HALF, abs=1e-9)


def test_spiral_length_against_simpson():
    curve = sc.make_path("spiral").curve

    def point(t):
        return sc.nurbs_eval(curve, t)

    table = sc.make_path("spiral").table
    for a, b in [(0.0, 0.1), (0.3, 0.55), (0.0, 1.0)]:
        ref = simpson_arc_length(point, a, b)
        assert table.length_at(b) - table.length_at(a) == pytest.approx(ref, abs=1e-7)


def test_spiral_frame_pose_frozen():
    spec = sc.spec_from_name("spiral-4")
    assert spec.motion.table.param_at(spec.arc_at_frame(30)) == pytest.approx(SPIRAL4_F30_T, abs=1e-9)
    c = sc.cube_pose_at_frame(spec, 30).center
    np.testing.assert_allclose(c[:2], SPIRAL4_F30_XY, atol=1e-9)
    assert c[2] == 0.0


def test_spiral_starts_at_origin_and_stays_in_plane():
    path = sc.make_path("spiral")
    np.testing.assert_allclose(path.position(0.0), [0, 0, 0], atol=1e-15)
    s = np.linspace(0, path.length, 300)
    assert np.all(path.position(s)[:, 2] == 0)


@pytest.mark.parametrize("name", ["linec-1", "linec-4", "line-2", "spiral-1", "spiral-2", "spiral-4"])
def test_uniform_step_length(name):
    spec = sc.spec_from_name(name)
    curve = spec.motion.curve
    t = np.array([spec.motion.table.param_at(spec.arc_at_frame(k)) for k in range(spec.frame_count)])

    def point(x):
        return sc.nurbs_eval(curve, np.clip(x, 0, 1))

    steps = [simpson_arc_length(point, a, b, h=1e-5) for a, b in zip(t[:-1], t[1:])]
    assert np.max(np.abs(np.array(steps) - spec.speed / spec.fps)) < 1e-6


def test_cube_stays_on_floor_plane():
    for name in ("linec-2", "line-4", "spiral-2"):
        spec = sc.spec_from_name(name)
        for k in (0, 17, spec.frame_count - 1):
            assert sc.cube_pose_at_frame(spec, k).center[2] == 0.0
    with pytest.raises(ValueError):
        sc.CubeState([0, 0, 0.5])


def test_linec_crosses_principal_point():
    spec = sc.spec_from_name("linec-1")
    centers = np.array([sc.cube_pose_at_frame(spec, k).center for k in range(64)])
    k = int(np.argmin(np.abs(centers[:, 0])))
    assert k == 48 and centers[k, 0] == pytest.approx(0.0, abs=1e-12)
    top = centers[k] + [0, 0, 1.0]
    x, y, ok = cm.project_points(spec.camera, top)
    assert ok and x == pytest.approx(256.0, abs=1e-9) and y == pytest.approx(256.0, abs=1e-9)


def test_line_offset_never_passes_under_camera():
    spec = sc.spec_from_name("line-4")
    for k in range(spec.frame_count):
        assert sc.cube_pose_at_frame(spec, k).center[1] == pytest.approx(3.0, abs=1e-12)


def test_frame_out_of_range():
    spec = sc.spec_from_name("linec-1")
    with pytest.raises(IndexError):
        sc.cube_pose_at_frame(spec, 64)
    with pytest.raises(IndexError):
        sc.cube_pose_at_frame(spec, -1)


def test_sequence_too_long_for_path():
    with pytest.raises(ValueError):
        sc.spec_from_name("linec-4", frame_count=2000)
    with pytest.raises(ValueError):
        sc.SequenceSpec(speed=-1)


def test_names_round_trip():
    names = sc.all_sequence_names()
    assert len(names) == 18 and len(set(names)) == 18
    for n in names:
        assert sc.sequence_name(sc.spec_from_name(n)) == n
    assert sc.spec_from_name("spiral-2-tex").texture_mode is sc.TextureMode.PER_FACE_CHECKER
    with pytest.raises(KeyError):
        sc.spec_from_name("circle-1")


def test_config_round_trip():
    spec = sc.spec_from_name("line-2-homog", seed=7, frame_count=10, start_arc=1.5)
    back = sc.spec_from_config(sc.spec_to_config(spec))
    assert back.to_dict() == spec.to_dict()
    with pytest.raises(ValueError):
        sc.spec_from_config("bogus = 1\n")
