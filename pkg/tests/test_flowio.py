import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fisheyeflow import flowio as fio

from oracles import ring_table

# 1x1 zero field written out by hand: magic, width, height, u, v
GOLDEN = (
    b"PIEH"  # 202021.25 as little-endian float32
    b"\x01\x00\x00\x00" b"\x01\x00\x00\x00"
    b"\x00\x00\x00\x00" b"\x00\x00\x00\x00"
)


def test_golden_file():
    # 12-byte header plus one float32 pair
    assert len(GOLDEN) == 20
    assert fio.encode_flo(fio.FlowField.zeros(1, 1)) == GOLDEN
    back = fio.decode_flo(GOLDEN)
    assert back.u[0, 0] == 0.0 and back.v[0, 0] == 0.0 and back.valid.all()


def test_golden_nonzero():
    buf = GOLDEN[:12] + b"\x00\x00\xc0\x3f" b"\x00\x00\x00\xc0"
    assert fio.encode_flo(fio.FlowField([[1.5]], [[-2.0]])) == buf
    back = fio.decode_flo(buf)
    assert back.u[0, 0] == 1.5 and back.v[0, 0] == -2.0


def test_bad_magic():
    with pytest.raises(fio.BadMagicError):
        fio.decode_flo(b"PIEX" + GOLDEN[4:])


@pytest.mark.parametrize("n", [0, 3, 8, 15, 19])
def test_truncated(n):
    with pytest.raises(fio.TruncatedFloError):
        fio.decode_flo(GOLDEN[:n])


@pytest.mark.parametrize("dims", [(0, 1), (1, 0), (-3, 2)])
def test_nonpositive_dimensions(dims):
    buf = GOLDEN[:4] + np.array(dims, "<i4").tobytes() + GOLDEN[12:]
    with pytest.raises(fio.BadDimensionsError):
        fio.decode_flo(buf)


def test_errors_are_value_errors():
    assert issubclass(fio.FloFormatError, ValueError)


def test_unknown_flow_marks_invalid():
    valid = np.array([[True, False], [True, True]])
    f = fio.FlowField(np.ones((2, 2)), np.ones((2, 2)), valid)
    buf = fio.encode_flo(f)
    raw = np.frombuffer(buf, "<f4", offset=12).reshape(2, 2, 2)
    assert raw[0, 1, 0] == 1e10 and raw[0, 1, 1] == 1e10
    back = fio.decode_flo(buf)
    assert np.array_equal(back.valid, valid)
    assert back.u[0, 1] == 0.0


f32 = st.floats(-1e4, 1e4, width=32, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(uv=hnp.arrays(np.float32, hnp.array_shapes(min_dims=3, max_dims=3, min_side=1, max_side=9)
                     .map(lambda s: s[:2] + (2,)), elements=f32))
def test_round_trip_byte_identical(uv):
    f = fio.FlowField.from_uv(uv)
    buf = fio.encode_flo(f)
    back = fio.decode_flo(buf)
    assert back == f
    assert fio.encode_flo(back) == buf


def test_file_and_stream_io(tmp_path):
    f = fio.FlowField(np.arange(6.0).reshape(2, 3), -np.arange(6.0).reshape(2, 3))
    p = tmp_path / "a.flo"
    fio.write_flo(f, p)
    assert fio.read_flo(p) == f
    buf = io.BytesIO()
    fio.write_flo(f, buf)
    assert buf.getvalue() == p.read_bytes()
    buf.seek(0)
    assert fio.read_flo(buf) == f


def test_flow_field_validation():
    with pytest.raises(ValueError):
        fio.FlowField(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        fio.FlowField([[np.nan]], [[0.0]])
    f = fio.FlowField([[np.nan]], [[0.0]], [[False]])
    assert f.u[0, 0] == 0.0
    with pytest.raises(ValueError):
        f.u[0, 0] = 1.0


# -- color coding ----------------------------------------------------------------


def test_colorwheel_matches_ring_oracle():
    assert fio.COLORWHEEL.shape == (55, 3)
    np.testing.assert_array_equal(fio.COLORWHEEL, np.array(ring_table(), float))


def test_zero_flow_is_white_and_invalid_black():
    f = fio.FlowField(np.zeros((3, 3)), np.zeros((3, 3)), np.eye(3, dtype=bool))
    img = fio.flow_to_color(f, max_mag=1.0)
    assert np.all(img[np.eye(3, dtype=bool)] == 255)
    assert np.all(img[~np.eye(3, dtype=bool)] == 0)


def test_primary_directions():
    f = fio.FlowField([[1.0, -1.0]], [[0.0, 0.0]])
    img = fio.flow_to_color(f, max_mag=1.0)
    assert img[0, 0].tolist() == [255, 0, 0]
    r, g, b = img[0, 1]
    assert r == 0 and b == 255 and 150 < g < 230  # cyan side of the ring


def test_saturation_linear_and_clamped():
    ring = fio.COLORWHEEL[0] / 255
    for m, s in [(0.25, 0.25), (0.5, 0.5), (1.0, 1.0), (3.0, 1.0)]:
        c = fio.flow_to_color_float(fio.FlowField([[m]], [[0.0]]), max_mag=1.0)[0, 0]
        np.testing.assert_allclose(c, 1 - s * (1 - ring), atol=1e-12)


def test_rotation_by_one_ring_step():
    step = 2 * math.pi / 55
    base = -math.pi + 0.3 * step  # angle measured as in atan2(-v, -u)
    ang = base + step * np.arange(55)
    # (-u, -v) = (cos, sin)
    f = fio.FlowField(-np.cos(ang)[None], -np.sin(ang)[None])
    c = fio.flow_to_color_float(f, max_mag=1.0)[0]
    for k in range(55):
        expected = (0.7 * fio.COLORWHEEL[k] + 0.3 * fio.COLORWHEEL[(k + 1) % 55]) / 255
        np.testing.assert_allclose(c[k], expected, atol=1e-9)


def test_scale_invariance():
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(2, 20, 20))
    a = fio.flow_to_color(fio.FlowField(u, v))
    b = fio.flow_to_color(fio.FlowField(7.5 * u, 7.5 * v))
    assert np.array_equal(a, b)


def test_default_max_mag_is_99th_percentile():
    u = np.linspace(0, 10, 101)[None]
    f = fio.FlowField(u, np.zeros_like(u))
    assert fio.flow_max_magnitude(f) == pytest.approx(9.9)


def test_png_round_trip(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    fio.write_png(tmp_path / "a.png", img)
    assert np.array_equal(fio.read_png(tmp_path / "a.png"), img)
    assert fio.png_bytes(img) == (tmp_path / "a.png").read_bytes()
