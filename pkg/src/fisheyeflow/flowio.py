"""Dense flow fields, the Middlebury ``.flo`` codec and color-wheel coding."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

FLO_MAGIC = 202021.25
# u or v beyond this marks a pixel as unknown
UNKNOWN_FLOW_THRESH = 1e9
UNKNOWN_FLOW = 1e10


class FloFormatError(ValueError):
    pass


class BadMagicError(FloFormatError):
    pass


class TruncatedFloError(FloFormatError):
    pass


class BadDimensionsError(FloFormatError):
    pass


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacement ``(u, v)`` in pixels with a validity mask.

    ``v`` follows the raster convention (positive is down). Values at invalid
    pixels are stored as zero.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        v = np.array(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise ValueError("u and v must be 2-D grids of the same shape")
        valid = np.ones(u.shape, bool) if self.valid is None else np.array(self.valid, dtype=bool)
        if valid.shape != u.shape:
            raise ValueError("valid mask shape does not match the flow")
        if not (np.all(np.isfinite(u[valid])) and np.all(np.isfinite(v[valid]))):
            raise ValueError("flow must be finite on valid pixels")
        u[~valid] = 0.0
        v[~valid] = 0.0
        for a in (u, v, valid):
            a.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def zeros(cls, height: int, width: int, valid=None) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)), valid)

    @classmethod
    def from_uv(cls, uv, valid=None) -> "FlowField":
        uv = np.asarray(uv)
        return cls(uv[..., 0], uv[..., 1], valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def uv(self) -> np.ndarray:
        return np.stack([self.u, self.v], axis=-1)

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def __eq__(self, other):
        if not isinstance(other, FlowField):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.valid, other.valid)
        )


# -- .flo codec ------------------------------------------------------------------


def encode_flo(flow: FlowField) -> bytes:
    h, w = flow.shape
    if h <= 0 or w <= 0:
        raise BadDimensionsError("flow has no pixels")
    data = np.empty((h, w, 2), dtype="<f4")
    data[..., 0] = np.where(flow.valid, flow.u, UNKNOWN_FLOW)
    data[..., 1] = np.where(flow.valid, flow.v, UNKNOWN_FLOW)
    header = np.array([FLO_MAGIC], "<f4").tobytes() + np.array([w, h], "<i4").tobytes()
    return header + data.tobytes()


def decode_flo(buf: bytes) -> FlowField:
    if len(buf) < 4:
        raise TruncatedFloError("missing magic number")
    magic = np.frombuffer(buf, "<f4", count=1)[0]
    if magic != np.float32(FLO_MAGIC):
        raise BadMagicError(f"bad magic number {magic!r}, expected {FLO_MAGIC}")
    if len(buf) < 12:
        raise TruncatedFloError("missing dimensions")
    w, h = (int(x) for x in np.frombuffer(buf, "<i4", count=2, offset=4))
    if w <= 0 or h <= 0:
        raise BadDimensionsError(f"nonpositive dimensions {w}x{h}")
    n = w * h * 2
    if len(buf) < 12 + 4 * n:
        raise TruncatedFloError(f"expected {4 * n} bytes of flow data, got {len(buf) - 12}")
    data = np.frombuffer(buf, "<f4", count=n, offset=12).reshape(h, w, 2).astype(np.float64)
    u, v = data[..., 0], data[..., 1]
    valid = (
        np.isfinite(u) & np.isfinite(v)
        & (np.abs(u) <= UNKNOWN_FLOW_THRESH) & (np.abs(v) <= UNKNOWN_FLOW_THRESH)
    )
    return FlowField(u, v, valid)


def write_flo(flow: FlowField, sink) -> None:
    """Write Middlebury ``.flo`` to a path or binary file object."""
    payload = encode_flo(flow)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(payload)
    else:
        sink.write(payload)


def read_flo(source) -> FlowField:
    if isinstance(source, (bytes, bytearray)):
        return decode_flo(bytes(source))
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return decode_flo(fh.read())
    return decode_flo(source.read())


# -- color coding ---------------------------------------------------------------

# steps between the six primary hues of the wheel
RY, YG, GC, CB, BM, MR = 15, 6, 4, 11, 13, 6


def make_colorwheel() -> np.ndarray:
    """The 55-entry color ring, RGB in ``[0, 255]``."""
    ncols = RY + YG + GC + CB + BM + MR
    wheel = np.zeros((ncols, 3))
    col = 0
    wheel[col:col + RY, 0] = 255
    wheel[col:col + RY, 1] = np.floor(255 * np.arange(RY) / RY)
    col += RY
    wheel[col:col + YG, 0] = 255 - np.floor(255 * np.arange(YG) / YG)
    wheel[col:col + YG, 1] = 255
    col += YG
    wheel[col:col + GC, 1] = 255
    wheel[col:col + GC, 2] = np.floor(255 * np.arange(GC) / GC)
    col += GC
    wheel[col:col + CB, 1] = 255 - np.floor(255 * np.arange(CB) / CB)
    wheel[col:col + CB, 2] = 255
    col += CB
    wheel[col:col + BM, 2] = 255
    wheel[col:col + BM, 0] = np.floor(255 * np.arange(BM) / BM)
    col += BM
    wheel[col:col + MR, 2] = 255 - np.floor(255 * np.arange(MR) / MR)
    wheel[col:col + MR, 0] = 255
    return wheel


COLORWHEEL = make_colorwheel()


def flow_max_magnitude(flow: FlowField, percentile: float = 99.0) -> float:
    """Normalization radius: the given percentile of valid magnitudes."""
    mag = flow.magnitude[flow.valid]
    if mag.size == 0:
        return 0.0
    return float(np.percentile(mag, percentile))


def flow_to_color_float(flow: FlowField, max_mag: float | None = None) -> np.ndarray:
    """Color-coded flow as floats in ``[0, 1]``; see `flow_to_color`."""
    if max_mag is None:
        max_mag = flow_max_magnitude(flow)
    if not max_mag > 0:
        max_mag = 1.0
    u = flow.u / max_mag
    v = flow.v / max_mag
    rad = np.minimum(np.hypot(u, v), 1.0)
    ncols = len(COLORWHEEL)
    a = np.arctan2(-v, -u) / np.pi
    # wrap so that angles +pi and -pi land on the same ring entry
    fk = np.mod((a + 1) / 2 * ncols, ncols)
    k0 = np.floor(fk).astype(int) % ncols
    k1 = (k0 + 1) % ncols
    f = (fk - np.floor(fk))[..., None]
    col = ((1 - f) * COLORWHEEL[k0] + f * COLORWHEEL[k1]) / 255.0
    col = 1 - rad[..., None] * (1 - col)
    col[~flow.valid] = 0.0
    return col


def flow_to_color(flow: FlowField, max_mag: float | None = None) -> np.ndarray:
    """Color-wheel visualization as an ``(H, W, 3)`` uint8 image.

    Hue encodes direction, saturation grows linearly with
    ``|flow| / max_mag`` up to 1. ``max_mag`` defaults to the 99th percentile
    of valid magnitudes. Zero flow is white, invalid pixels are black.
    """
    return np.floor(255 * flow_to_color_float(flow, max_mag) + 1e-9).astype(np.uint8)


def write_png(path, image: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(image)).save(path, format="PNG")


def read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im).copy()


def png_bytes(image: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image)).save(buf, format="PNG")
    return buf.getvalue()
