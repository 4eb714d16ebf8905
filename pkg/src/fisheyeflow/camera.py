"""Equidistant fish-eye camera.

An incoming ray is described by its incidence angle ``theta`` (angle to the
optical axis) and azimuth ``phi``. The equidistant model maps it to

    x = cx + s * theta * cos(phi)
    y = cy + s * theta * sin(phi)

with the radial scale ``s = rim_radius / (pi / 2)``, so the full hemisphere
(``theta = pi/2``) lands on the image circle of radius ``rim_radius``.

Coordinate conventions
----------------------
Camera frame is right-handed: ``+x`` right, ``+y`` down, ``+z`` along the
optical axis. ``phi`` is measured from ``+x`` towards ``+y``, which is
clockwise on screen because the raster ``y`` axis points down.

Pixel ``(row i, col j)`` covers the square ``[j, j+1) x [i, i+1)`` and its
center sits at ``(j + 0.5, i + 0.5)``. With the default 512x512 camera the
principal point ``(256, 256)`` is the exact image center.

The default pose hangs the camera 2.5 m above the origin looking straight
down. Image ``+x`` is world ``+x``, which makes image ``+y`` world ``-y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

HALF_PI = 0.5 * math.pi
# slack for theta / radius comparisons at the rim
_RIM_RTOL = 1e-12

DOWNWARD = np.array(
    [[1.0, 0.0, 0.0],
     [0.0, -1.0, 0.0],
     [0.0, 0.0, -1.0]]
)


class InvalidPixelError(ValueError):
    """Pixel lies outside the image circle."""


class BehindCameraError(ValueError):
    """Ray direction lies outside the front hemisphere."""


class SphericalDirection(NamedTuple):
    theta: float
    phi: float


class PixelCoord(NamedTuple):
    x: float
    y: float


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FisheyeCamera:
    """Equidistant fish-eye camera with a rigid pose.

    ``orientation`` is the world-from-camera rotation; its columns are the
    camera axes expressed in world coordinates.
    """

    width: int = 512
    height: int = 512
    cx: float = 256.0
    cy: float = 256.0
    rim_radius: float = 256.0
    position: np.ndarray = field(default_factory=lambda: _frozen([0.0, 0.0, 2.5]))
    orientation: np.ndarray = field(default_factory=lambda: _frozen(DOWNWARD))

    def __post_init__(self):
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "rim_radius", float(self.rim_radius))
        pos = _frozen(self.position).reshape(3)
        rot = _frozen(self.orientation).reshape(3, 3)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", rot)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not self.rim_radius > 0:
            raise ValueError("rim_radius must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9) or np.linalg.det(rot) < 0:
            raise ValueError("orientation must be a proper rotation matrix")

    def __eq__(self, other):
        if not isinstance(other, FisheyeCamera):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(to_config(self))

    @property
    def scale(self) -> float:
        """Pixels per radian of incidence angle."""
        return self.rim_radius / HALF_PI

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cx": self.cx,
            "cy": self.cy,
            "rim_radius": self.rim_radius,
            "position": [float(v) for v in self.position],
            "orientation": [float(v) for v in self.orientation.ravel()],
        }


def project(cam: FisheyeCamera, theta, phi):
    """Map incidence angle and azimuth to pixel coordinates.

    Accepts scalars or broadcastable arrays. Raises `BehindCameraError` if any
    ``theta`` is outside ``[0, pi/2]``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta > HALF_PI * (1 + _RIM_RTOL)):
        raise BehindCameraError("theta must lie in [0, pi/2]")
    r = cam.scale * theta
    x = cam.cx + r * np.cos(phi)
    y = cam.cy + r * np.sin(phi)
    if x.ndim == 0:
        return PixelCoord(float(x), float(y))
    return x, y


def unproject(cam: FisheyeCamera, x, y):
    """Inverse of `project`; ``phi`` is normalized to ``[0, 2*pi)``.

    The principal point maps to ``theta = 0, phi = 0``. Raises
    `InvalidPixelError` for pixels outside the image circle.
    """
    dx = np.asarray(x, dtype=np.float64) - cam.cx
    dy = np.asarray(y, dtype=np.float64) - cam.cy
    r = np.hypot(dx, dy)
    if np.any(~np.isfinite(r)) or np.any(r > cam.rim_radius * (1 + _RIM_RTOL)):
        raise InvalidPixelError("pixel lies outside the image circle")
    theta = np.minimum(r / cam.scale, HALF_PI)
    phi = np.mod(np.arctan2(dy, dx), 2 * math.pi)
    # mod can return 2*pi for tiny negative angles
    phi = np.where(phi >= 2 * math.pi, 0.0, phi)
    if theta.ndim == 0:
        return SphericalDirection(float(theta), float(phi))
    return theta, phi


def pixel_centers(cam: FisheyeCamera):
    """Continuous coordinates of every pixel center, as ``(x, y)`` grids."""
    ys, xs = np.mgrid[0:cam.height, 0:cam.width]
    return xs + 0.5, ys + 0.5


def image_circle_mask(cam: FisheyeCamera) -> np.ndarray:
    """Boolean ``(height, width)`` grid, true where the pixel center is on or
    inside the image circle."""
    x, y = pixel_centers(cam)
    return np.hypot(x - cam.cx, y - cam.cy) <= cam.rim_radius


def direction_to_camera(theta, phi) -> np.ndarray:
    """Unit ray directions in the camera frame, shape ``(..., 3)``."""
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def pixel_rays(cam: FisheyeCamera, x, y) -> np.ndarray:
    """World-frame unit ray directions through pixel coordinates."""
    theta, phi = unproject(cam, x, y)
    return direction_to_camera(theta, phi) @ cam.orientation.T


def world_to_camera(cam: FisheyeCamera, points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    return (points - cam.position) @ cam.orientation


def project_points(cam: FisheyeCamera, points):
    """Project world points to pixels without raising.

    Returns ``(x, y, in_front)`` where ``in_front`` is false for points with
    incidence angle above ``pi/2`` (their pixel coordinates are NaN) or
    coinciding with the projection center.
    """
    pc = world_to_camera(cam, points)
    lateral = np.hypot(pc[..., 0], pc[..., 1])
    theta = np.arctan2(lateral, pc[..., 2])
    phi = np.arctan2(pc[..., 1], pc[..., 0])
    ok = (theta <= HALF_PI) & ((lateral > 0) | (pc[..., 2] > 0))
    r = cam.scale * theta
    x = np.where(ok, cam.cx + r * np.cos(phi), np.nan)
    y = np.where(ok, cam.cy + r * np.sin(phi), np.nan)
    return x, y, ok


# -- plain-text config ------------------------------------------------------

CAMERA_KEYS = ("width", "height", "cx", "cy", "rim_radius", "position", "orientation")


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines. Blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(items: dict) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in items.items())


def to_config(cam: FisheyeCamera) -> str:
    return format_config(cam.to_dict())


def camera_from_mapping(values: dict[str, str]) -> FisheyeCamera:
    kwargs = {}
    for key in CAMERA_KEYS:
        if key not in values:
            continue
        raw = values[key]
        if key in ("width", "height"):
            kwargs[key] = int(raw)
        elif key in ("position", "orientation"):
            kwargs[key] = [float(t) for t in raw.replace(",", " ").split()]
        else:
            kwargs[key] = float(raw)
    return FisheyeCamera(**kwargs)


def from_config(text: str) -> FisheyeCamera:
    values = parse_config(text)
    unknown = set(values) - set(CAMERA_KEYS)
    if unknown:
        raise ValueError(f"unknown camera keys: {sorted(unknown)}")
    return camera_from_mapping(values)
