"""Cube, motion paths and per-frame cube poses.

All paths are NURBS curves in the ``z = 0`` plane, walked at constant speed
along their arc length. Straight paths are degree-1 curves with two control
points; the spiral is a clamped cubic through an Archimedean spiral.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import camera as _camera
from .camera import FisheyeCamera

# Gauss-Legendre nodes for arc-length quadrature
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class TextureMode(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    PER_FACE_CHECKER = "per_face_checker"


class PathKind(str, enum.Enum):
    LINEC = "linec"
    LINE = "line"
    SPIRAL = "spiral"


# -- NURBS -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    degree: int
    control_points: np.ndarray
    weights: np.ndarray
    knots: np.ndarray

    def __post_init__(self):
        pts = np.array(self.control_points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("control_points must be a (n, dim) array")
        n = pts.shape[0]
        w = np.ones(n) if self.weights is None else np.array(self.weights, dtype=np.float64)
        k = np.array(self.knots, dtype=np.float64)
        p = int(self.degree)
        if p < 1:
            raise ValueError("degree must be >= 1")
        if n < p + 1:
            raise ValueError("need at least degree + 1 control points")
        if w.shape != (n,):
            raise ValueError("need one weight per control point")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
        if k.shape != (n + p + 1,):
            raise ValueError(f"knot vector must have {n + p + 1} entries, got {k.size}")
        if np.any(np.diff(k) < 0) or not np.all(np.isfinite(k)):
            raise ValueError("knot vector must be finite and non-decreasing")
        if not k[p] < k[n]:
            raise ValueError("knot vector has an empty domain")
        for a in (pts, w, k):
            a.setflags(write=False)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "knots", k)

    @property
    def domain(self) -> tuple[float, float]:
        n = len(self.control_points)
        return float(self.knots[self.degree]), float(self.knots[n])

    @property
    def homogeneous(self) -> np.ndarray:
        return np.hstack([self.control_points * self.weights[:, None], self.weights[:, None]])


def clamped_uniform_knots(n_points: int, degree: int) -> np.ndarray:
    inner = np.linspace(0.0, 1.0, n_points - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def _check_domain(curve: NurbsCurve, t: np.ndarray):
    lo, hi = curve.domain
    if np.any(~np.isfinite(t)) or np.any(t < lo) or np.any(t > hi):
        raise ValueError(f"parameter outside curve domain [{lo}, {hi}]")


def _find_spans(knots: np.ndarray, degree: int, n: int, t: np.ndarray) -> np.ndarray:
    span = np.searchsorted(knots, t, side="right") - 1
    return np.clip(span, degree, n - 1)


def _de_boor(knots, degree, ctrl, t):
    """Vectorized de Boor recursion on an array of control rows ``ctrl``."""
    n = ctrl.shape[0]
    span = _find_spans(knots, degree, n, t)
    idx = span[:, None] - degree + np.arange(degree + 1)
    d = ctrl[idx].copy()  # (T, p+1, dim)
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = span - degree + j
            left = knots[i]
            right = knots[i + degree + 1 - r]
            denom = right - left
            alpha = np.divide(t - left, denom, out=np.zeros_like(t), where=denom > 0)
            d[:, j] = (1.0 - alpha)[:, None] * d[:, j - 1] + alpha[:, None] * d[:, j]
    return d[:, degree]


def nurbs_eval(curve: NurbsCurve, t):
    """Point on the curve at parameter ``t`` (scalar or array)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    _check_domain(curve, t_arr)
    hw = _de_boor(curve.knots, curve.degree, curve.homogeneous, t_arr.ravel())
    pts = hw[:, :-1] / hw[:, -1:]
    if np.ndim(t) == 0:
        return pts[0]
    return pts.reshape(t_arr.shape + (pts.shape[-1],))


def nurbs_derivative(curve: NurbsCurve, t):
    """First derivative ``dC/dt`` at ``t`` (scalar or array)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64)).ravel()
    _check_domain(curve, t_arr)
    p, k, hw = curve.degree, curve.knots, curve.homogeneous
    A = _de_boor(k, p, hw, t_arr)
    # derivative of the homogeneous B-spline is a degree p-1 B-spline
    span = k[p + 1:len(hw) + p] - k[1:len(hw)]
    q = np.zeros((len(hw) - 1, hw.shape[1]))
    nz = span > 0
    q[nz] = p * (hw[1:][nz] - hw[:-1][nz]) / span[nz, None]
    if p == 1:
        spans = _find_spans(k, p, len(hw), t_arr)
        dA = q[spans - 1]
    else:
        dA = _de_boor(k[1:-1], p - 1, q, t_arr)
    w, dw = A[:, -1:], dA[:, -1:]
    out = (dA[:, :-1] - dw * A[:, :-1] / w) / w
    return out[0] if np.ndim(t) == 0 else out


class ArcLengthTable:
    """Arc length of a curve as a function of its parameter, and its inverse.

    Cumulative lengths are tabulated on a dense parameter grid with
    Gauss-Legendre quadrature of the curve speed. Inversion uses monotone
    (PCHIP) interpolation of the table followed by Newton refinement.
    """

    def __init__(self, curve: NurbsCurve, samples_per_span: int = 64):
        self.curve = curve
        k = np.unique(curve.knots[curve.degree:len(curve.control_points) + 1])
        grid = np.concatenate(
            [np.linspace(a, b, samples_per_span, endpoint=False) for a, b in zip(k[:-1], k[1:])]
            + [k[-1:]]
        )
        self.t = grid
        seg = self._quad(grid[:-1], grid[1:])
        self.s = np.concatenate([[0.0], np.cumsum(seg)])
        self.total = float(self.s[-1])
        self._inverse = PchipInterpolator(self.s, self.t)

    def _quad(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        nodes = mid[..., None] + half[..., None] * _GL_X
        speed = np.linalg.norm(nurbs_derivative(self.curve, nodes.ravel()), axis=-1)
        return half * (speed.reshape(nodes.shape) @ _GL_W)

    def length_at(self, t):
        """Arc length from the domain start to parameter ``t``."""
        t = np.asarray(t, dtype=np.float64)
        i = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        return self.s[i] + self._quad(self.t[i], t)

    def param_at(self, s, tol: float = 1e-10, max_iter: int = 20):
        s_arr = np.asarray(s, dtype=np.float64)
        if np.any(~np.isfinite(s_arr)) or np.any(s_arr < 0) or np.any(s_arr > self.total * (1 + 1e-12)):
            raise ValueError(f"arc length outside [0, {self.total}]")
        lo, hi = self.curve.domain
        t = np.clip(self._inverse(s_arr), lo, hi)
        for _ in range(max_iter):
            err = self.length_at(t) - s_arr
            if np.all(np.abs(err) < tol):
                break
            speed = np.linalg.norm(nurbs_derivative(self.curve, np.atleast_1d(t)), axis=-1)
            speed = speed.reshape(np.shape(t))
            t = np.clip(t - err / np.maximum(speed, 1e-300), lo, hi)
        return float(t) if np.ndim(t) == 0 else t


def arc_length_param(curve: NurbsCurve, s, table: ArcLengthTable | None = None):
    """Parameter ``t`` at which the arc length from the domain start is ``s``."""
    table = table or ArcLengthTable(curve)
    return table.param_at(s)


# -- paths -------------------------------------------------------------------

LINE_HALF_LENGTH = 6.0
LINE_OFFSET = 3.0
# distance the cube travels on straight paths before passing the middle
LEAD_DISTANCE = 2.0
SPIRAL_TURNS = 2
SPIRAL_END_RADIUS = 8.0
SPIRAL_POINTS = 33


def line_curve(start, end) -> NurbsCurve:
    pts = np.array([start, end], dtype=np.float64)
    return NurbsCurve(1, pts, np.ones(2), np.array([0.0, 0.0, 1.0, 1.0]))


def spiral_curve(turns=SPIRAL_TURNS, end_radius=SPIRAL_END_RADIUS, n_points=SPIRAL_POINTS) -> NurbsCurve:
    """Clamped cubic NURBS with unit weights whose control points sit on the
    Archimedean spiral ``r = end_radius * a / a_max``, starting at the origin."""
    a_max = 2 * math.pi * turns
    a = np.linspace(0.0, a_max, n_points)
    r = end_radius * a / a_max
    pts = np.stack([r * np.cos(a), r * np.sin(a), np.zeros_like(a)], axis=1)
    return NurbsCurve(3, pts, np.ones(n_points), clamped_uniform_knots(n_points, 3))


@dataclass(frozen=True, eq=False)
class MotionPath:
    kind: PathKind
    curve: NurbsCurve

    @cached_property
    def table(self) -> ArcLengthTable:
        return ArcLengthTable(self.curve)

    @property
    def length(self) -> float:
        return self.table.total

    def position(self, s):
        """Point at arc length ``s`` from the start of the path."""
        return nurbs_eval(self.curve, self.table.param_at(s))


_PATH_CACHE: dict = {}


def make_path(kind, line_offset: float = LINE_OFFSET) -> MotionPath:
    kind = PathKind(kind)
    key = (kind, float(line_offset) if kind is PathKind.LINE else None)
    if key not in _PATH_CACHE:
        if kind is PathKind.LINEC:
            curve = line_curve((-LINE_HALF_LENGTH, 0, 0), (LINE_HALF_LENGTH, 0, 0))
        elif kind is PathKind.LINE:
            if line_offset == 0:
                raise ValueError("line path needs a nonzero y offset")
            curve = line_curve((-LINE_HALF_LENGTH, line_offset, 0), (LINE_HALF_LENGTH, line_offset, 0))
        else:
            curve = spiral_curve()
        _PATH_CACHE[key] = MotionPath(kind, curve)
    return _PATH_CACHE[key]


# -- cube and sequences --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CubeState:
    center: np.ndarray
    half_extent: float = 1.0
    texture_mode: TextureMode = TextureMode.PER_FACE_CHECKER

    def __post_init__(self):
        c = np.array(self.center, dtype=np.float64).reshape(3)
        if abs(c[2]) > 0:
            raise ValueError("cube center must stay in the z = 0 plane")
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "texture_mode", TextureMode(self.texture_mode))

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_extent

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_extent


@dataclass(frozen=True)
class SequenceSpec:
    """Everything needed to render one sequence deterministically.

    ``start_arc`` is the arc length at which frame 0 sits. ``None`` starts
    spirals at their origin and, on straight paths, places the cube
    `LEAD_DISTANCE` before the middle of the segment, shifted if needed so
    the traversed stretch stays on the segment.
    """

    path: PathKind = PathKind.LINEC
    speed: float = 1.0
    fps: float = 24.0
    frame_count: int = 64
    texture_mode: TextureMode = TextureMode.PER_FACE_CHECKER
    camera: FisheyeCamera = field(default_factory=FisheyeCamera)
    seed: int = 0
    line_offset: float = LINE_OFFSET
    half_extent: float = 1.0
    start_arc: float | None = None
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "path", PathKind(self.path))
        object.__setattr__(self, "texture_mode", TextureMode(self.texture_mode))
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "frame_count", int(self.frame_count))
        # speed 0 is accepted as a diagnostic (static cube)
        if not self.speed >= 0:
            raise ValueError("speed must be non-negative")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if self.frame_count < 2:
            raise ValueError("frame_count must be at least 2")
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")
        start, end = self.start, self.start + self.travel
        if start < 0 or end > self.motion.length * (1 + 1e-12):
            raise ValueError(
                f"sequence covers arc length [{start:.3f}, {end:.3f}] m but the "
                f"{self.path.value} path is only {self.motion.length:.3f} m long"
            )

    @property
    def motion(self) -> MotionPath:
        return make_path(self.path, self.line_offset)

    @property
    def travel(self) -> float:
        """Arc length covered between the first and the last frame."""
        return self.speed * (self.frame_count - 1) / self.fps

    @property
    def start(self) -> float:
        if self.start_arc is not None:
            return float(self.start_arc)
        if self.path is PathKind.SPIRAL:
            return 0.0
        start = 0.5 * self.motion.length - LEAD_DISTANCE
        return min(max(start, 0.0), max(self.motion.length - self.travel, 0.0))

    @property
    def label(self) -> str:
        return self.name or sequence_name(self)

    def arc_at_frame(self, frame: int) -> float:
        return self.start + self.speed * frame / self.fps

    def to_dict(self) -> dict:
        d = {
            "name": self.label,
            "path": self.path.value,
            "speed": self.speed,
            "fps": self.fps,
            "frame_count": self.frame_count,
            "texture": self.texture_mode.value,
            "seed": self.seed,
            "line_offset": float(self.line_offset),
            "half_extent": float(self.half_extent),
        }
        if self.start_arc is not None:
            d["start_arc"] = float(self.start_arc)
        d.update(self.camera.to_dict())
        return d


def cube_pose_at_frame(spec: SequenceSpec, frame: int) -> CubeState:
    if not 0 <= frame < spec.frame_count:
        raise IndexError(f"frame {frame} outside [0, {spec.frame_count})")
    center = spec.motion.position(spec.arc_at_frame(frame))
    center[2] = 0.0
    return CubeState(center, spec.half_extent, spec.texture_mode)


# -- names and config ------------------------------------------------------------

_NAME_RE = re.compile(r"^(linec|line|spiral)-(\d+(?:\.\d+)?)(?:-(homog|tex))?$")
DEFAULT_SPEEDS = (1, 2, 4)


def sequence_name(spec: SequenceSpec) -> str:
    speed = int(spec.speed) if float(spec.speed).is_integer() else spec.speed
    suffix = "-homog" if spec.texture_mode is TextureMode.HOMOGENEOUS else ""
    return f"{spec.path.value}-{speed}{suffix}"


def spec_from_name(name: str, **overrides) -> SequenceSpec:
    """Resolve experiment names like ``linec-4`` or ``spiral-1-homog``.

    Without a suffix (or with ``-tex``) the cube is checker-textured;
    ``-homog`` gives the uniformly colored cube.
    """
    m = _NAME_RE.match(name)
    if not m:
        raise KeyError(f"unknown sequence name {name!r}")
    path, speed, tex = m.groups()
    texture = TextureMode.HOMOGENEOUS if tex == "homog" else TextureMode.PER_FACE_CHECKER
    kwargs = dict(path=path, speed=float(speed), texture_mode=texture)
    kwargs.update(overrides)
    return SequenceSpec(**kwargs)


def all_sequence_names() -> list[str]:
    return [
        f"{p.value}-{v}{suffix}"
        for p in PathKind
        for v in DEFAULT_SPEEDS
        for suffix in ("", "-homog")
    ]


_SPEC_KEYS = {
    "name": str,
    "path": str,
    "speed": float,
    "fps": float,
    "frame_count": int,
    "texture": str,
    "seed": int,
    "line_offset": float,
    "half_extent": float,
    "start_arc": float,
}


def spec_to_config(spec: SequenceSpec) -> str:
    return _camera.format_config(spec.to_dict())


def spec_from_config(text: str) -> SequenceSpec:
    values = _camera.parse_config(text)
    unknown = set(values) - set(_SPEC_KEYS) - set(_camera.CAMERA_KEYS)
    if unknown:
        raise ValueError(f"unknown sequence keys: {sorted(unknown)}")
    kwargs = {}
    for key, conv in _SPEC_KEYS.items():
        if key in values:
            kwargs["texture_mode" if key == "texture" else key] = conv(values[key])
    cam_values = {k: v for k, v in values.items() if k in _camera.CAMERA_KEYS}
    if cam_values:
        kwargs["camera"] = _camera.camera_from_mapping(cam_values)
    return SequenceSpec(**kwargs)


def with_overrides(spec: SequenceSpec, **changes) -> SequenceSpec:
    return replace(spec, **{k: v for k, v in changes.items() if v is not None})
