"""Analytic ray caster and ground-truth flow for the moving-cube scene.

One ray per pixel center is cast from the camera against the axis-aligned
cube (slab test) and the floor plane ``z = -1``. Everything else is horizon.
Ground-truth flow moves each visible cube surface point rigidly with the cube
to the next frame and re-projects it; the background is static so its flow
is exactly zero.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import camera as cm
from .flowio import FlowField, encode_flo, png_bytes
from .scene import CubeState, SequenceSpec, TextureMode, cube_pose_at_frame

FLOOR_Z = -1.0
FAR_LIMIT = 100.0
FLOOR_TILE = 0.5
CHECKER_CELLS = 8

CUBE_GRAY = np.array([128, 128, 128], np.uint8)
FLOOR_COLORS = np.array([[178, 166, 140], [86, 94, 112]], np.uint8)
HORIZON_COLOR = np.array([150, 180, 215], np.uint8)

# face ids: +x, -x, +y, -y, +z, -z
FACE_AXES = np.array([0, 0, 1, 1, 2, 2])
FACE_SIGNS = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
# in-plane axes (a, b) for each face
FACE_PLANE = np.array([[1, 2], [1, 2], [0, 2], [0, 2], [0, 1], [0, 1]])


class HitKind(enum.IntEnum):
    NONE = -1
    CUBE = 0
    FLOOR = 1
    HORIZON = 2


@dataclass(frozen=True)
class Hit:
    kind: HitKind
    point_local: np.ndarray
    distance: float
    face: int = -1


@dataclass(frozen=True, eq=False)
class RayHits:
    """Vectorized cast result. Arrays are flat over the cast rays."""

    kind: np.ndarray
    face: np.ndarray
    distance: np.ndarray
    point: np.ndarray  # world coordinates
    point_local: np.ndarray  # cube-local for cube hits, world otherwise


def intersect_box(origin, dirs, lo, hi):
    """Slab test. Returns ``(t_enter, face, hit)`` per ray."""
    dirs = np.asarray(dirs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - origin) / dirs
        t2 = (hi - origin) / dirs
    # rays parallel to a slab: inside -> unbounded, outside -> empty
    inside = (origin >= lo) & (origin <= hi)
    par = dirs == 0
    t_near = np.where(par, np.where(inside, -np.inf, np.inf), np.fmin(t1, t2))
    t_far = np.where(par, np.where(inside, np.inf, -np.inf), np.fmax(t1, t2))
    axis = np.argmax(t_near, axis=-1)
    t_enter = np.take_along_axis(t_near, axis[..., None], -1)[..., 0]
    t_exit = np.min(t_far, axis=-1)
    hit = (t_enter <= t_exit) & (t_enter > 0)
    d_axis = np.take_along_axis(dirs, axis[..., None], -1)[..., 0]
    # entering against the axis direction means the + face
    face = 2 * axis + (d_axis > 0)
    return t_enter, face, hit


def cast_rays(origin, dirs, cube: CubeState | None) -> RayHits:
    """Nearest intersection of each ray with the cube, the floor or the horizon."""
    origin = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = len(dirs)
    kind = np.full(n, HitKind.HORIZON, np.int8)
    face = np.full(n, -1, np.int8)
    dist = np.full(n, np.inf)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_floor = (FLOOR_Z - origin[2]) / dirs[:, 2]
    on_floor = (dirs[:, 2] < 0) & (t_floor > 0) & (t_floor <= FAR_LIMIT)
    kind[on_floor] = HitKind.FLOOR
    dist[on_floor] = t_floor[on_floor]

    if cube is not None:
        t_box, f_box, hit = intersect_box(origin, dirs, cube.lo, cube.hi)
        hit &= t_box < dist
        kind[hit] = HitKind.CUBE
        face[hit] = f_box[hit]
        dist[hit] = t_box[hit]

    finite = np.isfinite(dist)
    point = np.full((n, 3), np.nan)
    point[finite] = origin + dist[finite, None] * dirs[finite]
    local = point.copy()
    is_cube = kind == HitKind.CUBE
    if cube is not None and np.any(is_cube):
        loc = point[is_cube] - cube.center
        f = face[is_cube].astype(int)
        # snap onto the face plane and clamp in-plane coordinates
        loc = np.clip(loc, -cube.half_extent, cube.half_extent)
        loc[np.arange(len(f)), FACE_AXES[f]] = FACE_SIGNS[f] * cube.half_extent
        local[is_cube] = loc
        point[is_cube] = loc + cube.center
    on_floor_final = kind == HitKind.FLOOR
    point[on_floor_final, 2] = FLOOR_Z
    local[on_floor_final, 2] = FLOOR_Z
    return RayHits(kind, face, dist, point, local)


def cast_ray(cam: cm.FisheyeCamera, pixel, cube: CubeState | None) -> Hit:
    """Cast the ray through one (continuous) pixel coordinate."""
    x, y = pixel
    d = cm.pixel_rays(cam, np.array([x]), np.array([y]))
    r = cast_rays(cam.position, d, cube)
    return Hit(HitKind(int(r.kind[0])), r.point_local[0], float(r.distance[0]), int(r.face[0]))


@lru_cache(maxsize=8)
def _camera_rays(cam: cm.FisheyeCamera):
    """Flat pixel indices, pixel centers and world rays of the image circle."""
    mask = cm.image_circle_mask(cam)
    ys, xs = np.nonzero(mask)
    px, py = xs + 0.5, ys + 0.5
    dirs = cm.pixel_rays(cam, px, py)
    for a in (mask, px, py, dirs):
        a.setflags(write=False)
    return mask, px, py, dirs


def face_colors(seed: int) -> np.ndarray:
    """Two contrasting colors per cube face, shape ``(6, 2, 3)``."""
    rng = np.random.default_rng(seed)
    light = rng.integers(150, 256, size=(6, 3))
    dark = rng.integers(0, 100, size=(6, 3))
    return np.stack([light, dark], axis=1).astype(np.uint8)


def shade(hits: RayHits, cube: CubeState, seed: int) -> np.ndarray:
    rgb = np.empty((len(hits.kind), 3), np.uint8)
    rgb[:] = HORIZON_COLOR

    fl = hits.kind == HitKind.FLOOR
    cell = np.floor(hits.point[fl, :2] / FLOOR_TILE).astype(np.int64)
    rgb[fl] = FLOOR_COLORS[(cell[:, 0] + cell[:, 1]) & 1]

    cb = hits.kind == HitKind.CUBE
    if cube.texture_mode is TextureMode.HOMOGENEOUS:
        rgb[cb] = CUBE_GRAY
    else:
        f = hits.face[cb].astype(int)
        loc = hits.point_local[cb]
        h = cube.half_extent
        rows = np.arange(len(f))
        a = loc[rows, FACE_PLANE[f, 0]]
        b = loc[rows, FACE_PLANE[f, 1]]
        ia = np.clip(np.floor((a + h) / (2 * h) * CHECKER_CELLS), 0, CHECKER_CELLS - 1).astype(int)
        ib = np.clip(np.floor((b + h) / (2 * h) * CHECKER_CELLS), 0, CHECKER_CELLS - 1).astype(int)
        rgb[cb] = face_colors(seed)[f, (ia + ib) & 1]
    return rgb


@dataclass(frozen=True, eq=False)
class FrameBundle:
    image: np.ndarray
    fg_mask: np.ndarray
    gt_flow: FlowField | None = None


def _cast_frame(spec: SequenceSpec, frame: int):
    cube = cube_pose_at_frame(spec, frame)
    mask, px, py, dirs = _camera_rays(spec.camera)
    return cube, mask, px, py, cast_rays(spec.camera.position, dirs, cube)


def render_frame(spec: SequenceSpec, frame: int) -> FrameBundle:
    """RGB image and foreground mask of one frame (no flow)."""
    cube, mask, _, _, hits = _cast_frame(spec, frame)
    h, w = spec.camera.shape
    image = np.zeros((h, w, 3), np.uint8)
    image[mask] = shade(hits, cube, spec.seed)
    fg = np.zeros((h, w), bool)
    fg[mask] = hits.kind == HitKind.CUBE
    return FrameBundle(image, fg)


def _flow_from_hits(spec, frame, cube, mask, px, py, hits) -> FlowField:
    h, w = spec.camera.shape
    nxt = cube_pose_at_frame(spec, frame + 1)
    u = np.zeros((h, w))
    v = np.zeros((h, w))
    valid = mask.copy()
    cb = hits.kind == HitKind.CUBE
    moved = hits.point_local[cb] + nxt.center
    qx, qy, ok = cm.project_points(spec.camera, moved)
    fu = np.zeros(len(cb))
    fv = np.zeros(len(cb))
    good = np.ones(len(cb), bool)
    fu[cb] = np.where(ok, qx - px[cb], 0.0)
    fv[cb] = np.where(ok, qy - py[cb], 0.0)
    good[cb] = ok
    u[mask] = fu
    v[mask] = fv
    valid[mask] = good
    return FlowField(u, v, valid)


def ground_truth_flow(spec: SequenceSpec, frame: int) -> FlowField:
    """Analytic flow from ``frame`` to ``frame + 1``.

    Pixels outside the image circle, and cube points that move behind the
    front hemisphere, are invalid. Points occluded at ``frame + 1`` still get
    their projected motion.
    """
    if not 0 <= frame < spec.frame_count - 1:
        raise IndexError(f"no flow for frame {frame}: need frame and frame + 1 in range")
    return _flow_from_hits(spec, frame, *_cast_frame(spec, frame))


def render_bundle(spec: SequenceSpec, frame: int) -> FrameBundle:
    """Image, mask and (except for the last frame) ground-truth flow."""
    cube, mask, px, py, hits = _cast_frame(spec, frame)
    h, w = spec.camera.shape
    image = np.zeros((h, w, 3), np.uint8)
    image[mask] = shade(hits, cube, spec.seed)
    fg = np.zeros((h, w), bool)
    fg[mask] = hits.kind == HitKind.CUBE
    flow = None
    if frame < spec.frame_count - 1:
        flow = _flow_from_hits(spec, frame, cube, mask, px, py, hits)
    return FrameBundle(image, fg, flow)


# -- sequence on disk -------------------------------------------------------------

FRAME_FMT = "frame_{:04d}.png"
MASK_FMT = "mask_{:04d}.png"
FLOW_FMT = "flow_{:04d}.flo"
MANIFEST = "manifest.json"
SPEC_FILE = "sequence.cfg"


def _encode_frame(spec: SequenceSpec, frame: int) -> dict[str, bytes]:
    b = render_bundle(spec, frame)
    out = {
        FRAME_FMT.format(frame): png_bytes(b.image),
        MASK_FMT.format(frame): png_bytes(b.fg_mask.astype(np.uint8) * 255),
    }
    if b.gt_flow is not None:
        out[FLOW_FMT.format(frame)] = encode_flo(b.gt_flow)
    return out


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_sequence(spec: SequenceSpec, out_dir, jobs: int = 1) -> dict:
    """Render a whole sequence into ``out_dir`` and write its manifest.

    Returns the manifest: the spec echo plus a SHA-256 per written file.
    """
    from .scene import spec_to_config

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = range(spec.frame_count)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_encode_frame, [spec] * len(frames), frames))
    else:
        results = [_encode_frame(spec, k) for k in frames]

    hashes = {}
    for files in results:
        for name, payload in files.items():
            (out_dir / name).write_bytes(payload)
            hashes[name] = sha256(payload)
    cfg = spec_to_config(spec)
    (out_dir / SPEC_FILE).write_text(cfg)
    hashes[SPEC_FILE] = sha256(cfg.encode())
    manifest = {"spec": spec.to_dict(), "files": dict(sorted(hashes.items()))}
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def verify_manifest(seq_dir) -> list[str]:
    """Names of files whose content no longer matches the manifest."""
    seq_dir = Path(seq_dir)
    manifest = json.loads((seq_dir / MANIFEST).read_text())
    bad = []
    for name, digest in manifest["files"].items():
        path = seq_dir / name
        if not path.exists() or sha256(path.read_bytes()) != digest:
            bad.append(name)
    return bad


def load_spec(seq_dir) -> SequenceSpec:
    from .scene import spec_from_config

    return spec_from_config(Path(seq_dir, SPEC_FILE).read_text())


def sequence_frames(seq_dir) -> list[Path]:
    return sorted(Path(seq_dir).glob("frame_*.png"))


def frame_index(path) -> int:
    stem = os.path.splitext(os.path.basename(path))[0]
    return int(stem.rsplit("_", 1)[1])
