"""Flow error metrics and Table-style reports.

* angular error: angle between ``(u, v, 1)`` and ``(u_gt, v_gt, 1)``, degrees
* endpoint error: Euclidean norm of the flow difference, pixels
* Fl outliers: percentage of pixels whose endpoint error exceeds 3 px, over
  background, foreground and all evaluated pixels

Undefined quantities (an Fl component over an empty region) are NaN, never 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .flowio import FlowField

OUTLIER_PX = 3.0
KITTI_RELATIVE = 0.05


class EmptyMaskError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EvalMask:
    valid: np.ndarray
    fg: np.ndarray

    def __post_init__(self):
        valid = np.asarray(self.valid, dtype=bool)
        fg = np.asarray(self.fg, dtype=bool) & valid
        if valid.shape != fg.shape:
            raise ValueError("valid and fg masks differ in shape")
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "fg", fg)

    @property
    def bg(self) -> np.ndarray:
        return self.valid & ~self.fg

    @property
    def n(self) -> int:
        return int(self.valid.sum())

    @classmethod
    def from_gt(cls, gt: FlowField, fg=None) -> "EvalMask":
        """Evaluate wherever the ground truth is valid."""
        fg = np.zeros(gt.shape, bool) if fg is None else fg
        return cls(gt.valid, fg)


def _check(est: FlowField, gt: FlowField, mask: EvalMask):
    if est.shape != gt.shape or mask.valid.shape != gt.shape:
        raise ValueError(f"dimension mismatch: est {est.shape}, gt {gt.shape}, mask {mask.valid.shape}")


def _mean(values: np.ndarray) -> float:
    # fixed-order pairwise summation keeps reports reproducible
    return float(np.sum(values, dtype=np.float64) / values.size)


def angular_error(est: FlowField, gt: FlowField) -> np.ndarray:
    """Per-pixel angular error in degrees.

    Same angle as ``acos`` of the normalized dot product, computed as
    ``atan2(|a x b|, a . b)`` so that equal vectors give exactly 0 and small
    angles keep full precision.
    """
    u, v, gu, gv = est.u, est.v, gt.u, gt.v
    dot = 1.0 + u * gu + v * gv
    cross = np.sqrt((v - gv) ** 2 + (gu - u) ** 2 + (u * gv - v * gu) ** 2)
    return np.degrees(np.arctan2(cross, dot))


def endpoint_error(est: FlowField, gt: FlowField) -> np.ndarray:
    return np.hypot(est.u - gt.u, est.v - gt.v)


def aae(est: FlowField, gt: FlowField, mask: EvalMask) -> float:
    _check(est, gt, mask)
    if mask.n == 0:
        raise EmptyMaskError("no pixels to evaluate")
    return _mean(angular_error(est, gt)[mask.valid])


def aepe(est: FlowField, gt: FlowField, mask: EvalMask) -> float:
    _check(est, gt, mask)
    if mask.n == 0:
        raise EmptyMaskError("no pixels to evaluate")
    return _mean(endpoint_error(est, gt)[mask.valid])


def outlier_map(est: FlowField, gt: FlowField, kitti: bool = False) -> np.ndarray:
    epe = endpoint_error(est, gt)
    out = epe > OUTLIER_PX
    if kitti:
        out &= epe > KITTI_RELATIVE * gt.magnitude
    return out


def fl_outliers(est: FlowField, gt: FlowField, mask: EvalMask, kitti: bool = False):
    """``(fl_bg, fl_fg, fl_all)`` in percent.

    A pixel is an outlier iff its endpoint error is strictly above 3 px.
    ``kitti=True`` additionally requires the error to exceed 5 % of the
    ground-truth magnitude. Components over empty regions are NaN.
    """
    _check(est, gt, mask)
    out = outlier_map(est, gt, kitti)

    def pct(region):
        n = int(region.sum())
        return math.nan if n == 0 else 100.0 * int(out[region].sum()) / n

    return pct(mask.bg), pct(mask.fg), pct(mask.valid)


@dataclass(frozen=True)
class EvalRow:
    experiment: str
    method: str
    aae: float
    aepe: float
    fl_bg: float = math.nan
    fl_fg: float = math.nan
    fl_all: float = math.nan

    def __post_init__(self):
        if not (math.isnan(self.aae) or 0 <= self.aae <= 180):
            raise ValueError("aae must lie in [0, 180] degrees")
        if not (math.isnan(self.aepe) or self.aepe >= 0):
            raise ValueError("aepe must be non-negative")
        for name in ("fl_bg", "fl_fg", "fl_all"):
            x = getattr(self, name)
            if not (math.isnan(x) or 0 <= x <= 100):
                raise ValueError(f"{name} must lie in [0, 100]")


def evaluate_frame(est: FlowField, gt: FlowField, mask: EvalMask, kitti: bool = False) -> dict:
    fl_bg, fl_fg, fl_all = fl_outliers(est, gt, mask, kitti)
    epe_fg = endpoint_error(est, gt)[mask.fg]
    return {
        "aae": aae(est, gt, mask),
        "aepe": aepe(est, gt, mask),
        "aepe_fg": _mean(epe_fg) if epe_fg.size else math.nan,
        "fl_bg": fl_bg,
        "fl_fg": fl_fg,
        "fl_all": fl_all,
        "n": mask.n,
        "n_fg": int(mask.fg.sum()),
        "n_bg": int(mask.bg.sum()),
    }


def mean_row(experiment: str, method: str, frames: list[dict]) -> EvalRow:
    """Average per-frame metrics; frames where an Fl component is undefined
    are skipped for that component."""
    if not frames:
        raise ValueError("no frames to average")

    def avg(key):
        vals = np.array([f[key] for f in frames], dtype=np.float64)
        vals = vals[~np.isnan(vals)]
        return math.nan if vals.size == 0 else _mean(vals)

    return EvalRow(experiment, method, *(avg(k) for k in ("aae", "aepe", "fl_bg", "fl_fg", "fl_all")))


# -- reports ---------------------------------------------------------------------

COLUMNS = ("aae", "aepe", "fl_bg", "fl_fg", "fl_all")
CSV_HEADER = ("experiment", "method", "aae_deg", "aepe_px", "fl_bg_pct", "fl_fg_pct", "fl_all_pct")
TEXT_HEADER = ("Exp.", "Method", "AAE [deg]", "AEPE [px]", "Fl-bg [%]", "Fl-fg [%]", "Fl-all [%]")


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    # (experiment, method) -> names of columns where the row is best
    best: dict[tuple[str, str], set[str]] = field(default_factory=dict)

    @property
    def experiments(self) -> list[str]:
        return list(dict.fromkeys(r.experiment for r in self.rows))

    def is_best(self, experiment: str, method: str, column: str) -> bool:
        return column in self.best.get((experiment, method), set())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.experiment, r.method] + [_fmt_csv(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()

    def to_text(self, digits: int = 2) -> str:
        """Aligned table; best values per experiment are marked with ``*``."""
        lines = [list(TEXT_HEADER)]
        last = None
        for r in self.rows:
            cells = [r.experiment if r.experiment != last else "", r.method]
            for c in COLUMNS:
                x = getattr(r, c)
                s = "n/a" if math.isnan(x) else f"{x:.{digits}f}"
                cells.append(s + ("*" if self.is_best(r.experiment, r.method, c) else " "))
            lines.append(cells)
            last = r.experiment
        widths = [max(len(row[i]) for row in lines) for i in range(len(TEXT_HEADER))]
        out = []
        for i, row in enumerate(lines):
            left = [row[k].ljust(widths[k]) for k in range(2)]
            right = [row[k].rjust(widths[k]) for k in range(2, len(row))]
            out.append("  ".join(left + right).rstrip())
            if i == 0:
                out.append("-" * len(out[0]))
        return "\n".join(out) + "\n"


def _fmt_csv(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def build_report(rows) -> EvalReport:
    """Group rows by experiment and flag the per-column minima.

    Ties are all flagged. Duplicate ``(experiment, method)`` pairs are
    rejected.
    """
    rows = list(rows)
    seen = set()
    for r in rows:
        key = (r.experiment, r.method)
        if key in seen:
            raise ValueError(f"duplicate row for {key}")
        seen.add(key)
    order = list(dict.fromkeys(r.experiment for r in rows))
    grouped = sorted(rows, key=lambda r: order.index(r.experiment))
    best = {(r.experiment, r.method): set() for r in rows}
    for exp in order:
        group = [r for r in grouped if r.experiment == exp]
        for c in COLUMNS:
            vals = [getattr(r, c) for r in group if not math.isnan(getattr(r, c))]
            if not vals:
                continue
            lo = min(vals)
            for r in group:
                if getattr(r, c) == lo:
                    best[(r.experiment, r.method)].add(c)
    return EvalReport(grouped, best)


def rows_from_csv(text: str) -> list[EvalRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        vals = [float(rec[h]) if rec[h] not in ("", None) else math.nan for h in CSV_HEADER[2:]]
        rows.append(EvalRow(rec["experiment"], rec["method"], *vals))
    return rows
