"""Command-line entry point: ``fisheyeflow {generate,estimate,evaluate,visualize,report}``.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics, renderer, scene
from .baseline_hs import HSParams, hs_estimate
from .camera import image_circle_mask, parse_config
from .flowio import (
    FloFormatError,
    encode_flo,
    flow_max_magnitude,
    flow_to_color,
    read_flo,
    read_png,
    write_png,
)
from .renderer import FLOW_FMT, FRAME_FMT, MANIFEST, MASK_FMT

log = logging.getLogger("fisheyeflow")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


class ValidationError(ValueError):
    pass


def _is_sequence(path: Path) -> bool:
    return (path / MANIFEST).is_file() or any(path.glob("frame_*.png"))


def _sequence_dirs(root: Path) -> list[Path]:
    """``root`` itself if it holds a sequence, otherwise its sequence subdirectories."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"no such directory: {root}")
    if _is_sequence(root):
        return [root]
    subs = sorted(p for p in root.iterdir() if p.is_dir() and _is_sequence(p))
    if not subs:
        raise ValidationError(f"{root} contains no sequences")
    return subs


def _flow_files(path: Path) -> dict[int, Path]:
    return {renderer.frame_index(p): p for p in sorted(Path(path).glob("flow_*.flo"))}


# -- generate --------------------------------------------------------------------


def cmd_generate(names, out_dir, spec_file=None, all_sequences=False, overrides=None, jobs=1) -> list[Path]:
    """Render sequences into ``out_dir/<name>/``."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    specs = []
    if all_sequences:
        names = list(names) + scene.all_sequence_names()
    for name in dict.fromkeys(names):
        try:
            specs.append(scene.spec_from_name(name, **overrides))
        except KeyError as exc:
            raise ValidationError(str(exc)) from None
    if spec_file is not None:
        spec = scene.spec_from_config(Path(spec_file).read_text())
        specs.append(scene.with_overrides(spec, **overrides))
    if not specs:
        raise ValidationError("nothing to generate: give sequence names, --all or --spec")

    out_dir = Path(out_dir)
    written = []
    for spec in specs:
        target = out_dir / spec.label
        log.info("rendering %s (%d frames)", spec.label, spec.frame_count)
        renderer.write_sequence(spec, target, jobs=jobs)
        written.append(target)
    return written


# -- estimate --------------------------------------------------------------------


def _load_frames(seq: Path):
    frames = renderer.sequence_frames(seq)
    if len(frames) < 2:
        raise ValidationError(f"{seq} needs at least two frames, found {len(frames)}")
    idx = [renderer.frame_index(p) for p in frames]
    if idx != list(range(idx[0], idx[0] + len(idx))):
        raise ValidationError(f"{seq}: frame numbers are not consecutive")
    return frames


def _domain_for(seq: Path, shape) -> np.ndarray:
    try:
        cam = renderer.load_spec(seq).camera
    except FileNotFoundError:
        return np.ones(shape, bool)
    if cam.shape != shape:
        raise ValidationError(f"{seq}: frames are {shape}, camera config says {cam.shape}")
    return image_circle_mask(cam)


def _estimate_pair(args):
    f0, f1, domain, params = args
    a, b = read_png(f0), read_png(f1)
    if a.shape != b.shape:
        raise ValidationError(f"resolution mismatch between {f0.name} and {f1.name}")
    return encode_flo(hs_estimate(a, b, params, domain))


def cmd_estimate(dataset_dir, out_dir, method="hs", params: HSParams | None = None, jobs=1) -> list[Path]:
    """Estimate flow for every consecutive frame pair; mirrors the ground-truth naming."""
    if method != "hs":
        raise ValidationError(f"unknown method {method!r}")
    params = params or HSParams()
    seqs = _sequence_dirs(Path(dataset_dir))
    out_root = Path(out_dir)
    written = []
    for seq in seqs:
        frames = _load_frames(seq)
        shape = read_png(frames[0]).shape[:2]
        domain = _domain_for(seq, shape)
        target = out_root if len(seqs) == 1 else out_root / seq.name
        target.mkdir(parents=True, exist_ok=True)
        jobs_args = [(frames[k], frames[k + 1], domain, params) for k in range(len(frames) - 1)]
        log.info("estimating %s (%d pairs)", seq.name, len(jobs_args))
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                payloads = list(pool.map(_estimate_pair, jobs_args))
        else:
            payloads = [_estimate_pair(a) for a in jobs_args]
        for k, payload in enumerate(payloads):
            path = target / FLOW_FMT.format(renderer.frame_index(frames[k]))
            path.write_bytes(payload)
            written.append(path)
    return written


# -- evaluate --------------------------------------------------------------------


def evaluate_sequence(seq: Path, flow_dir: Path, kitti=False) -> list[dict]:
    """Per-frame metrics of the flows in ``flow_dir`` against the sequence ground truth."""
    gt_files = _flow_files(seq)
    est_files = _flow_files(flow_dir)
    if not gt_files:
        raise ValidationError(f"{seq} has no ground-truth flow")
    if sorted(gt_files) != sorted(est_files):
        raise ValidationError(
            f"frame mismatch: {seq} has {len(gt_files)} ground-truth flows, "
            f"{flow_dir} has {len(est_files)} estimates"
        )
    rows = []
    for k in sorted(gt_files):
        gt = read_flo(gt_files[k])
        est = read_flo(est_files[k])
        if gt.shape != est.shape:
            raise ValidationError(f"frame {k}: resolution mismatch {est.shape} vs {gt.shape}")
        mask_path = seq / MASK_FMT.format(k)
        fg = read_png(mask_path) > 127 if mask_path.exists() else np.zeros(gt.shape, bool)
        if fg.shape != gt.shape:
            raise ValidationError(f"frame {k}: mask resolution mismatch")
        res = metrics.evaluate_frame(est, gt, metrics.EvalMask.from_gt(gt, fg), kitti=kitti)
        res["frame"] = k
        rows.append(res)
    return rows


def cmd_evaluate(dataset_dir, flow_dirs, names=None, out=None, kitti=False) -> metrics.EvalReport:
    """Evaluate one or more methods (flow directories) on one or more sequences.

    Per-experiment values are means of per-frame metrics.
    """
    flow_dirs = [Path(p) for p in flow_dirs]
    names = list(names) if names else [p.name for p in flow_dirs]
    if len(names) != len(flow_dirs):
        raise ValidationError("need one method name per flow directory")
    seqs = _sequence_dirs(Path(dataset_dir))
    rows, per_frame = [], []
    for seq in seqs:
        experiment = seq.name
        for method, fdir in zip(names, flow_dirs):
            src = fdir if len(seqs) == 1 else fdir / seq.name
            if not src.is_dir():
                raise FileNotFoundError(f"no flow directory {src}")
            frames = evaluate_sequence(seq, src, kitti=kitti)
            for fr in frames:
                per_frame.append({"experiment": experiment, "method": method, **fr})
            rows.append(metrics.mean_row(experiment, method, frames))
    report = metrics.build_report(rows)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report.to_csv())
        (out / "report.txt").write_text(report.to_text())
        _write_frame_csv(out / "frames.csv", per_frame)
    return report


def _write_frame_csv(path: Path, records: list[dict]):
    keys = ["experiment", "method", "frame", "aae", "aepe", "aepe_fg", "fl_bg", "fl_fg", "fl_all", "n", "n_fg", "n_bg"]
    lines = [",".join(keys)]
    for r in records:
        cells = []
        for k in keys:
            x = r[k]
            if isinstance(x, float):
                cells.append("" if np.isnan(x) else repr(x))
            else:
                cells.append(str(x))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


# -- visualize -------------------------------------------------------------------


def _overlay(seq: Path, k: int):
    a = read_png(seq / FRAME_FMT.format(k)).astype(np.float64)
    nxt = seq / FRAME_FMT.format(k + 1)
    b = read_png(nxt).astype(np.float64) if nxt.exists() else a
    return np.round(0.5 * (a + b)).astype(np.uint8)


def cmd_visualize(source, out_dir, max_mag=None, dataset=None) -> list[Path]:
    """Color-code ``.flo`` files. With ``dataset`` also write panels of
    (input overlay | ground truth | estimate) per frame."""
    source = Path(source)
    files = [source] if source.is_file() else sorted(source.glob("*.flo"))
    if not files:
        raise FileNotFoundError(f"no .flo files in {source}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {}
    written = []
    for path in files:
        flow = read_flo(path)
        m = max_mag if max_mag is not None else flow_max_magnitude(flow)
        color = flow_to_color(flow, m)
        target = out_dir / (path.stem + ".png")
        if dataset is not None:
            k = renderer.frame_index(path)
            seq = Path(dataset)
            gt = read_flo(seq / FLOW_FMT.format(k))
            if gt.shape != flow.shape:
                raise ValidationError(f"{path.name}: resolution differs from ground truth")
            # normalize both by the same constant so colors are comparable
            if max_mag is None:
                m = max(flow_max_magnitude(gt), 1e-12)
                color = flow_to_color(flow, m)
            panel = np.concatenate([_overlay(seq, k), flow_to_color(gt, m), color], axis=1)
            write_png(out_dir / (path.stem + "_panel.png"), panel)
        write_png(target, color)
        meta[target.name] = {"source": str(path), "max_mag": float(m)}
        written.append(target)
    (out_dir / "visualize.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return written


# -- report ----------------------------------------------------------------------


def cmd_report(csv_files, out=None) -> metrics.EvalReport:
    rows = []
    for path in csv_files:
        rows.extend(metrics.rows_from_csv(Path(path).read_text()))
    report = metrics.build_report(rows)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report.to_csv())
        (out / "report.txt").write_text(report.to_text())
    return report


# -- argument parsing ---------------------------------------------------------------


def _hs_params(args) -> HSParams:
    values = {}
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
        keymap = {"alpha": ("alpha", float), "iters": ("iterations", int),
                  "levels": ("pyramid_levels", int), "warps": ("warp_per_level", int),
                  "sigma": ("sigma", float)}
        for k, v in cfg.items():
            if k not in keymap:
                raise ValidationError(f"unknown estimator key {k!r}")
            name, conv = keymap[k]
            values[name] = conv(v)
    for flag, name in (("alpha", "alpha"), ("iters", "iterations"), ("levels", "pyramid_levels"),
                       ("warps", "warp_per_level"), ("sigma", "sigma")):
        if getattr(args, flag) is not None:
            values[name] = getattr(args, flag)
    return HSParams(**values)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fisheyeflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render sequences with ground-truth flow")
    g.add_argument("items", nargs="+", metavar="NAME... OUT_DIR",
                   help="sequence names (e.g. linec-4, spiral-1-homog) followed by the output directory")
    g.add_argument("--all", action="store_true", help="all 18 default sequences")
    g.add_argument("--spec", help="sequence config file (key = value)")
    g.add_argument("--frames", type=int, help="override frame count")
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int, default=1)

    e = sub.add_parser("estimate", help="run the Horn-Schunck baseline")
    e.add_argument("dataset_dir")
    e.add_argument("out_dir")
    e.add_argument("--method", default="hs")
    e.add_argument("--alpha", type=float)
    e.add_argument("--iters", type=int)
    e.add_argument("--levels", type=int)
    e.add_argument("--warps", type=int)
    e.add_argument("--sigma", type=float)
    e.add_argument("--config", help="estimator config file (alpha, iters, levels, warps, sigma)")
    e.add_argument("--jobs", type=int, default=1)

    v = sub.add_parser("evaluate", help="score flow directories against ground truth")
    v.add_argument("dataset_dir")
    v.add_argument("flow_dirs", nargs="+")
    v.add_argument("--names", help="comma-separated method names, one per flow directory")
    v.add_argument("--out", help="directory for report.csv, report.txt and frames.csv")
    v.add_argument("--kitti", action="store_true", help="also require EPE > 5%% of |gt| for outliers")

    z = sub.add_parser("visualize", help="color-code .flo files")
    z.add_argument("source", help=".flo file or directory")
    z.add_argument("out_dir")
    z.add_argument("--max-mag", type=float, help="fixed normalization radius in pixels")
    z.add_argument("--dataset", help="sequence directory; also writes overlay|GT|estimate panels")

    r = sub.add_parser("report", help="merge report CSVs into one table")
    r.add_argument("csv_files", nargs="+")
    r.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            if len(args.items) < 2 and not (args.all or args.spec):
                raise ValidationError("need at least one sequence name and an output directory")
            *names, out_dir = args.items
            cmd_generate(names, out_dir, spec_file=args.spec, all_sequences=args.all,
                         overrides={"frame_count": args.frames, "seed": args.seed}, jobs=args.jobs)
        elif args.command == "estimate":
            cmd_estimate(args.dataset_dir, args.out_dir, args.method, _hs_params(args), jobs=args.jobs)
        elif args.command == "evaluate":
            names = args.names.split(",") if args.names else None
            report = cmd_evaluate(args.dataset_dir, args.flow_dirs, names, args.out, args.kitti)
            sys.stdout.write(report.to_text())
        elif args.command == "visualize":
            cmd_visualize(args.source, args.out_dir, args.max_mag, args.dataset)
        elif args.command == "report":
            sys.stdout.write(cmd_report(args.csv_files, args.out).to_text())
    except (ValidationError, FloFormatError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
