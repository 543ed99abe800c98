"""Command-line interface.

Subcommands: gen (render target heatmaps from annotations), peaks (extract
centers from rasters), eval (score predictions against annotations), alpha
(estimate the negative-cell frequency), loss (compare prediction rasters to
targets), viz (dump a channel as a PGM image), selftest (built-in
consistency checks).

Settings resolve as built-in defaults, overridden by a JSON config file
given with --config, overridden by explicit flags.

Exit codes: 0 success, 2 parse error, 3 I/O error, 4 raster format error,
5 unresolved reference, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .annotations import (
    Dataset,
    box_center,
    group_by_unit,
    parse_coco,
)
from .errors import CenterkitError, FormatError, IntegrityError, ParseError
from .heatmap import GcParams, Heatmap, grid_shape, render_ellipse, render_gaussian, render_gc, stack
from .loss import KERNELS, BcflParams, bcfl, bcfl_grad_p, count_negatives, loss_map
from .matching import MatchCostParams, GroundTruthCenter
from .metrics import AGGREGATIONS, EvalUnit, evaluate_units
from .ochm import read_ochm, read_sidecar, write_ochm, write_sidecar
from .oracle import finite_diff
from .peaks import CenterPoint, PeakParams, peaks_per_class

GT_KINDS = ("gc", "gaussian", "ellipse")
BAND_CHOICES = ("all", "small", "medium", "large")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Resolved settings shared by the subcommands."""

    stride: float = 4.0
    eta: float = 0.5
    phi: float = 0.5
    gt: str = "gc"
    sigma: float = 2.0
    threshold: float = 0.5
    min_distance: float = 3.0
    window_radius: int = 1
    lam: float = 1.0
    mu: float = 1.0
    kernel: str = "bcfl"
    alpha: float = 0.984
    gamma: float = 2.0
    pos_weight: float = 1.0
    aggregation: str = "pooled"
    band: str = "all"
    threads: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.stride) and self.stride > 0):
            raise ValueError(f"stride must be positive, got {self.stride}")
        for name in ("eta", "phi", "lam", "mu", "gamma", "pos_weight", "min_distance"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        for name in ("threshold", "alpha"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be within [0, 1], got {v}")
        if self.window_radius < 1:
            raise ValueError(f"window_radius must be >= 1, got {self.window_radius}")
        if self.gt not in GT_KINDS:
            raise ValueError(f"gt must be one of {GT_KINDS}, got {self.gt!r}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(
                f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}"
            )
        if self.band not in BAND_CHOICES:
            raise ValueError(f"band must be one of {BAND_CHOICES}, got {self.band!r}")
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


_FLOAT_KEYS = (
    "stride",
    "eta",
    "phi",
    "sigma",
    "threshold",
    "min_distance",
    "lam",
    "mu",
    "alpha",
    "gamma",
    "pos_weight",
)
_INT_KEYS = ("window_radius", "threads")
_STR_KEYS = ("gt", "kernel", "aggregation", "band")
_KEY_ALIASES = {"lambda": "lam", "gt_kind": "gt", "prob_threshold": "threshold"}


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"config {path}: invalid JSON: {e.msg}", offset=e.pos) from None
    if not isinstance(doc, dict):
        raise ParseError(f"config {path}: expected a JSON object")
    out: dict = {}
    for key, value in doc.items():
        key = _KEY_ALIASES.get(key, key)
        if key in _FLOAT_KEYS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParseError(f"config {path}: {key} must be a number")
            out[key] = float(value)
        elif key in _INT_KEYS:
            if value is None and key == "threads":
                out[key] = None
            elif isinstance(value, bool) or not isinstance(value, int):
                raise ParseError(f"config {path}: {key} must be an integer")
            else:
                out[key] = value
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise ParseError(f"config {path}: {key} must be a string")
            out[key] = value
        else:
            raise ParseError(f"config {path}: unknown key {key!r}")
    return out


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        overrides.update(_load_config(config_path))
    for key in _FLOAT_KEYS + _INT_KEYS + _STR_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    try:
        return dataclasses.replace(RunConfig(), **overrides)
    except ValueError as e:
        if config_path and not any(
            getattr(args, k, None) is not None for k in overrides
        ):
            raise ParseError(f"config {config_path}: {e}") from None
        raise


def _add_config_flag(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its values")


def _add_render_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--stride", type=float, help="grid stride in pixels (default 4)")
    sp.add_argument("--eta", type=float, help="horizontal centerness exponent (default 0.5)")
    sp.add_argument("--phi", type=float, help="vertical centerness exponent (default 0.5)")
    sp.add_argument("--gt", choices=GT_KINDS, help="target profile (default gc)")
    sp.add_argument("--sigma", type=float, help="gaussian spread in cells (default 2)")


def _add_threads_flag(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--threads", type=int, help="worker threads (default: machine parallelism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="centerkit",
        description="Object-center heatmaps: render targets, extract centers, score alignment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="render target heatmaps from a COCO-style file")
    sp.add_argument("coco", help="COCO-style annotation JSON")
    sp.add_argument("out_dir", help="directory for .ochm rasters and sidecars")
    _add_render_flags(sp)
    _add_threads_flag(sp)
    _add_config_flag(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("peaks", help="extract centers from .ochm rasters")
    sp.add_argument("heatmap_dir", help="directory of .ochm rasters with sidecars")
    sp.add_argument("--threshold", type=float, help="peak probability threshold (default 0.5)")
    sp.add_argument("--min-distance", dest="min_distance", type=float,
                    help="suppression radius in cells (default 3)")
    sp.add_argument("--window-radius", dest="window_radius", type=int,
                    help="local-max window radius (default 1)")
    _add_threads_flag(sp)
    _add_config_flag(sp)
    sp.set_defaults(func=cmd_peaks)

    sp = sub.add_parser("eval", help="score predicted centers against annotations")
    sp.add_argument("coco", help="COCO-style annotation JSON")
    sp.add_argument("preds", help="JSONL predictions: image_id, category_id, x, y, score")
    sp.add_argument("--lambda", dest="lam", type=float, help="distance weight (default 1)")
    sp.add_argument("--mu", type=float, help="probability-gap weight (default 1)")
    sp.add_argument("--aggregation", choices=AGGREGATIONS,
                    help="headline aggregation (default pooled)")
    sp.add_argument("--band", choices=BAND_CHOICES,
                    help="report one size band instead of the full summary")
    _add_threads_flag(sp)
    _add_config_flag(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("alpha", help="estimate the negative-cell frequency")
    sp.add_argument("source", help="COCO-style JSON or a directory of .ochm rasters")
    sp.add_argument("--threshold", type=float, default=None,
                    help="cells strictly below count as negative (default 0.6)")
    _add_render_flags(sp)
    _add_config_flag(sp)
    sp.set_defaults(func=cmd_alpha)

    sp = sub.add_parser("loss", help="compare prediction rasters to target rasters")
    sp.add_argument("pred_dir", help="directory of predicted .ochm rasters")
    sp.add_argument("target_dir", help="directory of target .ochm rasters")
    sp.add_argument("--kernel", choices=KERNELS, help="loss kernel (default bcfl)")
    sp.add_argument("--alpha", type=float, help="class-balance weight (default 0.984)")
    sp.add_argument("--gamma", type=float, help="focusing exponent (default 2)")
    sp.add_argument("--pos-weight", dest="pos_weight", type=float,
                    help="positive-mass weight for wbce and wmse (default 1)")
    sp.add_argument("--gradcheck", action="store_true",
                    help="also verify the analytic gradient against finite differences")
    _add_config_flag(sp)
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("viz", help="dump one channel as a binary PGM image")
    sp.add_argument("heatmap", help=".ochm raster")
    sp.add_argument("--channel", type=int, default=0, help="channel index (default 0)")
    sp.add_argument("--out", help="output file (default: stdout)")
    sp.set_defaults(func=cmd_viz)

    sp = sub.add_parser("selftest", help="run the built-in consistency checks")
    sp.set_defaults(func=cmd_selftest)

    return parser


def _render_unit(boxes, image, cfg: RunConfig) -> Heatmap:
    if cfg.gt == "gc":
        return render_gc(boxes, image, cfg.stride, GcParams(cfg.eta, cfg.phi))
    if cfg.gt == "gaussian":
        return render_gaussian([box_center(b) for b in boxes], image, cfg.stride, cfg.sigma)
    return render_ellipse(boxes, image, cfg.stride)


def _render_image(ds: Dataset, units, image, cats, cfg: RunConfig) -> Heatmap:
    if not cats:
        gh, gw = grid_shape(image, cfg.stride)
        return Heatmap(np.zeros((0, gh, gw), dtype=np.float32), cfg.stride)
    return stack(
        _render_unit(units.get((image.id, cid), []), image, cfg) for cid in cats
    )


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    ds = parse_coco(Path(args.coco).read_bytes())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cats = sorted(ds.categories)
    units = group_by_unit(ds.boxes)

    def one(image) -> None:
        hm = _render_image(ds, units, image, cats, cfg)
        path = out_dir / f"{image.id}.ochm"
        write_ochm(hm, path)
        write_sidecar(path, image.id, cats)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        list(pool.map(one, sorted(ds.images, key=lambda im: im.id)))
    return 0


def cmd_peaks(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    params = PeakParams(
        prob_threshold=cfg.threshold,
        min_distance=cfg.min_distance,
        window_radius=cfg.window_radius,
    )
    files = sorted(Path(args.heatmap_dir).glob("*.ochm"))

    def one(path: Path) -> list[CenterPoint]:
        hm = read_ochm(path)
        image_id, category_ids = read_sidecar(path)
        if len(category_ids) != hm.channels:
            raise IntegrityError(
                f"{path}: sidecar lists {len(category_ids)} categories "
                f"for {hm.channels} channels"
            )
        return peaks_per_class(hm, category_ids, params, image_id=image_id)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        batches = list(pool.map(one, files))
    points = [p for batch in batches for p in batch]
    points.sort(key=lambda p: (p.image_id, p.category_id, -p.score, p.y, p.x))
    for p in points:
        print(
            json.dumps(
                {
                    "image_id": p.image_id,
                    "category_id": p.category_id,
                    "x": p.x,
                    "y": p.y,
                    "score": p.score,
                }
            )
        )
    return 0


def _parse_pred_line(lineno: int, line: str) -> CenterPoint:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(f"predictions line {lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(rec, dict):
        raise ParseError(f"predictions line {lineno}: expected an object")
    try:
        image_id = rec["image_id"]
        category_id = rec["category_id"]
        x = rec["x"]
        y = rec["y"]
        score = rec["score"]
    except KeyError as e:
        raise ParseError(f"predictions line {lineno}: missing key {e.args[0]!r}") from None
    for name, v in (("image_id", image_id), ("category_id", category_id)):
        if not isinstance(v, int) or isinstance(v, bool):
            raise ParseError(f"predictions line {lineno}: {name} must be an integer")
    for name, v in (("x", x), ("y", y), ("score", score)):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"predictions line {lineno}: {name} must be a number")
    if not 0.0 <= float(score) <= 1.0:
        raise ParseError(f"predictions line {lineno}: score must be within [0, 1]")
    return CenterPoint(
        x=float(x), y=float(y), score=float(score),
        category_id=category_id, image_id=image_id,
    )


def _load_predictions(path: str, ds: Dataset) -> list[CenterPoint]:
    preds = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.strip():
            preds.append(_parse_pred_line(lineno, line))
    offenders = []
    known_images = {im.id for im in ds.images}
    for p in preds:
        if p.image_id not in known_images:
            offenders.append(f"unknown image id {p.image_id}")
        if p.category_id not in ds.categories:
            offenders.append(f"unknown category id {p.category_id}")
    if offenders:
        unique = sorted(set(offenders))
        raise IntegrityError("predictions reference " + "; ".join(unique))
    return preds


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    ds = parse_coco(Path(args.coco).read_bytes())
    preds = _load_predictions(args.preds, ds)

    gts_by_unit: dict[tuple[int, int], list[GroundTruthCenter]] = {}
    for key, boxes in group_by_unit(ds.boxes).items():
        gts_by_unit[key] = [GroundTruthCenter.from_box(b) for b in boxes]
    preds_by_unit: dict[tuple[int, int], list[CenterPoint]] = {}
    for p in preds:
        preds_by_unit.setdefault((p.image_id, p.category_id), []).append(p)

    units = [
        EvalUnit(
            image=ds.image(image_id),
            category_id=category_id,
            gts=tuple(gts_by_unit.get((image_id, category_id), ())),
            preds=tuple(preds_by_unit.get((image_id, category_id), ())),
        )
        for image_id, category_id in sorted(set(gts_by_unit) | set(preds_by_unit))
    ]
    report = evaluate_units(
        units,
        cost_params=MatchCostParams(lam=cfg.lam, mu=cfg.mu),
        aggregation=cfg.aggregation,
        threads=cfg.threads,
    )
    if cfg.band != "all":
        value = {
            "small": report.cas_s,
            "medium": report.cas_m,
            "large": report.cas_l,
        }[cfg.band]
        doc = {"band": cfg.band, "cas": value, "units": report.units}
    else:
        doc = report.to_dict()
    print(json.dumps(doc, indent=2))
    return 0


def _iter_rendered(ds: Dataset, cfg: RunConfig):
    cats = sorted(ds.categories)
    units = group_by_unit(ds.boxes)
    for image in sorted(ds.images, key=lambda im: im.id):
        yield _render_image(ds, units, image, cats, cfg)


def cmd_alpha(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    threshold = 0.6 if args.threshold is None else args.threshold
    src = Path(args.source)
    if src.is_dir():
        heatmaps = (read_ochm(p) for p in sorted(src.glob("*.ochm")))
    else:
        ds = parse_coco(src.read_bytes())
        heatmaps = _iter_rendered(ds, cfg)
    negatives, cells = count_negatives(heatmaps, threshold)
    if cells == 0:
        raise CenterkitError("no cells found: nothing to estimate from")
    doc = {
        "alpha": negatives / cells,
        "threshold": threshold,
        "cells": cells,
        "negative_cells": negatives,
    }
    print(json.dumps(doc, indent=2))
    return 0


_GRADCHECK_PROBS = [k / 20.0 for k in range(1, 20)]
_GRADCHECK_GAMMAS = (1.0, 2.0, 3.0, 4.0)
_GRADCHECK_ALPHAS = (0.5, 0.75, 0.964)


def gradcheck() -> dict:
    """Max relative error of the analytic gradient over a fixed grid."""
    worst = 0.0
    points = 0
    for alpha in _GRADCHECK_ALPHAS:
        for gamma in _GRADCHECK_GAMMAS:
            params = BcflParams(alpha=alpha, gamma=gamma)
            for y in _GRADCHECK_PROBS:
                for p in _GRADCHECK_PROBS:
                    if p == y:
                        continue
                    analytic = bcfl_grad_p(p, y, params)
                    numeric = finite_diff(
                        lambda q, y=y, params=params: bcfl(q, y, params), p
                    )
                    rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
                    worst = max(worst, rel)
                    points += 1
    return {"max_rel_err": worst, "points": points}


def cmd_loss(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    pred_dir = Path(args.pred_dir)
    target_dir = Path(args.target_dir)
    pred_files = {p.name: p for p in pred_dir.glob("*.ochm")}
    target_files = {p.name: p for p in target_dir.glob("*.ochm")}
    missing_targets = sorted(set(pred_files) - set(target_files))
    missing_preds = sorted(set(target_files) - set(pred_files))
    if missing_targets or missing_preds:
        parts = []
        if missing_targets:
            parts.append("no target for " + ", ".join(missing_targets))
        if missing_preds:
            parts.append("no prediction for " + ", ".join(missing_preds))
        raise IntegrityError("; ".join(parts))

    total_sum = 0.0
    total_cells = 0
    channel_sums: dict[int, float] = {}
    channel_cells: dict[int, int] = {}
    for name in sorted(pred_files):
        pred = read_ochm(pred_files[name])
        target = read_ochm(target_files[name])
        if pred.data.shape != target.data.shape:
            raise IntegrityError(
                f"{name}: prediction shape {pred.data.shape} differs from "
                f"target shape {target.data.shape}"
            )
        surface = loss_map(
            pred.data,
            target.data,
            cfg.kernel,
            alpha=cfg.alpha,
            gamma=cfg.gamma,
            pos_weight=cfg.pos_weight,
        )
        total_sum += float(surface.sum())
        total_cells += surface.size
        for c in range(surface.shape[0]):
            channel_sums[c] = channel_sums.get(c, 0.0) + float(surface[c].sum())
            channel_cells[c] = channel_cells.get(c, 0) + surface[c].size
    if total_cells == 0:
        raise CenterkitError("no raster cells found: nothing to score")
    doc = {
        "kernel": cfg.kernel,
        "total": total_sum / total_cells,
        "per_channel": [
            channel_sums[c] / channel_cells[c] for c in sorted(channel_sums)
        ],
        "cells": total_cells,
    }
    if args.gradcheck:
        doc["gradcheck"] = gradcheck()
    print(json.dumps(doc, indent=2))
    return 0


def cmd_viz(args: argparse.Namespace) -> int:
    hm = read_ochm(args.heatmap)
    if not 0 <= args.channel < hm.channels:
        raise CenterkitError(
            f"channel {args.channel} out of range for {hm.channels} channels"
        )
    chan = hm.data[args.channel]
    if chan.size == 0:
        raise CenterkitError("empty raster has no image")
    gray = np.floor(chan.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    blob = f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode() + gray.tobytes()
    if args.out:
        Path(args.out).write_bytes(blob)
    else:
        sys.stdout.buffer.write(blob)
        sys.stdout.buffer.flush()
    return 0


def cmd_selftest(args: argparse.Namespace) -> int:
    from . import selftest

    return selftest.run_all()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except IntegrityError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (CenterkitError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
