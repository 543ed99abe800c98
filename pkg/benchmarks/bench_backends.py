"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs every kernel both ways on identical inputs, checks that the outputs
agree, and reports wall-clock timings with the speedup factor. Usage:

    python3 benchmarks/bench_backends.py [--repeat N] [--json]
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from centerkit import _fallback

try:
    from centerkit import _native
except ImportError:
    print("compiled extension is not built; nothing to compare", file=sys.stderr)
    sys.exit(1)


def make_workloads(rng: np.random.Generator) -> dict:
    gh = gw = 200
    stride = 4.0
    n_boxes = 200
    x0 = rng.uniform(0.0, 700.0, n_boxes)
    y0 = rng.uniform(0.0, 700.0, n_boxes)
    rects = np.stack(
        [x0, y0, x0 + rng.uniform(8.0, 96.0, n_boxes), y0 + rng.uniform(8.0, 96.0, n_boxes)],
        axis=1,
    )
    centers = np.stack(
        [rng.uniform(0.0, 800.0, n_boxes), rng.uniform(0.0, 800.0, n_boxes)], axis=1
    )

    cells = 512 * 512
    preds = rng.random(cells)
    targets = rng.random(cells)

    chan = _fallback.render_gc_grid(gh, gw, stride, rects, 0.5, 0.5)

    lap_cost = rng.uniform(0.0, 10.0, (60, 80))

    return {
        "render_gc (200 boxes, 200x200)": (
            lambda m: m.render_gc_grid(gh, gw, stride, rects, 0.5, 0.5)
        ),
        "render_gaussian (200 centers)": (
            lambda m: m.render_gaussian_grid(gh, gw, stride, centers, 2.0)
        ),
        "render_ellipse (200 boxes)": (
            lambda m: m.render_ellipse_grid(gh, gw, stride, rects)
        ),
        "loss_map bcfl (512x512)": (
            lambda m: m.loss_map(_fallback.KERNEL_BCFL, preds, targets, 0.984, 2.0, 1.0)
        ),
        "local_max_candidates (200x200)": (
            lambda m: m.local_max_candidates(chan, 1)
        ),
        "solve_lap (60x80)": (lambda m: m.solve_lap(lap_cost)),
    }


def check_agreement(fn) -> None:
    a = fn(_fallback)
    b = fn(_native)
    if isinstance(a, tuple):
        for x, y in zip(a, b):
            assert np.array_equal(x, y), "backends disagree"
    else:
        assert np.allclose(a, b, atol=1e-6), "backends disagree"


def best_time(fn, module, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(module))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions (default 5)")
    parser.add_argument("--json", action="store_true", help="emit machine-readable results")
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    workloads = make_workloads(rng)
    results = []
    for name, fn in workloads.items():
        check_agreement(fn)
        py = best_time(fn, _fallback, args.repeat)
        nat = best_time(fn, _native, args.repeat)
        results.append({"kernel": name, "python_s": py, "native_s": nat, "speedup": py / nat})

    if args.json:
        print(json.dumps(results, indent=2))
        return 0

    width = max(len(r["kernel"]) for r in results)
    print(f"{'kernel':<{width}}  {'python':>10}  {'native':>10}  {'speedup':>8}")
    for r in results:
        print(
            f"{r['kernel']:<{width}}  {r['python_s'] * 1e3:>8.3f}ms  "
            f"{r['native_s'] * 1e3:>8.3f}ms  {r['speedup']:>7.1f}x"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
