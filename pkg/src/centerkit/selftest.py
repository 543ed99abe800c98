"""Built-in consistency checks, runnable as `centerkit selftest`.

Each check compares a production path against an independent reference from
`oracle`. Prints one PASS/FAIL line per check and returns a process exit
code.
"""

from __future__ import annotations

import io

import numpy as np

from .annotations import BoundingBox, ImageInfo
from .heatmap import GcParams, Heatmap, gc_value
from .loss import BcflParams, alpha_c, bcfl, bcfl_grad_p, qfl
from .matching import GroundTruthCenter, MatchCostParams, hungarian
from .metrics import EvalUnit, evaluate_units
from .ochm import read_ochm, write_ochm
from .oracle import (
    assignment_reference,
    centerness_reference,
    exhaustive_cas,
    finite_diff,
    gc_reference,
)
from .peaks import CenterPoint


def _check_gc_identity() -> None:
    rng = np.random.default_rng(11)
    box = BoundingBox(x=3.0, y=5.0, w=40.0, h=22.0, category_id=1, image_id=1)
    params = GcParams(eta=0.5, phi=0.5)
    for _ in range(2000):
        x = float(rng.uniform(box.x - 5, box.x + box.w + 5))
        y = float(rng.uniform(box.y - 5, box.y + box.h + 5))
        want = centerness_reference(x, y, box)
        l, r = x - box.x, box.x + box.w - x
        t, b = y - box.y, box.y + box.h - y
        if min(l, r, t, b) <= 0:
            got = 0.0
        else:
            got = gc_value(l, r, t, b, params)
        assert abs(got - want) <= 1e-12, (x, y, got, want)
        assert abs(gc_reference(x, y, box, 0.5, 0.5) - want) <= 1e-12


def _check_bcfl_decomposition() -> None:
    grid = [k / 10.0 for k in range(11)]
    for alpha in (0.25, 0.5, 0.964):
        for gamma in (0.0, 1.0, 2.0):
            params = BcflParams(alpha=alpha, gamma=gamma)
            for y in grid:
                for p in grid:
                    lhs = bcfl(p, y, params)
                    rhs = alpha_c(y, alpha) * qfl(p, y, gamma)
                    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs)), (p, y)
                    assert lhs >= 0.0


def _check_gradient() -> None:
    worst = 0.0
    for alpha in (0.5, 0.964):
        for gamma in (1.0, 2.0, 3.0, 4.0):
            params = BcflParams(alpha=alpha, gamma=gamma)
            for y in [k / 20.0 for k in range(1, 20)]:
                for p in [k / 20.0 for k in range(1, 20)]:
                    if p == y:
                        continue
                    analytic = bcfl_grad_p(p, y, params)
                    numeric = finite_diff(
                        lambda q, y=y, params=params: bcfl(q, y, params), p
                    )
                    rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
                    worst = max(worst, rel)
    assert worst <= 1e-5, worst


def _check_assignment() -> None:
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        cost = rng.random((n, m))
        pairs, total = hungarian(cost)
        _, want = assignment_reference(cost.tolist())
        assert abs(total - want) <= 1e-9, (total, want)
        assert len(pairs) == min(n, m)


def _check_pipeline_cas() -> None:
    rng = np.random.default_rng(37)
    image = ImageInfo(id=1, width=200.0, height=100.0)
    units = []
    raw_units = []
    for _ in range(25):
        n_gt = int(rng.integers(1, 5))
        n_pred = int(rng.integers(0, 5))
        if n_gt == 0 and n_pred == 0:
            n_gt = 1
        gts = []
        raw_gts = []
        for _ in range(n_gt):
            x = float(rng.uniform(0, image.width))
            y = float(rng.uniform(0, image.height))
            d = float(rng.uniform(5, 40))
            gts.append(GroundTruthCenter(x=x, y=y, d=d, gc=1.0))
            raw_gts.append((x, y, 1.0, d))
        preds = []
        raw_preds = []
        for _ in range(n_pred):
            x = float(rng.uniform(0, image.width))
            y = float(rng.uniform(0, image.height))
            s = float(rng.uniform(0, 1))
            preds.append(CenterPoint(x=x, y=y, score=s))
            raw_preds.append((x, y, s))
        units.append(
            EvalUnit(image=image, category_id=1, gts=tuple(gts), preds=tuple(preds))
        )
        raw_units.append(((image.width, image.height), raw_gts, raw_preds))
    report = evaluate_units(units, cost_params=MatchCostParams(), threads=1)
    want = exhaustive_cas(raw_units)
    assert abs(report.cas - want) <= 1e-9, (report.cas, want)


def _check_roundtrip() -> None:
    rng = np.random.default_rng(41)
    for _ in range(10):
        c = int(rng.integers(1, 4))
        h = int(rng.integers(1, 20))
        w = int(rng.integers(1, 20))
        data = rng.random((c, h, w)).astype(np.float32)
        hm = Heatmap(data, stride=float(rng.uniform(0.5, 8.0)))
        buf = io.BytesIO()
        write_ochm(hm, buf)
        buf.seek(0)
        back = read_ochm(buf)
        assert back.stride == np.float32(hm.stride)
        assert np.array_equal(back.data, hm.data)


CHECKS = (
    ("generalized centerness matches the classic form at 0.5/0.5", _check_gc_identity),
    ("balanced kernel decomposes as alpha_c times qfl", _check_bcfl_decomposition),
    ("analytic gradient matches finite differences", _check_gradient),
    ("assignment matches exhaustive enumeration", _check_assignment),
    ("pipeline score matches exhaustive rescoring", _check_pipeline_cas),
    ("raster files round-trip", _check_roundtrip),
)


def run_all() -> int:
    failed = 0
    for name, fn in CHECKS:
        try:
            fn()
        except AssertionError as e:
            print(f"FAIL {name}: {e}")
            failed += 1
        else:
            print(f"PASS {name}")
    return 1 if failed else 0
