"""Slow reference implementations used to validate the fast paths.

Everything here recomputes results from first principles: pointwise target
definitions, central finite differences, and exhaustive assignment
enumeration. The test suite and the CLI selftest compare the production
code against these.
"""

from __future__ import annotations

import itertools
import math

from .annotations import BoundingBox


def gc_reference(x: float, y: float, box: BoundingBox, eta: float, phi: float) -> float:
    """Generalized centerness of an image point, computed pointwise.

    Returns 0.0 outside the open box (edges included in "outside").
    """
    l = x - box.x
    r = box.x + box.w - x
    t = y - box.y
    b = box.y + box.h - y
    if min(l, r, t, b) <= 0.0:
        return 0.0
    fx = (min(l, r) / max(l, r)) ** eta
    fy = (min(t, b) / max(t, b)) ** phi
    return fx * fy


def centerness_reference(x: float, y: float, box: BoundingBox) -> float:
    """Classic centerness sqrt((min(l,r)/max(l,r)) * (min(t,b)/max(t,b)))."""
    l = x - box.x
    r = box.x + box.w - x
    t = y - box.y
    b = box.y + box.h - y
    if min(l, r, t, b) <= 0.0:
        return 0.0
    return math.sqrt((min(l, r) / max(l, r)) * (min(t, b) / max(t, b)))


def finite_diff(f, p: float, h: float = 1e-6) -> float:
    """Central finite difference of a scalar function at p."""
    return (f(p + h) - f(p - h)) / (2.0 * h)


def assignment_reference(cost_rows: list[list[float]]) -> tuple[list[tuple[int, int]], float]:
    """Exhaustive minimum-cost assignment over plain Python lists.

    Matches every row when rows <= cols, every column otherwise; ties
    resolve to the lexicographically smallest pair list.
    """
    n = len(cost_rows)
    m = len(cost_rows[0]) if n else 0
    if n == 0 or m == 0:
        return [], 0.0
    best_total = math.inf
    best_pairs: tuple[tuple[int, int], ...] = ()
    if n <= m:
        for cols in itertools.permutations(range(m), n):
            pairs = tuple((i, j) for i, j in enumerate(cols))
            total = sum(cost_rows[i][j] for i, j in pairs)
            if total < best_total or (total == best_total and pairs < best_pairs):
                best_total = total
                best_pairs = pairs
    else:
        for rows in itertools.permutations(range(n), m):
            pairs = tuple(sorted((i, j) for j, i in enumerate(rows)))
            total = sum(cost_rows[i][j] for i, j in pairs)
            if total < best_total or (total == best_total and pairs < best_pairs):
                best_total = total
                best_pairs = pairs
    return list(best_pairs), float(best_total)


def exhaustive_cas(units, lam: float = 1.0, mu: float = 1.0) -> float:
    """Center Alignment Score computed with exhaustive matching.

    units is a sequence of (image_size, gts, preds) tuples where image_size
    is (width, height), each gt is (x, y, gc, d), and each pred is
    (x, y, score). Every step is recomputed here: pairing cost, exhaustive
    assignment, distance refinement, and both penalty terms.
    """
    cp_terms = []
    md_terms = []
    for (width, height), gts, preds in units:
        n_gt = len(gts)
        n_pred = len(preds)
        n = max(n_gt, n_pred)
        if n == 0:
            raise ValueError("empty unit")
        cost = [
            [
                lam
                * math.hypot((gx - px) / width, (gy - py) / height)
                + mu * abs(ggc - score)
                for px, py, score in preds
            ]
            for gx, gy, ggc, gd in gts
        ]
        if n_gt and n_pred:
            pairs, _ = assignment_reference(cost)
        else:
            pairs = []
        md_sum = 0.0
        matched = 0
        for g, k in pairs:
            gx, gy, _, gd = gts[g]
            px, py, _ = preds[k]
            dist = math.hypot(gx - px, gy - py)
            if dist > gd:
                continue
            matched += 1
            if dist > 0.0:
                md_sum += dist / gd
        cp_terms.append((n - matched) / n)
        md_terms.append(md_sum / n)
    if not cp_terms:
        raise ValueError("no units")
    return 1.0 - sum(cp_terms) / len(cp_terms) - sum(md_terms) / len(md_terms)
