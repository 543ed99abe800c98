"""Optimal center matching: assignment costs, Hungarian solve, refinement.

Predicted centers are paired to ground-truth centers by minimizing

    cost = lam * dist_norm + mu * |gc - score|

where dist_norm is the Euclidean distance after dividing x by the image
width and y by the image height, gc is the ground-truth center's target
value (1.0 at a box center), and score is the predicted probability. Pairs
whose raw pixel distance exceeds the ground truth's distance threshold
(half the box diagonal) are reclassified as unmatched.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .annotations import BoundingBox, ImageInfo, box_center, box_diagonal_threshold, size_band
from .peaks import CenterPoint


@dataclass(frozen=True)
class MatchCostParams:
    """Weights of the distance and probability terms."""

    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        for name in ("lam", "mu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.lam == 0 and self.mu == 0:
            raise ValueError("lam and mu cannot both be 0")


@dataclass(frozen=True)
class GroundTruthCenter:
    """A ground-truth object center with its matching threshold and band.

    d is the pixel distance beyond which a pairing is rejected; band is the
    COCO size band of the source box. The source box is kept when known so
    containment checks remain possible.
    """

    x: float
    y: float
    d: float
    gc: float = 1.0
    band: str = "large"
    box: BoundingBox | None = None

    @classmethod
    def from_box(cls, box: BoundingBox) -> "GroundTruthCenter":
        cx, cy = box_center(box)
        return cls(
            x=cx,
            y=cy,
            d=box_diagonal_threshold(box),
            gc=1.0,
            band=size_band(box),
            box=box,
        )


@dataclass(frozen=True)
class MatchPair:
    """One assigned (ground truth, prediction) pair."""

    gt_index: int
    pred_index: int
    cost: float
    distance_px: float


@dataclass(frozen=True)
class MatchSet:
    """Outcome of matching one unit: pairs plus leftover indices."""

    pairs: tuple[MatchPair, ...]
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]


def match_cost(
    gt: GroundTruthCenter,
    pred: CenterPoint,
    params: MatchCostParams,
    image: ImageInfo,
) -> float:
    """Pairing cost: lam * normalized distance + mu * probability gap."""
    dx = (gt.x - pred.x) / image.width
    dy = (gt.y - pred.y) / image.height
    return params.lam * math.hypot(dx, dy) + params.mu * abs(gt.gc - pred.score)


def cost_matrix(
    gts, preds, params: MatchCostParams, image: ImageInfo
) -> np.ndarray:
    """Dense (len(gts), len(preds)) cost matrix."""
    out = np.empty((len(gts), len(preds)), dtype=np.float64)
    for g, gt in enumerate(gts):
        for n, pred in enumerate(preds):
            out[g, n] = match_cost(gt, pred, params, image)
    return out


def hungarian(cost: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost assignment of min(rows, cols) pairs.

    Every row is assigned when rows <= cols, every column otherwise. Returns
    (pairs sorted by row index, total cost). Deterministic: among equal-cost
    assignments the solver resolves ties toward lower column indices.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-d, got shape {cost.shape}")
    n, m = cost.shape
    if n == 0 or m == 0:
        return [], 0.0
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix must be finite")
    if n <= m:
        row_to_col = _backend.solve_lap(np.ascontiguousarray(cost))
        pairs = [(i, int(row_to_col[i])) for i in range(n)]
    else:
        col_to_row = _backend.solve_lap(np.ascontiguousarray(cost.T))
        pairs = sorted((int(col_to_row[j]), j) for j in range(m))
    total = float(sum(cost[i, j] for i, j in pairs))
    return pairs, total


def brute_force_assignment(
    cost: np.ndarray, max_side: int = 8
) -> tuple[list[tuple[int, int]], float]:
    """Exhaustive minimum-cost assignment for small matrices.

    Enumerates every injective assignment of the smaller side into the
    larger. Ties resolve to the lexicographically smallest pair list.
    Intended as an oracle; refuses matrices with min(rows, cols) > max_side.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n == 0 or m == 0:
        return [], 0.0
    if min(n, m) > max_side:
        raise ValueError(f"matrix {n}x{m} too large for exhaustive search")
    best: tuple[float, tuple[tuple[int, int], ...]] | None = None
    if n <= m:
        rows = range(n)
        for cols in itertools.permutations(range(m), n):
            pairs = tuple(zip(rows, cols))
            total = float(sum(cost[i, j] for i, j in pairs))
            if best is None or (total, pairs) < best:
                best = (total, pairs)
    else:
        cols = range(m)
        for rows_pick in itertools.permutations(range(n), m):
            pairs = tuple(sorted(zip(rows_pick, cols)))
            total = float(sum(cost[i, j] for i, j in pairs))
            if best is None or (total, pairs) < best:
                best = (total, pairs)
    return list(best[1]), best[0]


def match_and_refine(
    gts,
    preds,
    params: MatchCostParams,
    image: ImageInfo,
) -> MatchSet:
    """Assign predictions to ground truths, then reject distant pairs.

    A pair whose raw pixel distance exceeds the ground truth's threshold d
    is reclassified as unmatched on both sides.
    """
    gts = list(gts)
    preds = list(preds)
    pairs_idx, _ = hungarian(cost_matrix(gts, preds, params, image))
    pairs: list[MatchPair] = []
    matched_gt: set[int] = set()
    matched_pred: set[int] = set()
    for g, n in pairs_idx:
        gt = gts[g]
        pred = preds[n]
        dist = math.hypot(gt.x - pred.x, gt.y - pred.y)
        if dist > gt.d:
            continue
        pairs.append(
            MatchPair(
                gt_index=g,
                pred_index=n,
                cost=match_cost(gt, pred, params, image),
                distance_px=dist,
            )
        )
        matched_gt.add(g)
        matched_pred.add(n)
    return MatchSet(
        pairs=tuple(pairs),
        unmatched_gt=tuple(g for g in range(len(gts)) if g not in matched_gt),
        unmatched_pred=tuple(n for n in range(len(preds)) if n not in matched_pred),
    )
