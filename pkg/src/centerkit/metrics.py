"""Center Alignment Score and related aggregate metrics.

A unit is one (image, category) pair. For each unit with G ground truths,
N predictions, and matched pairs after refinement:

    md contribution of a pair = pixel distance / d  (0 when both are 0)
    cp = max(G, N) - matched          cardinality penalty
    n  = max(G, N)                    per-unit normalizer

CAS = 1 - mean(cp / n) - mean(md_sum / n), both means over units. Each
pair's md contribution is at most 1 after refinement, so every unit's
penalty (cp + md_sum) / n is at most 1 and CAS stays within [0, 1]: 1 only
for perfect cardinality and exact center hits, 0 for completely missing
output. Size-stratified CAS scores each band's ground truths after removing
predictions already claimed by out-of-band ground truths; cardinality
penalties then count only unmatched in-band ground truths.

Precision counts a matched pair as a true positive when the predicted
center lies inside (closed) the ground-truth box.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .annotations import BANDS, ImageInfo
from .matching import (
    GroundTruthCenter,
    MatchCostParams,
    MatchSet,
    match_and_refine,
)
from .peaks import CenterPoint

AGGREGATIONS = ("pooled", "macro")


@dataclass(frozen=True)
class UnitScore:
    """Score components of one evaluation unit."""

    image_id: int
    category_id: int
    band: str
    n: int
    matched: int
    cp: int
    md_sum: float
    tp: int
    n_gt: int
    n_pred: int


@dataclass(frozen=True)
class CategoryReport:
    """Pooled scores of one category."""

    category_id: int
    cas: float
    cp_term: float
    md_term: float
    unit_count: int


@dataclass(frozen=True)
class CasReport:
    """Full evaluation outcome. Band scores are None when the band is absent."""

    cas: float
    cp_term: float
    md_term: float
    cas_s: float | None
    cas_m: float | None
    cas_l: float | None
    precision: float
    recall: float
    f1: float
    units: int
    aggregation: str
    per_category: tuple[CategoryReport, ...] = ()

    def to_dict(self) -> dict:
        return {
            "cas": self.cas,
            "cp": self.cp_term,
            "md": self.md_term,
            "cas_s": self.cas_s,
            "cas_m": self.cas_m,
            "cas_l": self.cas_l,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "units": self.units,
            "per_category": [
                {
                    "category_id": c.category_id,
                    "cas": c.cas,
                    "cp": c.cp_term,
                    "md": c.md_term,
                    "units": c.unit_count,
                }
                for c in self.per_category
            ],
        }


@dataclass(frozen=True)
class EvalUnit:
    """Input to evaluate_units: one image and category with its centers."""

    image: ImageInfo
    category_id: int
    gts: tuple[GroundTruthCenter, ...]
    preds: tuple[CenterPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "gts", tuple(self.gts))
        object.__setattr__(self, "preds", tuple(self.preds))


def _pair_md(distance_px: float, d: float) -> float:
    if distance_px == 0.0:
        return 0.0
    return distance_px / d


def _tp(gts, preds, match: MatchSet) -> int:
    count = 0
    for pair in match.pairs:
        box = gts[pair.gt_index].box
        if box is None:
            continue
        p = preds[pair.pred_index]
        if box.x <= p.x <= box.x + box.w and box.y <= p.y <= box.y + box.h:
            count += 1
    return count


def score_unit(
    match: MatchSet,
    gts: Sequence[GroundTruthCenter],
    preds: Sequence[CenterPoint],
    *,
    image_id: int = 0,
    category_id: int = 0,
) -> UnitScore:
    """Score one unit from its refined match. The unit must be non-empty."""
    n_gt = len(gts)
    n_pred = len(preds)
    n = max(n_gt, n_pred)
    if n == 0:
        raise ValueError("empty unit: no ground truths and no predictions")
    matched = len(match.pairs)
    md_sum = sum(
        _pair_md(pair.distance_px, gts[pair.gt_index].d) for pair in match.pairs
    )
    return UnitScore(
        image_id=image_id,
        category_id=category_id,
        band="all",
        n=n,
        matched=matched,
        cp=n - matched,
        md_sum=md_sum,
        tp=_tp(gts, preds, match),
        n_gt=n_gt,
        n_pred=n_pred,
    )


def score_unit_banded(
    full_match: MatchSet,
    gts: Sequence[GroundTruthCenter],
    preds: Sequence[CenterPoint],
    band: str,
    params: MatchCostParams,
    image: ImageInfo,
    *,
    image_id: int = 0,
    category_id: int = 0,
) -> UnitScore | None:
    """Score one size band of a unit, or None when the band has no ground truths.

    Predictions matched to out-of-band ground truths in the full match are
    removed, the in-band ground truths are re-matched against the rest, and
    only unmatched in-band ground truths count toward the cardinality
    penalty.
    """
    if band not in BANDS:
        raise ValueError(f"unknown band {band!r}, expected one of {BANDS}")
    in_band = [g for g, gt in enumerate(gts) if gt.band == band]
    if not in_band:
        return None
    claimed = {
        pair.pred_index
        for pair in full_match.pairs
        if gts[pair.gt_index].band != band
    }
    sub_gts = [gts[g] for g in in_band]
    sub_preds = [p for k, p in enumerate(preds) if k not in claimed]
    sub_match = match_and_refine(sub_gts, sub_preds, params, image)
    matched = len(sub_match.pairs)
    md_sum = sum(
        _pair_md(pair.distance_px, sub_gts[pair.gt_index].d)
        for pair in sub_match.pairs
    )
    return UnitScore(
        image_id=image_id,
        category_id=category_id,
        band=band,
        n=len(in_band),
        matched=matched,
        cp=len(in_band) - matched,
        md_sum=md_sum,
        tp=_tp(sub_gts, sub_preds, sub_match),
        n_gt=len(in_band),
        n_pred=len(sub_preds),
    )


def penalty_terms(units: Sequence[UnitScore]) -> tuple[float, float]:
    """(mean cp / n, mean md_sum / n) over units."""
    if not units:
        raise ValueError("no units to score")
    cp_term = sum(u.cp / u.n for u in units) / len(units)
    md_term = sum(u.md_sum / u.n for u in units) / len(units)
    return cp_term, md_term


def cas(units: Sequence[UnitScore]) -> float:
    """Center Alignment Score: 1 - cp term - md term."""
    cp_term, md_term = penalty_terms(units)
    return 1.0 - cp_term - md_term


def cas_stratified(units: Sequence[UnitScore], band: str | None = None) -> float | None:
    """CAS over one band's unit scores; None when the band is absent.

    When band is given, every unit score must carry that band label.
    """
    if band is not None:
        if band not in BANDS:
            raise ValueError(f"unknown band {band!r}, expected one of {BANDS}")
        for u in units:
            if u.band != band:
                raise ValueError(f"unit scored for band {u.band!r}, expected {band!r}")
    if not units:
        return None
    return cas(units)


def precision_recall_f1(units: Sequence[UnitScore]) -> tuple[float, float, float]:
    """Pooled precision, recall, and F1 over units.

    Empty denominators yield 0.0 rather than an error.
    """
    tp = sum(u.tp for u in units)
    n_pred = sum(u.n_pred for u in units)
    n_gt = sum(u.n_gt for u in units)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate_units(
    units: Iterable[EvalUnit],
    *,
    cost_params: MatchCostParams | None = None,
    aggregation: str = "pooled",
    threads: int | None = None,
) -> CasReport:
    """Match and score every unit, then aggregate into a CasReport.

    Aggregation "pooled" averages unit penalties directly; "macro" averages
    the pooled per-category headline scores instead, giving rare categories
    equal weight. Band scores and precision/recall/F1 are always pooled.
    Units are processed in (image id, category id) order, so the report is
    identical for any thread count.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(
            f"unknown aggregation {aggregation!r}, expected one of {AGGREGATIONS}"
        )
    params = cost_params or MatchCostParams()
    ordered = sorted(units, key=lambda u: (u.image.id, u.category_id))
    if not ordered:
        raise ValueError("no units to evaluate")

    def one(unit: EvalUnit) -> tuple[UnitScore, dict[str, UnitScore | None]]:
        full = match_and_refine(unit.gts, unit.preds, params, unit.image)
        overall = score_unit(
            full,
            unit.gts,
            unit.preds,
            image_id=unit.image.id,
            category_id=unit.category_id,
        )
        banded = {
            band: score_unit_banded(
                full,
                unit.gts,
                unit.preds,
                band,
                params,
                unit.image,
                image_id=unit.image.id,
                category_id=unit.category_id,
            )
            for band in BANDS
        }
        return overall, banded

    with ThreadPoolExecutor(max_workers=threads) as pool:
        scored = list(pool.map(one, ordered))

    overall_scores = [s for s, _ in scored]
    band_scores: dict[str, list[UnitScore]] = {band: [] for band in BANDS}
    for _, banded in scored:
        for band in BANDS:
            if banded[band] is not None:
                band_scores[band].append(banded[band])

    by_category: dict[int, list[UnitScore]] = {}
    for score in overall_scores:
        by_category.setdefault(score.category_id, []).append(score)
    per_category = []
    for cid in sorted(by_category):
        cp_term, md_term = penalty_terms(by_category[cid])
        per_category.append(
            CategoryReport(
                category_id=cid,
                cas=1.0 - cp_term - md_term,
                cp_term=cp_term,
                md_term=md_term,
                unit_count=len(by_category[cid]),
            )
        )

    if aggregation == "pooled":
        cp_term, md_term = penalty_terms(overall_scores)
    else:
        cp_term = sum(c.cp_term for c in per_category) / len(per_category)
        md_term = sum(c.md_term for c in per_category) / len(per_category)

    precision, recall, f1 = precision_recall_f1(overall_scores)
    return CasReport(
        cas=1.0 - cp_term - md_term,
        cp_term=cp_term,
        md_term=md_term,
        cas_s=cas_stratified(band_scores["small"], "small"),
        cas_m=cas_stratified(band_scores["medium"], "medium"),
        cas_l=cas_stratified(band_scores["large"], "large"),
        precision=precision,
        recall=recall,
        f1=f1,
        units=len(overall_scores),
        aggregation=aggregation,
        per_category=tuple(per_category),
    )
