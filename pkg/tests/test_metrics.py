"""Center Alignment Score, banded scores, and precision/recall/F1.

Deterministic cases pin hand-computed penalties; random instances are
cross-checked against the exhaustive enumeration oracle, which recomputes
matching and scoring from scratch.
"""

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from centerkit.annotations import BoundingBox, ImageInfo
from centerkit.matching import GroundTruthCenter, MatchCostParams, match_and_refine
from centerkit.metrics import (
    AGGREGATIONS,
    CasReport,
    EvalUnit,
    cas,
    cas_stratified,
    evaluate_units,
    penalty_terms,
    precision_recall_f1,
    score_unit,
    score_unit_banded,
)
from centerkit.oracle import exhaustive_cas
from centerkit.peaks import CenterPoint

IMG = ImageInfo(id=1, width=200, height=200)
P = MatchCostParams()


def gt_from_box(x, y, w, h, image=1, cat=1):
    return GroundTruthCenter.from_box(
        BoundingBox(x=x, y=y, w=w, h=h, category_id=cat, image_id=image)
    )


def pred(x, y, score=1.0):
    return CenterPoint(x=x, y=y, score=score)


def scored(gts, preds, image=IMG):
    return score_unit(match_and_refine(gts, preds, P, image), gts, preds)


class TestScoreUnit:
    def test_perfect_predictions(self):
        gts = [gt_from_box(10, 10, 6, 8), gt_from_box(100, 100, 6, 8)]
        preds = [pred(g.x, g.y) for g in gts]
        u = scored(gts, preds)
        assert (u.n, u.matched, u.cp, u.md_sum, u.tp) == (2, 2, 0, 0.0, 2)
        assert (u.n_gt, u.n_pred) == (2, 2)

    def test_zero_predictions(self):
        gts = [gt_from_box(10, 10, 6, 8), gt_from_box(60, 60, 6, 8),
               gt_from_box(120, 120, 6, 8)]
        u = scored(gts, [])
        assert (u.n, u.matched, u.cp, u.md_sum, u.tp) == (3, 0, 3, 0.0, 0)

    def test_frozen_distance_ratio(self):
        # box 4x3 -> D = 2.5; pred 1.5 px from the center, inside the box
        g = gt_from_box(8, 8, 4, 3)
        assert g.d == pytest.approx(2.5)
        u = scored([g], [pred(g.x + 1.5, g.y)])
        assert u.md_sum == pytest.approx(0.6, rel=1e-12)
        assert (u.cp, u.n, u.tp, u.matched) == (0, 1, 1, 1)

    def test_excess_predictions_penalize_cardinality(self):
        g = gt_from_box(50, 50, 6, 8)
        preds = [pred(g.x, g.y), pred(150.0, 150.0, 0.3)]
        u = scored([g], preds)
        assert (u.n, u.matched, u.cp) == (2, 1, 1)

    def test_degenerate_box_at_zero_distance(self):
        # a zero-area box has D = 0; an exact hit contributes nothing to md
        g = gt_from_box(20, 20, 0, 0)
        assert g.d == 0.0
        u = scored([g], [pred(20.0, 20.0)])
        assert (u.matched, u.cp, u.md_sum, u.tp) == (1, 0, 0.0, 1)

    def test_empty_unit_rejected(self):
        with pytest.raises(ValueError):
            scored([], [])

    def test_pred_outside_box_is_matched_but_not_tp(self):
        # tall sliver: D reaches far beyond the 1-px-wide box
        g = gt_from_box(10, 10, 1, 8)
        u = scored([g], [pred(13.0, 14.0)])
        assert u.matched == 1
        assert u.tp == 0

    def test_gt_without_box_never_counts_tp(self):
        g = GroundTruthCenter(x=30.0, y=30.0, d=10.0)
        u = scored([g], [pred(30.0, 30.0)])
        assert u.matched == 1
        assert u.tp == 0


class TestCas:
    def test_all_perfect_is_exactly_one(self):
        g = gt_from_box(50, 50, 6, 8)
        units = [scored([g], [pred(g.x, g.y)]) for _ in range(4)]
        assert cas(units) == 1.0

    def test_all_empty_predictions_is_exactly_zero(self):
        g = gt_from_box(50, 50, 6, 8)
        units = [scored([g], []) for _ in range(3)]
        assert cas(units) == 0.0

    def test_half_perfect_half_empty(self):
        g = gt_from_box(50, 50, 6, 8)
        units = [scored([g], [pred(g.x, g.y)]), scored([g], [])]
        assert cas(units) == pytest.approx(0.5, abs=1e-12)

    def test_penalty_terms_split(self):
        g = gt_from_box(8, 8, 4, 3)  # D = 2.5
        units = [scored([g], [pred(g.x + 1.5, g.y)])]
        cp_term, md_term = penalty_terms(units)
        assert cp_term == 0.0
        assert md_term == pytest.approx(0.6, rel=1e-12)
        assert cas(units) == pytest.approx(0.4, rel=1e-12)

    def test_empty_unit_list_rejected(self):
        with pytest.raises(ValueError):
            cas([])

    def test_radial_sweep_monotone_then_constant(self):
        # single gt with D = 5 (box 6x8); unit penalty grows with distance
        # and saturates at 1 once the pair is refined away
        dists = [8.0 * k / 99.0 for k in range(100)]
        penalties = []
        for dist in dists:
            g = gt_from_box(47, 46, 6, 8)
            u = scored([g], [pred(g.x + dist, g.y)])
            penalties.append((u.cp + u.md_sum) / u.n)
        for a, b in zip(penalties, penalties[1:]):
            assert b >= a - 1e-12
        for dist, penalty in zip(dists, penalties):
            if dist > 5.0:
                assert penalty == 1.0

    def test_scale_invariance(self):
        def build(s):
            image = ImageInfo(id=1, width=200 * s, height=200 * s)
            gts = [
                gt_from_box(10 * s, 10 * s, 30 * s, 40 * s),
                gt_from_box(100 * s, 90 * s, 20 * s, 20 * s),
            ]
            preds = [
                pred(22 * s, 27 * s, 0.9),
                pred(105 * s, 95 * s, 0.7),
                pred(180 * s, 30 * s, 0.6),
            ]
            return scored(gts, preds, image)

        base = build(1.0)
        for s in (0.5, 3.0, 7.0):
            other = build(s)
            assert other.cp == base.cp and other.matched == base.matched
            assert other.md_sum == pytest.approx(base.md_sum, rel=1e-9)


class TestBandedCas:
    def test_small_unmatched_large_matched_at_half_d(self):
        small = gt_from_box(10, 10, 4, 3)          # area 12 -> small
        large = gt_from_box(50, 50, 100, 100)      # area 10000 -> large
        assert (small.band, large.band) == ("small", "large")
        half_d = large.d / 2.0
        unit = EvalUnit(
            image=IMG,
            category_id=1,
            gts=(small, large),
            preds=(pred(large.x + half_d, large.y),),
        )
        report = evaluate_units([unit])
        assert report.cas_s == 0.0
        assert report.cas_l == pytest.approx(0.5, rel=1e-12)
        assert report.cas_m is None

    def test_only_large_boxes_band_equals_overall(self):
        big_img = ImageInfo(id=1, width=300, height=300)
        g1 = gt_from_box(0, 0, 100, 100, image=1)
        g2 = gt_from_box(150, 150, 100, 100, image=1)
        unit = EvalUnit(
            image=big_img,
            category_id=1,
            gts=(g1, g2),
            preds=(pred(g1.x + 10, g1.y), pred(g2.x, g2.y)),
        )
        report = evaluate_units([unit])
        assert report.cas_l == pytest.approx(report.cas, rel=1e-12)
        assert report.cas_s is None and report.cas_m is None

    def test_matched_small_counts_only_in_small_band(self):
        small = gt_from_box(10, 10, 4, 3)
        unit = EvalUnit(
            image=IMG, category_id=1, gts=(small,), preds=(pred(small.x, small.y),)
        )
        report = evaluate_units([unit])
        assert report.cas_s == 1.0
        assert report.cas_m is None and report.cas_l is None

    def test_band_label_mismatch_rejected(self):
        g = gt_from_box(10, 10, 4, 3)
        u = score_unit_banded(
            match_and_refine([g], [], P, IMG), [g], [], "small", P, IMG
        )
        assert u is not None and u.band == "small"
        with pytest.raises(ValueError):
            cas_stratified([u], "large")
        with pytest.raises(ValueError):
            cas_stratified([u], "huge")

    def test_absent_band_returns_none(self):
        g = gt_from_box(10, 10, 4, 3)
        assert (
            score_unit_banded(
                match_and_refine([g], [], P, IMG), [g], [], "large", P, IMG
            )
            is None
        )
        assert cas_stratified([], "small") is None


class TestPrecisionRecall:
    def test_perfect(self):
        g = gt_from_box(50, 50, 6, 8)
        units = [scored([g], [pred(g.x, g.y)])]
        assert precision_recall_f1(units) == (1.0, 1.0, 1.0)

    def test_zero_predictions(self):
        g = gt_from_box(50, 50, 6, 8)
        units = [scored([g], [])]
        assert precision_recall_f1(units) == (0.0, 0.0, 0.0)

    def test_half(self):
        # 2 gts, 2 preds: one exact hit, one spurious far prediction
        g1 = gt_from_box(10, 10, 4, 3)
        g2 = gt_from_box(50, 50, 4, 3)
        units = [scored([g1, g2], [pred(g1.x, g1.y), pred(150.0, 150.0, 0.2)])]
        p, r, f1 = precision_recall_f1(units)
        assert (p, r, f1) == (0.5, 0.5, 0.5)

    def test_pools_across_units(self):
        g = gt_from_box(50, 50, 6, 8)
        perfect = scored([g], [pred(g.x, g.y)])
        empty = scored([g], [])
        p, r, f1 = precision_recall_f1([perfect, empty])
        assert p == 1.0  # 1 tp / 1 prediction
        assert r == 0.5  # 1 tp / 2 ground truths
        assert f1 == pytest.approx(2 / 3, rel=1e-12)


class TestEvaluateUnits:
    def make_units(self):
        g = gt_from_box(50, 50, 6, 8)
        imgs = [ImageInfo(id=i, width=200, height=200) for i in (1, 2, 3)]
        return [
            EvalUnit(image=imgs[0], category_id=1, gts=(g,), preds=(pred(g.x, g.y),)),
            EvalUnit(image=imgs[1], category_id=1, gts=(g,), preds=()),
            EvalUnit(image=imgs[2], category_id=2, gts=(g,), preds=()),
        ]

    def test_pooled_aggregation(self):
        report = evaluate_units(self.make_units(), aggregation="pooled")
        assert report.cas == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert report.units == 3

    def test_macro_aggregation(self):
        report = evaluate_units(self.make_units(), aggregation="macro")
        # category 1 penalty mean 0.5, category 2 penalty 1.0
        assert report.cas == pytest.approx(0.25, rel=1e-12)
        cats = {c.category_id: c.cas for c in report.per_category}
        assert cats[1] == pytest.approx(0.5, rel=1e-12)
        assert cats[2] == 0.0

    def test_per_category_sorted_and_counted(self):
        report = evaluate_units(self.make_units())
        assert [c.category_id for c in report.per_category] == [1, 2]
        assert [c.unit_count for c in report.per_category] == [2, 1]

    def test_thread_count_never_changes_the_report(self):
        units = self.make_units()
        a = evaluate_units(units, threads=1)
        b = evaluate_units(units, threads=8)
        assert a == b

    def test_validation(self):
        assert AGGREGATIONS == ("pooled", "macro")
        with pytest.raises(ValueError):
            evaluate_units(self.make_units(), aggregation="median")
        with pytest.raises(ValueError):
            evaluate_units([])

    def test_report_json_keys_are_frozen(self):
        doc = evaluate_units(self.make_units()).to_dict()
        assert list(doc.keys()) == [
            "cas", "cp", "md", "cas_s", "cas_m", "cas_l",
            "precision", "recall", "f1", "units", "per_category",
        ]
        assert list(doc["per_category"][0].keys()) == [
            "category_id", "cas", "cp", "md", "units",
        ]

    @settings(deadline=None, max_examples=60)
    @given(
        seed=st.integers(0, 10_000),
        n_units=st.integers(1, 3),
    )
    def test_matches_exhaustive_oracle(self, seed, n_units):
        import numpy as np

        rng = np.random.default_rng(seed)
        units = []
        oracle_units = []
        for k in range(n_units):
            n_gt = int(rng.integers(0, 5))
            n_pred = int(rng.integers(0, 5))
            if n_gt == 0 and n_pred == 0:
                n_gt = 1
            image = ImageInfo(id=k + 1, width=100, height=80)
            gts = []
            for _ in range(n_gt):
                w = float(rng.uniform(4, 40))
                h = float(rng.uniform(4, 40))
                x = float(rng.uniform(0, 100 - w))
                y = float(rng.uniform(0, 80 - h))
                gts.append(
                    GroundTruthCenter(
                        x=x + w / 2.0,
                        y=y + h / 2.0,
                        d=0.5 * math.hypot(w, h),
                        gc=float(rng.uniform(0.5, 1.0)),
                    )
                )
            preds = [
                pred(
                    float(rng.uniform(0, 100)),
                    float(rng.uniform(0, 80)),
                    float(rng.uniform(0, 1)),
                )
                for _ in range(n_pred)
            ]
            units.append(
                EvalUnit(image=image, category_id=1, gts=tuple(gts), preds=tuple(preds))
            )
            oracle_units.append(
                (
                    (100.0, 80.0),
                    [(g.x, g.y, g.gc, g.d) for g in gts],
                    [(q.x, q.y, q.score) for q in preds],
                )
            )
        report = evaluate_units(units)
        expected = exhaustive_cas(oracle_units)
        assert report.cas == pytest.approx(expected, abs=1e-9)
        assert 0.0 <= report.cas <= 1.0
        assert 0.0 <= report.cp_term <= 1.0
        assert 0.0 <= report.md_term <= 1.0
