"""Loss kernels: scalar values, identities, gradients, array agreement.

Frozen numbers were computed independently with plain log/pow arithmetic
before being pinned. The analytic gradient is validated against central
finite differences from centerkit.oracle.
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from centerkit.heatmap import Heatmap
from centerkit.loss import (
    KERNELS,
    BcflParams,
    alpha_c,
    bcfl,
    bcfl_grad_p,
    count_negatives,
    estimate_alpha,
    focal_loss,
    loss_map,
    qfl,
    reduce_loss,
    weighted_bce,
    weighted_mse,
)
from centerkit.oracle import finite_diff


def ce(p, y):
    return -((1.0 - y) * math.log(1.0 - p) + y * math.log(p))


def heat(values, stride=4.0):
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(1, 1, -1)
    elif arr.ndim == 2:
        arr = arr[None, :, :]
    return Heatmap(arr, stride)


class TestFocalLoss:
    def test_frozen_scalar(self):
        # 0.25 * (1 - 0.5)^2 * (-ln 0.5)
        assert focal_loss(0.5, 1, 0.25, 2.0) == pytest.approx(
            0.04332169878499658, rel=1e-12
        )

    def test_perfect_prediction_vanishes(self):
        assert focal_loss(1.0, 1, 0.25, 2.0) == pytest.approx(0.0, abs=1e-5)
        assert focal_loss(0.0, -1, 0.25, 2.0) == pytest.approx(0.0, abs=1e-5)

    def test_gamma_zero_alpha_half_is_half_bce(self):
        for p in (0.1, 0.37, 0.9):
            assert focal_loss(p, 1, 0.5, 0.0) == pytest.approx(
                0.5 * -math.log(p), rel=1e-12
            )
            assert focal_loss(p, -1, 0.5, 0.0) == pytest.approx(
                0.5 * -math.log(1.0 - p), rel=1e-12
            )

    def test_negative_branch_mirrors_positive(self):
        assert focal_loss(0.3, -1, 0.25, 2.0) == pytest.approx(
            focal_loss(0.7, 1, 0.75, 2.0), rel=1e-12
        )

    def test_rejects_soft_labels(self):
        for y in (0, 0.5, 2, -2):
            with pytest.raises(ValueError):
                focal_loss(0.5, y, 0.25, 2.0)

    def test_clamps_rather_than_diverging(self):
        v = focal_loss(0.0, 1, 1.0, 0.0)
        assert v == pytest.approx(-math.log(1e-7), rel=1e-9)


class TestQfl:
    def test_frozen_scalar(self):
        # |0 - 0.5|^2 * (-ln 0.5)
        assert qfl(0.5, 0.0, 2.0) == pytest.approx(0.17328679513998632, rel=1e-12)

    def test_zero_at_target(self):
        for y in (0.1, 0.3, 0.5, 0.9):
            assert qfl(y, y, 2.0) == 0.0
        # at the extremes the clamp moves p off the target by 1e-7, leaving
        # a residual of order gap^2 * gap
        for y in (0.0, 1.0):
            assert 0.0 < qfl(y, y, 2.0) < 1e-20

    @given(p=st.floats(0.01, 0.99), gamma=st.floats(0.5, 4.0))
    def test_y_one_reduces_to_focal_positive_branch(self, p, gamma):
        expected = -((1.0 - p) ** gamma) * math.log(p)
        assert qfl(p, 1.0, gamma) == pytest.approx(expected, abs=1e-12)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            qfl(1.2, 0.5, 2.0)
        with pytest.raises(ValueError):
            qfl(0.5, -0.1, 2.0)


class TestAlphaC:
    def test_endpoints(self):
        assert alpha_c(1.0, 0.75) == 0.75
        assert alpha_c(0.0, 0.75) == 0.25

    def test_midpoint_and_degenerate(self):
        assert alpha_c(0.5, 0.75) == pytest.approx(0.5)
        for y in (0.0, 0.31, 1.0):
            assert alpha_c(y, 0.5) == pytest.approx(0.5)

    def test_strictly_increasing_in_y_for_alpha_above_half(self):
        ys = np.linspace(0.0, 1.0, 11)
        vals = [alpha_c(y, 0.964) for y in ys]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestBcfl:
    def test_frozen_scalar(self):
        # alpha_c = 0.65, gap^2 = 0.04, ce(0.6, 0.8) = 0.59191864...
        v = bcfl(0.6, 0.8, BcflParams(alpha=0.75, gamma=2.0))
        assert v == pytest.approx(0.015389884780078225, rel=1e-12)

    def test_zero_gap(self):
        assert bcfl(0.5, 0.5, BcflParams(0.75, 2.0)) == 0.0

    @given(
        p=st.floats(0.0, 1.0),
        y=st.floats(0.0, 1.0),
        gamma=st.floats(0.0, 4.0),
    )
    def test_alpha_half_is_half_qfl(self, p, y, gamma):
        assert bcfl(p, y, BcflParams(0.5, gamma)) == pytest.approx(
            0.5 * qfl(p, y, gamma), abs=1e-12
        )

    @given(
        p=st.floats(0.0, 1.0),
        y=st.floats(0.0, 1.0),
        alpha=st.floats(0.0, 1.0),
        gamma=st.floats(0.0, 4.0),
    )
    def test_decomposes_as_alpha_c_times_qfl(self, p, y, alpha, gamma):
        expected = alpha_c(y, alpha) * qfl(p, y, gamma)
        got = bcfl(p, y, BcflParams(alpha, gamma))
        assert got >= 0.0
        assert got == pytest.approx(expected, abs=1e-12)

    def test_downweights_negatives_relative_to_qfl(self):
        # alpha > 0.5 shrinks the weight on low targets below 1
        params = BcflParams(0.75, 2.0)
        for p in (0.1, 0.5, 0.9):
            for y in (0.0, 0.25, 0.5):
                assert bcfl(p, y, params) <= qfl(p, y, 2.0) + 1e-15

    def test_gamma_zero_is_weighted_ce(self):
        v = bcfl(0.3, 0.9, BcflParams(0.75, 0.0))
        assert v == pytest.approx(alpha_c(0.9, 0.75) * ce(0.3, 0.9), rel=1e-12)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            BcflParams(alpha=-0.1)
        with pytest.raises(ValueError):
            BcflParams(alpha=1.1)
        with pytest.raises(ValueError):
            BcflParams(gamma=-1.0)


class TestBcflGradient:
    def test_zero_at_target_for_gamma_at_least_one(self):
        assert bcfl_grad_p(0.4, 0.4, BcflParams(0.75, 2.0)) == 0.0
        assert bcfl_grad_p(0.4, 0.4, BcflParams(0.75, 1.0)) == 0.0

    def test_nondifferentiable_point_rejected_below_gamma_one(self):
        with pytest.raises(ValueError):
            bcfl_grad_p(0.4, 0.4, BcflParams(0.75, 0.5))

    def test_sign_away_from_target(self):
        # y = 0: raising p raises the loss
        assert bcfl_grad_p(0.5, 0.0, BcflParams(0.75, 2.0)) > 0.0
        # y = 1: raising p lowers the loss
        assert bcfl_grad_p(0.5, 1.0, BcflParams(0.75, 2.0)) < 0.0

    def test_matches_finite_differences_on_grid(self):
        worst = 0.0
        for params in (BcflParams(0.5, 2.0), BcflParams(0.75, 1.0), BcflParams(0.964, 3.0)):
            for pi in range(1, 20):
                for yi in range(1, 20):
                    p, y = pi / 20.0, yi / 20.0
                    if abs(p - y) < 1e-3:
                        continue
                    a = bcfl_grad_p(p, y, params)
                    n = finite_diff(lambda q: bcfl(q, y, params), p, h=1e-5)
                    rel = abs(a - n) / max(abs(a), abs(n), 1e-12)
                    worst = max(worst, rel)
        assert worst < 1e-5

    @given(
        p=st.floats(0.05, 0.95),
        y=st.floats(0.05, 0.95),
        gamma=st.sampled_from([1.0, 2.0, 3.0]),
        alpha=st.floats(0.0, 1.0),
    )
    def test_matches_finite_differences_random(self, p, y, gamma, alpha):
        assume(abs(p - y) > 0.05)
        params = BcflParams(alpha, gamma)
        a = bcfl_grad_p(p, y, params)
        n = finite_diff(lambda q: bcfl(q, y, params), p, h=1e-5)
        assert abs(a - n) / max(abs(a), abs(n), 1e-8) < 1e-4


class TestWeightedBaselines:
    def test_mse_frozen_scalar(self):
        assert weighted_mse(0.3, 0.8, 1.0) == pytest.approx(0.25, rel=1e-12)

    def test_unit_weight_is_plain_loss(self):
        assert weighted_bce(0.3, 0.8, 1.0) == pytest.approx(ce(0.3, 0.8), rel=1e-12)
        assert weighted_mse(0.2, 0.9, 1.0) == pytest.approx(0.49, rel=1e-12)

    def test_pos_weight_scales_positive_target(self):
        assert weighted_bce(0.3, 1.0, 10.0) == pytest.approx(
            10.0 * weighted_bce(0.3, 1.0, 1.0), rel=1e-12
        )
        assert weighted_mse(0.3, 1.0, 10.0) == pytest.approx(
            10.0 * weighted_mse(0.3, 1.0, 1.0), rel=1e-12
        )
        # zero target is unaffected
        assert weighted_bce(0.3, 0.0, 10.0) == pytest.approx(
            weighted_bce(0.3, 0.0, 1.0), rel=1e-12
        )


class TestEstimateAlpha:
    def test_all_negative(self):
        hm = heat(np.zeros(10, dtype=np.float32))
        assert estimate_alpha([hm], 0.6) == 1.0

    def test_four_percent_positive_gives_point_96(self):
        values = np.zeros(100, dtype=np.float32)
        values[:4] = 0.7  # >= threshold: positives
        assert estimate_alpha([heat(values)], 0.6) == 0.96

    def test_boundary_cell_counts_as_positive(self):
        hm = heat(np.array([0.6, 0.59], dtype=np.float32))
        assert estimate_alpha([hm], 0.6) == 0.5

    def test_streams_over_multiple_heatmaps(self):
        a = heat(np.zeros(30, dtype=np.float32))
        b = heat(np.full(10, 0.9, dtype=np.float32))
        assert estimate_alpha([a, b], 0.6) == 0.75

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            estimate_alpha([], 0.6)
        with pytest.raises(ValueError):
            estimate_alpha([Heatmap(np.zeros((0, 2, 2), dtype=np.float32), 4.0)], 0.6)

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValueError):
            estimate_alpha([heat([0.0])], 1.5)

    def test_count_negatives_matches(self):
        values = np.linspace(0.0, 1.0, 11).astype(np.float32)
        hm = heat(values)
        neg, cells = count_negatives([hm], 0.5)
        assert (neg, cells) == (5, 11)
        assert estimate_alpha([hm], 0.5) == neg / cells


class TestLossMap:
    RNG = np.random.default_rng(7)

    def test_matches_scalar_kernels_elementwise(self):
        p = self.RNG.random(64)
        y = self.RNG.random(64)
        params = BcflParams(0.964, 2.0)
        cases = {
            "qfl": [qfl(pi, yi, 2.0) for pi, yi in zip(p, y)],
            "bcfl": [bcfl(pi, yi, params) for pi, yi in zip(p, y)],
            "wbce": [weighted_bce(pi, yi, 3.0) for pi, yi in zip(p, y)],
            "wmse": [weighted_mse(pi, yi, 3.0) for pi, yi in zip(p, y)],
        }
        for kernel, expected in cases.items():
            got = loss_map(p, y, kernel, alpha=0.964, gamma=2.0, pos_weight=3.0)
            np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_fl_binarizes_target_at_half(self):
        p = self.RNG.random(32)
        y = self.RNG.random(32)
        got = loss_map(p, y, "fl", alpha=0.25, gamma=2.0)
        expected = [
            focal_loss(pi, 1 if yi >= 0.5 else -1, 0.25, 2.0)
            for pi, yi in zip(p, y)
        ]
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_out_of_range_predictions_are_clamped(self):
        got = loss_map(np.array([-3.0, 5.0]), np.array([0.0, 1.0]), "qfl")
        expected = loss_map(np.array([0.0, 1.0]), np.array([0.0, 1.0]), "qfl")
        np.testing.assert_allclose(got, expected, rtol=1e-12)
        assert np.isfinite(got).all()

    def test_preserves_shape(self):
        p = self.RNG.random((2, 3, 4))
        y = self.RNG.random((2, 3, 4))
        assert loss_map(p, y, "bcfl").shape == (2, 3, 4)

    def test_validation(self):
        with pytest.raises(ValueError):
            loss_map(np.zeros(3), np.zeros(4), "qfl")
        with pytest.raises(ValueError):
            loss_map(np.zeros(3), np.full(3, 1.5), "qfl")
        with pytest.raises(ValueError):
            loss_map(np.full(3, np.nan), np.zeros(3), "qfl")
        with pytest.raises(ValueError):
            loss_map(np.zeros(3), np.zeros(3), "nope")

    def test_kernel_list_is_stable(self):
        assert KERNELS == ("fl", "qfl", "bcfl", "wbce", "wmse")


class TestReduceLoss:
    def test_zero_when_prediction_equals_target(self):
        rng = np.random.default_rng(3)
        data = rng.random((2, 4, 4), dtype=np.float32)
        hm = Heatmap(data, 4.0)
        for kernel in ("qfl", "bcfl", "wmse"):
            report = reduce_loss(hm, hm, kernel)
            assert report.total == 0.0
            assert report.per_channel == (0.0, 0.0)
            assert report.cell_count == 32

    def test_single_cell_reduces_to_scalar_kernel(self):
        pred = heat([0.6])
        target = heat([0.8])
        report = reduce_loss(pred, target, "bcfl", alpha=0.75, gamma=2.0)
        # the raster stores float32, so compare against the scalar kernel
        # evaluated at the float32-rounded inputs
        want = bcfl(
            float(np.float32(0.6)),
            float(np.float32(0.8)),
            BcflParams(alpha=0.75, gamma=2.0),
        )
        assert report.total == pytest.approx(want, rel=1e-12)
        assert report.total == pytest.approx(0.015389884780078225, rel=1e-6)

    def test_uniform_maps_frozen_value(self):
        # every cell is bcfl(0.5, 0.8; gamma=2, alpha=0.75)
        #   = 0.65 * 0.09 * ln 2 = 0.040549110062756805
        pred = Heatmap(np.full((1, 5, 5), 0.5, dtype=np.float32), 4.0)
        target = Heatmap(np.full((1, 5, 5), 0.8, dtype=np.float32), 4.0)
        report = reduce_loss(pred, target, "bcfl", alpha=0.75, gamma=2.0)
        assert report.total == pytest.approx(0.040549110062756805, rel=1e-6)
        assert report.cell_count == 25

    def test_total_is_mean_of_equal_sized_channels(self):
        rng = np.random.default_rng(11)
        pred = Heatmap(rng.random((3, 4, 4), dtype=np.float32), 4.0)
        target = Heatmap(rng.random((3, 4, 4), dtype=np.float32), 4.0)
        report = reduce_loss(pred, target, "qfl")
        assert report.total == pytest.approx(
            sum(report.per_channel) / 3.0, rel=1e-12
        )
        assert all(v >= 0.0 for v in report.per_channel)

    def test_cell_permutation_leaves_mean_unchanged(self):
        rng = np.random.default_rng(5)
        p = rng.random(36, dtype=np.float32)
        y = rng.random(36, dtype=np.float32)
        perm = rng.permutation(36)
        a = reduce_loss(heat(p), heat(y), "bcfl", alpha=0.9)
        b = reduce_loss(heat(p[perm]), heat(y[perm]), "bcfl", alpha=0.9)
        assert a.total == pytest.approx(b.total, rel=1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            reduce_loss(heat([0.5]), heat([0.5, 0.5]), "qfl")

    def test_empty_heatmaps_rejected(self):
        empty = Heatmap(np.zeros((0, 2, 2), dtype=np.float32), 4.0)
        with pytest.raises(ValueError):
            reduce_loss(empty, empty, "qfl")
