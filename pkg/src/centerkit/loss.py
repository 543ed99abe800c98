"""Loss kernels for probability heatmaps, with an analytic gradient.

All kernels clamp predictions into [1e-7, 1 - 1e-7] before taking logs.
Writing ce(p, y) = -((1 - y) log(1 - p) + y log p):

    focal_loss   y in {-1, +1}:  -a_t (1 - p_t)^gamma log(p_t)
                 with p_t = p when y = +1 else 1 - p,
                 a_t = alpha when y = +1 else 1 - alpha
    qfl          continuous y:   |y - p|^gamma ce(p, y)
    bcfl         continuous y:   alpha_c(y) |y - p|^gamma ce(p, y)
                 with alpha_c(y) = alpha y + (1 - alpha) (1 - y)
    weighted_bce                 (pos_weight y + (1 - y)) ce(p, y)
    weighted_mse                 (pos_weight y + (1 - y)) (y - p)^2

The balanced kernel keeps every per-cell value non-negative; its weight
alpha_c linearly interpolates between 1 - alpha at y = 0 and alpha at y = 1,
and alpha is normally set to the fraction of negative cells (estimate_alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _backend
from ._backend import CLAMP_EPS
from .heatmap import Heatmap

KERNELS = ("fl", "qfl", "bcfl", "wbce", "wmse")
_KERNEL_IDS = {
    "fl": _backend.KERNEL_FL,
    "qfl": _backend.KERNEL_QFL,
    "bcfl": _backend.KERNEL_BCFL,
    "wbce": _backend.KERNEL_WBCE,
    "wmse": _backend.KERNEL_WMSE,
}


@dataclass(frozen=True)
class BcflParams:
    """Balanced continuous focal parameters."""

    alpha: float = 0.5
    gamma: float = 2.0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be within [0, 1], got {self.alpha}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")


@dataclass(frozen=True)
class LossReport:
    """Mean loss per cell, overall and per channel."""

    total: float
    per_channel: tuple[float, ...]
    cell_count: int


def _clamp(p: float) -> float:
    return min(max(float(p), CLAMP_EPS), 1.0 - CLAMP_EPS)


def _check_prob(name: str, v: float) -> float:
    v = float(v)
    if not (math.isfinite(v) and 0.0 <= v <= 1.0):
        raise ValueError(f"{name} must be within [0, 1], got {v}")
    return v


def _cross_entropy(p: float, y: float) -> float:
    return -((1.0 - y) * math.log(1.0 - p) + y * math.log(p))


def focal_loss(p: float, y: int, alpha: float, gamma: float) -> float:
    """Focal loss for a hard label y in {-1, +1}."""
    if y not in (-1, 1):
        raise ValueError(f"focal loss takes labels -1 or +1, got {y!r}")
    p = _clamp(_check_prob("p", p))
    if y == 1:
        pt, at = p, alpha
    else:
        pt, at = 1.0 - p, 1.0 - alpha
    return -at * (1.0 - pt) ** gamma * math.log(pt)


def qfl(p: float, y: float, gamma: float) -> float:
    """Quality focal loss for a continuous target y in [0, 1]."""
    y = _check_prob("y", y)
    p = _clamp(_check_prob("p", p))
    return abs(y - p) ** gamma * _cross_entropy(p, y)


def alpha_c(y: float, alpha: float) -> float:
    """Continuous class weight: alpha at y = 1, 1 - alpha at y = 0."""
    return alpha * y + (1.0 - alpha) * (1.0 - y)


def bcfl(p: float, y: float, params: BcflParams) -> float:
    """Balanced continuous focal loss: alpha_c(y) * qfl(p, y, gamma)."""
    y = _check_prob("y", y)
    p = _clamp(_check_prob("p", p))
    gap = abs(y - p)
    return alpha_c(y, params.alpha) * gap ** params.gamma * _cross_entropy(p, y)


def bcfl_grad_p(p: float, y: float, params: BcflParams) -> float:
    """Analytic d(bcfl)/dp.

    With g = |y - p|, s = sign(p - y), ce = ce(p, y), and
    ce'(p) = (1 - y)/(1 - p) - y/p:

        d/dp = alpha_c(y) * (gamma g^(gamma-1) s ce + g^gamma ce'(p))

    At p = y the loss has a stationary point for gamma >= 1 (returns 0.0)
    and is not differentiable for gamma < 1 (raises ValueError).
    """
    y = _check_prob("y", y)
    p = _clamp(_check_prob("p", p))
    gamma = params.gamma
    if p == y:
        if gamma >= 1.0:
            return 0.0
        raise ValueError(f"bcfl is not differentiable at p = y for gamma = {gamma}")
    gap = abs(y - p)
    sign = 1.0 if p > y else -1.0
    ce = _cross_entropy(p, y)
    dce = (1.0 - y) / (1.0 - p) - y / p
    return alpha_c(y, params.alpha) * (
        gamma * gap ** (gamma - 1.0) * sign * ce + gap ** gamma * dce
    )


def weighted_bce(p: float, y: float, pos_weight: float) -> float:
    """Cross entropy scaled by pos_weight on the target mass."""
    y = _check_prob("y", y)
    p = _clamp(_check_prob("p", p))
    return (pos_weight * y + (1.0 - y)) * _cross_entropy(p, y)


def weighted_mse(p: float, y: float, pos_weight: float) -> float:
    """Squared error scaled by pos_weight on the target mass."""
    y = _check_prob("y", y)
    p = _clamp(_check_prob("p", p))
    return (pos_weight * y + (1.0 - y)) * (y - p) ** 2


def estimate_alpha(heatmaps: Iterable[Heatmap], threshold: float) -> float:
    """Fraction of cells whose target value lies strictly below threshold.

    This is the negative-cell frequency used to balance bcfl. Streams over
    the heatmaps, so any number can be passed.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must be within [0, 1], got {threshold}")
    cells = 0
    negatives = 0
    for hm in heatmaps:
        cells += hm.data.size
        negatives += int(np.count_nonzero(hm.data < threshold))
    if cells == 0:
        raise ValueError("no cells: need at least one non-empty heatmap")
    return negatives / cells


def count_negatives(heatmaps: Iterable[Heatmap], threshold: float) -> tuple[int, int]:
    """(negative cells, total cells) under the same rule as estimate_alpha."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must be within [0, 1], got {threshold}")
    cells = 0
    negatives = 0
    for hm in heatmaps:
        cells += hm.data.size
        negatives += int(np.count_nonzero(hm.data < threshold))
    return negatives, cells


def loss_map(
    pred: np.ndarray,
    target: np.ndarray,
    kernel: str,
    *,
    alpha: float = 0.5,
    gamma: float = 2.0,
    pos_weight: float = 1.0,
) -> np.ndarray:
    """Elementwise loss surface for same-shaped prediction and target arrays.

    For kernel "fl" the target is binarized at 0.5; the continuous kernels
    use it as is. Targets must lie in [0, 1]; predictions are clamped.
    """
    if kernel not in _KERNEL_IDS:
        raise ValueError(f"unknown kernel {kernel!r}, expected one of {KERNELS}")
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size and not (np.isfinite(pred).all() and np.isfinite(target).all()):
        raise ValueError("predictions and targets must be finite")
    if target.size and (target.min() < 0 or target.max() > 1):
        raise ValueError("targets must lie within [0, 1]")
    flat = _backend.loss_map(
        _KERNEL_IDS[kernel],
        np.ascontiguousarray(pred.ravel()),
        np.ascontiguousarray(target.ravel()),
        float(alpha),
        float(gamma),
        float(pos_weight),
    )
    return np.asarray(flat, dtype=np.float64).reshape(pred.shape)


def reduce_loss(
    pred: Heatmap,
    target: Heatmap,
    kernel: str,
    *,
    alpha: float = 0.5,
    gamma: float = 2.0,
    pos_weight: float = 1.0,
) -> LossReport:
    """Mean per-cell loss between two heatmaps of identical shape."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"shape mismatch: {pred.data.shape} vs {target.data.shape}"
        )
    surface = loss_map(
        pred.data, target.data, kernel, alpha=alpha, gamma=gamma, pos_weight=pos_weight
    )
    if surface.size == 0:
        raise ValueError("empty heatmaps have no loss")
    per_channel = tuple(float(np.mean(chan)) for chan in surface)
    return LossReport(
        total=float(np.mean(surface)),
        per_channel=per_channel,
        cell_count=int(surface.size),
    )
