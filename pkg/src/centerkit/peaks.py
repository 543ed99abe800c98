"""Center extraction from heatmap channels.

Three stages: local-maximum candidates over a square window, a probability
threshold, then greedy minimum-distance suppression in descending-score
order. Grid cells map back to image coordinates at cell centers,
x = (j + 0.5) * stride, y = (i + 0.5) * stride.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .heatmap import Heatmap


@dataclass(frozen=True)
class PeakParams:
    """Peak extraction settings.

    prob_threshold: keep candidates scoring at least this value.
    min_distance: suppress a candidate closer than this (in grid cells,
        Euclidean) to an already kept, higher-ranked one.
    window_radius: half-width of the local-maximum window; radius 1 means
        the 3x3 neighbourhood.
    """

    prob_threshold: float = 0.5
    min_distance: float = 3.0
    window_radius: int = 1

    def __post_init__(self):
        if not (0.0 <= self.prob_threshold <= 1.0):
            raise ValueError(
                f"prob_threshold must be within [0, 1], got {self.prob_threshold}"
            )
        if not (math.isfinite(self.min_distance) and self.min_distance >= 0):
            raise ValueError(
                f"min_distance must be finite and >= 0, got {self.min_distance}"
            )
        if self.window_radius < 1:
            raise ValueError(f"window_radius must be >= 1, got {self.window_radius}")


@dataclass(frozen=True)
class CenterPoint:
    """A predicted object center in image coordinates with its peak score."""

    x: float
    y: float
    score: float
    category_id: int = 0
    image_id: int = 0

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be within [0, 1], got {self.score}")


def find_peaks(
    heatmap: Heatmap,
    params: PeakParams | None = None,
    *,
    channel: int = 0,
    image_id: int = 0,
    category_id: int = 0,
) -> list[CenterPoint]:
    """Extract peaks from one channel, strongest first.

    Candidates tie-break in row-major order: on a plateau of equal values
    the first cell in row-major order wins the local-maximum test, and
    suppression processes equal scores in row-major order.

    Coordinates are reported unclamped; when the stride does not divide the
    image extent, a peak in the ragged last row or column can map up to
    stride/2 beyond the image border.
    """
    params = params or PeakParams()
    if not 0 <= channel < heatmap.channels:
        raise ValueError(
            f"channel {channel} out of range for {heatmap.channels} channels"
        )
    chan = np.ascontiguousarray(heatmap.data[channel], dtype=np.float32)
    rows, cols = _backend.local_max_candidates(chan, params.window_radius)
    scores = chan[rows, cols].astype(np.float64)
    keep = scores >= params.prob_threshold
    rows, cols, scores = rows[keep], cols[keep], scores[keep]
    # rank by descending score, then row-major position
    order = np.lexsort((cols, rows, -scores))
    min_sq = params.min_distance * params.min_distance
    kept: list[tuple[int, int, float]] = []
    for idx in order:
        i, j, s = int(rows[idx]), int(cols[idx]), float(scores[idx])
        if all((i - ki) ** 2 + (j - kj) ** 2 >= min_sq for ki, kj, _ in kept):
            kept.append((i, j, s))
    stride = heatmap.stride
    return [
        CenterPoint(
            x=(j + 0.5) * stride,
            y=(i + 0.5) * stride,
            score=s,
            category_id=category_id,
            image_id=image_id,
        )
        for i, j, s in kept
    ]


def peaks_per_class(
    heatmap: Heatmap,
    category_ids,
    params: PeakParams | None = None,
    *,
    image_id: int = 0,
) -> list[CenterPoint]:
    """Extract peaks from every channel, labelling each with its category."""
    category_ids = list(category_ids)
    if len(category_ids) != heatmap.channels:
        raise ValueError(
            f"{len(category_ids)} category ids for {heatmap.channels} channels"
        )
    out: list[CenterPoint] = []
    for channel, cid in enumerate(category_ids):
        out.extend(
            find_peaks(
                heatmap,
                params,
                channel=channel,
                image_id=image_id,
                category_id=cid,
            )
        )
    return out
