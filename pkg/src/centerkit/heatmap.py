"""Probability-heatmap rendering from boxes.

Three target profiles share one grid convention. The grid has
ceil(height / stride) rows and ceil(width / stride) columns, and cell (i, j)
samples the image point ((j + 0.5) * stride, (i + 0.5) * stride).

Generalized centerness of a point strictly inside a box with edge distances
l, r (horizontal) and t, b (vertical):

    gc = (min(l, r) / max(l, r)) ** eta * (min(t, b) / max(t, b)) ** phi

It is 1 at the box center, falls to 0 on the edges, and is 0 outside the
box. At eta = phi = 0.5 it equals the classic centerness sqrt(lr tb ratio).
Exponents of 0 flatten an axis to 1 everywhere strictly inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .annotations import BoundingBox, ImageInfo
from .errors import CenterkitError


@dataclass(frozen=True)
class GcParams:
    """Exponents of the generalized-centerness profile."""

    eta: float = 0.5
    phi: float = 0.5

    def __post_init__(self):
        for name in ("eta", "phi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Heatmap:
    """A stack of per-category probability rasters plus the stride that made it.

    data is float32 with shape (channels, height, width), all values in
    [0, 1]. Instances are immutable; the array is made read-only on
    construction.
    """

    data: np.ndarray
    stride: float

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"heatmap data must be 3-d, got shape {data.shape}")
        if not (math.isfinite(self.stride) and self.stride > 0):
            raise ValueError(f"stride must be positive, got {self.stride}")
        if data.size and (not np.isfinite(data).all() or data.min() < 0 or data.max() > 1):
            raise ValueError("heatmap values must be finite and within [0, 1]")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "stride", float(self.stride))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def grid_shape(image: ImageInfo, stride: float) -> tuple[int, int]:
    """(rows, cols) of the raster covering the image at the given stride."""
    if not (math.isfinite(stride) and stride > 0):
        raise ValueError(f"stride must be positive, got {stride}")
    return math.ceil(image.height / stride), math.ceil(image.width / stride)


def gc_value(l, r, t, b, params: GcParams | None = None):
    """Generalized centerness from the four edge distances.

    Accepts scalars or broadcastable arrays; distances must be non-negative
    and each axis must have positive extent (l + r > 0, t + b > 0).
    """
    params = params or GcParams()
    l, r, t, b = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (l, r, t, b))
    )
    if any(np.any(v < 0) for v in (l, r, t, b)):
        raise ValueError("edge distances must be non-negative")
    if np.any(l + r <= 0) or np.any(t + b <= 0):
        raise ValueError("degenerate box: each axis needs positive extent")
    fx = _axis(l, r, params.eta)
    fy = _axis(t, b, params.phi)
    out = fx * fy
    return float(out) if out.ndim == 0 else out


def _axis(a: np.ndarray, b: np.ndarray, exponent: float) -> np.ndarray:
    mn = np.minimum(a, b)
    mx = np.maximum(a, b)
    ratio = np.divide(mn, mx, out=np.zeros_like(mn), where=mx > 0)
    return np.where(mn > 0, ratio ** exponent, 0.0)


def _check_unit(boxes: list[BoundingBox] | tuple[BoundingBox, ...], image: ImageInfo) -> None:
    for box in boxes:
        if box.image_id != image.id:
            raise ValueError(
                f"box belongs to image {box.image_id}, rendering image {image.id}"
            )


def _rects(boxes) -> np.ndarray:
    return np.array(
        [[b.x, b.y, b.x + b.w, b.y + b.h] for b in boxes], dtype=np.float64
    ).reshape(-1, 4)


def render_gc(
    boxes,
    image: ImageInfo,
    stride: float,
    params: GcParams | None = None,
) -> Heatmap:
    """Render a single-channel generalized-centerness heatmap.

    Each cell takes the maximum over boxes. A box too small to place any
    sample point strictly inside contributes a single 1.0 at the cell
    containing its center, so no annotation disappears at coarse strides.
    """
    params = params or GcParams()
    _check_unit(boxes, image)
    gh, gw = grid_shape(image, stride)
    data = _backend.render_gc_grid(gh, gw, float(stride), _rects(boxes), params.eta, params.phi)
    return Heatmap(data[None, :, :], float(stride))


def render_gaussian(centers, image: ImageInfo, stride: float, sigma: float = 2.0) -> Heatmap:
    """Render fixed-width Gaussian bumps (peak 1.0, sigma in grid cells)."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    gh, gw = grid_shape(image, stride)
    pts = np.asarray(list(centers), dtype=np.float64).reshape(-1, 2)
    data = _backend.render_gaussian_grid(gh, gw, float(stride), pts, float(sigma))
    return Heatmap(data[None, :, :], float(stride))


def render_ellipse(boxes, image: ImageInfo, stride: float) -> Heatmap:
    """Render the inscribed-ellipse profile max(0, 1 - qx - qy) per box.

    qx = (2 (x - cx) / w)^2 and qy = (2 (y - cy) / h)^2, support clipped to
    the box. Boxes must have positive width and height.
    """
    _check_unit(boxes, image)
    for box in boxes:
        if box.w <= 0 or box.h <= 0:
            raise ValueError(
                f"degenerate box {box.w}x{box.h} on image {box.image_id}: "
                "the inscribed ellipse is undefined"
            )
    gh, gw = grid_shape(image, stride)
    data = _backend.render_ellipse_grid(gh, gw, float(stride), _rects(boxes))
    return Heatmap(data[None, :, :], float(stride))


def merge_max(a: Heatmap, b: Heatmap) -> Heatmap:
    """Cellwise maximum of two heatmaps with identical shape and stride."""
    if a.data.shape != b.data.shape:
        raise CenterkitError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    if a.stride != b.stride:
        raise CenterkitError(f"stride mismatch: {a.stride} vs {b.stride}")
    return Heatmap(np.maximum(a.data, b.data), a.stride)


def stack(heatmaps) -> Heatmap:
    """Stack single-channel heatmaps into one multi-channel heatmap."""
    heatmaps = list(heatmaps)
    if not heatmaps:
        raise ValueError("nothing to stack")
    stride = heatmaps[0].stride
    for hm in heatmaps:
        if hm.stride != stride:
            raise CenterkitError(f"stride mismatch: {hm.stride} vs {stride}")
        if hm.data.shape[1:] != heatmaps[0].data.shape[1:]:
            raise CenterkitError("grid shape mismatch")
    return Heatmap(np.concatenate([hm.data for hm in heatmaps], axis=0), stride)
