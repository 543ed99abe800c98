"""Pure numpy implementations of the hot kernels.

This module defines the backend contract; the compiled extension in
`_native.pyx` mirrors these functions one for one. Grid samples sit at cell
centers: cell (i, j) samples image point ((j + 0.5) * stride, (i + 0.5) * stride).
"""

from __future__ import annotations

import math

import numpy as np

# kernel ids for loss_map; the compiled extension hardcodes the same values
KERNEL_FL = 0
KERNEL_QFL = 1
KERNEL_BCFL = 2
KERNEL_WBCE = 3
KERNEL_WMSE = 4

# probabilities are clamped into [CLAMP_EPS, 1 - CLAMP_EPS] before any log
CLAMP_EPS = 1e-7


def _covered_range(lo: float, hi: float, stride: float, count: int) -> tuple[int, int]:
    """Inclusive index range of samples falling inside [lo, hi], clamped to the grid."""
    j0 = math.ceil(lo / stride - 0.5)
    j1 = math.floor(hi / stride - 0.5)
    return max(j0, 0), min(j1, count - 1)


def _has_strict_sample(lo: float, hi: float, stride: float, j0: int, j1: int) -> bool:
    """True when some sample in [j0, j1] lies strictly between lo and hi."""
    if j0 > j1:
        return False
    if (j0 + 0.5) * stride <= lo:
        j0 += 1
    if (j1 + 0.5) * stride >= hi:
        j1 -= 1
    return j0 <= j1


def _nearest_cell(c: float, stride: float, count: int) -> int:
    """Index of the cell containing coordinate c, clamped to the grid."""
    return min(max(math.floor(c / stride), 0), count - 1)


def _axis_profile(near: np.ndarray, far: np.ndarray, exponent: float) -> np.ndarray:
    """Per-axis factor (min/max)^exponent of the two edge distances; 0 on the edge."""
    near = np.maximum(near, 0.0)
    far = np.maximum(far, 0.0)
    mn = np.minimum(near, far)
    mx = np.maximum(near, far)
    ratio = np.divide(mn, mx, out=np.zeros_like(mn), where=mx > 0)
    return np.where(mn > 0, ratio ** exponent, 0.0)


def render_gc_grid(
    gh: int, gw: int, stride: float, rects: np.ndarray, eta: float, phi: float
) -> np.ndarray:
    """Rasterize generalized-centerness for rects [[x0, y0, x1, y1], ...].

    Overlapping boxes keep the per-cell maximum. A box too small to contain
    any sample point strictly inside marks the single cell containing its
    center with 1.0. Returns float32 (gh, gw).
    """
    out = np.zeros((gh, gw), dtype=np.float64)
    for x0, y0, x1, y1 in np.asarray(rects, dtype=np.float64).reshape(-1, 4):
        j0, j1 = _covered_range(x0, x1, stride, gw)
        i0, i1 = _covered_range(y0, y1, stride, gh)
        interior = _has_strict_sample(x0, x1, stride, j0, j1) and _has_strict_sample(
            y0, y1, stride, i0, i1
        )
        if not interior:
            ci = _nearest_cell((y0 + y1) / 2.0, stride, gh)
            cj = _nearest_cell((x0 + x1) / 2.0, stride, gw)
            out[ci, cj] = 1.0
            continue
        xs = (np.arange(j0, j1 + 1, dtype=np.float64) + 0.5) * stride
        ys = (np.arange(i0, i1 + 1, dtype=np.float64) + 0.5) * stride
        fx = _axis_profile(xs - x0, x1 - xs, eta)
        fy = _axis_profile(ys - y0, y1 - ys, phi)
        region = out[i0 : i1 + 1, j0 : j1 + 1]
        np.maximum(region, fy[:, None] * fx[None, :], out=region)
    return out.astype(np.float32)


def render_gaussian_grid(
    gh: int, gw: int, stride: float, centers: np.ndarray, sigma: float
) -> np.ndarray:
    """Rasterize unnormalized Gaussians (peak 1.0) at centers [[cx, cy], ...].

    The spread is sigma in grid cells, not pixels. Overlaps keep the maximum.
    Returns float32 (gh, gw).
    """
    out = np.zeros((gh, gw), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma * sigma)
    cols = np.arange(gw, dtype=np.float64)
    rows = np.arange(gh, dtype=np.float64)
    for cx, cy in np.asarray(centers, dtype=np.float64).reshape(-1, 2):
        gx = cx / stride - 0.5
        gy = cy / stride - 0.5
        ex = np.exp(-((cols - gx) ** 2) * inv)
        ey = np.exp(-((rows - gy) ** 2) * inv)
        np.maximum(out, ey[:, None] * ex[None, :], out=out)
    return out.astype(np.float32)


def render_ellipse_grid(gh: int, gw: int, stride: float, rects: np.ndarray) -> np.ndarray:
    """Rasterize the inscribed-ellipse profile max(0, 1 - qx - qy) per rect.

    qx = (2 (x - cx) / w)^2 and qy likewise; support is clipped to the box.
    Rects must have positive width and height. Returns float32 (gh, gw).
    """
    out = np.zeros((gh, gw), dtype=np.float64)
    for x0, y0, x1, y1 in np.asarray(rects, dtype=np.float64).reshape(-1, 4):
        w = x1 - x0
        h = y1 - y0
        j0, j1 = _covered_range(x0, x1, stride, gw)
        i0, i1 = _covered_range(y0, y1, stride, gh)
        if j0 > j1 or i0 > i1:
            continue
        cx = (x0 + x1) / 2.0
        cy = (y0 + y1) / 2.0
        xs = (np.arange(j0, j1 + 1, dtype=np.float64) + 0.5) * stride
        ys = (np.arange(i0, i1 + 1, dtype=np.float64) + 0.5) * stride
        qx = (2.0 * (xs - cx) / w) ** 2
        qy = (2.0 * (ys - cy) / h) ** 2
        val = np.maximum(1.0 - (qy[:, None] + qx[None, :]), 0.0)
        region = out[i0 : i1 + 1, j0 : j1 + 1]
        np.maximum(region, val, out=region)
    return out.astype(np.float32)


def _cross_entropy(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -((1.0 - y) * np.log(1.0 - p) + y * np.log(p))


def loss_map(
    kernel: int,
    p: np.ndarray,
    y: np.ndarray,
    alpha: float,
    gamma: float,
    pos_weight: float,
) -> np.ndarray:
    """Elementwise loss over flat float64 arrays p (predictions) and y (targets).

    p is clamped into [CLAMP_EPS, 1 - CLAMP_EPS]. For KERNEL_FL the target is
    binarized at 0.5 (y >= 0.5 counts as the positive class); the other
    kernels accept continuous targets in [0, 1].
    """
    p = np.clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
    if kernel == KERNEL_FL:
        pos = y >= 0.5
        pt = np.where(pos, p, 1.0 - p)
        at = np.where(pos, alpha, 1.0 - alpha)
        return -at * (1.0 - pt) ** gamma * np.log(pt)
    if kernel == KERNEL_QFL:
        return np.abs(y - p) ** gamma * _cross_entropy(p, y)
    if kernel == KERNEL_BCFL:
        ac = alpha * y + (1.0 - alpha) * (1.0 - y)
        return ac * np.abs(y - p) ** gamma * _cross_entropy(p, y)
    if kernel == KERNEL_WBCE:
        return (pos_weight * y + (1.0 - y)) * _cross_entropy(p, y)
    if kernel == KERNEL_WMSE:
        return (pos_weight * y + (1.0 - y)) * (y - p) ** 2
    raise ValueError(f"unknown loss kernel id {kernel}")


def local_max_candidates(chan: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Cells that dominate their (2 radius + 1)^2 neighbourhood.

    A cell survives when it is strictly greater than every neighbour that
    precedes it in row-major order and at least as large as every neighbour
    that follows; a constant plateau therefore yields its first cell only.
    Returns (rows, cols) in row-major order.
    """
    h, w = chan.shape
    if h == 0 or w == 0 or radius < 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty
    keep = np.ones((h, w), dtype=bool)
    padded = np.full((h + 2 * radius, w + 2 * radius), -np.inf, dtype=chan.dtype)
    padded[radius : radius + h, radius : radius + w] = chan
    for du in range(-radius, radius + 1):
        for dv in range(-radius, radius + 1):
            if du == 0 and dv == 0:
                continue
            nb = padded[radius + du : radius + du + h, radius + dv : radius + dv + w]
            if du < 0 or (du == 0 and dv < 0):
                keep &= chan > nb
            else:
                keep &= chan >= nb
    rows, cols = np.nonzero(keep)
    return rows, cols


def solve_lap(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment of all n rows of an n x m matrix, n <= m.

    Shortest-augmenting-path method with dual potentials, O(n m^2)
    worst case. Rows are processed in index order and column ties resolve
    toward the lowest index, so the result is deterministic. Returns
    row_to_col of length n.
    """
    n, m = cost.shape
    if n > m:
        raise ValueError(f"need rows <= cols, got {n}x{m}")
    u = np.zeros(n + 1, dtype=np.float64)
    v = np.zeros(m + 1, dtype=np.float64)
    match = np.zeros(m + 1, dtype=np.int64)  # column -> row, 1-based; 0 means free
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf, dtype=np.float64)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            free_idx = np.nonzero(free)[0]
            j1 = int(free_idx[np.argmin(minv[1:][free_idx])]) + 1
            delta = minv[j1]
            matched_rows = match[used]
            u[matched_rows] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    row_to_col = np.zeros(n, dtype=np.int64)
    for j in range(1, m + 1):
        if match[j] != 0:
            row_to_col[match[j] - 1] = j - 1
    return row_to_col
