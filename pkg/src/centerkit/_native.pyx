# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors `_fallback.py` function for function; that module documents the
contract. Kernel ids and the probability clamp are kept in sync by hand.
"""

from libc.math cimport INFINITY, ceil, exp, fabs, floor, log, pow

import numpy as np

cdef double _CLAMP_EPS = 1e-7  # must match _fallback.CLAMP_EPS


cdef inline Py_ssize_t _range_lo(double lo, double stride) noexcept:
    # smallest j with (j + 0.5) * stride >= lo
    return <Py_ssize_t>ceil(lo / stride - 0.5)


cdef inline Py_ssize_t _range_hi(double hi, double stride) noexcept:
    # largest j with (j + 0.5) * stride <= hi
    return <Py_ssize_t>floor(hi / stride - 0.5)


cdef inline bint _strict_inside(double lo, double hi, double stride,
                                Py_ssize_t j0, Py_ssize_t j1) noexcept:
    if j0 > j1:
        return False
    if (j0 + 0.5) * stride <= lo:
        j0 += 1
    if (j1 + 0.5) * stride >= hi:
        j1 -= 1
    return j0 <= j1


cdef inline Py_ssize_t _nearest_cell(double c, double stride, Py_ssize_t count) noexcept:
    cdef Py_ssize_t j = <Py_ssize_t>floor(c / stride)
    if j < 0:
        j = 0
    if j > count - 1:
        j = count - 1
    return j


cdef inline double _axis_factor(double near, double far, double e) noexcept:
    cdef double mn, mx
    if near < 0:
        near = 0
    if far < 0:
        far = 0
    if near < far:
        mn = near
        mx = far
    else:
        mn = far
        mx = near
    if mn <= 0:
        return 0.0
    return pow(mn / mx, e)


def render_gc_grid(Py_ssize_t gh, Py_ssize_t gw, double stride,
                   const double[:, ::1] rects, double eta, double phi):
    out_arr = np.zeros((gh, gw), dtype=np.float64)
    fx_arr = np.empty(gw if gw > 0 else 1, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] fx = fx_arr
    cdef Py_ssize_t k, i, j, j0, j1, i0, i1, ci, cj
    cdef double x0, y0, x1, y1, xs, ys, fy, val
    for k in range(rects.shape[0]):
        x0 = rects[k, 0]
        y0 = rects[k, 1]
        x1 = rects[k, 2]
        y1 = rects[k, 3]
        j0 = _range_lo(x0, stride)
        if j0 < 0:
            j0 = 0
        j1 = _range_hi(x1, stride)
        if j1 > gw - 1:
            j1 = gw - 1
        i0 = _range_lo(y0, stride)
        if i0 < 0:
            i0 = 0
        i1 = _range_hi(y1, stride)
        if i1 > gh - 1:
            i1 = gh - 1
        if not (_strict_inside(x0, x1, stride, j0, j1)
                and _strict_inside(y0, y1, stride, i0, i1)):
            ci = _nearest_cell((y0 + y1) / 2.0, stride, gh)
            cj = _nearest_cell((x0 + x1) / 2.0, stride, gw)
            out[ci, cj] = 1.0
            continue
        for j in range(j0, j1 + 1):
            xs = (j + 0.5) * stride
            fx[j] = _axis_factor(xs - x0, x1 - xs, eta)
        for i in range(i0, i1 + 1):
            ys = (i + 0.5) * stride
            fy = _axis_factor(ys - y0, y1 - ys, phi)
            for j in range(j0, j1 + 1):
                val = fy * fx[j]
                if val > out[i, j]:
                    out[i, j] = val
    return out_arr.astype(np.float32)


def render_gaussian_grid(Py_ssize_t gh, Py_ssize_t gw, double stride,
                         const double[:, ::1] centers, double sigma):
    out_arr = np.zeros((gh, gw), dtype=np.float64)
    ex_arr = np.empty(gw if gw > 0 else 1, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] ex = ex_arr
    cdef Py_ssize_t k, i, j
    cdef double inv = 1.0 / (2.0 * sigma * sigma)
    cdef double gx, gy, d, ey, val
    for k in range(centers.shape[0]):
        gx = centers[k, 0] / stride - 0.5
        gy = centers[k, 1] / stride - 0.5
        for j in range(gw):
            d = j - gx
            ex[j] = exp(-(d * d) * inv)
        for i in range(gh):
            d = i - gy
            ey = exp(-(d * d) * inv)
            for j in range(gw):
                val = ey * ex[j]
                if val > out[i, j]:
                    out[i, j] = val
    return out_arr.astype(np.float32)


def render_ellipse_grid(Py_ssize_t gh, Py_ssize_t gw, double stride,
                        const double[:, ::1] rects):
    out_arr = np.zeros((gh, gw), dtype=np.float64)
    qx_arr = np.empty(gw if gw > 0 else 1, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] qx = qx_arr
    cdef Py_ssize_t k, i, j, j0, j1, i0, i1
    cdef double x0, y0, x1, y1, w, h, cx, cy, t, qy, val
    for k in range(rects.shape[0]):
        x0 = rects[k, 0]
        y0 = rects[k, 1]
        x1 = rects[k, 2]
        y1 = rects[k, 3]
        w = x1 - x0
        h = y1 - y0
        j0 = _range_lo(x0, stride)
        if j0 < 0:
            j0 = 0
        j1 = _range_hi(x1, stride)
        if j1 > gw - 1:
            j1 = gw - 1
        i0 = _range_lo(y0, stride)
        if i0 < 0:
            i0 = 0
        i1 = _range_hi(y1, stride)
        if i1 > gh - 1:
            i1 = gh - 1
        if j0 > j1 or i0 > i1:
            continue
        cx = (x0 + x1) / 2.0
        cy = (y0 + y1) / 2.0
        for j in range(j0, j1 + 1):
            t = 2.0 * ((j + 0.5) * stride - cx) / w
            qx[j] = t * t
        for i in range(i0, i1 + 1):
            t = 2.0 * ((i + 0.5) * stride - cy) / h
            qy = t * t
            for j in range(j0, j1 + 1):
                val = 1.0 - (qy + qx[j])
                if val < 0.0:
                    val = 0.0
                if val > out[i, j]:
                    out[i, j] = val
    return out_arr.astype(np.float32)


def loss_map(int kernel, const double[::1] p, const double[::1] y,
             double alpha, double gamma, double pos_weight):
    cdef Py_ssize_t n = p.shape[0]
    if y.shape[0] != n:
        raise ValueError("prediction and target lengths differ")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    cdef double pv, yv, ce, pt, at, ac
    for k in range(n):
        pv = p[k]
        if pv < _CLAMP_EPS:
            pv = _CLAMP_EPS
        elif pv > 1.0 - _CLAMP_EPS:
            pv = 1.0 - _CLAMP_EPS
        yv = y[k]
        if kernel == 0:  # fl
            if yv >= 0.5:
                pt = pv
                at = alpha
            else:
                pt = 1.0 - pv
                at = 1.0 - alpha
            out[k] = -at * pow(1.0 - pt, gamma) * log(pt)
        elif kernel == 1:  # qfl
            ce = -((1.0 - yv) * log(1.0 - pv) + yv * log(pv))
            out[k] = pow(fabs(yv - pv), gamma) * ce
        elif kernel == 2:  # bcfl
            ce = -((1.0 - yv) * log(1.0 - pv) + yv * log(pv))
            ac = alpha * yv + (1.0 - alpha) * (1.0 - yv)
            out[k] = ac * pow(fabs(yv - pv), gamma) * ce
        elif kernel == 3:  # wbce
            ce = -((1.0 - yv) * log(1.0 - pv) + yv * log(pv))
            out[k] = (pos_weight * yv + (1.0 - yv)) * ce
        elif kernel == 4:  # wmse
            out[k] = (pos_weight * yv + (1.0 - yv)) * (yv - pv) * (yv - pv)
        else:
            raise ValueError(f"unknown loss kernel id {kernel}")
    return out_arr


def local_max_candidates(const float[:, ::1] chan, int radius):
    cdef Py_ssize_t h = chan.shape[0], w = chan.shape[1]
    if h == 0 or w == 0 or radius < 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty
    mask_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef Py_ssize_t i, j, ui, vj
    cdef int du, dv
    cdef float v, nb
    cdef bint ok
    for i in range(h):
        for j in range(w):
            v = chan[i, j]
            ok = True
            for du in range(-radius, radius + 1):
                ui = i + du
                if ui < 0 or ui >= h:
                    continue
                for dv in range(-radius, radius + 1):
                    if du == 0 and dv == 0:
                        continue
                    vj = j + dv
                    if vj < 0 or vj >= w:
                        continue
                    nb = chan[ui, vj]
                    if nb > v:
                        ok = False
                    elif nb == v and (du < 0 or (du == 0 and dv < 0)):
                        ok = False
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                mask[i, j] = 1
    return np.nonzero(mask_arr)


def solve_lap(const double[:, ::1] cost):
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    if n > m:
        raise ValueError(f"need rows <= cols, got {n}x{m}")
    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(m + 1, dtype=np.float64)
    match_arr = np.zeros(m + 1, dtype=np.int64)
    way_arr = np.zeros(m + 1, dtype=np.int64)
    minv_arr = np.empty(m + 1, dtype=np.float64)
    used_arr = np.zeros(m + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] minv = minv_arr
    cdef long long[::1] match = match_arr
    cdef long long[::1] way = way_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double cur, delta
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = match[j0]
            delta = INFINITY
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
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
