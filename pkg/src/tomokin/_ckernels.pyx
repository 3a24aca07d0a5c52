# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Lagrange interpolation, line-integral Radon, upwind advection."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()

cdef enum:
    MAXDIM = 8
    MAXORDER = 16

cdef double SNAP = 1e-12



cdef inline int stencil(double u, int n, int order, double* w) noexcept nogil:
    """Fill Lagrange weights for fractional index u; return base index."""
    cdef int i, j, base
    cdef double near = floor(u + 0.5)
    cdef double t, num, den
    if fabs(u - near) < SNAP:
        base = <int>near - (order // 2 - 1)
        if base < 0:
            base = 0
        if base > n - order:
            base = n - order
        for i in range(order):
            w[i] = 0.0
        w[<int>near - base] = 1.0
        return base
    base = <int>floor(u) - (order // 2 - 1)
    if base < 0:
        base = 0
    if base > n - order:
        base = n - order
    t = u - base
    for i in range(order):
        num = 1.0
        den = 1.0
        for j in range(order):
            if j != i:
                num *= (t - j)
                den *= (i - j)
        w[i] = num / den
    return base


def interp_nd(values, lo, h, points, int order, double fill=0.0):
    flat = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef const double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef const double[::1] lo_v = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] h_v = np.ascontiguousarray(h, dtype=np.float64)
    cdef int d = values.ndim
    if d > MAXDIM or order > MAXORDER:
        raise ValueError("interp_nd supports at most 8 dims and order 8")
    cdef Py_ssize_t m = pts.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    cdef const double[::1] v = flat
    cdef long shape[MAXDIM]
    cdef long stride[MAXDIM]
    cdef int base[MAXDIM]
    cdef int idx[MAXDIM]
    cdef double wts[MAXDIM][MAXORDER]
    cdef int k, p_inside
    cdef Py_ssize_t p
    cdef long off
    cdef double u, acc, wt
    for k in range(d):
        shape[k] = values.shape[k]
    stride[d - 1] = 1
    for k in range(d - 2, -1, -1):
        stride[k] = stride[k + 1] * shape[k + 1]
    with nogil:
        for p in range(m):
            p_inside = 1
            for k in range(d):
                u = (pts[p, k] - lo_v[k]) / h_v[k]
                if u < -SNAP or u > shape[k] - 1 + SNAP:
                    p_inside = 0
                    break
                if u < 0:
                    u = 0
                if u > shape[k] - 1:
                    u = shape[k] - 1
                base[k] = stencil(u, <int>shape[k], order, wts[k])
            if not p_inside:
                out[p] = fill
                continue
            for k in range(d):
                idx[k] = 0
            acc = 0.0
            while True:
                off = 0
                wt = 1.0
                for k in range(d):
                    off += (base[k] + idx[k]) * stride[k]
                    wt *= wts[k][idx[k]]
                if wt != 0.0:
                    acc += wt * v[off]
                k = d - 1
                while k >= 0:
                    idx[k] += 1
                    if idx[k] < order:
                        break
                    idx[k] = 0
                    k -= 1
                if k < 0:
                    break
            out[p] = acc
    return out_arr


def radon_lines(f, double q_lo, double hq, double p_lo, double hp, mu, nu, X, double hX, int order):
    cdef const double[:, :, ::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] nu_v = np.ascontiguousarray(nu, dtype=np.float64)
    cdef const double[::1] X_v = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t nb = fv.shape[0], nq = fv.shape[1], npp = fv.shape[2]
    cdef Py_ssize_t nf = mu_v.shape[0], nX = X_v.shape[0]
    out_arr = np.zeros((nb, nf, nX))
    outside_arr = np.zeros((nb, nf))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] outside = outside_arr
    cdef double w[MAXORDER]
    cdef Py_ssize_t b, i, x, j, o
    cdef int base, n_int, along_q
    cdef double a, c, scale, u, acc, line, edge, lost
    if order > MAXORDER:
        raise ValueError("order too large")
    with nogil:
        for i in range(nf):
            a = mu_v[i]
            c = nu_v[i]
            along_q = fabs(c) >= fabs(a)
            if along_q:
                scale = hq / fabs(c)
                n_int = <int>npp
            else:
                scale = hp / fabs(a)
                n_int = <int>nq
            for b in range(nb):
                lost = 0.0
                for x in range(nX):
                    acc = 0.0
                    if along_q:
                        for j in range(nq):
                            line = q_lo + hq * j
                            u = ((X_v[x] - a * line) / c - p_lo) / hp
                            if u < -SNAP:
                                lost += fabs(fv[b, j, 0])
                                continue
                            if u > n_int - 1 + SNAP:
                                lost += fabs(fv[b, j, n_int - 1])
                                continue
                            if u < 0:
                                u = 0
                            if u > n_int - 1:
                                u = n_int - 1
                            base = stencil(u, n_int, order, w)
                            for o in range(order):
                                acc += w[o] * fv[b, j, base + o]
                    else:
                        for j in range(npp):
                            line = p_lo + hp * j
                            u = ((X_v[x] - c * line) / a - q_lo) / hq
                            if u < -SNAP:
                                lost += fabs(fv[b, 0, j])
                                continue
                            if u > n_int - 1 + SNAP:
                                lost += fabs(fv[b, n_int - 1, j])
                                continue
                            if u < 0:
                                u = 0
                            if u > n_int - 1:
                                u = n_int - 1
                            base = stencil(u, n_int, order, w)
                            for o in range(order):
                                acc += w[o] * fv[b, base + o, j]
                    out[b, i, x] = acc * scale
                outside[b, i] = lost * scale * hX
    return out_arr, outside_arr


def advect_add(w, coef, out, idx_pos, wt_pos, idx_neg, wt_neg):
    """out += coef * D(w) along axis 1 of (A, n, C) arrays, stencils from per-row tables."""
    cdef const double[:, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] cv = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double[:, :, ::1] ov = out
    cdef const long[:, ::1] ip = np.ascontiguousarray(idx_pos, dtype=np.int64)
    cdef const long[:, ::1] im = np.ascontiguousarray(idx_neg, dtype=np.int64)
    cdef const double[:, ::1] wp = np.ascontiguousarray(wt_pos, dtype=np.float64)
    cdef const double[:, ::1] wm = np.ascontiguousarray(wt_neg, dtype=np.float64)
    cdef Py_ssize_t A = wv.shape[0], n = wv.shape[1], C = wv.shape[2]
    cdef Py_ssize_t width = ip.shape[1]
    cdef Py_ssize_t a, i, c, o
    cdef double k, acc
    with nogil:
        for a in range(A):
            for c in range(C):
                k = cv[a, c]
                if k == 0.0:
                    continue
                for i in range(n):
                    acc = 0.0
                    if k > 0:
                        for o in range(width):
                            acc += wp[i, o] * wv[a, ip[i, o], c]
                    else:
                        for o in range(width):
                            acc += wm[i, o] * wv[a, im[i, o], c]
                    ov[a, i, c] += k * acc
    return out
