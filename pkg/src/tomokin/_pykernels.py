"""Pure-numpy implementations of the hot kernels.

Semantics match ``_ckernels`` exactly; this module is selected when the
compiled extension is missing or ``TOMOKIN_PURE_PYTHON=1`` is set.
"""
import numpy as np

_SNAP = 1e-12


def _stencil(u, n, order):
    """Per-point Lagrange stencil base index and weights along one axis."""
    u = np.asarray(u, dtype=float)
    near = np.rint(u)
    exact = np.abs(u - near) < _SNAP
    base = np.floor(u).astype(np.int64) - (order // 2 - 1)
    base = np.clip(base, 0, n - order)
    t = u - base
    wts = np.ones(u.shape + (order,))
    for i in range(order):
        for j in range(order):
            if j != i:
                wts[..., i] *= (t - j) / (i - j)
    # exact nodes: single weight 1 at the node
    if np.any(exact):
        node = np.clip(near[exact].astype(np.int64), 0, n - 1)
        b = np.clip(node - (order // 2 - 1), 0, n - order)
        base[exact] = b
        w = np.zeros((node.size, order))
        w[np.arange(node.size), node - b] = 1.0
        wts[exact] = w
    return base, wts


def interp_nd(values, lo, h, points, order, fill=0.0):
    values = np.ascontiguousarray(values, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = values.ndim
    m = points.shape[0]
    inside = np.ones(m, dtype=bool)
    bases, weights = [], []
    for k in range(d):
        n = values.shape[k]
        u = (points[:, k] - lo[k]) / h[k]
        inside &= (u >= -_SNAP) & (u <= n - 1 + _SNAP)
        u = np.clip(u, 0.0, n - 1)
        b, w = _stencil(u, n, order)
        bases.append(b)
        weights.append(w)
    out = np.zeros(m)
    for combo in np.ndindex(*([order] * d)):
        idx = tuple(bases[k] + combo[k] for k in range(d))
        wt = np.ones(m)
        for k in range(d):
            wt = wt * weights[k][:, combo[k]]
        out += wt * values[idx]
    out[~inside] = fill
    return out


def radon_lines(f, q_lo, hq, p_lo, hp, mu, nu, X, hX, order):
    f = np.ascontiguousarray(f, dtype=float)
    nb, nq, npp = f.shape
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    X = np.asarray(X, dtype=float)
    nf = mu.size
    out = np.zeros((nb, nf, X.size))
    outside = np.zeros((nb, nf))
    q = q_lo + hq * np.arange(nq)
    p = p_lo + hp * np.arange(npp)
    for i in range(nf):
        a, c = mu[i], nu[i]
        if abs(c) >= abs(a):
            # integrate over q; interpolate each row in p
            coord = (X[:, None] - a * q[None, :]) / c          # (nX, nq)
            u = (coord - p_lo) / hp
            n_int, rows, scale, line = npp, nq, hq / abs(c), q
            take = lambda b, j_idx, k_idx: f[b][j_idx, k_idx]
            edge = lambda b, lo_side: f[b][:, 0] if lo_side else f[b][:, -1]
        else:
            coord = (X[:, None] - c * p[None, :]) / a
            u = (coord - q_lo) / hq
            n_int, rows, scale, line = nq, npp, hp / abs(a), p
            take = lambda b, j_idx, k_idx: f[b][k_idx, j_idx]
            edge = lambda b, lo_side: f[b][0, :] if lo_side else f[b][-1, :]
        inside = (u >= -_SNAP) & (u <= n_int - 1 + _SNAP)
        below = u < -_SNAP
        above = u > n_int - 1 + _SNAP
        base, wts = _stencil(np.clip(u, 0.0, n_int - 1), n_int, order)
        j_idx = np.broadcast_to(np.arange(rows)[None, :], u.shape)
        for b in range(nb):
            acc = np.zeros(u.shape)
            for o in range(order):
                acc += wts[..., o] * take(b, j_idx, base + o)
            acc[~inside] = 0.0
            out[b, i] = acc.sum(axis=1) * scale
            lo_e = np.abs(edge(b, True))[None, :]
            hi_e = np.abs(edge(b, False))[None, :]
            outside[b, i] = (np.where(below, lo_e, 0.0) + np.where(above, hi_e, 0.0)).sum() * scale * hX
    return out, outside


def advect_add(w, coef, out, idx_pos, wt_pos, idx_neg, wt_neg):
    """out += coef * D(w) along axis 1 of (A, n, C) arrays.

    Row i of the derivative is sum_o wt[i, o] * w[:, idx[i, o], :]; the
    ``pos`` table is used where coef > 0 and ``neg`` where coef < 0.
    """
    A, n, C = w.shape
    pos = np.einsum("io,aioc->aic", wt_pos, w[:, idx_pos, :])
    neg = np.einsum("io,aioc->aic", wt_neg, w[:, idx_neg, :])
    cf = coef[:, None, :]
    out += np.where(cf > 0, cf * pos, np.where(cf < 0, cf * neg, 0.0))
    return out
