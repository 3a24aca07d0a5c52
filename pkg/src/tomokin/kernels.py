"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise, or
when ``TOMOKIN_PURE_PYTHON=1`` is set, the numpy versions in ``_pykernels``
are used.  Both expose the same three functions:

``interp_nd(values, lo, h, points, order, fill=0.0)``
    Tensor-product Lagrange interpolation on a uniform grid (non-periodic);
    points outside the grid hull get ``fill``.
``radon_lines(f, q_lo, hq, p_lo, hp, mu, nu, X, hX, order)``
    Line integrals of a stack of 2-D densities along ``X = mu*q + nu*p``.
``advect_add(w, coef, out, idx_pos, wt_pos, idx_neg, wt_neg)``
    ``out += coef * dw/dy`` along axis 1, with per-row stencil tables chosen
    by the sign of ``coef`` (see :func:`tomokin.tomoprop.upwind_tables`).
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("TOMOKIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def use_backend(name: str) -> None:
    """Switch backends at runtime (tests and benchmarks)."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels
        _impl, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def interp_nd(values, lo, h, points, order=6, fill=0.0):
    return _impl.interp_nd(values, lo, h, points, int(order), float(fill))


def radon_lines(f, q_lo, hq, p_lo, hp, mu, nu, X, hX, order=6):
    return _impl.radon_lines(f, float(q_lo), float(hq), float(p_lo), float(hp),
                             mu, nu, X, float(hX), int(order))


def advect_add(w, coef, out, idx_pos, wt_pos, idx_neg, wt_neg):
    return _impl.advect_add(w, coef, out, idx_pos, wt_pos, idx_neg, wt_neg)
