"""Two-particle reduction in phase space and in the tomographic picture.

Integrating the two-particle Liouville equation over particle 2 gives, for
the one-particle marginal ``fr(q1, p1)``,

    d fr/dt + p1 d fr/dq1 - int K(q1 - q2) df/dp1 - U_ext'(q1) d fr/dp1 + T1 + T3 = 0

with ``K(r) = U'(|r|) sgn(r)`` and boundary integrals ``T1``, ``T3`` that vanish
for densities decayed at the box edges.  The tomographic counterpart for the
reduced tomogram ``wr(X1, mu1, nu1)`` is

    d wr/dt - mu1 d wr/dnu1 - R1[ int K(q1 - q2) df/dp1 + U_ext'(q1) d fr/dp1 ] = 0

where ``R1`` is the one-particle Radon transform.  The interaction is a
non-polynomial function of the position operators; it is evaluated in the
transform domain: the two-particle tomogram at particle-2 frame (1, 0) (so
``X2 = q2``) is inverted over particle 1 on a large frame lattice, the kernel
is applied in phase space and the result is transformed back.

Both residuals are evaluated on the same snapshots; ``cross_consistency``
transforms the phase-space residual and subtracts the tomographic one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, InconsistencyError
from .liouville import BOUNDARY_TOL, PropagatorConfig, evolve_density, reduced_rhs_2p
from .numerics import Grid1D, apply_multiplier
from .phasespace import Pair, PhaseSpaceDensity, marginalize_second_particle
from .radon import (FrameList, LatticeFrames, SPREAD_FAIL, _slice_core, invert_values,
                    radon_forward_2p, radon_forward_direct, reduce_tomogram)

CROSS_TOL = 2e-3
DELTA_FACTOR = 0.125                   # nu-stencil step in units of the q1 spacing
STENCIL = (-2, -1, 1, 2)
STENCIL_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0    # 4th-order central d/dnu
PARTICLE2_FRAMES = ((1.0, 0.0), (0.0, 1.0), (0.7, -0.7))
REDUCTION_X2_POINTS = 16


@dataclass
class ReductionReport:
    """Norms of the two reduced equations and of their mismatch (all >= 0)."""

    residual_phase: dict = field(default_factory=dict)
    residual_tomo: dict = field(default_factory=dict)
    cross_consistency: dict = field(default_factory=dict)
    boundary_terms: float = 0.0
    spread: float = 0.0
    tolerance: float = CROSS_TOL

    @property
    def flagged(self) -> bool:
        return self.cross_consistency.get("sup", 0.0) > self.tolerance

    def as_dict(self) -> dict:
        out = {}
        for name in ("residual_phase", "residual_tomo", "cross_consistency"):
            for k, v in getattr(self, name).items():
                out[f"{name}_{k}"] = v
        out["boundary_terms"] = self.boundary_terms
        out["spread"] = self.spread
        return out


# ---------------------------------------------------------------------------
# Series and frames


def pair_series(f0: PhaseSpaceDensity, U: Pair, t_centre: float, dt: float, count: int = 3,
                cfg: Optional[PropagatorConfig] = None) -> list:
    """``count`` snapshots at ``t_centre + (k - count // 2) dt``, each evolved from f0."""
    if count < 3 or count % 2 == 0:
        raise ArgumentError("count must be odd and >= 3")
    if not dt > 0:
        raise ArgumentError("dt must be positive")
    half = count // 2
    if t_centre - half * dt < -1e-12:
        raise ArgumentError("series would start before t = 0")
    cfg = cfg or PropagatorConfig(dt=min(1e-2, dt))
    return [evolve_density(f0, U, max(0.0, t_centre + (k - half) * dt), cfg)
            for k in range(count)]


def target_frames(r_max: float = 1.2, step: float = 0.4) -> np.ndarray:
    """Evaluation frames: a (mu, nu) grid with mu != 0 (the transport term needs mu)."""
    ticks = np.arange(step, r_max + 1e-9, step)
    mus = np.concatenate([-ticks[::-1], ticks])
    nus = np.concatenate([-ticks[::-1], [0.0], ticks])
    M, N = np.meshgrid(mus, nus, indexing="ij")
    return np.stack([M.ravel(), N.ravel()], axis=1)


def stencil_frames(targets: np.ndarray, delta: float) -> FrameList:
    """Targets followed by their nu-shifted neighbours, in STENCIL order."""
    rows = [targets] + [targets + np.array([0.0, s * delta]) for s in STENCIL]
    return FrameList(np.concatenate(rows))


def big_lattice(q_ax: Grid1D, p_ax: Grid1D, half_width: float = 8.0, spacing: float = 0.25
                ) -> LatticeFrames:
    """Frame lattice for inversion, kept inside the rays the grid resolves at k = 1."""
    B = min(half_width, math.pi / max(q_ax.h, p_ax.h))
    n = 2 * int(math.ceil(B / spacing))
    return LatticeFrames(Grid1D(-B, B, n), Grid1D(-B, B, n))


INVERSION_X = Grid1D(-math.pi, math.pi, 4)     # exact k = 1 coefficient


def reduction_square(f: PhaseSpaceDensity, frames, X_axis: Grid1D,
                     frames2: Sequence = PARTICLE2_FRAMES, order: int = 16,
                     spread_fail: float = SPREAD_FAIL) -> dict:
    """Gap between reducing the two-particle tomogram and transforming the marginal.

    The two-particle side uses the slice path (periodized in X), the marginal
    side the direct line integrals, so ``X_axis`` must be wide enough for the
    tomogram to decay inside it and fine enough to resolve its narrowest
    profile.
    """
    if f.particles != 2:
        raise ArgumentError("reduction square needs a two-particle density")
    # only the k = 0 mode of X2 survives the reduction, so X2 can be coarse
    X2 = Grid1D(X_axis.lo, X_axis.hi, REDUCTION_X2_POINTS)
    w2 = radon_forward_2p(f, (frames, FrameList(frames2)), (X_axis, X2))
    red = reduce_tomogram(w2, spread_fail)
    direct = radon_forward_direct(marginalize_second_particle(f), frames, X_axis, order=order)
    return {"sup": float(np.abs(red.values - direct.values).max()),
            "spread": float(red.meta["spread"])}


# ---------------------------------------------------------------------------
# Phase-space side


def _check_series(series, dt):
    if len(series) < 3 or len(series) % 2 == 0:
        raise ArgumentError("need an odd number (>= 3) of uniform-dt snapshots")
    if not dt > 0:
        raise ArgumentError("dt must be positive")
    for f in series:
        if f.particles != 2:
            raise ArgumentError("reduction needs two-particle snapshots")
        if f.axes != series[0].axes:
            raise ArgumentError("snapshots must share their grids")


def _time_derivative(values: Sequence[np.ndarray], dt: float) -> np.ndarray:
    # central difference at the middle snapshot, order 2 or 4 by series length
    mid = len(values) // 2
    if len(values) >= 5:
        return (values[mid - 2] - 8 * values[mid - 1] + 8 * values[mid + 1]
                - values[mid + 2]) / (12 * dt)
    return (values[mid + 1] - values[mid - 1]) / (2 * dt)


def _norms(r: np.ndarray, cell: float) -> dict:
    return {"sup": float(np.abs(r).max()), "l2": float(np.sqrt((r ** 2).sum() * cell))}


def _phase_fields(series, U: Pair, dt: float, boundary_tol: float):
    f = series[len(series) // 2]
    q1, p1 = f.axes[:2]
    marg = [marginalize_second_particle(s).values for s in series]
    dfdt = _time_derivative(marg, dt)
    fr = marg[len(marg) // 2]
    transport1 = p1.points[None, :] * apply_multiplier(fr, 0, q1, 1)
    terms = reduced_rhs_2p(f, U, boundary_tol)
    r = dfdt + transport1 - terms.force - terms.external + terms.transport + terms.third
    return r, terms.boundary_max()


def reduced_phase_residual(series: Sequence[PhaseSpaceDensity], U: Pair, dt: float,
                           boundary_tol: float = BOUNDARY_TOL) -> ReductionReport:
    """Residual of the reduced phase-space equation at the middle snapshot."""
    _check_series(series, dt)
    r, bnd = _phase_fields(series, U, dt, boundary_tol)
    q1, p1 = series[0].axes[:2]
    return ReductionReport(residual_phase=_norms(r, q1.h * p1.h), boundary_terms=bnd)


# ---------------------------------------------------------------------------
# Tomographic side


def _interaction_tomo(f: PhaseSpaceDensity, U: Pair, frames: FrameList, X1: Grid1D) -> np.ndarray:
    """R1[interaction + external] from tomogram data of snapshot f, shape (nX1, nframes)."""
    q1, p1, q2, p2 = f.axes
    lat = big_lattice(q1, p1)
    # particle-2 frame (1, 0) on the q2 grid: w(X1, X2 = q2; mu1, nu1)
    w = radon_forward_2p(f, (lat, FrameList([(1.0, 0.0)])), (INVERSION_X, q2))
    vals = w.values[:, :, :, :, 0]                            # (nX1, nq2, nmu, nnu)
    g = invert_values(np.moveaxis(vals, 1, -1), INVERSION_X, lat, q1, p1).real   # (q1, p1, q2)
    dg = apply_multiplier(g, 1, p1, 1)
    out = np.zeros((q1.n, p1.n))
    if not U.profile.is_zero:
        K = U.profile.kernel(q1.points[:, None] - q2.points[None, :])
        out += np.einsum("ac,abc->ab", K, dg) * q2.h
    if U.external is not None:
        out += U.external.derivative(q1.points)[:, None] * dg.sum(axis=2) * q2.h
    return _slice_core(out, q1, p1, frames, X1)


def _tomo_fields(series, U: Pair, dt: float, targets: np.ndarray, delta: float, X1: Grid1D,
                 spread_fail: float):
    frames = stencil_frames(targets, delta)
    nt = targets.shape[0]
    red, spread = [], 0.0
    for f in series:
        w2 = radon_forward_2p(f, (frames, FrameList(PARTICLE2_FRAMES)), (X1, X1))
        wr = reduce_tomogram(w2, spread_fail)
        spread = max(spread, wr.meta["spread"])
        red.append(wr.values)
    mid = red[len(red) // 2]
    dwdt = _time_derivative([v[:, :nt] for v in red], dt)
    dnu = sum(c * mid[:, (k + 1) * nt:(k + 2) * nt] for k, c in enumerate(STENCIL_WEIGHTS)) / delta
    inter = _interaction_tomo(series[len(series) // 2], U, FrameList(targets), X1)
    r = dwdt - targets[None, :, 0] * dnu - inter
    return r, spread


def reduced_tomo_residual(series: Sequence[PhaseSpaceDensity], U: Pair, dt: float,
                          targets: Optional[np.ndarray] = None, delta: Optional[float] = None,
                          X_axis: Optional[Grid1D] = None,
                          spread_fail: float = SPREAD_FAIL) -> ReductionReport:
    """Residual of the reduced tomographic equation at the middle snapshot.

    The tomograms are transforms of the given phase-space snapshots.
    ``d/dnu1`` is a 4th-order central difference over frames shifted by
    ``delta`` (default: an eighth of the q1 spacing, so it refines with the grid).
    Raises InconsistencyError when the reduction depends on the particle-2
    frame by more than ``spread_fail``.
    """
    _check_series(series, dt)
    targets, delta, X1 = _defaults(series[0], targets, delta, X_axis)
    r, spread = _tomo_fields(series, U, dt, targets, delta, X1, spread_fail)
    return ReductionReport(residual_tomo=_norms(r, X1.h / targets.shape[0]), spread=spread)


def _defaults(f, targets, delta, X_axis):
    targets = target_frames() if targets is None else np.asarray(targets, dtype=float)
    delta = DELTA_FACTOR * f.axes[0].h if delta is None else float(delta)
    X1 = X_axis or Grid1D.centered(12.0, 32)
    return targets, delta, X1


def cross_consistency(series: Sequence[PhaseSpaceDensity], U: Pair, dt: float,
                      U_tomo: Optional[Pair] = None, targets: Optional[np.ndarray] = None,
                      delta: Optional[float] = None, X_axis: Optional[Grid1D] = None,
                      tolerance: float = CROSS_TOL, boundary_tol: float = BOUNDARY_TOL,
                      spread_fail: float = SPREAD_FAIL) -> ReductionReport:
    """Both residuals and the norm of R1[phase residual] - tomographic residual.

    ``U_tomo`` (default ``U``) is the potential used by the tomographic
    pipeline; a different one is a negative control and should be flagged.
    """
    _check_series(series, dt)
    if not isinstance(U, Pair) or (U_tomo is not None and not isinstance(U_tomo, Pair)):
        raise ArgumentError("reduction needs Pair potentials")
    targets, delta, X1 = _defaults(series[0], targets, delta, X_axis)
    q1, p1 = series[0].axes[:2]
    r_phase, bnd = _phase_fields(series, U, dt, boundary_tol)
    r_tomo, spread = _tomo_fields(series, U_tomo or U, dt, targets, delta, X1, spread_fail)
    diff = _slice_core(r_phase, q1, p1, FrameList(targets), X1) - r_tomo
    cell = X1.h / targets.shape[0]
    rep = ReductionReport(residual_phase=_norms(r_phase, q1.h * p1.h),
                          residual_tomo=_norms(r_tomo, cell),
                          cross_consistency=_norms(diff, cell),
                          boundary_terms=bnd, spread=spread, tolerance=tolerance)
    for name, v in rep.as_dict().items():
        if not (math.isfinite(v) and v >= 0):
            raise InconsistencyError(f"non-finite report entry {name}", spread=spread)
    return rep


def convergence_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    """Observed order from errors at spacings h and h / ratio."""
    if coarse <= 0 or fine <= 0:
        raise ArgumentError("errors must be positive to measure an order")
    return math.log(coarse / fine) / math.log(ratio)
