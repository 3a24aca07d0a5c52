"""Phase-space Liouville evolution by backward characteristics.

``f(z, t) = f0(Phi_{-t}(z))`` where ``Phi`` is the Hamiltonian flow with unit
masses.  The solver is the reference against which tomographic propagation
is validated.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ArgumentError, BoxSizeError, DivergenceError, ResolutionError
from .numerics import Grid1D, apply_multiplier
from .phasespace import ONE_BODY, Free, Pair, PhaseSpaceDensity, forces, sample_on_grid

DRIFT_WARN = 1e-6
DRIFT_FAIL = 1e-4
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class FlowState:
    """Positions and momenta, one entry per particle (arrays allowed for batches)."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape:
            raise ArgumentError("q and p must have the same shape")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ArgumentError("flow state must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float = 1e-2
    scheme: str = "rk4"
    t_final: float = 0.0
    safety_box: float = math.inf

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ArgumentError(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("rk4", "verlet"):
            raise ArgumentError(f"unknown scheme {self.scheme!r}")
        if self.t_final < 0:
            raise ArgumentError("t_final must be >= 0")
        if self.t_final > 0 and self.dt > self.t_final:
            raise ArgumentError("dt must not exceed t_final")


# ---------------------------------------------------------------------------
# Characteristic integration


def _integrate(q, p, force: Callable, t: float, cfg: PropagatorConfig):
    """Advance arrays (particles, m) by time t (negative = backward)."""
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    if t == 0:
        return q, p
    nsteps = max(1, int(math.ceil(abs(t) / cfg.dt - 1e-9)))
    h = t / nsteps
    for step in range(nsteps):
        if cfg.scheme == "rk4":
            k1q, k1p = p, force(q)
            k2q, k2p = p + 0.5 * h * k1p, force(q + 0.5 * h * k1q)
            k3q, k3p = p + 0.5 * h * k2p, force(q + 0.5 * h * k2q)
            k4q, k4p = p + h * k3p, force(q + h * k3q)
            q = q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        else:
            p = p + 0.5 * h * force(q)
            q = q + h * p
            p = p + 0.5 * h * force(q)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise DivergenceError(f"trajectory became non-finite at step {step + 1}")
        if cfg.safety_box < math.inf:
            m = max(np.abs(q).max(), np.abs(p).max())
            if m > cfg.safety_box:
                raise DivergenceError(f"trajectory left the safety box (|z| = {m:.3g}) "
                                      f"at step {step + 1}")
    return q, p


def _force_fn(U):
    return lambda q: np.stack(forces(U, list(q)))


def hamiltonian_flow(state: FlowState, U, t: float, cfg: PropagatorConfig = PropagatorConfig()
                     ) -> FlowState:
    """Integrate q' = p, p' = -dU/dq over time t."""
    q, p = _integrate(state.q[:, None] if state.q.ndim == 1 else state.q,
                      state.p[:, None] if state.p.ndim == 1 else state.p,
                      _force_fn(U), t, cfg)
    if state.q.ndim == 1:
        q, p = q[:, 0], p[:, 0]
    return FlowState(q, p)


# ---------------------------------------------------------------------------
# Density evolution


def _same_grids(axes) -> bool:
    return axes[0] == axes[2] and axes[1] == axes[3]


def _backward_points_pair(f0: PhaseSpaceDensity, U: Pair, t: float, cfg) -> Callable:
    """Backward map for a pure pair potential via centre-of-mass / relative split.

    Returns a function giving, for each slab index i of q1, the preimage
    coordinates of every node in that slab.  The relative motion is solved
    once on the (2n-1)**2 distinct (q1-q2, p1-p2) values.
    """
    q_ax, p_ax = f0.axes[0], f0.axes[1]
    nq, npp = q_ax.n, p_ax.n
    R = q_ax.h * np.arange(-(nq - 1), nq)
    V = p_ax.h * np.arange(-(npp - 1), npp)
    RR, VV = np.meshgrid(R, V, indexing="ij")
    prof = U.profile
    rel_force = lambda r: -2.0 * prof.kernel(r)
    r0, v0 = _integrate(RR.ravel()[None], VV.ravel()[None], rel_force, -t, cfg)
    r0 = r0.reshape(RR.shape)
    v0 = v0.reshape(RR.shape)
    q = q_ax.points
    p = p_ax.points
    iq = np.arange(nq)
    ip = np.arange(npp)

    def slab(i):
        # node indices (i, b, c, d) -> R index i-c+nq-1, V index b-d+npp-1
        Ri = (i - iq + nq - 1)[None, :, None]               # (1, c, 1)
        Vi = (ip[:, None] - ip[None, :] + npp - 1)[:, None, :]  # (b, 1, d)
        Rb = np.broadcast_to(Ri, (npp, nq, npp))
        Vb = np.broadcast_to(Vi, (npp, nq, npp))
        rr0 = r0[Rb, Vb]
        vv0 = v0[Rb, Vb]
        Q = 0.5 * (q[i] + q[None, :, None])
        P = p[:, None, None] + p[None, None, :]
        Q0 = Q - 0.5 * P * t
        q1 = Q0 + 0.5 * rr0
        q2 = Q0 - 0.5 * rr0
        p1 = 0.5 * (P + vv0)
        p2 = 0.5 * (P - vv0)
        shape = (npp, nq, npp)
        return np.stack([np.broadcast_to(x, shape).ravel() for x in (q1, p1, q2, p2)], axis=1)

    return slab


def _backward_points_separable(f0: PhaseSpaceDensity, U: Pair, t: float, cfg) -> Callable:
    """Backward map when the pair force vanishes: each particle moves in the external field."""
    q_ax, p_ax = f0.axes[0], f0.axes[1]
    Q, P = np.meshgrid(q_ax.points, p_ax.points, indexing="ij")
    ext = U.external or Free()
    q0, p0 = _integrate(Q.ravel()[None], P.ravel()[None], _force_fn(ext), -t, cfg)
    q0 = q0.reshape(Q.shape)
    p0 = p0.reshape(Q.shape)
    shape = (p_ax.n, q_ax.n, p_ax.n)

    def slab(i):
        cols = (q0[i][:, None, None], p0[i][:, None, None], q0[None], p0[None])
        return np.stack([np.broadcast_to(x, shape).ravel() for x in cols], axis=1)

    return slab


def _evaluate(f0: PhaseSpaceDensity, pts: np.ndarray, order: int) -> np.ndarray:
    if f0.sampler is not None:
        return f0.sampler(pts)
    lo = np.array([a.lo for a in f0.axes])
    h = np.array([a.h for a in f0.axes])
    return kernels.interp_nd(f0.values, lo, h, pts, order)


def backward_map(U, t: float, cfg: PropagatorConfig, particles: int) -> Callable:
    """Function mapping (m, 2N) points to their preimages under the time-t flow."""
    force = _force_fn(U)

    def back(pts):
        qs = pts[:, 0::2].T
        ps = pts[:, 1::2].T
        q0, p0 = _integrate(qs, ps, force, -t, cfg)
        out = np.empty_like(pts)
        out[:, 0::2] = q0.T
        out[:, 1::2] = p0.T
        return out

    return back


def evolve_density(f0: PhaseSpaceDensity, U, t: float, cfg: PropagatorConfig = PropagatorConfig(),
                   order: int = 6, drift_fail: float = DRIFT_FAIL) -> PhaseSpaceDensity:
    """f(., t) = f0 composed with the backward flow, renormalized on the grid.

    ``f0.sampler`` is used for exact off-grid values when present, otherwise
    tensor Lagrange interpolation of the grid values (zero outside the box).
    """
    if t == 0:
        return PhaseSpaceDensity(f0.axes, f0.values, sampler=f0.sampler)
    if f0.particles == 2 and not isinstance(U, Pair) and not isinstance(U, ONE_BODY):
        raise ArgumentError(f"unsupported potential {U!r}")
    if f0.particles == 1 and isinstance(U, Pair):
        raise ArgumentError("pair potential needs a two-particle density")
    back = backward_map(U, t, cfg, f0.particles)
    pair_fast = f0.particles == 2 and isinstance(U, Pair) and _same_grids(f0.axes)
    if pair_fast and (U.external is None or U.profile.is_zero):
        if U.profile.is_zero:
            slab = _backward_points_separable(f0, U, t, cfg)
        else:
            slab = _backward_points_pair(f0, U, t, cfg)
        raw = np.empty(f0.values.shape)
        for i in range(f0.axes[0].n):
            raw[i] = _evaluate(f0, slab(i), order).reshape(raw.shape[1:])
    else:
        raw = sample_on_grid(lambda pts: _evaluate(f0, back(pts), order), f0.axes)
    mass = raw.sum() * f0.cell_volume
    drift = abs(mass - 1.0)
    if drift > drift_fail:
        raise ResolutionError(f"normalization drift {drift:.3g} at t = {t}: grid or box too coarse",
                              measured=drift)
    if drift > DRIFT_WARN:
        warnings.warn(f"normalization drift {drift:.3g} before renormalization", RuntimeWarning)
    sampler = None
    if f0.sampler is not None:
        s0 = f0.sampler
        sampler = lambda pts: s0(back(pts)) / mass
    np.maximum(raw, 0.0, out=raw)
    raw /= mass
    raw.flags.writeable = False
    return PhaseSpaceDensity(f0.axes, raw, sampler=sampler, meta={"drift": drift, "t": t})


def evolve_series(f0: PhaseSpaceDensity, U, times: Sequence[float],
                  cfg: PropagatorConfig = PropagatorConfig(), order: int = 6) -> list:
    """Snapshots at each requested time, each computed from f0 directly."""
    return [evolve_density(f0, U, float(t), cfg, order) for t in times]


# ---------------------------------------------------------------------------
# Residuals


def _spectral_d(values, axis, grid: Grid1D):
    return apply_multiplier(values, axis, grid, 1)


def liouville_operator(values: np.ndarray, axes: Sequence[Grid1D], U) -> np.ndarray:
    """sum_j p_j df/dq_j + F_j df/dp_j (so that df/dt = -operator)."""
    mesh = np.meshgrid(*[a.points for a in axes], indexing="ij", sparse=True)
    qs, ps = mesh[0::2], mesh[1::2]
    out = np.zeros(values.shape)
    F = forces(U, list(qs))
    for j in range(len(axes) // 2):
        out += ps[j] * _spectral_d(values, 2 * j, axes[2 * j])
        out += F[j] * _spectral_d(values, 2 * j + 1, axes[2 * j + 1])
    return out


@dataclass
class ResidualReport:
    sup: float
    l2: float
    per_snapshot: list
    tolerance: float
    flagged: bool


def _norms(field: np.ndarray, cell: float) -> tuple:
    return float(np.abs(field).max()), float(np.sqrt((field ** 2).sum() * cell))


def liouville_residual(series: Sequence, U, dt: float, tolerance: float = 5e-4) -> ResidualReport:
    """Central-difference df/dt plus spectral transport, at interior snapshots."""
    if len(series) < 3:
        raise ArgumentError("residual needs at least 3 snapshots")
    if not dt > 0:
        raise ArgumentError("dt must be positive")
    axes = series[0].axes
    cell = series[0].cell_volume
    sups, l2s = [], []
    for i in range(1, len(series) - 1):
        dfdt = (series[i + 1].values - series[i - 1].values) / (2 * dt)
        r = dfdt + liouville_operator(series[i].values, axes, U)
        s, l = _norms(r, cell)
        sups.append(s)
        l2s.append(l)
    sup = max(sups)
    return ResidualReport(sup, max(l2s), sups, tolerance, sup > tolerance)


@dataclass
class ReducedTerms:
    """One-particle fields from integrating the two-particle equation over particle 2.

    ``transport`` and ``third`` are boundary integrals that vanish when the
    density has decayed at the box edges; ``force`` is the pair interaction
    term and ``external`` the one-body force term on particle 1.
    """

    transport: np.ndarray
    force: np.ndarray
    third: np.ndarray
    external: np.ndarray

    def boundary_max(self) -> float:
        return float(max(np.abs(self.transport).max(), np.abs(self.third).max()))


def reduced_rhs_2p(f: PhaseSpaceDensity, U, boundary_tol: float = BOUNDARY_TOL,
                   check: bool = True) -> ReducedTerms:
    """Integrals over (q2, p2) of the two-particle Liouville terms.

    transport = int p2 df/dq2,  force = int K(q1 - q2) df/dp1,
    third = int K(q1 - q2) df/dp2,  with K(r) = U'(|r|) sgn(r).
    The two boundary terms are evaluated after integrating by parts, as edge
    values of f on the q2 and p2 faces of the box.
    """
    if f.particles != 2:
        raise ArgumentError("reduced_rhs_2p needs a two-particle density")
    if not isinstance(U, Pair):
        raise ArgumentError("reduced_rhs_2p needs a Pair potential")
    q1, p1, q2, p2 = f.axes
    v = f.values
    w2 = q2.h * p2.h
    K = U.profile.kernel(q1.points[:, None] - q2.points[None, :])      # (a, c)
    g = v.sum(axis=3) * p2.h                                            # int dp2 -> (a, b, c)
    dg = _spectral_d(g, 1, p1)
    force = np.einsum("ac,abc->ab", K, dg) * q2.h
    jump_q2 = v[:, :, -1, :] - v[:, :, 0, :]                            # (a, b, d)
    transport = jump_q2 @ p2.points * p2.h
    jump_p2 = v[:, :, :, -1] - v[:, :, :, 0]                            # (a, b, c)
    third = np.einsum("ac,abc->ab", K, jump_p2) * q2.h
    fr = v.sum(axis=(2, 3)) * w2
    if U.external is not None:
        external = U.external.derivative(q1.points)[:, None] * _spectral_d(fr, 1, p1)
    else:
        external = np.zeros_like(fr)
    terms = ReducedTerms(transport, force, third, external)
    if check and terms.boundary_max() > boundary_tol:
        raise BoxSizeError(f"boundary terms {terms.boundary_max():.3g} exceed {boundary_tol:.1g}",
                           measured=terms.boundary_max())
    return terms
