"""Tomographic Liouville propagation on (X, mu, nu) lattices.

With ``q_hat = -(d/dX)^-1 d/dmu`` the evolution reads

    dw/dt = mu dw/dnu + U'(q_hat) (nu dw/dX)

and ``q_hat**d (nu dX w) = (-1)**d nu dX**(1-d) dmu**d w``.  X derivatives
are spectral (zero mode projected out of the inverse); mu and nu
derivatives are finite differences.  In the PDE the first-order terms use a
7th-order upwind-biased stencil with a two-point closure on inflow rows
(see :func:`upwind_tables`).  Values near the lattice edge are only trusted
inside the domain of dependence (see :func:`accuracy_mask`).
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import (ArgumentError, CapabilityError, CoverageError, InstabilityError,
                     ResolutionError)
from .liouville import PropagatorConfig, evolve_density
from .numerics import Grid1D, apply_multiplier, fd_derivative, fd_weights
from .phasespace import ONE_BODY, Free, Harmonic, Pair, PhaseSpaceDensity, Polynomial
from .radon import (LatticeFrames, Tomogram, _slice_core, invert_values, radon_forward_slice)

DRIFT_FAIL = 1e-3
DRIFT_REPORT = 1e-5
OPERATOR_MAX_DEGREE = 3


@dataclass(frozen=True)
class TomoOperator:
    """Correspondence-rule image of q, p, d/dq or d/dp acting on particle ``particle``."""

    kind: str
    particle: int = 0

    KINDS = ("p", "q", "dq", "dp")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ArgumentError(f"unknown operator {self.kind!r}; choose from {self.KINDS}")
        if self.particle not in (0, 1):
            raise ArgumentError("particle index must be 0 or 1")


MultiplyByP = TomoOperator("p")
MultiplyByQ = TomoOperator("q")
Dq = TomoOperator("dq")
Dp = TomoOperator("dp")


@dataclass(frozen=True)
class TomoPDEConfig:
    dt: float = 1e-2
    t_final: float = 0.0
    scheme: str = "rk4"
    potential: object = field(default_factory=Free)
    route: str = "operator"
    qp_axes: Optional[tuple] = None     # transform route only

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ArgumentError("dt must be positive")
        if self.t_final < 0:
            raise ArgumentError("t_final must be >= 0")
        if self.scheme != "rk4":
            raise ArgumentError("only the rk4 scheme is available for tomograms")
        if self.route not in ("operator", "transform"):
            raise ArgumentError(f"unknown route {self.route!r}")
        if self.route == "transform" and self.qp_axes is None:
            raise ArgumentError("transform route needs qp_axes")
        if self.route == "operator":
            _operator_coefficients(self.potential)


def _operator_coefficients(U) -> np.ndarray:
    """Coefficients of U'(q) for the operator route."""
    if isinstance(U, Pair):
        raise CapabilityError("pair potentials need the transform-domain route")
    if isinstance(U, Polynomial) and U.degree > OPERATOR_MAX_DEGREE:
        raise CapabilityError(f"operator route supports polynomial degree <= "
                              f"{OPERATOR_MAX_DEGREE}; got {U.degree} (use the transform route)")
    if not isinstance(U, ONE_BODY):
        raise CapabilityError(f"unsupported potential {U!r}")
    return np.asarray(U.derivative_coefficients(), dtype=float)


# ---------------------------------------------------------------------------
# Lattice building blocks


def _lattice_axes(w: Tomogram, j: int) -> tuple:
    """(X axis index, mu axis index, nu axis index) of particle j."""
    P = w.particles
    return j, P + 2 * j, P + 2 * j + 1


def _coef(w: Tomogram, j: int, which: str) -> np.ndarray:
    """Broadcastable array of mu_j or nu_j over the tomogram values."""
    fr = w.frames[j]
    shape = [1] * w.values.ndim
    _, am, an = _lattice_axes(w, j)
    if which == "mu":
        shape[am] = fr.mu.n
        return fr.mu.points.reshape(shape)
    shape[an] = fr.nu.n
    return fr.nu.points.reshape(shape)


UPWIND_OFFSETS = tuple(range(-3, 5))     # bias toward +y, used where coef > 0


@lru_cache(maxsize=64)
def upwind_tables(n: int, h: float, periodic: bool = False, inflow_points: int = 2) -> tuple:
    """Per-row first-derivative stencils (indices, weights) for both coefficient signs.

    Interior rows use the 7th-order upwind-biased 8-point stencil.  Without
    ``periodic``, rows near the outflow edge shift the stencil inward (same
    order) and the rows near the inflow edge, whose upwind points lie outside
    the lattice, use an ``inflow_points``-point one-sided stencil.  High-order
    inflow closures grow transiently; two points keep the scheme stable.
    """
    tables = []
    for sign, offs in ((1, UPWIND_OFFSETS), (-1, tuple(-o for o in reversed(UPWIND_OFFSETS)))):
        idx = np.zeros((n, 8), dtype=np.int64)
        wts = np.zeros((n, 8))
        base = fd_weights(offs, 1)
        for i in range(n):
            if periodic:
                idx[i] = (i + np.array(offs)) % n
                wts[i] = base
                continue
            lo, hi = i + offs[0], i + offs[-1]
            inflow = hi > n - 1 if sign > 0 else lo < 0
            if inflow:
                k = inflow_points
                start = n - k if sign > 0 else 0
                o = tuple(range(start - i, start - i + k))
            else:
                start = min(max(lo, 0), n - 8)
                o = tuple(range(start - i, start - i + 8))
            idx[i, :len(o)] = i + np.array(o)
            idx[i, len(o):] = i
            wts[i, :len(o)] = base if o == offs else fd_weights(o, 1)
        wts /= h
        idx.flags.writeable = False
        wts.flags.writeable = False
        tables += [idx, wts]
    return tuple(tables)


def upwind_advect(values: np.ndarray, axis: int, coef: np.ndarray, h: float,
                  periodic: bool = False) -> np.ndarray:
    """coef * d(values)/d(axis), upwind-biased; coef must be constant along ``axis``."""
    moved = np.ascontiguousarray(np.moveaxis(values, axis, -1))
    shp = moved.shape
    A = int(np.prod(shp[:-1]))
    c = np.moveaxis(np.broadcast_to(coef, values.shape), axis, -1)[..., 0]
    out = np.zeros((A, shp[-1], 1))
    kernels.advect_add(moved.reshape(A, shp[-1], 1), np.ascontiguousarray(c).reshape(A, 1), out,
                       *upwind_tables(shp[-1], float(h), periodic))
    return np.moveaxis(out.reshape(shp), -1, axis)


def periodic_central(values: np.ndarray, axis: int, h: float, deriv: int, order: int = 8
                     ) -> np.ndarray:
    half = order // 2
    offs = tuple(range(-half, half + 1))
    wts = fd_weights(offs, deriv)
    out = np.zeros(values.shape)
    for o, c in zip(offs, wts):
        if c != 0:
            out += c * np.roll(values, -o, axis=axis)
    return out / h ** deriv


# ---------------------------------------------------------------------------
# Correspondence rules


def apply_correspondence(op: TomoOperator, w: Tomogram, resolution_tol: Optional[float] = None,
                         region=None) -> np.ndarray:
    """Apply the tomographic image of ``op`` to a lattice tomogram.

    p -> -(d/dX)^-1 d/dnu,  q -> -(d/dX)^-1 d/dmu,  d/dq -> mu d/dX,  d/dp -> nu d/dX.
    mu and nu derivatives are central order-8 differences with one-sided
    closures.  When ``resolution_tol`` is given the derivative is compared with
    an order-6 estimate on ``region`` (a frame mask) and a ResolutionError is
    raised if they differ by more than that fraction of its magnitude.
    """
    if not w.is_lattice:
        raise ArgumentError("correspondence rules act on lattice tomograms")
    if op.particle >= w.particles:
        raise ArgumentError(f"tomogram has no particle {op.particle}")
    ax_X, ax_mu, ax_nu = _lattice_axes(w, op.particle)
    X = w.X_axes[op.particle]
    fr = w.frames[op.particle]
    v = w.values
    if op.kind in ("dq", "dp"):
        dX = apply_multiplier(v, ax_X, X, 1)
        return _coef(w, op.particle, "mu" if op.kind == "dq" else "nu") * dX
    axis, grid = (ax_mu, fr.mu) if op.kind == "q" else (ax_nu, fr.nu)
    d = fd_derivative(v, axis, grid.h, order=8)
    if resolution_tol is not None:
        d6 = fd_derivative(v, axis, grid.h, order=6)
        diff = np.abs(d - d6)
        scale = np.abs(d)
        if region is not None:
            sel = np.broadcast_to(_frame_mask(w, op.particle, region), v.shape)
            diff, scale = diff[sel], scale[sel]
        est = float(diff.max() / max(scale.max(), 1e-300))
        if est > resolution_tol:
            raise ResolutionError(f"lattice too coarse for the {op.kind}-rule derivative "
                                  f"(estimated relative error {est:.2g})", measured=est)
    return -apply_multiplier(d, ax_X, X, -1)


def _frame_mask(w: Tomogram, j: int, region) -> np.ndarray:
    shape = [1] * w.values.ndim
    _, am, an = _lattice_axes(w, j)
    shape[am] = w.frames[j].mu.n
    shape[an] = w.frames[j].nu.n
    return np.asarray(region, dtype=bool).reshape(shape)


# ---------------------------------------------------------------------------
# Right-hand side


def _operator_rhs(w: Tomogram, U) -> np.ndarray:
    coeffs = _operator_coefficients(U)
    v = w.values
    out = np.zeros(v.shape)
    for j in range(w.particles):
        ax_X, ax_mu, ax_nu = _lattice_axes(w, j)
        X = w.X_axes[j]
        fr = w.frames[j]
        mu_c = _coef(w, j, "mu")
        nu_c = _coef(w, j, "nu")
        out += upwind_advect(v, ax_nu, mu_c, fr.nu.h)
        for d, c in enumerate(coeffs):
            if c == 0:
                continue
            if d == 0:
                out += c * nu_c * apply_multiplier(v, ax_X, X, 1)
            elif d == 1:
                out += upwind_advect(v, ax_mu, -c * nu_c, fr.mu.h)
            else:
                dm = periodic_central(v, ax_mu, fr.mu.h, d)
                out += c * (-1) ** d * nu_c * apply_multiplier(dm, ax_X, X, 1 - d)
    return out


def _transform_rhs(w: Tomogram, U, qp_axes) -> np.ndarray:
    """Map to phase space, apply the Liouville operator there, map back."""
    if w.particles != 1:
        raise CapabilityError("transform route is implemented for one-particle tomograms")
    if isinstance(U, Pair):
        raise ArgumentError("pair potential needs a two-particle state")
    q_ax, p_ax = qp_axes
    f = invert_values(w.values, w.X_axes[0], w.frames[0], q_ax, p_ax).real
    Q = q_ax.points[:, None]
    P = p_ax.points[None, :]
    g = -P * apply_multiplier(f, 0, q_ax, 1) + U.derivative(Q) * apply_multiplier(f, 1, p_ax, 1)
    T = _taper(q_ax)[:, None] * _taper(p_ax)[None, :]
    g *= T
    # the untapered field integrates to zero; restore that so per-frame mass is conserved
    g -= T * (g.sum() / T.sum())
    return _slice_core(g, q_ax, p_ax, w.frames[0], w.X_axes[0])


TAPER_START = 0.7      # fraction of the half-width where the transform-route taper begins


@lru_cache(maxsize=16)
def _taper(axis: Grid1D) -> np.ndarray:
    """1 on the inner part of the box, cos**2 roll-off to 0 at the edge.

    The density is negligible where the taper acts; without it, inversion
    noise near the box edge is advected at speed |U'(q)| and sets an explicit
    step limit far below the one the physical state needs.
    """
    c = 0.5 * (axis.lo + axis.hi)
    half = 0.5 * axis.length
    x = np.abs(axis.points - c) / half
    s = np.clip((x - TAPER_START) / (1.0 - TAPER_START), 0.0, 1.0)
    out = np.cos(0.5 * np.pi * s) ** 2
    out.flags.writeable = False
    return out


def tomographic_rhs(w: Tomogram, U, route: str = "operator", qp_axes=None) -> np.ndarray:
    """dw/dt for the tomographic Liouville equation.

    ``route="operator"`` uses the correspondence rules on the lattice
    (polynomial U of degree <= 3); ``route="transform"`` inverts to phase
    space, applies ``-p df/dq + U'(q) df/dp`` and transforms back.
    """
    if not w.is_lattice:
        raise ArgumentError("tomographic_rhs needs lattice frames")
    if route == "operator":
        return _operator_rhs(w, U)
    if route == "transform":
        if qp_axes is None:
            raise ArgumentError("transform route needs qp_axes")
        return _transform_rhs(w, U, qp_axes)
    raise ArgumentError(f"unknown route {route!r}")


def evolve_tomogram(w0: Tomogram, cfg: TomoPDEConfig, U=None, drift_fail: float = DRIFT_FAIL
                    ) -> Tomogram:
    """RK4 integration of the tomographic equation up to ``cfg.t_final``.

    The per-frame X normalization is monitored but never corrected; its
    largest drift is stored in ``meta["drift"]``.
    """
    U = cfg.potential if U is None else U
    if cfg.t_final == 0:
        return w0.with_values(w0.values, drift=0.0, steps=0)
    nsteps = max(1, int(math.ceil(cfg.t_final / cfg.dt - 1e-9)))
    h = cfg.t_final / nsteps
    rhs = lambda v: tomographic_rhs(w0.with_values(v), U, cfg.route, cfg.qp_axes)
    X_axes = tuple(range(w0.particles))
    cell = np.prod([a.h for a in w0.X_axes])
    norm0 = w0.values.sum(axis=X_axes) * cell
    v = np.array(w0.values)
    drift = 0.0
    for step in range(1, nsteps + 1):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * h * k1)
        k3 = rhs(v + 0.5 * h * k2)
        k4 = rhs(v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(v)):
            raise InstabilityError(f"non-finite tomogram at step {step}", step=step,
                                   drift=float("inf"))
        drift = float(np.abs(v.sum(axis=X_axes) * cell - norm0).max())
        if drift > drift_fail:
            raise InstabilityError(f"normalization drift {drift:.3g} at step {step}",
                                   step=step, drift=drift)
    return w0.with_values(v, drift=drift, steps=nsteps, t=cfg.t_final)


# ---------------------------------------------------------------------------
# Analytic characteristic flows


def characteristic_preimage(U, mu, nu, t: float) -> tuple:
    """Frame (mu0, nu0) with w(X, mu, nu, t) = w0(X, mu0, nu0)."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if isinstance(U, Free):
        return mu, nu + mu * t
    if isinstance(U, Harmonic):
        om = U.omega
        c, s = math.cos(om * t), math.sin(om * t)
        return mu * c - nu * om * s, mu * s / om + nu * c
    raise CapabilityError("analytic tomographic flow exists for Free and Harmonic only")


def analytic_tomo_flow(w0: Tomogram, U, t: float, max_loss: float = 0.0, order: int = 6
                       ) -> Tomogram:
    """Tomogram at time t by following characteristics back to the lattice.

    Nodes whose preimage leaves the lattice hull are set to 0 and listed in
    ``meta["covered"]``; a CoverageError is raised when their fraction
    exceeds ``max_loss``.
    """
    if w0.particles != 1 or not w0.is_lattice:
        raise ArgumentError("analytic flow needs a one-particle lattice tomogram")
    if t == 0:
        return w0.with_values(w0.values, covered=np.ones(w0.frames[0].shape, dtype=bool))
    fr = w0.frames[0]
    M, N = fr.mesh()
    m0, n0 = characteristic_preimage(U, M, N, t)
    tol = 1e-12
    covered = ((m0 >= fr.mu.lo - tol) & (m0 <= fr.mu.points[-1] + tol) &
               (n0 >= fr.nu.lo - tol) & (n0 <= fr.nu.points[-1] + tol))
    lost = 1.0 - covered.mean()
    if lost > max_loss:
        raise CoverageError(f"{lost:.1%} of preimages leave the lattice", fraction_lost=lost)
    X = w0.X_axes[0]
    vals = np.zeros(w0.values.shape)
    lo = np.array([fr.mu.lo, fr.nu.lo])
    hh = np.array([fr.mu.h, fr.nu.h])
    pts = np.stack([m0[covered], n0[covered]], axis=1)
    # interpolate each X slice on the (mu, nu) plane
    for ix in range(X.n):
        vals[ix][covered] = kernels.interp_nd(w0.values[ix], lo, hh, pts, order)
    return w0.with_values(vals, covered=covered, t=t)


# ---------------------------------------------------------------------------
# Commuting diagram


def accuracy_mask(frames: LatticeFrames, U, t: float, r_min: float = 0.3, r_frac: float = 0.9,
                  samples: int = 65) -> np.ndarray:
    """Frames where the lattice solution is trusted.

    The annulus ``r_min <= |(mu, nu)| <= r_frac * B`` minus frames whose
    characteristic over [0, t] leaves the box ``[-r_frac B, r_frac B]**2``
    (their domain of dependence reaches the lattice edge).
    """
    B = min(-frames.mu.lo, frames.mu.points[-1], -frames.nu.lo, frames.nu.points[-1])
    M, N = frames.mesh()
    r = np.hypot(M, N)
    mask = (r >= r_min) & (r <= r_frac * B)
    lim = r_frac * B
    if t != 0 and isinstance(U, (Free, Harmonic)):
        for tau in np.linspace(0.0, t, samples):
            m0, n0 = characteristic_preimage(U, M, N, tau)
            mask &= (np.abs(m0) <= lim) & (np.abs(n0) <= lim)
    return mask


def commuting_diagram_error(f0: PhaseSpaceDensity, U, t: float, X_axis: Grid1D,
                            frames: LatticeFrames, dt: float = 1e-2, mask=None,
                            phase_cfg: Optional[PropagatorConfig] = None,
                            route: str = "operator", qp_axes=None) -> dict:
    """Sup and L2 gap between Radon(Liouville(f0)) and TomoPDE(Radon(f0)).

    Norms are taken over all X and the frames selected by ``mask``
    (default: :func:`accuracy_mask`).
    """
    if f0.particles != 1:
        raise ArgumentError("commuting diagram is checked for one particle")
    pc = phase_cfg or PropagatorConfig(dt=min(dt, 1e-2))
    ft = evolve_density(f0, U, t, pc)
    a = radon_forward_slice(ft, frames, X_axis)
    w0 = radon_forward_slice(f0, frames, X_axis)
    b = evolve_tomogram(w0, TomoPDEConfig(dt=dt, t_final=t, potential=U, route=route,
                                          qp_axes=qp_axes))
    if mask is None:
        mask = accuracy_mask(frames, U, t)
    diff = (a.values - b.values)[:, mask]
    cell = X_axis.h * frames.mu.h * frames.nu.h
    return {"sup": float(np.abs(diff).max()) if diff.size else 0.0,
            "l2": float(np.sqrt((diff ** 2).sum() * cell)),
            "frames_used": int(mask.sum()),
            "drift": float(b.meta.get("drift", 0.0)),
            "phase": a, "tomo": b, "mask": mask}


# ---------------------------------------------------------------------------
# Stationarity and frame moments


def interior_mask(frames: LatticeFrames, margin: int = 4) -> np.ndarray:
    """Frames at least ``margin`` nodes from every lattice edge (full upwind stencils)."""
    mask = np.zeros(frames.shape, dtype=bool)
    mask[margin:frames.mu.n - margin, margin:frames.nu.n - margin] = True
    return mask


def torus_frames(q_axis: Grid1D, X_axis: Grid1D, n: int, nu_half_width: float) -> LatticeFrames:
    """Lattice whose mu spacing is ``L_X / L_q``.

    Then ``k mu`` falls on the q-grid wavenumbers for every X mode, so a
    density uniform on the periodic q box has a tomogram that is exactly
    stationary under free streaming.
    """
    hm = X_axis.length / q_axis.length
    return LatticeFrames(Grid1D(-hm * n / 2, hm * n / 2, n), Grid1D.centered(nu_half_width, n))


def stationarity_residual(w: Tomogram, U, margin: int = 4, route: str = "operator",
                          qp_axes=None) -> float:
    """sup |dw/dt| over X and the interior frames (operator route) or all frames."""
    r = tomographic_rhs(w, U, route, qp_axes)
    if route == "operator":
        r = r[:, interior_mask(w.frames[0], margin)]
    return float(np.abs(r).max())


def frame_moments(w: Tomogram, mu: float, nu: float) -> tuple:
    """(mean, second moment) of X at a lattice frame, from the periodized profile."""
    prof = w.frame_values(mu, nu)
    X = w.X_axes[0].points
    m0 = prof.sum()
    return float((X * prof).sum() / m0), float((X * X * prof).sum() / m0)


def mean_energy_from_tomogram(w: Tomogram, omega: float) -> float:
    """<p^2 + omega^2 q^2>/2 from frames (0, 1) and (1, 0)."""
    _, p2 = frame_moments(w, 0.0, 1.0)
    _, q2 = frame_moments(w, 1.0, 0.0)
    return 0.5 * (p2 + omega ** 2 * q2)
