"""Phase-space densities for one and two particles, and potential descriptions.

Axes are ordered ``(q1, p1[, q2, p2])``.  Masses are fixed to 1, so the
Hamiltonian is ``sum p_j**2/2 + U``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ArgumentError, PreconditionError
from .numerics import Grid1D

NEG_SLACK = 1e-12
NORM_TOL = 1e-8


# ---------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True)
class Free:
    """U = 0."""

    def value(self, q):
        return np.zeros_like(np.asarray(q, dtype=float))

    def derivative(self, q):
        return np.zeros_like(np.asarray(q, dtype=float))

    def derivative_coefficients(self) -> np.ndarray:
        return np.zeros(1)


@dataclass(frozen=True)
class Harmonic:
    """U = omega**2 q**2 / 2."""

    omega: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ArgumentError(f"harmonic frequency must be > 0, got {self.omega}")

    def value(self, q):
        return 0.5 * self.omega ** 2 * np.asarray(q, dtype=float) ** 2

    def derivative(self, q):
        return self.omega ** 2 * np.asarray(q, dtype=float)

    def derivative_coefficients(self) -> np.ndarray:
        return np.array([0.0, self.omega ** 2])


@dataclass(frozen=True)
class Polynomial:
    """U = sum_k c_k q**k with degree at most 6."""

    coefficients: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coefficients)
        if not c or len(c) > 7:
            raise ArgumentError("polynomial potential needs 1..7 coefficients (degree <= 6)")
        if not all(np.isfinite(c)):
            raise ArgumentError("polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        nz = [k for k, c in enumerate(self.coefficients) if c != 0.0]
        return nz[-1] if nz else 0

    def value(self, q):
        return np.polynomial.polynomial.polyval(np.asarray(q, dtype=float), self.coefficients)

    def derivative(self, q):
        return np.polynomial.polynomial.polyval(np.asarray(q, dtype=float),
                                                self.derivative_coefficients())

    def derivative_coefficients(self) -> np.ndarray:
        d = np.polynomial.polynomial.polyder(np.asarray(self.coefficients))
        return d if d.size else np.zeros(1)


class PairProfile:
    """Radial profile U(r), r >= 0, as a polynomial in r or tabulated samples."""

    def __init__(self, coefficients=None, r=None, u=None):
        if (coefficients is None) == (r is None):
            raise ArgumentError("give either polynomial coefficients or tabulated (r, u)")
        self.coefficients = None
        self._spline = None
        if coefficients is not None:
            c = np.asarray(coefficients, dtype=float)
            if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
                raise ArgumentError("pair profile coefficients must be a finite 1-D list")
            self.coefficients = c
            self.r_max = np.inf
        else:
            r = np.asarray(r, dtype=float)
            u = np.asarray(u, dtype=float)
            if r.ndim != 1 or r.shape != u.shape or r.size < 4:
                raise ArgumentError("tabulated pair profile needs >= 4 matching samples")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0) or not np.all(np.isfinite(u)):
                raise ArgumentError("tabulated r must start at 0 and increase strictly")
            self._spline = CubicSpline(r, u)
            self.r_max = float(r[-1])

    @classmethod
    def polynomial(cls, coefficients):
        return cls(coefficients=coefficients)

    @classmethod
    def tabulated(cls, r, u):
        return cls(r=r, u=u)

    @property
    def is_zero(self) -> bool:
        return self.coefficients is not None and not np.any(self.coefficients[1:])

    def _check_range(self, r):
        if np.any(r > self.r_max * (1 + 1e-12)):
            raise ArgumentError(f"pair distance {r.max():.3g} beyond tabulated range {self.r_max}")

    def value(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.coefficients is not None:
            return np.polynomial.polynomial.polyval(r, self.coefficients)
        self._check_range(r)
        return self._spline(r)

    def derivative(self, r):
        """U'(r) for r >= 0."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.coefficients is not None:
            d = np.polynomial.polynomial.polyder(self.coefficients)
            return np.polynomial.polynomial.polyval(r, d) if d.size else np.zeros_like(r)
        self._check_range(r)
        return self._spline(r, 1)

    def kernel(self, dq):
        """U'(|dq|) sgn(dq), with sgn(0) = 0."""
        dq = np.asarray(dq, dtype=float)
        return self.derivative(np.abs(dq)) * np.sign(dq)

    def __repr__(self):
        if self.coefficients is not None:
            return f"PairProfile.polynomial({self.coefficients.tolist()})"
        return f"PairProfile.tabulated(r_max={self.r_max})"


@dataclass(frozen=True)
class Pair:
    """Two-particle potential U(|q1 - q2|) plus an optional one-body term on each particle."""

    profile: PairProfile
    external: Optional[object] = None

    def __post_init__(self):
        if not isinstance(self.profile, PairProfile):
            raise ArgumentError("Pair needs a PairProfile")
        if self.external is not None and isinstance(self.external, Pair):
            raise ArgumentError("external term of a Pair must be a one-body potential")


ONE_BODY = (Free, Harmonic, Polynomial)


def forces(U, qs: Sequence[np.ndarray]) -> list:
    """Per-particle forces -dU/dq_j at positions ``qs``."""
    qs = [np.asarray(q, dtype=float) for q in qs]
    if isinstance(U, ONE_BODY):
        return [-U.derivative(q) for q in qs]
    if isinstance(U, Pair):
        if len(qs) != 2:
            raise ArgumentError("pair potential needs exactly two particles")
        k = U.profile.kernel(qs[0] - qs[1])
        out = [-k, k]
        if U.external is not None:
            out = [o - U.external.derivative(q) for o, q in zip(out, qs)]
        return out
    raise ArgumentError(f"unknown potential {U!r}")


def energy(U, qs, ps):
    """Total Hamiltonian sum p**2/2 + U."""
    kin = sum(0.5 * np.asarray(p, dtype=float) ** 2 for p in ps)
    if isinstance(U, ONE_BODY):
        return kin + sum(U.value(q) for q in qs)
    pot = U.profile.value(qs[0] - qs[1])
    if U.external is not None:
        pot = pot + sum(U.external.value(q) for q in qs)
    return kin + pot


# ---------------------------------------------------------------------------
# Gaussian family


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Multivariate normal over (q1, p1[, q2, p2])."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        cov = np.array(self.covariance, dtype=float)
        if mean.size not in (2, 4):
            raise ArgumentError(f"mean must have length 2 or 4, got {mean.size}")
        if cov.shape != (mean.size, mean.size):
            raise ArgumentError(f"covariance must be {mean.size}x{mean.size}")
        if not np.allclose(cov, cov.T, atol=1e-12) or not np.all(np.isfinite(cov)):
            raise ArgumentError("covariance must be finite and symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ArgumentError("covariance is not positive-definite") from None
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ArgumentError("covariance is not positive-definite")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def particles(self) -> int:
        return self.mean.size // 2

    def pdf(self, points: np.ndarray) -> np.ndarray:
        """Density at ``points`` of shape (m, d)."""
        pts = np.atleast_2d(points) - self.mean
        z = np.linalg.solve(self._chol, pts.T)
        logdet = 2.0 * np.log(np.diag(self._chol)).sum()
        d = self.mean.size
        return np.exp(-0.5 * np.sum(z * z, axis=0) - 0.5 * (logdet + d * np.log(2 * np.pi)))

    def marginal(self, indices) -> "GaussianSpec":
        idx = list(indices)
        return GaussianSpec(self.mean[idx], self.covariance[np.ix_(idx, idx)])

    @classmethod
    def standard(cls, particles: int = 1) -> "GaussianSpec":
        return cls(np.zeros(2 * particles), np.eye(2 * particles))

    @classmethod
    def random(cls, rng: np.random.Generator, particles: int = 1, spread=(0.5, 1.2),
               shift: float = 0.8) -> "GaussianSpec":
        """Random rotated-and-scaled Gaussian; used by tests and presets."""
        d = 2 * particles
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        sig = rng.uniform(spread[0], spread[1], d)
        return cls(rng.uniform(-shift, shift, d), Q @ np.diag(sig ** 2) @ Q.T)


# ---------------------------------------------------------------------------
# Densities


def _mesh(axes) -> list:
    return np.meshgrid(*[ax.points for ax in axes], indexing="ij")


def grid_points(axes) -> np.ndarray:
    """All grid nodes as an (m, d) array in row-major order."""
    return np.stack([m.ravel() for m in _mesh(axes)], axis=1)


def sample_on_grid(func: Callable, axes) -> np.ndarray:
    """Evaluate ``func((m, d) points)`` on every node, one leading-axis slab at a time."""
    axes = tuple(axes)
    out = np.empty([a.n for a in axes])
    rest = grid_points(axes[1:]) if len(axes) > 1 else np.zeros((1, 0))
    for i, x0 in enumerate(axes[0].points):
        pts = np.column_stack([np.full(rest.shape[0], x0), rest])
        out[i] = func(pts).reshape(out.shape[1:])
    return out


@dataclass(frozen=True, eq=False)
class PhaseSpaceDensity:
    """Nonnegative normalized density on a (q, p[, q2, p2]) grid.

    ``sampler`` (optional) evaluates the same function off-grid exactly, as the
    grid values are scaled; characteristic solvers use it instead of
    interpolation when available.
    """

    axes: tuple
    values: np.ndarray
    sampler: Optional[Callable] = field(default=None, repr=False)
    norm_tol: float = NORM_TOL
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(axes) not in (2, 4) or not all(isinstance(a, Grid1D) for a in axes):
            raise ArgumentError("density axes must be 2 or 4 Grid1D objects")
        v = self.values
        if isinstance(v, np.ndarray) and v.dtype == np.float64 and not v.flags.writeable:
            vals = v                      # already frozen: share it (large 4-D grids)
        else:
            vals = np.array(v, dtype=float, copy=True)
        if vals.shape != tuple(a.n for a in axes):
            raise ArgumentError(f"values shape {vals.shape} does not match axes")
        if not np.all(np.isfinite(vals)):
            raise ArgumentError("density contains non-finite values")
        if vals.min() < -NEG_SLACK:
            raise ArgumentError(f"density is negative (min {vals.min():.3g})")
        total = vals.sum() * np.prod([a.h for a in axes])
        if abs(total - 1.0) > self.norm_tol:
            raise ArgumentError(f"density integrates to {total:.12g}, not 1")
        vals.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def particles(self) -> int:
        return len(self.axes) // 2

    @property
    def cell_volume(self) -> float:
        return float(np.prod([a.h for a in self.axes]))

    def total(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def mesh(self) -> list:
        return _mesh(self.axes)


def edge_value(values: np.ndarray) -> float:
    """Largest magnitude on the low face of every axis (the periodic seam)."""
    out = 0.0
    for ax in range(values.ndim):
        out = max(out, float(np.abs(np.take(values, 0, axis=ax)).max()))
        out = max(out, float(np.abs(np.take(values, -1, axis=ax)).max()))
    return out


def make_gaussian(spec: GaussianSpec, axes: Sequence[Grid1D], edge_tol: float = 1e-14
                  ) -> PhaseSpaceDensity:
    """Sample ``spec`` on the grid and renormalize on it."""
    axes = tuple(axes)
    if len(axes) != spec.mean.size:
        raise ArgumentError(f"need {spec.mean.size} axes for this Gaussian, got {len(axes)}")
    raw = sample_on_grid(spec.pdf, axes)
    edge = edge_value(raw)
    if edge > edge_tol:
        raise PreconditionError(f"box too narrow: edge density {edge:.3g} > {edge_tol:.1g}",
                                measured=edge)
    z = raw.sum() * np.prod([a.h for a in axes])
    raw /= z
    raw.flags.writeable = False
    return PhaseSpaceDensity(axes, raw, sampler=lambda pts: spec.pdf(pts) / z)


def make_delta_surrogate(q0: float, p0: float, axes: Sequence[Grid1D], width: float = 0.0,
                         edge_tol: float = 1e-14) -> PhaseSpaceDensity:
    """Narrow Gaussian standing in for a point mass; width >= 4 grid spacings."""
    w = max(width, 4 * max(axes[0].h, axes[1].h))
    return make_gaussian(GaussianSpec([q0, p0], np.eye(2) * w ** 2), axes, edge_tol)


def make_product(f1: PhaseSpaceDensity, f2: PhaseSpaceDensity) -> PhaseSpaceDensity:
    if f1.particles != 1 or f2.particles != 1:
        raise ArgumentError("make_product takes two one-particle densities")
    vals = f1.values[:, :, None, None] * f2.values[None, None, :, :]
    vals.flags.writeable = False
    sampler = None
    if f1.sampler is not None and f2.sampler is not None:
        s1, s2 = f1.sampler, f2.sampler
        sampler = lambda pts: s1(pts[:, :2]) * s2(pts[:, 2:])
    return PhaseSpaceDensity(f1.axes + f2.axes, vals, sampler=sampler)


def marginalize_second_particle(f: PhaseSpaceDensity) -> PhaseSpaceDensity:
    if f.particles != 2:
        raise ArgumentError("marginalization needs a two-particle density")
    vals = f.values.sum(axis=(2, 3)) * f.axes[2].h * f.axes[3].h
    return PhaseSpaceDensity(f.axes[:2], vals)


def moments(f: PhaseSpaceDensity) -> dict:
    """First and second central moments of a one-particle density."""
    if f.particles != 1:
        raise ArgumentError("moments are defined for one-particle densities")
    Q, P = f.mesh()
    dv = f.cell_volume
    m0 = f.values.sum() * dv
    mq = (Q * f.values).sum() * dv / m0
    mp = (P * f.values).sum() * dv / m0
    vq = ((Q - mq) ** 2 * f.values).sum() * dv / m0
    vp = ((P - mp) ** 2 * f.values).sum() * dv / m0
    c = ((Q - mq) * (P - mp) * f.values).sum() * dv / m0
    return {"mean_q": float(mq), "mean_p": float(mp), "var_q": float(vq),
            "var_p": float(vp), "cov_qp": float(c)}


def mean_energy(f: PhaseSpaceDensity, U) -> float:
    mesh = f.mesh()
    qs, ps = mesh[0::2], mesh[1::2]
    return float((energy(U, qs, ps) * f.values).sum() * f.cell_volume)


def stationary_density(U, axes: Sequence[Grid1D], beta: float = 1.0) -> PhaseSpaceDensity:
    """exp(-beta H) on the grid, renormalized.

    For ``Free`` the q-direction is not confining; the result is the uniform
    q-profile on the periodic box times a Maxwellian in p.
    """
    axes = tuple(axes)
    mesh = _mesh(axes)
    qs, ps = mesh[0::2], mesh[1::2]
    if isinstance(U, Free):
        raw = np.exp(-beta * sum(0.5 * p ** 2 for p in ps))
    else:
        raw = np.exp(-beta * energy(U, qs, ps))
        edge = edge_value(raw / raw.max())
        if edge > 1e-12:
            raise PreconditionError(f"stationary state not confined by box (edge {edge:.3g})",
                                    measured=edge)
    z = raw.sum() * np.prod([a.h for a in axes])
    return PhaseSpaceDensity(axes, raw / z)


def harmonic_pair_stationary_spec(omega: float, kappa: float) -> GaussianSpec:
    """exp(-H2) for H2 = sum(p**2 + omega**2 q**2)/2 + kappa (q1-q2)**2/2."""
    prec = np.zeros((4, 4))
    prec[0, 0] = prec[2, 2] = omega ** 2 + kappa
    prec[0, 2] = prec[2, 0] = -kappa
    prec[1, 1] = prec[3, 3] = 1.0
    return GaussianSpec(np.zeros(4), np.linalg.inv(prec))
