"""Uniform grids, fields, quadrature and Fourier-multiplier derivatives.

Every other module samples its functions on :class:`Grid1D` axes.  Grids use
the periodic convention: ``n`` points ``lo + j*h`` for ``j = 0..n-1`` with
``h = (hi - lo)/n``, so ``hi`` itself is the image of ``lo``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ArgumentError, NumericError


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic sample axis."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ArgumentError(f"grid bounds must be finite, got ({self.lo}, {self.hi})")
        if not self.hi > self.lo:
            raise ArgumentError(f"grid needs hi > lo, got lo={self.lo}, hi={self.hi}")
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ArgumentError(f"grid size must be an even integer >= 4, got {self.n}")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def points(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order (``2*pi*m/length``)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def refined(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.lo, self.hi, self.n * factor)

    def nearest_index(self, x: float) -> int:
        return int(np.clip(np.rint((x - self.lo) / self.h), 0, self.n - 1))

    @classmethod
    def centered(cls, half_width: float, n: int) -> "Grid1D":
        return cls(-half_width, half_width, n)


@dataclass(frozen=True, eq=False)
class Field:
    """Values sampled on the product of ``axes``; read-only after construction."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        values = np.array(self.values, copy=True)
        expected = tuple(ax.n for ax in axes)
        if values.shape != expected:
            raise ArgumentError(f"field shape {values.shape} does not match axes {expected}")
        values.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def rank(self) -> int:
        return len(self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([ax.h for ax in self.axes])) if self.axes else 1.0

    def item(self) -> float | complex:
        if self.axes:
            raise ArgumentError("item() needs a rank-0 field")
        return self.values.item()

    def with_values(self, values) -> "Field":
        return Field(self.axes, values)


def _check_axis(rank: int, axis: int) -> int:
    if not isinstance(axis, (int, np.integer)) or not -rank <= axis < rank:
        raise ArgumentError(f"axis {axis} is invalid for a rank-{rank} field")
    return int(axis) % rank


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError("field contains non-finite values")


def integrate(field: Field, axis: int) -> Field:
    """Periodic-trapezoid (Riemann) sum over one axis."""
    ax = _check_axis(field.rank, axis)
    _check_finite(field.values)
    vals = field.values.sum(axis=ax) * field.axes[ax].h
    return Field(field.axes[:ax] + field.axes[ax + 1:], vals)


def integrate_all(field: Field) -> float | complex:
    _check_finite(field.values)
    return (field.values.sum() * field.cell_volume).item()


# ---------------------------------------------------------------------------
# Fourier multipliers.  The Nyquist mode is dropped for odd-order multipliers:
# ik at m = n/2 has no real-valued counterpart.


def _multiplier(grid: Grid1D, power: int) -> np.ndarray:
    k = grid.wavenumbers
    mult = np.zeros(grid.n, dtype=complex)
    nz = k != 0
    mult[nz] = (1j * k[nz]) ** power
    if power % 2:
        mult[grid.n // 2] = 0.0
    return mult


def apply_multiplier(values: np.ndarray, axis: int, grid: Grid1D, power: int) -> np.ndarray:
    """Multiply the DFT along ``axis`` by ``(ik)**power`` (zero mode -> 0 when power < 0)."""
    if grid.n < 4:
        raise ArgumentError("spectral operators need n >= 4")
    mult = _multiplier(grid, power)
    if power == 0:
        return np.array(values, copy=True)
    shape = [1] * values.ndim
    shape[axis] = grid.n
    mult = mult.reshape(shape)
    if np.isrealobj(values):
        half = grid.n // 2 + 1
        spec = np.fft.rfft(values, axis=axis)
        sl = [slice(None)] * values.ndim
        sl[axis] = slice(0, half)
        return np.fft.irfft(spec * mult[tuple(sl)], n=grid.n, axis=axis)
    return np.fft.ifft(np.fft.fft(values, axis=axis) * mult, axis=axis)


def spectral_derivative(field: Field, axis: int) -> Field:
    """d/dx along ``axis`` via multiplication by ``ik`` in the DFT domain."""
    ax = _check_axis(field.rank, axis)
    _check_finite(field.values)
    return field.with_values(apply_multiplier(field.values, ax, field.axes[ax], 1))


def inverse_x_derivative(field: Field, axis: int) -> Field:
    """Antiderivative with the zero mode projected out (divide by ``ik``)."""
    ax = _check_axis(field.rank, axis)
    _check_finite(field.values)
    return field.with_values(apply_multiplier(field.values, ax, field.axes[ax], -1))


# ---------------------------------------------------------------------------
# Finite differences on frame lattices.


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int = 1) -> np.ndarray:
    """Weights w with sum_j w_j f(x + o_j h) ~ h**deriv f^(deriv)(x)."""
    offs = np.asarray(offsets, dtype=float)
    m = len(offs)
    if deriv >= m:
        raise ArgumentError("stencil too short for the requested derivative")
    A = np.vander(offs, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    w = np.linalg.solve(A, rhs)
    w.flags.writeable = False
    return w


def fd_derivative(values: np.ndarray, axis: int, h: float, deriv: int = 1,
                  order: int = 8) -> np.ndarray:
    """Central finite difference with one-sided closures at both ends (non-periodic)."""
    values = np.asarray(values)
    n = values.shape[axis]
    width = order + 1
    half = width // 2
    if n < width:
        raise ArgumentError(f"axis of length {n} is too short for an order-{order} stencil")
    moved = np.moveaxis(values, axis, 0)
    out = np.empty_like(moved, dtype=np.result_type(values, float))
    central = fd_weights(tuple(range(-half, half + 1)), deriv)
    acc = np.zeros_like(out[half:n - half])
    for o, c in zip(range(-half, half + 1), central):
        acc += c * moved[half + o:n - half + o]
    out[half:n - half] = acc
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - half, 0), n - width)
        offs = tuple(range(start - i, start - i + width))
        wts = fd_weights(offs, deriv)
        out[i] = np.tensordot(wts, moved[start:start + width], axes=(0, 0))
    return np.moveaxis(out / h ** deriv, 0, axis)


def trapezoid_weights(grid: Grid1D) -> np.ndarray:
    return np.full(grid.n, grid.h)


def grid_from_points(points: Sequence[float]) -> Grid1D:
    """Recover a Grid1D from its sample points (uniform spacing assumed)."""
    pts = np.asarray(points, dtype=float)
    h = pts[1] - pts[0]
    return Grid1D(pts[0], pts[0] + h * len(pts), len(pts))
