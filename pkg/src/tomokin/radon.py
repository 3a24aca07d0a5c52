"""Forward and inverse symplectic Radon maps and tomogram checks.

A tomogram ``w(X, mu, nu)`` is the density of ``X = mu*q + nu*p``.  Two frame
layouts are supported: :class:`LatticeFrames` (a (mu, nu) grid, needed by the
tomographic PDE and the inverse) and :class:`FrameList` (explicit frames for
spot checks).  Tomogram values are stored as ``(X axes..., frame dims...)``,
per particle, so a one-particle lattice tomogram has shape ``(nX, nmu, nnu)``
and a two-particle one ``(nX1, nX2, *frames1, *frames2)``.

X axes are periodic: the slice path returns the tomogram periodized onto the
X box with the Nyquist mode dropped.  Every operation downstream acts mode by
mode in X, so this representation is consistent as long as both sides of a
comparison use the same X grid.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import AccuracyError, ArgumentError, InconsistencyError, InversionQualityError
from .numerics import Grid1D
from .phasespace import GaussianSpec, PhaseSpaceDensity

FRAME_MIN = 1e-6          # smallest admissible max(|mu|, |nu|)
OUTSIDE_TOL = 1e-9        # direct path: mass the lines miss at the box edge
BANDLIMIT_TOL = 1e-9      # slice path: relative spectral magnitude near Nyquist
IMAG_TOL = 1e-8
NEG_TOL = 1e-9
SPREAD_WARN = 1e-6
SPREAD_FAIL = 1e-4


# ---------------------------------------------------------------------------
# Frames


@dataclass(frozen=True)
class LatticeFrames:
    """Tensor grid of frame parameters."""

    mu: Grid1D
    nu: Grid1D

    @property
    def shape(self) -> tuple:
        return (self.mu.n, self.nu.n)

    def flat(self) -> tuple:
        M, N = np.meshgrid(self.mu.points, self.nu.points, indexing="ij")
        return M.ravel(), N.ravel()

    def mesh(self) -> tuple:
        return tuple(np.meshgrid(self.mu.points, self.nu.points, indexing="ij"))

    def radius(self) -> np.ndarray:
        M, N = self.mesh()
        return np.hypot(M, N)

    @classmethod
    def centered(cls, half_width: float, n: int) -> "LatticeFrames":
        g = Grid1D.centered(half_width, n)
        return cls(g, g)

    def refined(self, factor: int = 2) -> "LatticeFrames":
        return LatticeFrames(self.mu.refined(factor), self.nu.refined(factor))


class FrameList:
    """Explicit list of (mu, nu) frames."""

    def __init__(self, frames):
        arr = np.asarray(frames, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
            raise ArgumentError("frames must be a non-empty list of (mu, nu) pairs")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("frame parameters must be finite")
        size = np.abs(arr).max(axis=1)
        bad = np.nonzero(size < FRAME_MIN)[0]
        if bad.size:
            i = int(bad[0])
            raise ArgumentError(f"frame {i} (mu, nu) = ({arr[i, 0]}, {arr[i, 1]}) is degenerate")
        arr.flags.writeable = False
        self.frames = arr

    @property
    def shape(self) -> tuple:
        return (self.frames.shape[0],)

    def flat(self) -> tuple:
        return self.frames[:, 0].copy(), self.frames[:, 1].copy()

    def __len__(self):
        return self.frames.shape[0]

    def __repr__(self):
        return f"FrameList({self.frames.tolist()})"

    def index(self, mu: float, nu: float, tol: float = 1e-12) -> Optional[int]:
        d = np.abs(self.frames - np.array([mu, nu])).max(axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= tol else None


def _as_frames(frames):
    if isinstance(frames, (LatticeFrames, FrameList)):
        return frames
    return FrameList(frames)


# ---------------------------------------------------------------------------
# Tomogram container


@dataclass(frozen=True, eq=False)
class Tomogram:
    """Sampled tomogram for one or two particles."""

    X_axes: tuple
    frames: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X_axes = tuple(self.X_axes)
        frames = tuple(_as_frames(f) for f in self.frames)
        if len(X_axes) not in (1, 2) or len(frames) != len(X_axes):
            raise ArgumentError("tomogram needs one X axis and one frame set per particle")
        vals = np.array(self.values, dtype=float, copy=True)
        expected = tuple(a.n for a in X_axes) + sum((f.shape for f in frames), ())
        if vals.shape != expected:
            raise ArgumentError(f"tomogram values shape {vals.shape} != expected {expected}")
        if not np.all(np.isfinite(vals)):
            raise ArgumentError("tomogram contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "X_axes", X_axes)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def particles(self) -> int:
        return len(self.X_axes)

    @property
    def is_lattice(self) -> bool:
        return all(isinstance(f, LatticeFrames) for f in self.frames)

    def with_values(self, values, **meta) -> "Tomogram":
        m = dict(self.meta)
        m.update(meta)
        return Tomogram(self.X_axes, self.frames, values, m)

    def normalization(self) -> np.ndarray:
        """Integral over all X axes, per frame tuple."""
        axes = tuple(range(self.particles))
        return self.values.sum(axis=axes) * np.prod([a.h for a in self.X_axes])

    def frame_values(self, mu: float, nu: float) -> np.ndarray:
        """X profile at a frame stored in a one-particle tomogram."""
        fr = self.frames[0]
        if isinstance(fr, FrameList):
            i = fr.index(mu, nu)
            if i is None:
                raise ArgumentError(f"frame ({mu}, {nu}) not in tomogram")
            return self.values[:, i]
        i = int(np.argmin(np.abs(fr.mu.points - mu)))
        j = int(np.argmin(np.abs(fr.nu.points - nu)))
        if abs(fr.mu.points[i] - mu) > 1e-12 or abs(fr.nu.points[j] - nu) > 1e-12:
            raise ArgumentError(f"frame ({mu}, {nu}) is not a lattice node")
        return self.values[:, i, j]

    def mean_X(self, mu: float, nu: float) -> float:
        prof = self.frame_values(mu, nu)
        X = self.X_axes[0].points
        return float((X * prof).sum() / prof.sum())


# ---------------------------------------------------------------------------
# Closed form for the Gaussian family


def gaussian_tomogram(spec: GaussianSpec, frames, X: np.ndarray, periodize: Optional[Grid1D] = None
                      ) -> np.ndarray:
    """One-particle Gaussian tomogram, shape (nX, *frame dims).

    ``X = mu q + nu p`` is normal with mean ``(mu, nu).m`` and variance
    ``(mu, nu) C (mu, nu)^T``.  With ``periodize`` the result is summed over
    images of the X box, matching the slice path.
    """
    frames = _as_frames(frames)
    mu, nu = frames.flat()
    m = mu * spec.mean[0] + nu * spec.mean[1]
    C = spec.covariance
    var = mu * mu * C[0, 0] + 2 * mu * nu * C[0, 1] + nu * nu * C[1, 1]
    X = np.asarray(X, dtype=float)[:, None]
    if periodize is None:
        out = np.exp(-(X - m) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)
    else:
        # sum the Fourier series directly: no images needed
        L = periodize.length
        k = 2 * np.pi * np.arange(1, periodize.n // 2) / L
        coef = np.exp(-0.5 * np.outer(k * k, var) - 1j * np.outer(k, m))
        out = (1 + 2 * np.real(np.exp(1j * X * k[None, :]) @ coef)) / L
    return out.reshape((X.shape[0],) + frames.shape)


# ---------------------------------------------------------------------------
# Direct path


def _lines(vals3, q_ax: Grid1D, p_ax: Grid1D, mu, nu, X_ax: Grid1D, order: int, workers: int):
    """radon_lines over frames, optionally split across threads."""
    def run(sl):
        return kernels.radon_lines(vals3, q_ax.lo, q_ax.h, p_ax.lo, p_ax.h, mu[sl], nu[sl],
                                   X_ax.points, X_ax.h, order)

    if workers <= 1 or mu.size < 2 * workers:
        return run(slice(None))
    chunks = np.array_split(np.arange(mu.size), workers)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(lambda c: run(slice(c[0], c[-1] + 1)), chunks))
    return (np.concatenate([p[0] for p in parts], axis=1),
            np.concatenate([p[1] for p in parts], axis=1))


def radon_forward_direct(f: PhaseSpaceDensity, frames, X_axis: Grid1D, order: int = 6,
                         workers: int = 1) -> Tomogram:
    """Line integrals along ``X = mu q + nu p`` with Lagrange interpolation across lines.

    The integration runs over whichever of q, p has the larger coefficient.
    """
    if f.particles != 1:
        raise ArgumentError("radon_forward_direct takes a one-particle density")
    frames = _as_frames(frames)
    mu, nu = frames.flat()
    small = np.maximum(np.abs(mu), np.abs(nu)) < FRAME_MIN
    if np.any(small):
        i = int(np.nonzero(small)[0][0])
        raise ArgumentError(f"frame ({mu[i]}, {nu[i]}) is degenerate")
    out, outside = _lines(f.values[None], f.axes[0], f.axes[1], mu, nu, X_axis, order, workers)
    worst = float(outside.max())
    if worst > OUTSIDE_TOL:
        bad = np.nonzero(outside[0] > OUTSIDE_TOL)[0]
        raise AccuracyError(f"lines leave the phase-space box carrying mass {worst:.3g}",
                            offending=[(float(mu[i]), float(nu[i])) for i in bad])
    vals = out[0].T.reshape((X_axis.n,) + frames.shape)
    return Tomogram((X_axis,), (frames,), vals, {"path": "direct", "outside": worst})


# ---------------------------------------------------------------------------
# Slice path


def _bandlimit_ratio(vals, q_ax: Grid1D, p_ax: Grid1D) -> float:
    """Largest |DFT| on the two outermost rings in (q, p), relative to the peak."""
    spec = np.abs(np.fft.fft2(vals, axes=(0, 1)))
    peak = spec.max()
    if peak == 0:
        return 0.0
    nq, npp = vals.shape[:2]
    mq = np.abs(np.fft.fftfreq(nq) * nq)
    mp = np.abs(np.fft.fftfreq(npp) * npp)
    ring = (mq[:, None] >= nq // 2 - 1) | (mp[None, :] >= npp // 2 - 1)
    ring = ring.reshape(ring.shape + (1,) * (vals.ndim - 2))
    return float(np.where(ring, spec, 0.0).max() / peak)


def _phase(k: float, coeffs: np.ndarray, axis: Grid1D) -> np.ndarray:
    """exp(-i k c x) on the axis, zero where |k c| exceeds the axis Nyquist frequency."""
    a = k * coeffs
    E = np.exp(-1j * np.outer(a, axis.points))
    E[np.abs(a) > np.pi / axis.h * (1 - 1e-12)] = 0.0
    return E


def _slice_core(vals, q_ax: Grid1D, p_ax: Grid1D, frames, X_ax: Grid1D, workers: int = 1,
                bandlimit_tol: float = BANDLIMIT_TOL) -> np.ndarray:
    """Slice-path tomogram of a batch.

    ``vals`` has shape (nq, np, *batch); the result (nX, *frame dims, *batch).
    """
    nq, npp = vals.shape[:2]
    batch = vals.shape[2:]
    B = int(np.prod(batch)) if batch else 1
    v = vals.reshape(nq, npp, B)
    mu, nu = frames.flat() if isinstance(frames, FrameList) else (frames.mu.points, frames.nu.points)
    k = 2 * np.pi * np.arange(X_ax.n // 2 + 1) / X_ax.length
    # rays beyond the Nyquist box are dropped; that is only safe for band-limited f
    kmax = k[-2] if X_ax.n > 2 else 0.0
    outq = np.abs(kmax * mu) > np.pi / q_ax.h
    outp = np.abs(kmax * nu) > np.pi / p_ax.h
    if np.any(outq) or np.any(outp):
        ratio = _bandlimit_ratio(v, q_ax, p_ax)
        if ratio > bandlimit_tol:
            if isinstance(frames, FrameList):
                bad = np.nonzero(outq | outp)[0]
                offending = [tuple(frames.frames[i]) for i in bad]
            else:
                M, N = frames.mesh()
                mask = outq[:, None] | outp[None, :]
                offending = list(zip(M[mask].tolist(), N[mask].tolist()))
            raise AccuracyError(
                f"density is not band-limited (edge spectrum {ratio:.2g}) and "
                f"{len(offending)} frames sample beyond the Nyquist box", offending=offending)
    dA = q_ax.h * p_ax.h
    lattice = isinstance(frames, LatticeFrames)
    fshape = frames.shape
    spec = np.zeros((k.size,) + fshape + (B,), dtype=complex)

    def mode(m):
        if m == X_ax.n // 2:
            return  # Nyquist mode dropped
        Ep = _phase(k[m], nu, p_ax)
        Eq = _phase(k[m], mu, q_ax)
        if lattice:
            # A[q, j, b] = sum_p Ep[j, p] v[q, p, b]
            Ar = np.einsum("jp,qpb->qjb", Ep.real, v, optimize=True)
            Ai = np.einsum("jp,qpb->qjb", Ep.imag, v, optimize=True)
            spec[m] = np.einsum("iq,qjb->ijb", Eq, Ar + 1j * Ai, optimize=True) * dA
        else:
            Ar = np.einsum("fp,qpb->fqb", Ep.real, v, optimize=True)
            Ai = np.einsum("fp,qpb->fqb", Ep.imag, v, optimize=True)
            spec[m] = np.einsum("fq,fqb->fb", Eq, Ar + 1j * Ai, optimize=True) * dA

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(mode, range(k.size)))
    else:
        for m in range(k.size):
            mode(m)
    spec *= np.exp(1j * k * X_ax.lo).reshape((k.size,) + (1,) * (spec.ndim - 1))
    out = np.fft.irfft(spec, n=X_ax.n, axis=0) / X_ax.h
    return out.reshape((X_ax.n,) + fshape + batch)


def radon_forward_slice(f: PhaseSpaceDensity, frames, X_axis: Grid1D, workers: int = 1,
                        bandlimit_tol: float = BANDLIMIT_TOL) -> Tomogram:
    """Tomogram via rays of the 2-D Fourier transform of f.

    For each X wavenumber k the transform ``F(k mu, k nu)`` is evaluated
    exactly (separable non-uniform DFT), then inverted over X.
    """
    if f.particles != 1:
        raise ArgumentError("radon_forward_slice takes a one-particle density")
    frames = _as_frames(frames)
    vals = _slice_core(f.values, f.axes[0], f.axes[1], frames, X_axis, workers, bandlimit_tol)
    return Tomogram((X_axis,), (frames,), vals, {"path": "slice"})


def radon_forward_2p(f: PhaseSpaceDensity, frames: Sequence, X_axes: Sequence[Grid1D],
                     workers: int = 1) -> Tomogram:
    """Two-particle tomogram as nested one-particle slice transforms."""
    if f.particles != 2:
        raise ArgumentError("radon_forward_2p takes a two-particle density")
    fr1, fr2 = (_as_frames(x) for x in frames)
    X1, X2 = X_axes
    q1, p1, q2, p2 = f.axes
    # particle 2 first: (q2, p2, q1, p1) -> (nX2, *fr2, q1, p1)
    g = _slice_core(np.moveaxis(f.values, (2, 3), (0, 1)), q2, p2, fr2, X2, workers)
    n2 = 1 + len(fr2.shape)
    g = np.moveaxis(g, (n2, n2 + 1), (0, 1))          # (q1, p1, nX2, *fr2)
    w = _slice_core(g, q1, p1, fr1, X1, workers)       # (nX1, *fr1, nX2, *fr2)
    n1 = len(fr1.shape)
    w = np.moveaxis(w, 1 + n1, 1)                      # (nX1, nX2, *fr1, *fr2)
    return Tomogram((X1, X2), (fr1, fr2), w, {"path": "slice"})


def reduce_tomogram(w: Tomogram, spread_fail: float = SPREAD_FAIL) -> Tomogram:
    """Integrate out X2 and check independence of the particle-2 frame."""
    if w.particles != 2:
        raise ArgumentError("reduce_tomogram takes a two-particle tomogram")
    red = w.values.sum(axis=1) * w.X_axes[1].h        # (nX1, *fr1, *fr2)
    n2 = len(w.frames[1].shape)
    axes2 = tuple(range(red.ndim - n2, red.ndim))
    mean = red.mean(axis=axes2)
    spread = float(np.abs(red - np.expand_dims(mean, axes2)).max())
    if spread > spread_fail:
        raise InconsistencyError(f"reduced tomogram depends on particle-2 frame (spread {spread:.3g})",
                                 spread=spread)
    return Tomogram((w.X_axes[0],), (w.frames[0],), mean,
                    {"path": w.meta.get("path"), "spread": spread,
                     "spread_ok": spread <= SPREAD_WARN})


# ---------------------------------------------------------------------------
# Inverse


def x_fourier_coefficient(values: np.ndarray, X_axis: Grid1D) -> np.ndarray:
    """G = sum_x w(X_x, ...) exp(i X_x) h_X along axis 0.

    Exact on the periodized tomogram when the box length is a multiple of
    2*pi; otherwise the tomogram must have decayed inside the box.
    """
    cycles = X_axis.length / (2 * np.pi)
    if abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles):
        edge = float(np.abs(values[[0, -1]]).max())
        peak = float(np.abs(values).max())
        if edge > 1e-12 * max(peak, 1e-300):
            raise ArgumentError(
                f"X box length {X_axis.length:.6g} is not a multiple of 2*pi and the tomogram "
                f"has not decayed at its edges ({edge:.3g})")
    elif X_axis.n <= 2 * round(cycles):
        raise ArgumentError(f"X grid of {X_axis.n} points cannot resolve the exp(iX) mode")
    e = np.exp(1j * X_axis.points) * X_axis.h
    return np.tensordot(e, values, axes=(0, 0))


def invert_values(values: np.ndarray, X_axis: Grid1D, frames: LatticeFrames,
                  q_ax: Grid1D, p_ax: Grid1D) -> np.ndarray:
    """Raw complex inverse of a batch: values (nX, nmu, nnu, *batch) -> (nq, np, *batch)."""
    G = x_fourier_coefficient(values, X_axis)         # (nmu, nnu, *batch)
    Eq = np.exp(-1j * np.outer(q_ax.points, frames.mu.points))   # (nq, nmu)
    Ep = np.exp(-1j * np.outer(p_ax.points, frames.nu.points))   # (np, nnu)
    scale = frames.mu.h * frames.nu.h / (4 * np.pi ** 2)
    tmp = np.tensordot(Eq, G, axes=(1, 0))           # (nq, nnu, *batch)
    out = np.tensordot(Ep, tmp, axes=(1, 1))          # (np, nq, *batch)
    return np.swapaxes(out, 0, 1) * scale


@dataclass
class InversionReport:
    imag_residue: float
    min_value: float
    total: float


def radon_inverse(w: Tomogram, qp_axes: Sequence[Grid1D], strict: bool = True,
                  imag_tol: float = IMAG_TOL, neg_tol: float = NEG_TOL,
                  report: bool = False):
    """Density from a one-particle lattice tomogram.

    Small imaginary residue is discarded and negativity above ``-neg_tol``
    clipped; larger defects raise InversionQualityError when ``strict``.
    """
    if w.particles != 1 or not w.is_lattice:
        raise ArgumentError("radon_inverse needs a one-particle lattice tomogram")
    q_ax, p_ax = qp_axes
    raw = invert_values(w.values, w.X_axes[0], w.frames[0], q_ax, p_ax)
    peak = max(float(np.abs(raw.real).max()), 1e-300)
    imag = float(np.abs(raw.imag).max()) / peak
    re = raw.real
    mn = float(re.min())
    total = float(re.sum() * q_ax.h * p_ax.h)
    rep = InversionReport(imag, mn, total)
    if strict and (imag > imag_tol or mn < -neg_tol):
        raise InversionQualityError(
            f"inverse quality: imaginary residue {imag:.3g}, min value {mn:.3g}",
            imag_residue=imag, min_value=mn)
    vals = np.maximum(re, 0.0)
    clipped = float(vals.sum() * q_ax.h * p_ax.h)
    dens = PhaseSpaceDensity((q_ax, p_ax), vals, norm_tol=max(1e-6, abs(clipped - 1) * 1.01))
    return (dens, rep) if report else dens


def check_positivity(w: Tomogram, qp_axes: Sequence[Grid1D], tol: float = 1e-6) -> dict:
    """Is ``w`` the tomogram of a nonnegative density?  Inverts without clipping."""
    q_ax, p_ax = qp_axes
    raw = invert_values(w.values, w.X_axes[0], w.frames[0], q_ax, p_ax)
    mn = float(raw.real.min())
    return {"min_density": mn, "min_tomogram": float(w.values.min()),
            "ok": mn >= -tol and float(w.values.min()) >= -tol}


# ---------------------------------------------------------------------------
# Homogeneity


def check_homogeneity(w: Tomogram, lambdas: Sequence[float], region=None, order: int = 6) -> dict:
    """max |w(lX, l mu, l nu) - w(X, mu, nu)/|l||, per l.

    Lattice tomograms are interpolated at the scaled points; a FrameList must
    contain the scaled frames and only X is interpolated.  ``region`` is an
    optional boolean mask over the frames limiting the sample set.  Scaled
    points outside the sampled hull are skipped and counted.
    """
    if w.particles != 1:
        raise ArgumentError("homogeneity check is implemented per particle")
    X = w.X_axes[0]
    fr = w.frames[0]
    out = {}
    for lam in lambdas:
        lam = float(lam)
        if lam == 0:
            raise ArgumentError("lambda must be nonzero")
        if lam == 1.0:
            out[lam] = {"deviation": 0.0, "skipped": 0, "checked": int(w.values.size)}
            continue
        if isinstance(fr, LatticeFrames):
            Xg, M, N = np.meshgrid(X.points, fr.mu.points, fr.nu.points, indexing="ij")
            sel = np.ones(Xg.shape, dtype=bool)
            if region is not None:
                sel &= np.broadcast_to(region[None], Xg.shape)
            pts = np.stack([lam * Xg[sel], lam * M[sel], lam * N[sel]], axis=1)
            hull_lo = np.array([X.lo, fr.mu.lo, fr.nu.lo])
            hull_hi = np.array([X.points[-1], fr.mu.points[-1], fr.nu.points[-1]])
            inside = np.all((pts >= hull_lo - 1e-12) & (pts <= hull_hi + 1e-12), axis=1)
            got = kernels.interp_nd(w.values, hull_lo, np.array([X.h, fr.mu.h, fr.nu.h]),
                                    pts[inside], order)
            ref = w.values[sel][inside] / abs(lam)
        else:
            got_l, ref_l, inside_n, total_n = [], [], 0, 0
            for i, (m, n) in enumerate(fr.frames):
                if region is not None and not region[i]:
                    continue
                j = fr.index(lam * m, lam * n, tol=1e-9)
                xs = lam * X.points
                ok = (xs >= X.lo - 1e-12) & (xs <= X.points[-1] + 1e-12)
                total_n += X.n
                if j is None:
                    continue
                inside_n += int(ok.sum())
                got_l.append(kernels.interp_nd(w.values[:, j], np.array([X.lo]), np.array([X.h]),
                                               xs[ok][:, None], order))
                ref_l.append(w.values[ok, i] / abs(lam))
            got = np.concatenate(got_l) if got_l else np.zeros(0)
            ref = np.concatenate(ref_l) if ref_l else np.zeros(0)
            inside = np.zeros(total_n, dtype=bool)
            inside[:inside_n] = True
        dev = float(np.abs(got - ref).max()) if got.size else float("nan")
        out[lam] = {"deviation": dev, "skipped": int((~inside).sum()), "checked": int(got.size)}
    return out
