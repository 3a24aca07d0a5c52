import numpy as np
import pytest

from tomokin.errors import ArgumentError, InconsistencyError, InversionQualityError
from tomokin.numerics import Grid1D
from tomokin.phasespace import GaussianSpec, make_gaussian, make_product
from tomokin.radon import (FrameList, LatticeFrames, Tomogram, check_homogeneity,
                           check_positivity, gaussian_tomogram, radon_forward_2p,
                           radon_forward_direct, radon_forward_slice, radon_inverse,
                           reduce_tomogram, x_fourier_coefficient)

AX = (Grid1D.centered(9.0, 128), Grid1D.centered(9.0, 128))
X = Grid1D.centered(8.0, 128)
FRAMES = [(1.0, 0.0), (0.0, 1.0), (0.6, -0.9), (1.3, 0.4), (-0.4, 0.5)]


def _images(spec, frames, Xg, reach=6):
    """Independent periodization: explicit sum over box images."""
    return sum(gaussian_tomogram(spec, frames, Xg.points + j * Xg.length)
               for j in range(-reach, reach + 1))


def test_frame_containers():
    fl = FrameList(FRAMES)
    assert len(fl) == 5 and fl.index(0.6, -0.9) == 2 and fl.index(2, 2) is None
    with pytest.raises(ArgumentError, match=r"frame 1 \(mu, nu\) = \(0.0, 0.0\)"):
        FrameList([(1, 0), (0, 0)])
    with pytest.raises(ArgumentError):
        FrameList([(1, np.nan)])
    lat = LatticeFrames.centered(2.0, 8)
    assert lat.shape == (8, 8) and lat.refined().shape == (16, 16)
    assert lat.radius()[4, 4] == 0.0


def test_tomogram_validation():
    with pytest.raises(ArgumentError):
        Tomogram((X,), (FRAMES,), np.zeros((X.n, 4)))
    with pytest.raises(ArgumentError):
        Tomogram((X,), (FRAMES,), np.full((X.n, 5), np.inf))
    with pytest.raises(ArgumentError):
        Tomogram((X, X), (FRAMES,), np.zeros((X.n, 5)))


def test_standard_gaussian_closed_form():
    s = GaussianSpec.standard()
    w = gaussian_tomogram(s, [(0.6, 0.8)], np.array([0.0, 1.0]))
    assert np.allclose(w[:, 0], np.exp(-np.array([0.0, 0.5])) / np.sqrt(2 * np.pi))
    # variance mu^2 + nu^2
    w = gaussian_tomogram(s, [(2.0, 0.0)], np.array([0.0]))
    assert np.isclose(w[0, 0], 1 / np.sqrt(2 * np.pi * 4))


def test_periodized_closed_form_matches_image_sum(rng):
    spec = GaussianSpec.random(rng)
    Xs = Grid1D.centered(3.0, 64)
    a = gaussian_tomogram(spec, FRAMES, Xs.points, periodize=Xs)
    b = _images(spec, FRAMES, Xs)
    assert np.abs(a - b).max() < 1e-12


def test_direct_and_slice_paths(rng):
    spec = GaussianSpec.random(rng)
    f = make_gaussian(spec, AX)
    d = radon_forward_direct(f, FRAMES, X)
    s = radon_forward_slice(f, FRAMES, X)
    assert np.abs(d.values - gaussian_tomogram(spec, FRAMES, X.points)).max() < 1e-6
    assert np.abs(s.values - _images(spec, FRAMES, X)).max() < 1e-10
    assert d.meta["path"] == "direct" and s.meta["path"] == "slice"
    m = spec.mean
    assert np.isclose(s.mean_X(0.6, -0.9), 0.6 * m[0] - 0.9 * m[1], atol=1e-8)


def test_threads_do_not_change_results(rng):
    f = make_gaussian(GaussianSpec.random(rng), AX)
    fr = FrameList(rng.uniform(-1, 1, (12, 2)))
    a = radon_forward_direct(f, fr, X, workers=1).values
    b = radon_forward_direct(f, fr, X, workers=3).values
    assert np.array_equal(a, b)
    assert np.abs(radon_forward_slice(f, fr, X, workers=3).values
                  - radon_forward_slice(f, fr, X).values).max() < 1e-15


def test_lattice_tomogram_accessors(rng):
    f = make_gaussian(GaussianSpec.standard(), AX)
    lat = LatticeFrames.centered(2.0, 8)
    w = radon_forward_slice(f, lat, X)
    assert w.values.shape == (X.n, 8, 8) and w.is_lattice
    prof = w.frame_values(-1.0, 0.5)
    assert prof.shape == (X.n,)
    with pytest.raises(ArgumentError):
        w.frame_values(0.1, 0.0)


def test_reduction_of_product_state(rng):
    ax = (Grid1D.centered(9, 48),) * 2
    s1, s2 = GaussianSpec.random(rng), GaussianSpec.random(rng)
    f = make_product(make_gaussian(s1, ax), make_gaussian(s2, ax))
    Xs = Grid1D.centered(10.0, 64)
    w2 = radon_forward_2p(f, (FRAMES, [(1, 0), (0.3, 0.9)]), (Xs, Grid1D.centered(10.0, 16)))
    assert w2.values.shape == (64, 16, 5, 2)
    red = reduce_tomogram(w2)
    assert red.meta["spread"] < 1e-12 and red.meta["spread_ok"]
    assert np.abs(red.values - gaussian_tomogram(s1, FRAMES, Xs.points, periodize=Xs)).max() < 1e-10
    # joint tomogram of a product state factorizes
    w1 = gaussian_tomogram(s1, FRAMES, Xs.points, periodize=Xs)
    w2b = gaussian_tomogram(s2, [(1, 0)], np.linspace(-10, 10, 17)[:-1], periodize=Grid1D.centered(10, 16))
    assert np.abs(w2.values[:, :, :, 0] - w1[:, None, :] * w2b[None, :, 0, None]).max() < 1e-10


def test_reduction_flags_frame_dependence():
    Xs = Grid1D.centered(4.0, 8)
    vals = np.zeros((8, 8, 1, 2))
    vals[:, :, 0, 0] = 1 / 64
    vals[:, :, 0, 1] = 2 / 64
    w = Tomogram((Xs, Xs), (FrameList([(1, 0)]), FrameList([(1, 0), (0, 1)])), vals)
    with pytest.raises(InconsistencyError) as e:
        reduce_tomogram(w)
    assert e.value.spread > 1e-4


def test_inverse_round_trip(rng):
    spec = GaussianSpec.random(rng)
    f = make_gaussian(spec, AX)
    lat = LatticeFrames.centered(8.0, 64)
    w = radon_forward_slice(f, lat, Grid1D(-np.pi, np.pi, 4))
    rec, rep = radon_inverse(w, AX, report=True, strict=False)
    assert np.abs(rec.values - f.values).max() < 2e-4
    assert rep.imag_residue < 1e-8
    assert check_positivity(w, AX)["min_density"] > -1e-6


def test_inverse_clipping_keeps_normalization():
    # a narrow state whose raw inverse rings slightly below zero
    g = np.random.default_rng(2)
    spec = [GaussianSpec.random(g, spread=(0.5, 1.0), shift=0.5) for _ in range(4)][-1]
    f = make_gaussian(spec, AX)
    w = radon_forward_slice(f, LatticeFrames.centered(8.0, 64), Grid1D(-np.pi, np.pi, 4))
    rec, rep = radon_inverse(w, AX, report=True, strict=False)
    assert rec.values.min() >= 0.0
    assert abs(rec.total() - 1.0) < 1e-4


def test_inverse_strict_rejects_garbage(rng):
    lat = LatticeFrames.centered(2.0, 8)
    Xg = Grid1D(-np.pi, np.pi, 4)
    vals = rng.uniform(0, 1, (4, 8, 8))
    with pytest.raises(InversionQualityError):
        radon_inverse(Tomogram((Xg,), (lat,), vals), AX)
    with pytest.raises(ArgumentError):
        radon_inverse(Tomogram((Xg,), (FRAMES,), np.zeros((4, 5))), AX)


def test_x_fourier_coefficient_needs_decay_or_whole_periods():
    Xg = Grid1D(0.0, 5.0, 8)
    with pytest.raises(ArgumentError):
        x_fourier_coefficient(np.ones(8), Xg)
    Xp = Grid1D(0.0, 2 * np.pi, 8)
    G = x_fourier_coefficient(np.cos(Xp.points)[:, None], Xp)
    assert np.isclose(G[0], np.pi)


def test_homogeneity_of_gaussian(rng):
    f = make_gaussian(GaussianSpec.random(rng), AX)
    base = np.array(FRAMES)
    lams = [-2.0, -0.5, 0.5, 2.0]
    fr = FrameList(np.concatenate([base] + [lam * base for lam in lams]))
    w = radon_forward_direct(f, fr, Grid1D.centered(6.0, 512))
    region = np.zeros(len(fr), dtype=bool)
    region[:5] = True
    res = check_homogeneity(w, lams, region=region)
    assert max(r["deviation"] for r in res.values()) < 1e-4
    with pytest.raises(ArgumentError):
        check_homogeneity(w, [0.0])
