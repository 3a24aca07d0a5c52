import math

import numpy as np
import pytest

from tomokin.errors import (ArgumentError, CapabilityError, CoverageError, InstabilityError,
                            ResolutionError)
from tomokin.liouville import evolve_density
from tomokin.numerics import Grid1D
from tomokin.phasespace import (Free, GaussianSpec, Harmonic, Pair, PairProfile, Polynomial,
                                make_gaussian)
from tomokin.radon import (FrameList, LatticeFrames, Tomogram, gaussian_tomogram,
                           invert_values, radon_forward_slice)
from tomokin.tomoprop import (Dp, Dq, MultiplyByP, MultiplyByQ, TomoOperator, TomoPDEConfig,
                              accuracy_mask, analytic_tomo_flow, apply_correspondence,
                              characteristic_preimage, commuting_diagram_error,
                              evolve_tomogram, frame_moments, interior_mask,
                              mean_energy_from_tomogram, periodic_central, tomographic_rhs,
                              torus_frames, upwind_advect)

AX = (Grid1D.centered(9.0, 96), Grid1D.centered(9.0, 96))
XK = Grid1D(-math.pi, math.pi, 4)         # exact k = 1 coefficient for inversion
LAT = LatticeFrames.centered(8.0, 64)


def _spectral(f, axis, grid):
    return np.real(np.fft.ifft(1j * grid.wavenumbers.reshape([-1 if a == axis else 1 for a in range(2)])
                               * np.fft.fft(f, axis=axis), axis=axis))


@pytest.fixture(scope="module")
def gauss():
    spec = GaussianSpec([0.3, -0.2], [[0.8, 0.15], [0.15, 0.6]])
    return spec, make_gaussian(spec, AX)


@pytest.mark.parametrize("op", [MultiplyByP, MultiplyByQ, Dq, Dp])
def test_correspondence_rules_invert_to_phase_space_operation(gauss, op):
    _, f = gauss
    w = radon_forward_slice(f, LAT, XK)
    img = invert_values(apply_correspondence(op, w), XK, LAT, *AX).real
    Q, P = f.mesh()
    ref = {"p": P * f.values, "q": Q * f.values,
           "dq": _spectral(f.values, 0, AX[0]), "dp": _spectral(f.values, 1, AX[1])}[op.kind]
    assert np.abs(img - ref).max() < 1e-4


def test_operator_validation():
    with pytest.raises(ArgumentError):
        TomoOperator("x")
    with pytest.raises(ArgumentError):
        TomoOperator("p", particle=2)
    w = Tomogram((XK,), (FrameList([(1, 0)]),), np.zeros((4, 1)))
    with pytest.raises(ArgumentError):
        apply_correspondence(Dq, w)


def test_resolution_guard(gauss):
    _, f = gauss
    coarse = LatticeFrames.centered(8.0, 12)
    w = radon_forward_slice(f, coarse, XK)
    with pytest.raises(ResolutionError):
        apply_correspondence(MultiplyByP, w, resolution_tol=1e-3)


def test_config_and_capabilities():
    with pytest.raises(CapabilityError):
        TomoPDEConfig(potential=Polynomial((0, 0, 0.5, 0, 0.1)))
    with pytest.raises(CapabilityError):
        TomoPDEConfig(potential=Pair(PairProfile.polynomial([0, 0, 0.5])))
    with pytest.raises(ArgumentError):
        TomoPDEConfig(route="transform")
    with pytest.raises(ArgumentError):
        TomoPDEConfig(dt=-1)
    with pytest.raises(ArgumentError):
        TomoPDEConfig(scheme="verlet")
    TomoPDEConfig(potential=Polynomial((0, 0, 0.5, 0.1)))


def test_upwind_and_periodic_stencils():
    g = Grid1D(0.0, 2 * math.pi, 64)
    x = g.points
    v = np.sin(x)[None, :].repeat(2, axis=0)
    coef = np.array([[1.0], [-2.0]])
    d = upwind_advect(v, 1, coef, g.h, periodic=True)
    assert np.abs(d - coef * np.cos(x)).max() < 1e-8
    lin = (3 * x - 1)[None, :].repeat(2, axis=0)
    assert np.abs(upwind_advect(lin, 1, coef, g.h) - 3 * coef).max() < 1e-11
    assert np.abs(periodic_central(np.sin(x), 0, g.h, 2) + np.sin(x)).max() < 1e-9


def test_characteristics():
    m, n = characteristic_preimage(Harmonic(1.0), 0.3, 0.7, math.pi / 2)
    assert np.allclose([m, n], [-0.7, 0.3])
    m, n = characteristic_preimage(Free(), 0.3, 0.7, 2.0)
    assert np.allclose([m, n], [0.3, 1.3])
    with pytest.raises(CapabilityError):
        characteristic_preimage(Polynomial((0, 0, 1)), 1.0, 0.0, 1.0)


def test_analytic_flow_quarter_period(gauss):
    spec, f = gauss
    lat = LatticeFrames.centered(2.0, 32)
    X = Grid1D.centered(8.0, 64)
    w0 = radon_forward_slice(f, lat, X)
    wt = analytic_tomo_flow(w0, Harmonic(1.0), math.pi / 2, max_loss=0.05)
    cov = wt.meta["covered"]
    # w(X, mu, nu, pi/2) = w0(X, -nu, mu); the node mu = -2 maps outside the lattice
    assert (~cov).sum() == 32 and not cov[:, 0].any()
    ref = radon_forward_slice(evolve_density(f, Harmonic(1.0), math.pi / 2), lat, X)
    assert np.abs(wt.values - ref.values)[:, cov].max() < 1e-4
    with pytest.raises(CoverageError):
        analytic_tomo_flow(w0, Free(), 2.0)


def test_short_free_evolution_matches_transformed_density(gauss):
    _, f = gauss
    lat = LatticeFrames.centered(2.0, 64)
    X = Grid1D.centered(8.0, 32)
    t = 0.3
    w = evolve_tomogram(radon_forward_slice(f, lat, X), TomoPDEConfig(dt=0.01, t_final=t))
    ref = radon_forward_slice(evolve_density(f, Free(), t), lat, X)
    mask = accuracy_mask(lat, Free(), t)
    assert mask.sum() > 100
    assert np.abs(w.values - ref.values)[:, mask].max() < 1e-3
    assert w.meta["drift"] < 1e-6 and w.meta["steps"] == 30


def test_transform_route_agrees_with_operator_route(gauss):
    _, f = gauss
    lat = LAT
    w = radon_forward_slice(f, lat, XK)
    a = tomographic_rhs(w, Harmonic(1.0))
    b = tomographic_rhs(w, Harmonic(1.0), route="transform", qp_axes=AX)
    mask = interior_mask(lat, 8) & (lat.radius() < 3.0)
    assert np.abs(a - b)[:, mask].max() < 1e-5
    with pytest.raises(ArgumentError):
        tomographic_rhs(w, Harmonic(1.0), route="transform")


def test_instability_is_reported(gauss):
    _, f = gauss
    lat = LatticeFrames.centered(2.0, 32)
    w0 = radon_forward_slice(f, lat, Grid1D.centered(8.0, 32))
    with pytest.raises(InstabilityError) as e:
        evolve_tomogram(w0, TomoPDEConfig(dt=1.0, t_final=20.0))
    assert e.value.step >= 1


def test_commuting_diagram_small_case(gauss):
    _, f = gauss
    lat = LatticeFrames.centered(2.0, 64)
    r = commuting_diagram_error(f, Harmonic(1.0), 0.5, Grid1D.centered(8.0, 32), lat)
    assert r["sup"] < 1e-3 and r["frames_used"] > 0


def test_frame_moments_and_energy(gauss):
    spec, f = gauss
    lat = LatticeFrames(Grid1D(-2.0, 2.0, 4), Grid1D(-2.0, 2.0, 4))
    X = Grid1D.centered(12.0, 256)
    w = radon_forward_slice(f, lat, X)
    m, s = frame_moments(w, 0.0, 1.0)
    C = spec.covariance
    assert m == pytest.approx(spec.mean[1], abs=1e-10)
    assert s == pytest.approx(C[1, 1] + spec.mean[1] ** 2, abs=1e-10)
    E = 0.5 * (C[1, 1] + spec.mean[1] ** 2 + 4.0 * (C[0, 0] + spec.mean[0] ** 2))
    assert mean_energy_from_tomogram(w, 2.0) == pytest.approx(E, abs=1e-9)


def test_torus_frames_spacing():
    q = Grid1D.centered(9.0, 128)
    X = Grid1D.centered(8.0, 32)
    fr = torus_frames(q, X, 64, 2.0)
    assert fr.mu.h == pytest.approx(X.length / q.length)
    assert interior_mask(fr, 4).sum() == 56 * 56
