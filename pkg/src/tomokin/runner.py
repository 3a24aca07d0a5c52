"""Execute a validated Scenario: evolve, write outputs, run checks, write the report.

Every check returns its measured norms plus a list of conditions; a check
passes when all its conditions hold.  The report is INI-like text::

    [run]
    name = free-1p
    ...
    [check.commuting]
    sup = 3.79e-06
    tolerance = 0.001
    status = pass

Floats are written with ``repr`` so identical runs give identical reports.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bogolyubov import (PARTICLE2_FRAMES, REDUCTION_X2_POINTS, convergence_order,
                         cross_consistency, pair_series, reduction_square)
from .fieldfile import FieldFile, write_atomic
from .liouville import PropagatorConfig, evolve_density
from .numerics import Grid1D
from .phasespace import (Free, GaussianSpec, Harmonic, Pair, PairProfile, make_gaussian,
                         make_product, marginalize_second_particle, stationary_density)
from .radon import (FrameList, LatticeFrames, Tomogram, check_homogeneity, gaussian_tomogram,
                    radon_forward_2p, radon_forward_direct, radon_forward_slice, radon_inverse,
                    reduce_tomogram)
from .scenario import Scenario
from .tomoprop import (TomoPDEConfig, accuracy_mask, commuting_diagram_error, evolve_tomogram,
                       frame_moments, mean_energy_from_tomogram, stationarity_residual,
                       torus_frames)

PHASE_DT_MAX = 1e-2
ROUND_TRIP_X = Grid1D(-math.pi, math.pi, 4)


@dataclass
class CheckResult:
    name: str
    values: dict
    conditions: list = field(default_factory=list)     # (key, op, limit)

    @property
    def failures(self) -> list:
        out = []
        for key, op, limit in self.conditions:
            v = self.values[key]
            ok = (v <= limit) if op == "<=" else (v >= limit)
            if not (ok and math.isfinite(v)):
                out.append(f"{key} = {v!r} (limit {op} {limit!r})")
        return out

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class RunResult:
    scenario: Scenario
    checks: list
    files: list
    report_path: str

    @property
    def failed(self) -> list:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failed


# ---------------------------------------------------------------------------
# Helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _tag(t: float) -> str:
    return f"t{t:.6f}"


def _lattice_half(frames: LatticeFrames) -> float:
    return -frames.nu.lo


def _state_spec(sc: Scenario, rng):
    """GaussianSpec of the initial state (drawn once for random states), or None."""
    st = sc.state
    if st["kind"] == "gaussian":
        return st["spec"]
    if st["kind"] == "random-gaussian":
        return GaussianSpec.random(rng, sc.particles, spread=st["spread"], shift=st["shift"])
    if st["kind"] == "product":
        z = np.zeros((2, 2))
        return GaussianSpec(np.concatenate([st["first"].mean, st["second"].mean]),
                            np.block([[st["first"].covariance, z], [z, st["second"].covariance]]))
    return None


def _density(sc: Scenario, spec, axes):
    st = sc.state
    if st["kind"] == "product":
        return make_product(make_gaussian(st["first"], axes), make_gaussian(st["second"], axes))
    if spec is not None:
        return make_gaussian(spec, tuple(axes) * sc.particles)
    return stationary_density(sc.potential, axes, st["beta"])


def _random_frames(rng, count, r_min, r_max) -> FrameList:
    ang = rng.uniform(0.0, 2 * np.pi, count)
    rad = rng.uniform(r_min, r_max, count)
    return FrameList(np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1))


def _phase_cfg(sc: Scenario) -> PropagatorConfig:
    return PropagatorConfig(dt=min(sc.dt, PHASE_DT_MAX))


def _tomo_cfg(sc: Scenario, t: float, dt=None, U=None) -> TomoPDEConfig:
    qp = (sc.q_axis, sc.p_axis) if sc.route == "transform" else None
    return TomoPDEConfig(dt=dt or sc.dt, t_final=t, potential=U or sc.potential, route=sc.route,
                         qp_axes=qp)


# ---------------------------------------------------------------------------
# Output writers


class _Writer:
    def __init__(self, out_dir: str, name: str):
        self.dir = os.path.join(out_dir, name)
        self.files = []

    def path(self, fname: str) -> str:
        return os.path.join(self.dir, fname)

    def field(self, fname, grids, values):
        axes = [g if isinstance(g, tuple) else (g.lo, g.hi, g.n) for g in grids]
        FieldFile(tuple(axes), values).write(self.path(fname))
        self.files.append(self.path(fname))

    def text(self, fname, text):
        write_atomic(self.path(fname), text)
        self.files.append(self.path(fname))


def _write_tomogram(wr: _Writer, out, w: Tomogram, stem: str):
    fr = w.frames[0]
    if out.format == "field":
        if isinstance(fr, LatticeFrames):
            grids = [w.X_axes[0], fr.mu, fr.nu]
            wr.field(f"{stem}.tomk", grids, w.values)
        else:
            # frame-list tomograms: axis 1 enumerates the frames; the frames
            # themselves go to a companion table
            wr.field(f"{stem}.tomk", [(w.X_axes[0].lo, w.X_axes[0].hi, w.X_axes[0].n),
                                      (0.0, float(len(fr)), len(fr))], w.values)
            rows = "\n".join(f"{i} {m!r} {n!r}" for i, (m, n) in enumerate(fr.frames.tolist()))
            wr.text(f"{stem}.frames", "# index mu nu\n" + rows + "\n")
        return
    sel = out.frames
    if sel is None:
        if isinstance(fr, FrameList):
            sel = [tuple(x) for x in fr.frames.tolist()]
        else:
            sel = [(m, n) for m, n in ((1.0, 0.0), (0.0, 1.0)) if _node(fr, m, n) is not None]
    X = w.X_axes[0].points
    cols = [X] + [_profile(w, m, n) for m, n in sel]
    header = "# X " + " ".join(f"w(mu={m!r},nu={n!r})" for m, n in sel)
    body = "\n".join(" ".join(repr(float(c[i])) for c in cols) for i in range(X.size))
    wr.text(f"{stem}.dat", header + "\n" + body + "\n")


def _node(fr: LatticeFrames, mu, nu, tol=1e-9):
    i = int(np.argmin(np.abs(fr.mu.points - mu)))
    j = int(np.argmin(np.abs(fr.nu.points - nu)))
    if abs(fr.mu.points[i] - mu) > tol or abs(fr.nu.points[j] - nu) > tol:
        return None
    return i, j


def _profile(w: Tomogram, mu, nu) -> np.ndarray:
    fr = w.frames[0]
    if isinstance(fr, FrameList):
        return w.values[:, fr.index(mu, nu, tol=1e-9)]
    i, j = _node(fr, mu, nu)
    return w.values[:, i, j]


def _write_density(wr: _Writer, out, values, axes, stem: str):
    if out.format == "field":
        wr.field(f"{stem}.tomk", axes, values)
        return
    Q, P = np.meshgrid(axes[0].points, axes[1].points, indexing="ij")
    lines = []
    for i in range(axes[0].n):
        for j in range(axes[1].n):
            lines.append(f"{float(Q[i, j])!r} {float(P[i, j])!r} {float(values[i, j])!r}")
        lines.append("")      # blank line between scans (gnuplot pm3d)
    wr.text(f"{stem}.dat", "# q p f\n" + "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# One particle


def _run_1p(sc: Scenario, params: dict, wr: _Writer, workers: int, rng) -> list:
    spec = _state_spec(sc, rng)
    f0 = _density(sc, spec, (sc.q_axis, sc.p_axis))
    U = sc.potential
    times = sorted(set(sc.output_times) | {0.0, sc.t_final})
    phase, tomo = {}, {}
    if sc.propagator in ("phase", "both"):
        for t in times:
            phase[t] = evolve_density(f0, U, t, _phase_cfg(sc))
    w0 = None
    if sc.propagator in ("tomo", "both"):
        w0 = radon_forward_slice(f0, sc.frames, sc.X_axis, workers)
        tomo[0.0] = w0
        prev = 0.0
        for t in times[1:]:
            tomo[t] = evolve_tomogram(tomo[prev], _tomo_cfg(sc, t - prev))
            prev = t
    slices = {}

    def sliced(t):
        if t not in slices:
            slices[t] = radon_forward_slice(phase[t], sc.frames, sc.X_axis, workers)
        return slices[t]

    for out in sc.outputs:
        for t in out.times:
            t = _match(times, t)
            if out.what == "density":
                _write_density(wr, out, phase[t].values, phase[t].axes, f"density_{_tag(t)}")
            elif out.what == "tomogram":
                if t in phase:
                    _write_tomogram(wr, out, sliced(t), f"tomogram_phase_{_tag(t)}")
                if t in tomo:
                    _write_tomogram(wr, out, tomo[t], f"tomogram_tomo_{_tag(t)}")

    tomograms = [sliced(t) for t in phase] + [tomo[t] for t in tomo]
    results = []
    for name, p in params.items():
        fn = _ONE_P[name]
        results.append(fn(sc, p, f0=f0, spec=spec, phase=phase, tomo=tomo, sliced=sliced,
                          tomograms=tomograms, rng=rng, workers=workers))
    return results


def _match(times, t):
    for s in times:
        if abs(s - t) <= 1e-12:
            return s
    return t


def _check_transform(sc, p, spec, rng, workers, f0, **_):
    fr = _random_frames(rng, p["frames"], p["r_min"], p["r_max"])
    X = sc.X_axis
    d = radon_forward_direct(f0, fr, X, order=p["order"], workers=workers)
    s = radon_forward_slice(f0, fr, X, workers)
    ref = gaussian_tomogram(spec, fr, X.points)
    ref_p = gaussian_tomogram(spec, fr, X.points, periodize=X)
    v = {"direct_sup": float(np.abs(d.values - ref).max()),
         "slice_sup": float(np.abs(s.values - ref_p).max()),
         "frames": len(fr), "tolerance_direct": p["tolerance_direct"],
         "tolerance_slice": p["tolerance_slice"]}
    return CheckResult("transform", v, [("direct_sup", "<=", p["tolerance_direct"]),
                                        ("slice_sup", "<=", p["tolerance_slice"])])


def _check_round_trip(sc, p, f0, workers, **_):
    lat = LatticeFrames.centered(p["half_width"], p["n"])
    w = radon_forward_slice(f0, lat, ROUND_TRIP_X, workers)
    rec, rep = radon_inverse(w, f0.axes, strict=False, report=True)
    v = {"sup": float(np.abs(rec.values - f0.values).max()), "imag_residue": rep.imag_residue,
         "min_value": rep.min_value, "total": rep.total, "tolerance": p["tolerance"]}
    return CheckResult("round_trip", v, [("sup", "<=", p["tolerance"])])


def _check_normalization(sc, p, tomograms, **_):
    dev = max(float(np.abs(w.normalization() - 1.0).max()) for w in tomograms)
    v = {"max_deviation": dev, "tomograms": len(tomograms), "tolerance": p["tolerance"]}
    return CheckResult("normalization", v, [("max_deviation", "<=", p["tolerance"])])


def _resolved(w: Tomogram, tol: float) -> np.ndarray:
    """Frames whose X profile is resolved: top two Fourier modes below ``tol`` (value units).

    Profiles narrower than the X spacing ring around zero; their samples are
    not point values of the tomogram, so sign checks skip them.
    """
    nX = w.X_axes[0].n
    c = np.abs(np.fft.rfft(w.values.reshape(nX, -1), axis=0)) / nX
    return (c[-2:].max(axis=0) <= tol).reshape(w.values.shape[1:])


def _check_nonnegativity(sc, p, tomograms, **_):
    mn, used, skipped = math.inf, 0, 0
    for w in tomograms:
        ok = _resolved(w, p["tolerance"])
        used += int(ok.sum())
        skipped += int((~ok).sum())
        if ok.any():
            mn = min(mn, float(w.values[:, ok].min()))
    v = {"min_value": mn, "tomograms": len(tomograms), "frames_checked": used,
         "frames_unresolved": skipped, "tolerance": p["tolerance"], "lower_bound": -p["tolerance"]}
    return CheckResult("nonnegativity", v, [("frames_checked", ">=", 1),
                                            ("min_value", ">=", -p["tolerance"])])


def _check_homogeneity(sc, p, f0, rng, workers, **_):
    base = _random_frames(rng, p["frames"], p["r_min"], p["r_max"]).frames
    lams = [float(x) for x in p["lambdas"]]
    fr = FrameList(np.concatenate([base] + [lam * base for lam in lams]))
    X = Grid1D(p["X"][0], p["X"][1], int(p["X"][2]))
    w = radon_forward_direct(f0, fr, X, order=6, workers=workers)
    region = np.zeros(len(fr), dtype=bool)
    region[:len(base)] = True
    res = check_homogeneity(w, lams, region=region)
    v = {}
    for lam in lams:
        v[f"deviation[{lam!r}]"] = res[lam]["deviation"]
        v[f"checked[{lam!r}]"] = res[lam]["checked"]
    v["max_deviation"] = max(res[lam]["deviation"] for lam in lams)
    v["tolerance"] = p["tolerance"]
    return CheckResult("homogeneity", v, [("max_deviation", "<=", p["tolerance"])])


def _commuting_mask(sc, frames, t, r_min):
    if sc.route == "operator":
        return accuracy_mask(frames, sc.potential, t, r_min=r_min)
    return np.ones(frames.shape, dtype=bool)


def _check_commuting(sc, p, phase, tomo, sliced, f0, **_):
    t = sc.t_final
    mask = _commuting_mask(sc, sc.frames, t, p["r_min"])
    diff = (sliced(t).values - tomo[t].values)[:, mask]
    v = {"sup": float(np.abs(diff).max()), "frames_used": int(mask.sum()),
         "drift": float(tomo[t].meta.get("drift", 0.0)), "t": t, "tolerance": p["tolerance"]}
    cond = [("sup", "<=", p["tolerance"])]
    if p["refine"]:
        fr = sc.frames
        coarse = LatticeFrames(Grid1D(fr.mu.lo, fr.mu.hi, fr.mu.n // 2),
                               Grid1D(fr.nu.lo, fr.nu.hi, fr.nu.n // 2))
        qp = (sc.q_axis, sc.p_axis) if sc.route == "transform" else None
        r = commuting_diagram_error(f0, sc.potential, t, sc.X_axis, coarse, dt=2 * sc.dt,
                                    mask=_commuting_mask(sc, coarse, t, p["r_min"]),
                                    phase_cfg=_phase_cfg(sc), route=sc.route, qp_axes=qp)
        v["coarse_sup"] = r["sup"]
        v["ratio"] = r["sup"] / max(v["sup"], 1e-300)
        v["min_ratio"] = p["min_ratio"]
        cond.append(("ratio", ">=", p["min_ratio"]))
    return CheckResult("commuting", v, cond)


def _check_identity(sc, p, sliced, tomo, **_):
    d = float(np.abs(sliced(0.0).values - tomo[0.0].values).max())
    v = {"sup": d, "tolerance": p["tolerance"]}
    return CheckResult("identity", v, [("sup", "<=", p["tolerance"])])


def _check_stationarity(sc, p, workers, **_):
    U = sc.potential
    axes = (sc.q_axis, sc.p_axis)
    fs = stationary_density(U, axes)
    if isinstance(U, Free):
        fr = torus_frames(sc.q_axis, sc.X_axis, sc.frames.mu.n, _lattice_half(sc.frames))
    else:
        fr = sc.frames
    w = radon_forward_slice(fs, fr, sc.X_axis, workers)
    r = stationarity_residual(w, U, margin=p["margin"], route=sc.route,
                              qp_axes=axes if sc.route == "transform" else None)
    v = {"sup": r, "margin": p["margin"], "tolerance": p["tolerance"]}
    return CheckResult("stationarity", v, [("sup", "<=", p["tolerance"])])


def _check_momentum(sc, p, tomo, **_):
    ts = sorted(tomo)
    ms = [frame_moments(tomo[t], 0.0, 1.0)[0] for t in ts]
    v = {"p_initial": ms[0], "p_final": ms[-1],
         "max_change": max(abs(m - ms[0]) for m in ms), "tolerance": p["tolerance"]}
    return CheckResult("momentum", v, [("max_change", "<=", p["tolerance"])])


def _check_energy(sc, p, tomo, **_):
    U = sc.potential
    period = 2 * math.pi / U.omega
    seg = period / p["segments"]
    cur = tomo[0.0]
    E = [mean_energy_from_tomogram(cur, U.omega)]
    for _k in range(p["segments"]):
        cur = evolve_tomogram(cur, _tomo_cfg(sc, seg))
        E.append(mean_energy_from_tomogram(cur, U.omega))
    v = {"energy_initial": E[0], "energy_final": E[-1],
         "max_drift": max(abs(e - E[0]) for e in E), "period": period,
         "tolerance": p["tolerance"]}
    return CheckResult("energy", v, [("max_drift", "<=", p["tolerance"])])


_ONE_P = {"transform": _check_transform, "round_trip": _check_round_trip,
          "normalization": _check_normalization, "nonnegativity": _check_nonnegativity,
          "homogeneity": _check_homogeneity, "commuting": _check_commuting,
          "identity": _check_identity, "stationarity": _check_stationarity,
          "momentum": _check_momentum, "energy": _check_energy}


# ---------------------------------------------------------------------------
# Two particles


def _run_2p(sc: Scenario, params: dict, wr: _Writer, workers: int, rng) -> list:
    spec = _state_spec(sc, rng)
    U = sc.potential
    axes = (sc.q_axis, sc.p_axis)
    results = []
    red_frames = red_X = None
    red_sup, red_spread = 0.0, 0.0
    if "reduction" in params:
        rp = params["reduction"]
        red_frames = _random_frames(rng, rp["frames"], rp["r_min"], rp["r_max"])
        red_X = Grid1D(rp["X"][0], rp["X"][1], int(rp["X"][2]))

    # reduced-equation residuals: the coarse level (and the negative control on
    # it) runs first so that only one level of snapshots is held at a time
    bp = params.get("bogolyubov")
    npar = params.get("negative_control")
    coarse = None
    if bp is not None and bp["coarse_n"] != sc.q_axis.n:
        n = bp["coarse_n"]
        ratio = sc.q_axis.n / n
        caxes = (Grid1D(sc.q_axis.lo, sc.q_axis.hi, n), Grid1D(sc.p_axis.lo, sc.p_axis.hi, n))
        cdt = sc.dt * ratio
        cseries = pair_series(_density(sc, spec, caxes), U, sc.t_final, cdt, cfg=_phase_cfg(sc))
        coarse = (n, ratio, cross_consistency(cseries, U, cdt))
        if npar is not None:
            results.append(_negative_control(U, npar, cseries, cdt))
            npar = None
        del cseries

    f0 = _density(sc, spec, axes)
    snap = {}
    if bp is not None or npar is not None:
        series = pair_series(f0, U, sc.t_final, sc.dt, cfg=_phase_cfg(sc))
        snap[sc.t_final] = series[1]
        if npar is not None:
            results.append(_negative_control(U, npar, series, sc.dt))
        if bp is not None:
            results.append(_bogolyubov_result(bp, cross_consistency(series, U, sc.dt,
                                                                   tolerance=bp["cross"]), coarse))
        del series

    tomograms = []
    X2 = Grid1D(sc.X_axis.lo, sc.X_axis.hi, REDUCTION_X2_POINTS)
    for t in sorted(set(sc.output_times) | {0.0}):
        if t in snap:
            f = snap.pop(t)
        elif t == 0:
            f = f0
        else:
            f = evolve_density(f0, U, t, _phase_cfg(sc))
        if red_frames is not None:
            r = reduction_square(f, red_frames, red_X)
            red_sup, red_spread = max(red_sup, r["sup"]), max(red_spread, r["spread"])
        w2 = radon_forward_2p(f, (sc.frames, FrameList(PARTICLE2_FRAMES)), (sc.X_axis, X2),
                              workers)
        wred = reduce_tomogram(w2)
        tomograms.append(wred)
        marg = marginalize_second_particle(f)
        for out in sc.outputs:
            if not any(abs(t - s) <= 1e-12 for s in out.times):
                continue
            if out.what == "density":
                _write_density(wr, out, marg.values, axes, f"marginal_{_tag(t)}")
            elif out.what == "tomogram":
                _write_tomogram(wr, out, wred, f"tomogram_reduced_{_tag(t)}")
        del f
    if red_frames is not None:
        rp = params["reduction"]
        results.insert(0, CheckResult("reduction", {"sup": red_sup, "spread": red_spread,
                                                    "tolerance": rp["tolerance"]},
                                      [("sup", "<=", rp["tolerance"])]))
    for name in ("normalization", "nonnegativity"):
        if name in params:
            results.append(_ONE_P[name](sc, params[name], tomograms=tomograms))
    return results


def _bogolyubov_result(bp, fine, coarse) -> CheckResult:
    v = dict(fine.as_dict())
    cond = [("residual_phase_sup", "<=", bp["residual_phase"]),
            ("residual_tomo_sup", "<=", bp["residual_tomo"]),
            ("cross_consistency_sup", "<=", bp["cross"]),
            ("boundary_terms", "<=", bp["boundary"])]
    if coarse is not None:
        n, ratio, rep = coarse
        v["coarse_n"] = n
        v["coarse_cross_consistency_sup"] = rep.cross_consistency["sup"]
        v["order"] = convergence_order(rep.cross_consistency["sup"],
                                       fine.cross_consistency["sup"], ratio)
        v["min_order"] = bp["min_order"]
        cond.append(("order", ">=", bp["min_order"]))
    for k in ("residual_phase", "residual_tomo", "cross", "boundary"):
        v[f"tolerance_{k}"] = bp[k]
    return CheckResult("bogolyubov", v, cond)


def _negative_control(U, npar, series, dt) -> CheckResult:
    wrong = Pair(PairProfile.polynomial(npar["profile"]), U.external)
    rep = cross_consistency(series, U, dt, U_tomo=wrong)
    v = {"cross_consistency_sup": rep.cross_consistency["sup"], "min_value": npar["min_value"]}
    return CheckResult("negative_control", v, [("cross_consistency_sup", ">=", npar["min_value"])])


# ---------------------------------------------------------------------------
# Entry point


def report_text(sc: Scenario, checks: list, files: list, scale: float, out_dir: str) -> str:
    lines = ["[run]", f"name = {sc.name}", f"particles = {sc.particles}", f"seed = {sc.seed}",
             f"propagator = {sc.propagator}", f"route = {sc.route}",
             f"t_final = {_fmt(sc.t_final)}", f"dt = {_fmt(sc.dt)}",
             f"tolerance_scale = {_fmt(scale)}", f"backend = {kernels.BACKEND}",
             f"files = {len(files)}"]
    failed = [c.name for c in checks if not c.passed]
    lines.append(f"status = {'fail' if failed else 'pass'}")
    if failed:
        lines.append(f"failed = {', '.join(failed)}")
    for c in checks:
        lines.append("")
        lines.append(f"[check.{c.name}]")
        for k, val in c.values.items():
            lines.append(f"{k} = {_fmt(val)}")
        lines.append(f"status = {'pass' if c.passed else 'fail'}")
    lines.append("")
    lines.append("[files]")
    for i, f in enumerate(files):
        lines.append(f"file[{i}] = {os.path.relpath(f, out_dir)}")
    return "\n".join(lines) + "\n"


def run_scenario(sc: Scenario, out_dir: str, workers: int = 1, tolerance_scale: float = 1.0
                 ) -> RunResult:
    """Run ``sc``; outputs go to ``out_dir/<name>/``."""
    params = sc.tolerances(tolerance_scale)
    rng = np.random.default_rng(sc.seed)
    wr = _Writer(out_dir, sc.name)
    if sc.particles == 1:
        checks = _run_1p(sc, params, wr, workers, rng)
    else:
        checks = _run_2p(sc, params, wr, workers, rng)
    report_path = wr.path("report.txt")
    text = report_text(sc, checks, list(wr.files), tolerance_scale, out_dir)
    write_atomic(report_path, text)
    for out in sc.outputs:
        if out.what == "report" and out.format == "columns":
            rows = [f"{c.name} {k} {_fmt(v)}" for c in checks for k, v in c.values.items()
                    if isinstance(v, (float, int)) and not isinstance(v, bool)]
            write_atomic(wr.path("report.dat"), "# check key value\n" + "\n".join(rows) + "\n")
            wr.files.append(wr.path("report.dat"))
            break
    return RunResult(sc, checks, wr.files + [report_path], report_path)


def parse_report(text: str) -> dict:
    """Report text back to ``{section: {key: str}}``."""
    out, cur = {}, None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            cur = out.setdefault(line[1:-1], {})
            continue
        k, _, v = line.partition(" = ")
        if cur is not None:
            cur[k] = v
    return out
