"""Scenario files: a TOML description of one run.

Top-level keys: ``name`` (required), ``description``, ``seed`` (default 0),
``particles`` (1 or 2, default 1).  Tables:

``[state]``
    ``kind = "gaussian"`` with ``mean`` and ``covariance``;
    ``"random-gaussian"`` with ``spread = [lo, hi]`` (principal standard
    deviations) and ``shift``, drawn from ``seed``;
    ``"product"`` (two particles) with ``first`` and ``second`` Gaussian
    tables; ``"stationary"`` (exp(-H) for the potential, ``beta`` optional).
``[potential]``
    ``kind = "free" | "harmonic" (omega) | "polynomial" (coefficients, low
    order first) | "pair"``.  A pair takes ``profile`` (polynomial in r) or
    ``r``/``u`` samples, and an optional one-body ``external`` table.
``[grids]``
    ``q``, ``p``, ``X`` as ``[lo, hi, n]``; ``frames`` is either
    ``{kind = "lattice", half_width, n}`` or ``{kind = "list", values}``.
``[propagator]``
    ``kind = "phase" | "tomo" | "both"``, ``route = "operator" |
    "transform"``, ``t_final``, ``dt``.
``[checks.<name>]``
    Enables a check; keys override the defaults in ``CHECK_DEFAULTS``.
``[[outputs]]``
    ``what = "tomogram" | "density" | "report"``, ``times`` (default
    ``[t_final]``), ``format = "field" | "columns"``, ``frames`` (columns
    only: the (mu, nu) profiles to write).

Unknown keys are rejected.  Parse problems raise ScenarioParseError,
inconsistent content ScenarioValidationError.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:       # Python < 3.11
    import tomli as tomllib

from .errors import CapabilityError, TomokinError
from .numerics import Grid1D
from .phasespace import Free, GaussianSpec, Harmonic, Pair, PairProfile, Polynomial
from .radon import FrameList, LatticeFrames

CHECK_DEFAULTS = {
    "transform": {"frames": 20, "r_min": 0.3, "r_max": 1.5, "order": 6,
                  "tolerance_direct": 1e-6, "tolerance_slice": 1e-4},
    "round_trip": {"half_width": 8.0, "n": 64, "tolerance": 2e-4},
    "normalization": {"tolerance": 1e-6},
    "nonnegativity": {"tolerance": 1e-6},
    "homogeneity": {"frames": 10, "r_min": 0.5, "r_max": 1.0,
                    "lambdas": [-2.0, -0.5, 0.5, 2.0], "X": [-6.0, 6.0, 512], "tolerance": 1e-4},
    "commuting": {"tolerance": 1e-3, "min_ratio": 3.0, "refine": True, "r_min": 0.3},
    "stationarity": {"tolerance": 1e-6, "margin": 4},
    "momentum": {"tolerance": 1e-6},
    "energy": {"tolerance": 1e-5, "segments": 4},
    "identity": {"tolerance": 1e-10},
    "reduction": {"frames": 10, "r_min": 0.5, "r_max": 1.5, "X": [-12.0, 12.0, 256],
                  "tolerance": 1e-6},
    "bogolyubov": {"coarse_n": 64, "residual_phase": 5e-4, "residual_tomo": 2e-3,
                   "cross": 2e-3, "boundary": 1e-6, "min_order": 1.5},
    "negative_control": {"profile": [0.0, 0.0, 1.5], "min_value": 2e-3},
}
# Keys scaled by --tolerance-scale: upper bounds are multiplied, lower bounds divided.
UPPER_BOUNDS = {"tolerance", "tolerance_direct", "tolerance_slice", "residual_phase",
                "residual_tomo", "cross", "boundary"}
LOWER_BOUNDS = {"min_ratio", "min_order", "min_value"}

ONE_PARTICLE_CHECKS = {"transform", "round_trip", "normalization", "nonnegativity", "homogeneity",
                       "commuting", "stationarity", "momentum", "energy", "identity"}
TWO_PARTICLE_CHECKS = {"normalization", "nonnegativity", "reduction", "bogolyubov",
                       "negative_control"}

_TOP_KEYS = {"name", "description", "seed", "particles", "state", "potential", "grids",
             "propagator", "checks", "outputs"}


class ScenarioParseError(TomokinError):
    """The file is not valid TOML or cannot be read."""


class ScenarioValidationError(TomokinError):
    """The scenario parses but is inconsistent or incomplete."""


@dataclass(frozen=True)
class Output:
    what: str
    times: tuple
    format: str = "field"
    frames: Optional[tuple] = None


@dataclass
class Scenario:
    name: str
    description: str
    seed: int
    particles: int
    state: dict
    potential: object
    q_axis: Grid1D
    p_axis: Grid1D
    X_axis: Grid1D
    frames: object
    propagator: str
    route: str
    t_final: float
    dt: float
    outputs: list
    checks: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict, repr=False)

    def tolerances(self, scale: float = 1.0) -> dict:
        """Check parameters with bounds scaled for smoke runs."""
        out = copy.deepcopy(self.checks)
        for params in out.values():
            for k in params:
                if k in UPPER_BOUNDS:
                    params[k] = params[k] * scale
                elif k in LOWER_BOUNDS:
                    params[k] = params[k] / scale
        return out

    @property
    def output_times(self) -> list:
        ts = {t for o in self.outputs if o.what != "report" for t in o.times}
        return sorted(ts)


# ---------------------------------------------------------------------------
# Parsing


def parse_text(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioParseError(f"invalid scenario syntax: {e}") from None


def load(path) -> Scenario:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ScenarioParseError(f"cannot read scenario {path}: {e.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ScenarioParseError(f"scenario {path} is not UTF-8 text") from None
    return validate(parse_text(text))


def loads(text: str) -> Scenario:
    return validate(parse_text(text))


# ---------------------------------------------------------------------------
# Validation helpers


def _fail(msg):
    raise ScenarioValidationError(msg)


def _table(d, key, required=True) -> dict:
    v = d.get(key)
    if v is None:
        if required:
            _fail(f"missing [{key}] table")
        return {}
    if not isinstance(v, dict):
        _fail(f"{key} must be a table")
    return v


def _known(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        _fail(f"unknown key(s) in {where}: {', '.join(extra)}")


def _num(d, key, where, default=None, positive=False, nonneg=False) -> float:
    v = d.get(key, default)
    if v is None:
        _fail(f"{where}.{key} is required")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{where}.{key} must be a finite number, got {v!r}")
    if positive and not v > 0:
        _fail(f"{where}.{key} must be positive, got {v}")
    if nonneg and v < 0:
        _fail(f"{where}.{key} must be >= 0, got {v}")
    return float(v)


def _int(d, key, where, default=None, minimum=None) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{where}.{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(f"{where}.{key} must be >= {minimum}, got {v}")
    return v


def _numbers(v, where) -> list:
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                          for x in v):
        _fail(f"{where} must be a list of numbers")
    return [float(x) for x in v]


def _axis(v, where) -> Grid1D:
    if not isinstance(v, list) or len(v) != 3:
        _fail(f"{where} must be [lo, hi, n]")
    lo, hi, n = v
    if isinstance(n, bool) or not isinstance(n, int):
        _fail(f"{where}: n must be an integer")
    try:
        return Grid1D(float(lo), float(hi), n)
    except (TypeError, ValueError) as e:
        _fail(f"{where}: {e}")


def _gaussian(d, where, dim) -> GaussianSpec:
    _known(d, {"kind", "mean", "covariance"}, where)
    mean = _numbers(d.get("mean"), f"{where}.mean")
    cov = d.get("covariance")
    if not isinstance(cov, list) or not all(isinstance(r, list) for r in cov):
        _fail(f"{where}.covariance must be a list of rows")
    cov = [_numbers(r, f"{where}.covariance") for r in cov]
    if len(mean) != dim:
        _fail(f"{where}.mean must have {dim} entries, got {len(mean)}")
    try:
        return GaussianSpec(mean, cov)
    except ValueError as e:
        _fail(f"{where}: {e}")


def _one_body(d, where):
    kind = d.get("kind")
    if kind == "free":
        _known(d, {"kind"}, where)
        return Free()
    if kind == "harmonic":
        _known(d, {"kind", "omega"}, where)
        return Harmonic(_num(d, "omega", where, default=1.0, positive=True))
    if kind == "polynomial":
        _known(d, {"kind", "coefficients"}, where)
        try:
            return Polynomial(tuple(_numbers(d.get("coefficients"), f"{where}.coefficients")))
        except ValueError as e:
            _fail(f"{where}: {e}")
    _fail(f"{where}.kind must be free, harmonic or polynomial, got {kind!r}")


def _potential(d, particles):
    where = "potential"
    if d.get("kind") == "pair":
        _known(d, {"kind", "profile", "r", "u", "external"}, where)
        if particles != 2:
            _fail("a pair potential needs particles = 2")
        try:
            if "profile" in d:
                prof = PairProfile.polynomial(_numbers(d["profile"], "potential.profile"))
            else:
                prof = PairProfile.tabulated(_numbers(d.get("r"), "potential.r"),
                                             _numbers(d.get("u"), "potential.u"))
        except ValueError as e:
            _fail(f"potential: {e}")
        ext = d.get("external")
        ext = _one_body(ext, "potential.external") if ext is not None else None
        return Pair(prof, None if isinstance(ext, Free) else ext)
    U = _one_body(d, where)
    if particles == 2:
        _fail("two-particle scenarios need kind = \"pair\"")
    return U


def _frames(v):
    if not isinstance(v, dict):
        _fail("grids.frames must be a table")
    kind = v.get("kind")
    if kind == "lattice":
        _known(v, {"kind", "half_width", "n"}, "grids.frames")
        hw = _num(v, "half_width", "grids.frames", positive=True)
        n = _int(v, "n", "grids.frames", minimum=4)
        try:
            return LatticeFrames.centered(hw, n)
        except ValueError as e:
            _fail(f"grids.frames: {e}")
    if kind == "list":
        _known(v, {"kind", "values"}, "grids.frames")
        vals = v.get("values")
        if not isinstance(vals, list) or not vals:
            _fail("grids.frames.values must be a non-empty list of [mu, nu]")
        rows = []
        for i, r in enumerate(vals):
            r = _numbers(r, f"grids.frames.values[{i}]")
            if len(r) != 2:
                _fail(f"grids.frames.values[{i}] must be [mu, nu]")
            rows.append(r)
        try:
            return FrameList(rows)
        except ValueError as e:
            _fail(f"grids.frames: {e}")
    _fail(f"grids.frames.kind must be lattice or list, got {kind!r}")


def _state(d, particles):
    kind = d.get("kind")
    where = "state"
    if kind == "gaussian":
        return {"kind": kind, "spec": _gaussian(d, where, 2 * particles)}
    if kind == "random-gaussian":
        _known(d, {"kind", "spread", "shift"}, where)
        spread = _numbers(d.get("spread", [0.5, 1.2]), "state.spread")
        if len(spread) != 2 or not 0 < spread[0] <= spread[1]:
            _fail("state.spread must be [lo, hi] with 0 < lo <= hi")
        return {"kind": kind, "spread": tuple(spread),
                "shift": _num(d, "shift", where, default=0.8, nonneg=True)}
    if kind == "product":
        _known(d, {"kind", "first", "second"}, where)
        if particles != 2:
            _fail("state kind product needs particles = 2")
        return {"kind": kind, "first": _gaussian(_table(d, "first"), "state.first", 2),
                "second": _gaussian(_table(d, "second"), "state.second", 2)}
    if kind == "stationary":
        _known(d, {"kind", "beta"}, where)
        return {"kind": kind, "beta": _num(d, "beta", where, default=1.0, positive=True)}
    _fail(f"state.kind must be gaussian, random-gaussian, product or stationary, got {kind!r}")


def _checks(d, particles):
    allowed = ONE_PARTICLE_CHECKS if particles == 1 else TWO_PARTICLE_CHECKS
    out = {}
    for name, params in d.items():
        if name not in CHECK_DEFAULTS:
            _fail(f"unknown check {name!r}")
        if name not in allowed:
            _fail(f"check {name!r} is not available for {particles}-particle scenarios")
        if not isinstance(params, dict):
            _fail(f"checks.{name} must be a table")
        merged = copy.deepcopy(CHECK_DEFAULTS[name])
        _known(params, set(merged), f"checks.{name}")
        for k, v in params.items():
            ref = merged[k]
            if isinstance(ref, bool):
                if not isinstance(v, bool):
                    _fail(f"checks.{name}.{k} must be true or false")
            elif isinstance(ref, int):
                v = _int(params, k, f"checks.{name}", minimum=1)
            elif isinstance(ref, float):
                v = _num(params, k, f"checks.{name}", positive=True)
            else:
                v = _numbers(v, f"checks.{name}.{k}")
            merged[k] = v
        out[name] = merged
    return out


def _outputs(v, t_final, frames, particles, propagator):
    if not isinstance(v, list) or not v:
        _fail("at least one [[outputs]] entry is required")
    out = []
    for i, o in enumerate(v):
        where = f"outputs[{i}]"
        if not isinstance(o, dict):
            _fail(f"{where} must be a table")
        _known(o, {"what", "times", "format", "frames"}, where)
        what = o.get("what")
        if what not in ("tomogram", "density", "report"):
            _fail(f"{where}.what must be tomogram, density or report, got {what!r}")
        times = tuple(_numbers(o.get("times", [t_final]), f"{where}.times"))
        if not times:
            _fail(f"{where}.times must not be empty")
        for t in times:
            if t < 0 or t > t_final + 1e-12:
                _fail(f"{where}: time {t} outside [0, t_final = {t_final}]")
        fmt = o.get("format", "field")
        if fmt not in ("field", "columns"):
            _fail(f"{where}.format must be field or columns, got {fmt!r}")
        if what == "density" and particles == 1 and propagator == "tomo":
            _fail(f"{where}: density output needs the phase propagator")
        sel = None
        if "frames" in o:
            if what != "tomogram" or fmt != "columns":
                _fail(f"{where}.frames only applies to tomogram columns")
            sel = []
            for j, r in enumerate(o["frames"]):
                r = _numbers(r, f"{where}.frames[{j}]")
                if len(r) != 2:
                    _fail(f"{where}.frames[{j}] must be [mu, nu]")
                if max(abs(r[0]), abs(r[1])) < 1e-6:
                    _fail(f"{where}.frames[{j}] (mu, nu) = ({r[0]}, {r[1]}) is degenerate")
                if not _has_frame(frames, r[0], r[1]):
                    _fail(f"{where}.frames[{j}] ({r[0]}, {r[1]}) is not one of the scenario frames")
                sel.append(tuple(r))
            sel = tuple(sel)
        out.append(Output(what, times, fmt, sel))
    return out


def _has_frame(frames, mu, nu) -> bool:
    if isinstance(frames, FrameList):
        return frames.index(mu, nu, tol=1e-9) is not None
    return (np.min(np.abs(frames.mu.points - mu)) < 1e-9 and
            np.min(np.abs(frames.nu.points - nu)) < 1e-9)


# ---------------------------------------------------------------------------
# Entry point


def validate(d: dict) -> Scenario:
    """Build a Scenario from parsed TOML, raising ScenarioValidationError."""
    _known(d, _TOP_KEYS, "scenario")
    name = d.get("name")
    if not isinstance(name, str) or not name.strip():
        _fail("name must be a non-empty string")
    if any(c in name for c in "/\\") or name in (".", ".."):
        _fail("name must not contain path separators")
    desc = d.get("description", "")
    if not isinstance(desc, str):
        _fail("description must be a string")
    seed = _int(d, "seed", "scenario", default=0, minimum=0)
    particles = _int(d, "particles", "scenario", default=1)
    if particles not in (1, 2):
        _fail(f"particles must be 1 or 2, got {particles}")

    state = _state(_table(d, "state"), particles)
    U = _potential(_table(d, "potential"), particles)

    g = _table(d, "grids")
    _known(g, {"q", "p", "X", "frames"}, "grids")
    q_axis = _axis(g.get("q"), "grids.q")
    p_axis = _axis(g.get("p"), "grids.p")
    X_axis = _axis(g.get("X"), "grids.X")
    frames = _frames(g.get("frames"))

    pr = _table(d, "propagator")
    _known(pr, {"kind", "route", "t_final", "dt"}, "propagator")
    kind = pr.get("kind", "phase")
    if kind not in ("phase", "tomo", "both"):
        _fail(f"propagator.kind must be phase, tomo or both, got {kind!r}")
    route = pr.get("route", "operator")
    if route not in ("operator", "transform"):
        _fail(f"propagator.route must be operator or transform, got {route!r}")
    t_final = _num(pr, "t_final", "propagator", nonneg=True)
    dt = _num(pr, "dt", "propagator", default=1e-2, positive=True)
    if particles == 2 and kind != "phase":
        _fail("two-particle scenarios use the phase propagator (tomograms are transforms of it)")
    if kind in ("tomo", "both"):
        if not isinstance(frames, LatticeFrames):
            _fail("tomographic propagation needs lattice frames")
        if route == "operator":
            try:
                from .tomoprop import _operator_coefficients
                _operator_coefficients(U)
            except CapabilityError as e:
                _fail(f"propagator: {e}")
    if state["kind"] == "stationary" and particles == 2:
        _fail("state kind stationary is available for one particle only")

    checks = _checks(_table(d, "checks", required=False), particles)
    _check_requirements(checks, kind, U, state, frames, t_final, dt, particles)
    outputs = _outputs(d.get("outputs"), t_final, frames, particles, kind)

    return Scenario(name=name, description=desc, seed=seed, particles=particles, state=state,
                    potential=U, q_axis=q_axis, p_axis=p_axis, X_axis=X_axis, frames=frames,
                    propagator=kind, route=route, t_final=t_final, dt=dt, outputs=outputs,
                    checks=checks, source=d)


def _check_requirements(checks, kind, U, state, frames, t_final, dt, particles):
    gaussian = state["kind"] in ("gaussian", "random-gaussian", "product")
    if "transform" in checks and not gaussian:
        _fail("check transform needs a Gaussian state (closed form)")
    if "commuting" in checks and kind != "both":
        _fail("check commuting needs propagator kind = \"both\"")
    if "identity" in checks and kind != "both":
        _fail("check identity needs propagator kind = \"both\"")
    if "momentum" in checks:
        if kind == "phase" or not isinstance(U, Free):
            _fail("check momentum needs a free tomographic propagation")
        if not _has_frame(frames, 0.0, 1.0):
            _fail("check momentum needs frame (0, 1) on the lattice")
    if "energy" in checks:
        if kind == "phase" or not isinstance(U, Harmonic):
            _fail("check energy needs a harmonic tomographic propagation")
        if not (_has_frame(frames, 0.0, 1.0) and _has_frame(frames, 1.0, 0.0)):
            _fail("check energy needs frames (1, 0) and (0, 1) on the lattice")
    if "stationarity" in checks and not isinstance(frames, LatticeFrames):
        _fail("check stationarity needs lattice frames")
    if "bogolyubov" in checks or "negative_control" in checks:
        coarse_n = checks.get("bogolyubov", CHECK_DEFAULTS["bogolyubov"])["coarse_n"]
        if coarse_n < 4 or coarse_n % 2:
            _fail("checks.bogolyubov.coarse_n must be an even integer >= 4")
        if t_final < 2 * dt:
            _fail("reduction residuals need t_final >= 2 dt (centred time differences)")
