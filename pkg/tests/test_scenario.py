import pytest

from tomokin.cli import preset_names, preset_text
from tomokin.phasespace import Free, Harmonic, Pair
from tomokin.radon import FrameList, LatticeFrames
from tomokin.scenario import (CHECK_DEFAULTS, ScenarioParseError, ScenarioValidationError, load,
                              loads)

from scenarios import TINY, TINY_2P, edit


def test_presets_parse():
    names = preset_names()
    assert len(names) >= 5
    for n in names:
        sc = loads(preset_text(n))
        assert sc.name == n and sc.description


def test_tiny_fields():
    sc = loads(TINY)
    assert sc.particles == 1 and sc.seed == 1 and isinstance(sc.potential, Free)
    assert isinstance(sc.frames, LatticeFrames) and sc.frames.mu.n == 32
    assert sc.q_axis.n == 64 and sc.X_axis.lo == -8.0
    assert sc.propagator == "both" and sc.route == "operator"
    assert sc.output_times == [0.0, 0.2]
    assert sc.checks["normalization"] == CHECK_DEFAULTS["normalization"]
    assert sc.outputs[1].frames == ((1.0, 0.0), (0.0, 1.0))


def test_pair_scenario():
    sc = loads(TINY_2P)
    assert isinstance(sc.potential, Pair) and sc.potential.external is None
    assert isinstance(sc.frames, FrameList)
    sc = loads(edit(TINY_2P, 'profile = [0.0, 0.0, 0.5]',
                    'profile = [0.0]\nexternal = { kind = "harmonic", omega = 2.0 }'))
    assert sc.potential.external == Harmonic(2.0)


def test_tolerance_scaling():
    sc = loads(edit(TINY, "[checks.normalization]", "[checks.normalization]\n[checks.commuting]"))
    t = sc.tolerances(10.0)
    assert t["normalization"]["tolerance"] == pytest.approx(1e-5)
    assert t["commuting"]["min_ratio"] == pytest.approx(0.3)
    assert t["commuting"]["refine"] is True
    assert sc.checks["normalization"]["tolerance"] == 1e-6


def test_check_overrides():
    sc = loads(edit(TINY, "[checks.normalization]", "[checks.normalization]\ntolerance = 1e-9"))
    assert sc.checks["normalization"]["tolerance"] == 1e-9


def test_load_from_file(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text(TINY)
    assert load(p).name == "tiny"
    with pytest.raises(ScenarioParseError):
        load(tmp_path / "missing.toml")
    p.write_bytes(b"name = \"\xff\"")
    with pytest.raises(ScenarioParseError):
        load(p)


@pytest.mark.parametrize("text", ["name = ", "[state\nkind='x'", "a = 1\na = 2", 'x = "unterminated'])
def test_syntax_errors(text):
    with pytest.raises(ScenarioParseError):
        loads(text)


REJECT = [
    ('name = "tiny"', 'name = ""', "name"),
    ('name = "tiny"', 'name = "a/b"', "path separators"),
    ('seed = 1', 'seed = -1', "seed"),
    ('seed = 1', 'seed = 1\ncolour = "red"', "unknown key"),
    ('seed = 1', 'seed = 1\nparticles = 3', "particles"),
    ('kind = "random-gaussian"', 'kind = "lorentzian"', "state.kind"),
    ('spread = [0.7, 1.0]', 'spread = [1.0, 0.7]', "spread"),
    ('kind = "free"', 'kind = "anharmonic"', "potential"),
    ('kind = "free"', 'kind = "polynomial"\ncoefficients = [0, 0, 1, 0, 0, 0, 0, 1]', "degree"),
    ('kind = "free"', 'kind = "harmonic"\nomega = -1.0', "omega"),
    ('kind = "free"', 'kind = "pair"\nprofile = [0.0]', "particles = 2"),
    ('q = [-9.0, 9.0, 64]', 'q = [-9.0, 9.0, 63]', "grids.q"),
    ('q = [-9.0, 9.0, 64]', 'q = [9.0, -9.0, 64]', "grids.q"),
    ('q = [-9.0, 9.0, 64]', 'q = [-9.0, 9.0]', "grids.q"),
    ('frames = { kind = "lattice", half_width = 2.0, n = 32 }',
     'frames = { kind = "lattice", half_width = 0.0, n = 32 }', "half_width"),
    ('frames = { kind = "lattice", half_width = 2.0, n = 32 }',
     'frames = { kind = "list", values = [[1.0, 0.0]] }', "lattice frames"),
    ('kind = "both"', 'kind = "sideways"', "propagator.kind"),
    ('t_final = 0.2', 't_final = -0.2', "t_final"),
    ('dt = 0.01', 'dt = 0', "dt"),
    ('dt = 0.01', 'dt = 0.01\nroute = "magic"', "route"),
    ('times = [0.0, 0.2]', 'times = [0.0, 0.3]', "outside"),
    ('times = [0.0, 0.2]', 'times = []', "empty"),
    ('format = "columns"\nframes', 'format = "csv"\nframes', "format"),
    ('frames = [[1.0, 0.0], [0.0, 1.0]]', 'frames = [[1.0, 0.0], [0.3, 0.3]]', "not one of"),
    ('frames = [[1.0, 0.0], [0.0, 1.0]]', 'frames = [[0.0, 0.0]]', "degenerate"),
    ('what = "density"', 'what = "movie"', "what"),
    ('[checks.identity]', '[checks.bogolyubov]', "not available"),
    ('[checks.identity]', '[checks.sparkle]', "unknown check"),
    ('[checks.identity]', '[checks.identity]\ntolerance = "tight"', "number"),
    ('[checks.identity]', '[checks.identity]\ntolerance = 0.0', "positive"),
    ('[checks.identity]', '[checks.identity]\nslack = 1.0', "unknown key"),
    ('[checks.identity]', '[checks.energy]', "harmonic"),
    ('[checks.identity]', '[checks.transform]\n[checks.stationarity]', None),
    ('kind = "both"', 'kind = "phase"', "commuting|identity"),
]


@pytest.mark.parametrize("old,new,msg", REJECT)
def test_validation_rejections(old, new, msg):
    text = edit(TINY, old, new)
    if msg is None:
        loads(text)          # control row: must stay valid
        return
    with pytest.raises(ScenarioValidationError, match=msg):
        loads(text)


def test_degenerate_frame_is_named():
    text = edit(TINY_2P, "values = [[1.0, 0.0], [0.7, 0.7]]", "values = [[1.0, 0.0], [0.0, 0.0]]")
    with pytest.raises(ScenarioValidationError, match=r"frame 1 \(mu, nu\) = \(0.0, 0.0\)"):
        loads(text)


REJECT_2P = [
    ('kind = "phase"', 'kind = "both"', "phase propagator"),
    ('kind = "pair"\nprofile = [0.0, 0.0, 0.5]', 'kind = "harmonic"', 'kind = "pair"'),
    ('kind = "product"\nfirst = { mean = [0.5, 0.3], covariance = [[1.0, 0.2], [0.2, 0.8]] }\n'
     'second = { mean = [-0.6, -0.2], covariance = [[0.7, -0.1], [-0.1, 1.1]] }',
     'kind = "stationary"', "one particle only"),
    ('profile = [0.0, 0.0, 0.5]', 'r = [0.0, 1.0]\nu = [0.0, 1.0]', "tabulated"),
    ('[checks.normalization]', '[checks.commuting]', "not available"),
    ('[checks.normalization]', '[checks.bogolyubov]\ncoarse_n = 7', "coarse_n"),
    ('t_final = 0.1\n\n[checks.normalization]', 't_final = 0.1\ndt = 0.08\n\n[checks.bogolyubov]',
     "t_final >= 2 dt"),
    ('second = { mean = [-0.6, -0.2]', 'second = { mean = [-0.6]', "mean"),
]


@pytest.mark.parametrize("old,new,msg", REJECT_2P)
def test_pair_rejections(old, new, msg):
    with pytest.raises(ScenarioValidationError, match=msg):
        loads(edit(TINY_2P, old, new))


def test_quartic_operator_route_rejected():
    text = edit(TINY, 'kind = "free"', 'kind = "polynomial"\ncoefficients = [0, 0, 0.5, 0, 0.1]')
    with pytest.raises(ScenarioValidationError, match="transform route"):
        loads(text)
    loads(edit(text, 'kind = "both"', 'kind = "both"\nroute = "transform"'))
