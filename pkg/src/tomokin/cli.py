"""Command-line front end.

    tomokin run <scenario.toml | preset> [--out-dir D] [--threads N] [--tolerance-scale X]
    tomokin list-presets
    tomokin verify <preset> [...same flags]

Exit codes: 0 success, 2 parse error, 3 validation error, 4 numeric or
tolerance failure (the failing check is named on stderr).  ``TOMOKIN_OUT_DIR``
sets the default output directory.
"""
from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

from .errors import ArgumentError, TomokinError
from .scenario import ScenarioParseError, ScenarioValidationError, load, loads

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3, 4
PRESET_ORDER = ("free-1p", "harmonic-1p", "quartic-1p", "pair-harmonic-2p",
                "reduction-consistency-2p", "verify-gaussian")


def _preset_dir():
    return resources.files("tomokin") / "presets"


def preset_names() -> list:
    found = sorted(p.name[:-5] for p in _preset_dir().iterdir() if p.name.endswith(".toml"))
    return [n for n in PRESET_ORDER if n in found] + [n for n in found if n not in PRESET_ORDER]


def preset_text(name: str) -> str:
    path = _preset_dir() / f"{name}.toml"
    if not path.is_file():
        raise ScenarioParseError(f"unknown preset {name!r}; see `tomokin list-presets`")
    return path.read_text(encoding="utf-8")


def list_presets() -> list:
    """(name, description) for every built-in scenario."""
    out = []
    for name in preset_names():
        sc = loads(preset_text(name))
        out.append((name, sc.description))
    return out


def _load(target: str):
    if os.path.exists(target) or target.endswith(".toml"):
        return load(target)
    return loads(preset_text(target))


def _positive(kind):
    def conv(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {s!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_PARSE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tomokin", description="Tomographic kinetics scenarios.")
    sub = ap.add_subparsers(dest="verb", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--out-dir", default=None,
                        help="output directory (default: $TOMOKIN_OUT_DIR or ./tomokin-out)")
    common.add_argument("--threads", type=_positive(int), default=1,
                        help="worker threads for the transforms")
    common.add_argument("--tolerance-scale", type=_positive(float), default=1.0,
                        help="multiply every tolerance (lower bounds are divided)")
    r = sub.add_parser("run", parents=[common], help="run a scenario file or preset")
    r.add_argument("scenario")
    v = sub.add_parser("verify", parents=[common], help="run a preset and check its tolerances")
    v.add_argument("preset")
    sub.add_parser("list-presets", help="list built-in scenarios")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "list-presets":
        for name, desc in list_presets():
            print(f"{name:28s} {desc}")
        return EXIT_OK
    try:
        if args.verb == "verify":
            if args.preset not in preset_names():
                raise ScenarioParseError(f"unknown preset {args.preset!r}; "
                                         f"see `tomokin list-presets`")
            sc = loads(preset_text(args.preset))
        else:
            sc = _load(args.scenario)
    except ScenarioParseError as e:
        print(f"tomokin: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioValidationError as e:
        print(f"tomokin: validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    out_dir = args.out_dir or os.environ.get("TOMOKIN_OUT_DIR") or "tomokin-out"
    from .runner import run_scenario
    try:
        res = run_scenario(sc, out_dir, workers=args.threads, tolerance_scale=args.tolerance_scale)
    except ScenarioValidationError as e:
        print(f"tomokin: validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TomokinError, ArithmeticError, ValueError) as e:
        print(f"tomokin: numeric failure in {sc.name}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    for c in res.checks:
        print(f"{c.name:18s} {'pass' if c.passed else 'FAIL'}")
    print(f"report: {res.report_path}")
    if not res.passed:
        for c in res.failed:
            print(f"tomokin: check {c.name} failed: {'; '.join(c.failures)}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
