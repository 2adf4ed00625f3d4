"""``larvactl`` command-line front end.

Exit codes: 0 on success, 1 on invalid input (bad scenario, unknown flag,
missing file), 2 on numerical failure (divergence, no equilibrium).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .control import make_controller, validate_reference
from .diagnostics import (check_conditions, constant_C, lyapunov_columns, region_A_check,
                          search_H6)
from .dynamics import simulate
from .equilibrium import solve_steady_state
from .errors import HypothesisWarning, NumericalError, ScenarioError
from .fixtures import write_fixtures
from .model_config import ScenarioConfig, load_scenario
from .pde_oracle import compare_with_transform
from .svg import emit_svg

CONTROLLERS = ("static", "stabilizing", "tracking")


@dataclass
class RunManifest:
    scenario: str
    subcommand: str
    controller: str = ""
    outputs: list[str] = field(default_factory=list)
    deterministic: bool = True
    version: str = __version__

    def header(self) -> list[str]:
        return [
            f"larvactl {self.version}",
            f"scenario: {self.scenario}",
            f"subcommand: {self.subcommand}",
            f"controller: {self.controller or '-'}",
            f"outputs: {', '.join(self.outputs) or '-'}",
            f"deterministic: {str(self.deterministic).lower()}",
        ]


class UsageError(ScenarioError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns: Mapping[str, Sequence], header: Sequence[str]) -> str:
    """Write columns as CSV with ``#`` comment lines; ``-`` means stdout."""
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    n = len(next(iter(columns.values()))) if columns else 0
    cols = [np.asarray(columns[k]) for k in names]
    for i in range(n):
        writer.writerow([_fmt(c[i]) for c in cols])
    text = buf.getvalue()
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def _default_out(args, suffix: str) -> str:
    if args.out:
        return args.out
    return f"{Path(args.scenario).stem}-{suffix}.csv"


def _steady_header(steady) -> list[str]:
    return [f"{k} = {v!r}" for k, v in steady.summary().items()]


# ---------------------------------------------------------------------------
# subcommands


def cmd_equilibrium(args) -> int:
    config = load_scenario(args.scenario)
    steady = solve_steady_state(config.P_star, config)
    out = _default_out(args, "equilibrium")
    manifest = RunManifest(args.scenario, "equilibrium", config.control.variant, [out])
    cols = {"a": steady.a, "I_star": steady.I_star, "F_star": steady.F_star, "M_star": steady.M_star,
            "g_F": steady.g_F, "g_I": steady.g_I, "g": steady.g, "pi0_I": steady.pi0_I}
    write_csv(out, cols, manifest.header() + _steady_header(steady))
    return 0


def _run(args, config: ScenarioConfig, variant: str, subcommand: str) -> int:
    if variant != config.control.variant:
        config = config.replace(control={"variant": variant})
    steady = solve_steady_state(config.P_star, config)
    series = simulate(config, steady=steady)
    out = _default_out(args, subcommand)
    manifest = RunManifest(args.scenario, subcommand, variant, [out] + ([args.svg] if args.svg else []))
    cols = series.columns()
    if not args.diag:
        cols.pop("W", None)
        if series.mode != "track":
            cols.pop("V_I", None)
            cols.pop("G_I", None)
    else:
        extra = lyapunov_columns(series, config.env, steady.k_I)
        if "W" in cols:
            extra.pop("W")
        cols.update(extra)
    header = manifest.header() + _steady_header(steady) + [f"sigma = {series.sigma!r}"]
    if series.mode == "track":
        header += [f"{k} = {float(series.meta[k])!r}" for k in ("delta", "mu1", "mu2", "L")]
        header.append(f"certified = {bool(series.meta['certified'])}")
        header.append(f"saturated_fraction = {float(series.saturated.mean())!r}")
    write_csv(out, cols, header)
    if args.svg:
        channels = ["y", "y_d"] if series.mode == "track" else ["eta"]
        emit_svg(series, channels, args.svg, title=f"{config.name}: {variant} control",
                 x_label="t")
    return 0


def cmd_simulate(args) -> int:
    config = load_scenario(args.scenario)
    return _run(args, config, args.controller or config.control.variant, "simulate")


def cmd_track(args) -> int:
    config = load_scenario(args.scenario)
    return _run(args, config, "tracking", "track")


def cmd_check(args) -> int:
    config = load_scenario(args.scenario)
    steady = solve_steady_state(config.P_star, config)
    n = max(int(round(config.T / config.grid.da)), 0)
    times = np.arange(n + 1) * config.grid.da
    report = check_conditions(config.env, times)
    C = constant_C(config.env, times)
    gamma1 = 2 * C * steady.k_I
    P0 = make_controller(config.control, steady, config.env, config.T)(0.0, steady.y_star).P \
        if config.control.variant != "tracking" else config.P_star
    lines = [
        f"H1: K(t) >= eps = {config.epsilon:.6g} on the horizon",
        f"conditions: {report.verdict}",
        f"relation implied wherever positive definite: {report.implication_holds}",
        f"C = {C:.6g}, gamma1 = 2 C k_I = {gamma1:.6g}",
        f"initial state in positivity region: "
        f"{region_A_check(config.initial.eta0, steady.k_I, gamma1, C, (P0,))}",
    ]
    if args.h6_search:
        h6 = search_H6(steady.g_F, steady.g_I, steady.grid)
        lines.append(f"H6: kappa_I = {h6.kappa_I:.6g}, kappa_F = {h6.kappa_F:.6g}, sigma = {h6.sigma:.6g}, "
                     f"plain {h6.plain_ok}, weighted {h6.weighted_ok}")
    if config.control.variant == "tracking":
        adm = validate_reference(config.control, steady, config.env, times)
        lines.append(adm.describe())
    print("\n".join(lines))
    out = _default_out(args, "check")
    manifest = RunManifest(args.scenario, "check", config.control.variant, [out])
    cols = dict(zip(("t", "pd_K2", "pd_sum", "relation", "lambda_min"), zip(*report.rows())))
    write_csv(out, cols, manifest.header() + lines)
    return 0


def cmd_oracle_compare(args) -> int:
    config = load_scenario(args.scenario)
    variant = args.controller or config.control.variant
    if variant != config.control.variant:
        config = config.replace(control={"variant": variant})
    report = compare_with_transform(config)
    out = _default_out(args, "oracle")
    manifest = RunManifest(args.scenario, "oracle-compare", variant, [out])
    header = manifest.header() + [f"max_{k} = {float(v)!r}" for k, v in report.maxima().items()]
    write_csv(out, {"t": report.t, "errI": report.err_I, "errF": report.err_F,
                    "errM": report.err_M, "err_y": report.err_y}, header)
    return 0


def cmd_fixtures(args) -> int:
    for path in write_fixtures(args.dir):
        print(path)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="larvactl", description="Age-structured larval control simulator")
    parser.add_argument("--version", action="version", version=f"larvactl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_cmd(name, func, help_, out=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario")
        if out:
            p.add_argument("--out", help="CSV path ('-' for stdout)")
        p.set_defaults(func=func)
        return p

    scenario_cmd("equilibrium", cmd_equilibrium, "steady-state profiles and kernels")
    p = scenario_cmd("simulate", cmd_simulate, "run the transformed dynamics")
    p.add_argument("--controller", choices=CONTROLLERS)
    p.add_argument("--svg")
    p.add_argument("--diag", action="store_true", help="append Lyapunov diagnostics columns")
    p = scenario_cmd("track", cmd_track, "run the tracking controller")
    p.add_argument("--svg")
    p.add_argument("--diag", action="store_true")
    p = scenario_cmd("check", cmd_check, "stability-condition report")
    p.add_argument("--h6-search", action="store_true", help="search kernel-condition constants")
    p = scenario_cmd("oracle-compare", cmd_oracle_compare, "compare against the direct solver")
    p.add_argument("--controller", choices=CONTROLLERS)
    p = sub.add_parser("fixtures", help="write the reference scenario files")
    p.add_argument("--dir", default="scenarios")
    p.set_defaults(func=cmd_fixtures)
    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HypothesisWarning)
            return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
