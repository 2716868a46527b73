"""Command-line batch runner.

Every scenario writes into ``OUT/<label>/``. Files are written under a
``.partial`` name and renamed when complete. CSV bodies depend only on
the configuration; wall-clock data goes to ``run_info.json``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 numerical-evaluation error.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (TABLE_KBT, TABLE_R, bandwidth, coherence, control_spectrum,
                       controllability_table, power_spectrum)
from .bloch import ControlField, Trajectory, as_vector, integrate, target_trajectory
from .config import ConfigError, Scenario, load_config, parse_config
from .pmp import NonConvergence, markovian_control, solve_fbsm
from .reservoir import Method, coefficient_trace

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_NUMERICAL = 0, 2, 3, 4
_CATEGORY = {EXIT_CONFIG: "config", EXIT_NONCONVERGENCE: "nonconvergence",
             EXIT_NUMERICAL: "numerical"}

STATE_HEADER = ["t [1/omega0]", "x1 [-]", "x2 [-]", "x3 [-]", "coherence [-]"]


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _publish(path: Path, write) -> None:
    partial = path.with_name(path.name + ".partial")
    with open(partial, "w", encoding="utf-8", newline="") as fh:
        write(fh)
    os.replace(partial, path)


def write_csv(path: Path, header, columns) -> None:
    """Columns of equal length, header row with units, 17 significant digits."""
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])
    _publish(path, write)


def write_json(path: Path, data) -> None:
    _publish(path, lambda fh: fh.write(json.dumps(data, indent=2, sort_keys=True) + "\n"))


def read_control(path, grid) -> ControlField:
    """Load a ``t,ux,uy`` CSV (as written by ``optimize``) onto `grid`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ConfigError(f"{path}: expected columns t,ux,uy")
    t, ux, uy = data.T
    if t[0] > grid.t0 or t[-1] < grid.tf:
        raise ConfigError(f"{path}: control does not cover [{grid.t0}, {grid.tf}]")
    return ControlField(grid, np.interp(grid.times, t, ux), np.interp(grid.times, t, uy))


def _state_columns(traj: Trajectory):
    s = traj.states
    return [traj.grid.times, s[:, 0], s[:, 1], s[:, 2], coherence(s)]


def _metadata(scenario: Scenario, command: str, args, **extra) -> dict:
    return {"command": command, "version": __version__, "label": scenario.label,
            "config": scenario.values(), "defaults_applied": list(scenario.defaults_applied),
            "seed": args.seed, **extra}


def _methods(scenario: Scenario, args):
    return [Method(m) for m in args.method] if args.method else [scenario.coefficient_method]


def _sweep(scenario: Scenario, method: Method):
    x0 = as_vector(scenario.x0)
    if method is Method.MARKOVIAN:
        return markovian_control(x0, scenario.params, scenario.grid, scenario.weights,
                                 scenario.sweep)
    coeffs = coefficient_trace(scenario.grid, scenario.params, method)
    return solve_fbsm(x0, coeffs, scenario.grid, scenario.weights, scenario.sweep)


# -- subcommands ------------------------------------------------------------------

def cmd_coefficients(scenario, out: Path, args) -> int:
    meta = {}
    for method in _methods(scenario, args):
        tr = coefficient_trace(scenario.grid, scenario.params, method)
        write_csv(out / f"coefficients_{method.value}.csv",
                  ["t [1/omega0]", "delta [omega0]", "gamma [omega0]", "method [-]"],
                  [scenario.grid.times, tr.delta, tr.gamma, [method.value] * len(tr.delta)])
        meta[method.value] = {"quadrature_samples": int(tr.quadrature_fallback.sum())}
    write_json(out / "coefficients_metadata.json",
               _metadata(scenario, "coefficients", args, methods=meta))
    return EXIT_OK


def cmd_evolve(scenario, out: Path, args) -> int:
    grid = scenario.grid
    method = _methods(scenario, args)[0]
    coeffs = coefficient_trace(grid, scenario.params, method)
    x0 = as_vector(scenario.x0)
    runs = {"uncontrolled": integrate(x0, ControlField.zeros(grid), coeffs),
            "target": Trajectory(grid, target_trajectory(grid.times, x0, scenario.params.omega0))}
    if args.control:
        runs["controlled"] = integrate(x0, read_control(args.control, grid), coeffs)
    for name, traj in runs.items():
        write_csv(out / f"evolve_{name}.csv", STATE_HEADER, _state_columns(traj))
    write_json(out / "evolve_metadata.json",
               _metadata(scenario, "evolve", args, method=method.value,
                         control=str(args.control) if args.control else None))
    return EXIT_OK


def cmd_optimize(scenario, out: Path, args) -> int:
    method = _methods(scenario, args)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        res = _sweep(scenario, method)
    t = scenario.grid.times
    write_csv(out / "state.csv", STATE_HEADER, _state_columns(res.state))
    lam = res.costate.states
    write_csv(out / "costate.csv", ["t [1/omega0]", "lambda1 [-]", "lambda2 [-]", "lambda3 [-]"],
              [t, lam[:, 0], lam[:, 1], lam[:, 2]])
    write_csv(out / "control.csv", ["t [1/omega0]", "ux [omega0]", "uy [omega0]"],
              [t, res.control.ux, res.control.uy])
    write_csv(out / "cost_history.csv", ["iteration [-]", "cost [1/omega0]"],
              [range(len(res.cost_history)), res.cost_history])
    write_json(out / "metadata.json", _metadata(
        scenario, "optimize", args, method=method.value, converged=res.converged,
        iterations=res.iterations, stationarity_residual=res.stationarity_residual,
        cost=res.cost, cost_initial=float(res.cost_history[0]), notes=res.notes))
    if not res.converged:
        raise _Failure(EXIT_NONCONVERGENCE,
                       f"{scenario.label}: sweep stopped after {res.iterations} iterations "
                       f"(stationarity residual {res.stationarity_residual:.3g})")
    return EXIT_OK


def cmd_spectrum(scenario, out: Path, args) -> int:
    grid = scenario.grid
    extra = {}
    if args.control:
        control = read_control(args.control, grid)
        extra["control"] = str(args.control)
    else:
        method = _methods(scenario, args)[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergence)
            res = _sweep(scenario, method)
        control = res.control
        extra.update(method=method.value, converged=res.converged)
    spectra = {"ux": power_spectrum(control.ux, grid.h),
               "uy": power_spectrum(control.uy, grid.h),
               "combined": control_spectrum(control)}
    widths = {}
    for name, spec in spectra.items():
        write_csv(out / f"spectrum_{name}.csv", ["omega [omega0]", "power [arb]"],
                  [spec.freqs, spec.power])
        widths[name] = bandwidth(spec, 0.9) if spec.power.sum() > 0 else None
    write_json(out / "spectrum_metadata.json", _metadata(
        scenario, "spectrum", args, bandwidth_fraction=0.9, bandwidth=widths, **extra))
    return EXIT_OK


def cmd_table(scenario, out: Path, args) -> int:
    rows = controllability_table(TABLE_KBT, TABLE_R, scenario.params, scenario.grid,
                                 scenario.weights, scenario.sweep, scenario.rule,
                                 scenario.x0, jobs=args.jobs)
    cells = [c for row in rows for c in row]
    write_csv(out / "table.csv",
              ["r [-]", "kBT [omega0]", "label [-]", "retention_uncontrolled [-]",
               "retention_markovian [-]", "retention_non_markovian [-]", "converged [-]"],
              [[c.r for c in cells], [c.kBT for c in cells],
               [c.label.value if c.label else "error" for c in cells],
               [c.uncontrolled for c in cells], [c.markovian for c in cells],
               [c.non_markovian for c in cells], [int(c.converged) for c in cells]])
    write_json(out / "table_metadata.json", _metadata(
        scenario, "table", args, thresholds=scenario.rule.as_dict(),
        retention="coherence(t_final) / coherence(0)",
        markovian_run="Markovian-optimal control applied to the exact dynamics",
        notes={f"r={c.r},kBT={c.kBT}": c.notes for c in cells if c.notes}))
    failed = [c for c in cells if c.label is None]
    if failed:
        raise _Failure(EXIT_NUMERICAL, f"{len(failed)} table cell(s) failed: {failed[0].notes[0]}")
    if not all(c.converged for c in cells):
        raise _Failure(EXIT_NONCONVERGENCE, "some table cells did not converge")
    return EXIT_OK


COMMANDS = {"coefficients": cmd_coefficients, "evolve": cmd_evolve,
            "optimize": cmd_optimize, "spectrum": cmd_spectrum, "table": cmd_table}


def _run_scenario(command: str, scenario: Scenario, out_root: str, args):
    """Run one scenario; returns ``(exit code, message)``."""
    out = Path(out_root) / scenario.label
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc)
    try:
        code, message = COMMANDS[command](scenario, out, args), ""
    except _Failure as exc:
        code, message = exc.code, str(exc)
    except ConfigError as exc:
        code, message = EXIT_CONFIG, f"{scenario.label}: {exc}"
    except (ArithmeticError, FloatingPointError) as exc:
        code, message = EXIT_NUMERICAL, f"{scenario.label}: {type(exc).__name__}: {exc}"
    write_json(out / f"run_info_{command}.json", {
        "started": started.isoformat(),
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "exit_code": code, "message": message, "version": __version__})
    return code, message


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmcontrol",
        description="Non-Markovian qubit decoherence: coefficients, evolution, optimal control.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"coefficients": "diffusion and dissipation coefficient traces",
             "evolve": "uncontrolled, target and optionally controlled trajectories",
             "optimize": "optimal control by forward-backward sweep",
             "spectrum": "power spectra of an optimal or supplied control",
             "table": "3x3 controllability table"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="scenario file (defaults if omitted)")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="concurrent scenarios (table: concurrent cells)")
        p.add_argument("--method", action="append", choices=[m.value for m in Method],
                       help="coefficient method; repeat for several (coefficients only)")
        p.add_argument("--seed", type=int, default=None, metavar="N",
                       help="reserved; the pipeline is deterministic")
        if name in ("evolve", "spectrum"):
            p.add_argument("--control", metavar="CSV", help="t,ux,uy control file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        scenarios = load_config(args.config) if args.config else parse_config("")
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "table" or args.jobs == 1 or len(scenarios) == 1:
        results = [_run_scenario(args.command, s, args.out, args) for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_scenario, args.command, s, args.out, args)
                       for s in scenarios]
            results = [f.result() for f in futures]

    code = max((c for c, _ in results), default=EXIT_OK)
    if code:
        first = next(m for c, m in results if c == code)
        print(f"error: {_CATEGORY[code]}: {first}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
