"""Command-line experiment runner.

    varint run config.json [--output out.csv] [--quiet]
    varint compare config.json
    varint sweep-h0 config.json

Every subcommand writes a CSV and a ``<csv>.meta.json`` sidecar.  ``run`` and
``compare`` write one row per step, starting with the bootstrap step k = 1.  Floats are
written in shortest round-trip form, so the same config always gives
byte-identical files.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 guard abort.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .diagnostics import condition_study, energy_report
from .errors import ConfigError, GuardError, SolverError, VIError
from .integrators import IntegratorConfig, run
from .model import InitialCondition, make_damped_oscillator, make_double_well

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GUARD = 0, 2, 3, 4

RUN_COLUMNS = (
    "k", "t", "h", "q", "p", "E_discrete", "E_continuous", "discrete_energy_error",
    "discretization_error", "newton_iters", "residual_norm", "condition", "fallback_used",
)
COMPARE_COLUMNS = (
    "k",
    "t_fixed", "h_fixed", "E_fixed", "discrete_energy_error_fixed", "discretization_error_fixed",
    "t_adaptive", "h_adaptive", "E_adaptive", "discrete_energy_error_adaptive",
    "discretization_error_adaptive",
)
SWEEP_COLUMNS = ("h0", "max_condition", "max_discrete_energy_error", "status")

_number = {"type": "number"}
_vector = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 1}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "ic", "integrator"],
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["double-well", "oscillator"]},
                "m": _number,
                "k": _number,
                "c": _number,
            },
        },
        "ic": {
            "type": "object",
            "additionalProperties": False,
            "required": ["q0", "v0"],
            "properties": {"q0": _vector, "v0": _vector, "t0": _number},
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["fixed", "adaptive"]},
                "h0": _number,
                "h0_list": {"type": "array", "items": _number, "minItems": 1},
                "t_end": _number,
                "max_steps": {"type": "integer"},
                "forced": {"type": "boolean"},
                "newton_tol": _number,
                "newton_max_iter": {"type": "integer"},
                "h_min_factor": _number,
                "h_max_factor": _number,
                "fallback": {"enum": ["none", "fixed-substep"]},
                "solver_mode": {"enum": ["root-find", "least-squares"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}},
        },
    },
}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return config


def build_system(section: dict):
    params = {k: v for k, v in section.items() if k != "name"}
    if section["name"] == "double-well":
        if set(params) - {"m"}:
            raise ConfigError("double-well only takes parameter 'm'")
        return make_double_well(**params)
    return make_damped_oscillator(**params)


def build_ic(section: dict) -> InitialCondition:
    return InitialCondition(section["q0"], section["v0"], section.get("t0", 0.0))


def build_integrator(section: dict, **overrides) -> IntegratorConfig:
    fields = {k: v for k, v in section.items() if k != "h0_list"}
    fields.update(overrides)
    return IntegratorConfig(**fields)


def fmt(x) -> str:
    """Shortest round-trip text for numbers; vectors are space separated."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 or a.size == 1:
        return repr(float(a.reshape(-1)[0]))
    return " ".join(repr(float(v)) for v in a.ravel())


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_meta(path: Path, meta: dict):
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return dict(x)  # mapping proxies


def run_rows(log, sys) -> list:
    """One row per step: the bootstrap step (k = 1) and every step after it."""
    series = energy_report(log, sys)
    rows = []
    for i, rec in enumerate(log.records[1:], start=1):
        s, rep = rec.state, rec.report
        rows.append([
            fmt(s.k), fmt(s.t), fmt(rec.h), fmt(s.q), fmt(s.p),
            fmt(s.E), fmt(series.E_cont[i]), fmt(series.discrete_energy_error[i]),
            fmt(series.discretization_error[i]), fmt(rep.iterations), fmt(rep.residual_norm),
            fmt(rep.condition_estimate), fmt(rep.fallback_used),
        ])
    return rows


def _output_path(args, config) -> Path:
    path = args.output or config.get("output", {}).get("path")
    if not path:
        raise ConfigError("no output path: pass --output or set output.path")
    return Path(path)


def cmd_run(args, config) -> int:
    system, ic = build_system(config["system"]), build_ic(config["ic"])
    integ = build_integrator(config["integrator"])
    out = _output_path(args, config)
    meta = {"command": "run", "config": config, "version": __version__}
    try:
        log = run(system, ic, integ)
        status = EXIT_OK
    except GuardError as exc:
        log, status = exc.log, EXIT_GUARD
        meta["abort"] = {"reason": str(exc), "h": exc.h}
    rows = run_rows(log, system)
    if status == EXIT_GUARD:
        marker = ["abort", fmt(log.records[-1].state.t), fmt(meta["abort"]["h"])]
        rows.append(marker + [""] * (len(RUN_COLUMNS) - len(marker)))
    meta["run"] = log.metadata
    meta["status"] = "guard_abort" if status == EXIT_GUARD else "ok"
    _write_csv(out, RUN_COLUMNS, rows)
    _write_meta(out, meta)
    _say(args, f"{out}: {len(log)} nodes, t_end={float(log.t[-1])!r}, status={meta['status']}")
    return status


def cmd_compare(args, config) -> int:
    system, ic = build_system(config["system"]), build_ic(config["ic"])
    section = config["integrator"]
    out = _output_path(args, config)
    logs, series = {}, {}
    for mode in ("fixed", "adaptive"):
        logs[mode] = run(system, ic, build_integrator(section, mode=mode))
        series[mode] = energy_report(logs[mode], system)
    n = max(len(log) for log in logs.values())
    rows = []
    for k in range(1, n):
        row = [fmt(k)]
        for mode in ("fixed", "adaptive"):
            log, s = logs[mode], series[mode]
            if k < len(log):
                rec = log.records[k]
                row += [fmt(rec.state.t), fmt(rec.h), fmt(rec.state.E),
                        fmt(s.discrete_energy_error[k]), fmt(s.discretization_error[k])]
            else:
                row += [""] * 5
        rows.append(row)
    _write_csv(out, COMPARE_COLUMNS, rows)
    _write_meta(out, {"command": "compare", "config": config, "version": __version__,
                      "runs": {m: logs[m].metadata for m in logs}, "status": "ok"})
    worst = {m: float(np.max(s.discrete_energy_error)) for m, s in series.items()}
    _say(args, f"{out}: fixed max error {worst['fixed']!r}, adaptive max error {worst['adaptive']!r}")
    return EXIT_OK


def cmd_sweep_h0(args, config) -> int:
    system, ic = build_system(config["system"]), build_ic(config["ic"])
    section = dict(config["integrator"])
    h0_list = section.pop("h0_list", None)
    if h0_list is None:
        raise ConfigError("sweep-h0 needs integrator.h0_list")
    if section.pop("mode", "adaptive") != "adaptive":
        raise ConfigError("sweep-h0 runs the adaptive integrator only")
    section.pop("h0", None)
    t_end = section.pop("t_end", None)
    if t_end is None:
        raise ConfigError("sweep-h0 needs integrator.t_end")
    build_integrator(section, h0=float(h0_list[0]), t_end=t_end)  # validate the rest up front
    out = _output_path(args, config)
    points = condition_study(system, ic, h0_list, t_end=t_end, **section)
    rows = [[fmt(pt.h0), fmt(pt.max_condition), fmt(pt.max_discrete_energy_error),
             "ok" if pt.failure is None else "failed: " + pt.failure] for pt in points]
    _write_csv(out, SWEEP_COLUMNS, rows)
    _write_meta(out, {"command": "sweep-h0", "config": config, "version": __version__,
                      "status": "ok"})
    _say(args, f"{out}: {len(rows)} sweep points, {sum(p.failure is not None for p in points)} failed")
    return EXIT_OK


def _say(args, msg):
    if not args.quiet:
        print(msg)


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep-h0": cmd_sweep_h0}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varint", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--output", "-o", help="CSV path (overrides output.path)")
        p.add_argument("--quiet", "-q", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except GuardError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_GUARD
    except SolverError as exc:
        print(f"solver failure: {exc}", file=_sys.stderr)
        return EXIT_SOLVER
    except (VIError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
