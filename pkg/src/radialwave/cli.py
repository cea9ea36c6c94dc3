"""
Command-line front end and configuration parsing.

Config files are plain text: sections in brackets, key = value pairs,
comments with '#'.  Unknown sections or keys are hard errors carrying the
offending line number.  Every run echoes the fully-defaulted config next to
its outputs so results can be reproduced bit-identically.

Exit codes: 0 all pass flags true, 1 a judged flag failed (or the run
overflowed; the partial trajectory is checkpointed), 2 usage or config
errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields as dc_fields

from .evolve import (
    CheckpointFormatError,
    SolutionOverflowError,
    checkpoint_info,
    save_checkpoint,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    Flag,
    SCENARIOS,
    atomic_write_text,
    build_initial_state,
    flag_true,
    make_grid,
    run_scenario,
    _provenance,
)
from .functionals import energy, format_float, modified_energy, write_timeseries
from .multiplier import sobolev_norm


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text):
    parts = text.replace(",", " ").split()
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


_FIELD_PARSERS = {
    "r_max": float,
    "n_modes": int,
    "scenario": str,
    "dt": float,
    "t_final": float,
    "snapshot_stride": int,
    "seed": int,
    "nonlinearity": _parse_bool,
    "profile": str,
    "amplitude": float,
    "width": float,
    "annulus_T": float,
    "annulus_R": float,
    "mode_k": int,
    "band_lo": float,
    "band_hi": float,
    "ut_amplitude": float,
    "tail_cutoff": float,
    "tail_epsilon": float,
    "N_list": _parse_float_list,
    "s_list": _parse_float_list,
    "M_list": _parse_float_list,
    "T0": float,
    "lambda_scale": float,
    "ensemble": int,
    "out_dir": str,
    "verbosity": int,
    "threads": int,
}

from .experiments import FIELD_SECTIONS

# (section, key) -> (ExperimentConfig field, parser); keys match field names.
CONFIG_SCHEMA = {
    (FIELD_SECTIONS[name], name): (name, parser)
    for name, parser in _FIELD_PARSERS.items()
}

SECTIONS = {s for s, _ in CONFIG_SCHEMA}


def parse_config(path) -> ExperimentConfig:
    """Parse and fully validate a config file; every default materializes."""
    try:
        with open(path, "r") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    values = {}
    seen = {}
    section = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if (section, key) not in CONFIG_SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        if (section, key) in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[(section, key)]})"
            )
        seen[(section, key)] = lineno
        field_name, parser = CONFIG_SCHEMA[(section, key)]
        try:
            values[field_name] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    if "scenario" not in values:
        raise ConfigError("missing required key 'scenario' in section [run]")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _replace(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    kwargs = {f.name: getattr(cfg, f.name) for f in dc_fields(cfg)}
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def _progress(quiet, *msg):
    if not quiet:
        print(*msg, file=sys.stderr)


def _write_outputs(cfg: ExperimentConfig, report: ExperimentReport, quiet: bool) -> str:
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    atomic_write_text(os.path.join(out, "config_echo.cfg"), cfg.canonical_text())
    report_path = os.path.join(out, f"report_{report.scenario}.txt")
    report.write(report_path)
    for name, rows in sorted(report.timeseries.items()):
        write_timeseries(os.path.join(out, f"timeseries_{name}.tsv"), rows)
    _progress(quiet, f"report written to {report_path}")
    return report_path


def _run_norms(cfg: ExperimentConfig) -> ExperimentReport:
    """Norm table of the configured data profile (no evolution)."""
    report = ExperimentReport("norms", provenance=_provenance(cfg))
    grid = make_grid(cfg.r_max, cfg.n_modes)
    state = build_initial_state(cfg, grid)
    rows = [["energy", energy(state)]]
    for s in (0.5, *cfg.s_list, 1.0):
        rows.append([f"H@s={s:g}(u)", sobolev_norm(state.u, s)])
    for s in cfg.s_list:
        for N in cfg.N_list:
            rows.append([f"E_Iu@N={N:g},s={s:g}", modified_energy(state, N, s)])
    report.tables["norms"] = (["name", "value"], rows)
    import numpy as np

    finite = all(np.isfinite(r[1]) for r in rows)
    report.flags.append(flag_true("all_values_finite", finite, "finite"))
    return report.finalize()


def _cmd_checkpoint_info(args) -> int:
    try:
        info = checkpoint_info(args.path)
    except (OSError, CheckpointFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for k in ("version", "n_modes", "r_max", "t"):
        v = info[k]
        print(f"{k} = {format_float(v) if isinstance(v, float) else v}")
    return 0


FORCED_SCENARIO = {
    "huygens": "huygens",
    "scaling": "scaling",
    "convergence": "convergence",
    "sweep": "gwp_growth",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radialwave",
        description="Pseudospectral experiments for the radial defocusing cubic wave equation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="config file path")
        p.add_argument("--out", help="output directory (overrides [output] out_dir)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    for name, desc in (
        ("run", "run the scenario named in the config"),
        ("sweep", "run the almost-conservation growth sweep"),
        ("huygens", "run the sharp-Huygens window test"),
        ("scaling", "run the scaling-symmetry test"),
        ("convergence", "run the integrator convergence study"),
        ("norms", "tabulate norms of the configured data profile"),
    ):
        add_common(sub.add_parser(name, help=desc))
    pinfo = sub.add_parser("checkpoint-info", help="print checkpoint header fields")
    pinfo.add_argument("path", help="checkpoint file")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2

    if args.command == "checkpoint-info":
        return _cmd_checkpoint_info(args)

    if not args.config:
        print("error: --config PATH is required", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2

    try:
        cfg = parse_config(args.config)
        overrides = {}
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        forced = FORCED_SCENARIO.get(args.command)
        if forced is not None:
            overrides["scenario"] = forced
        if overrides:
            cfg = _replace(cfg, **overrides)
            cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    _progress(args.quiet, f"scenario {cfg.scenario} on n={cfg.n_modes}, r_max={cfg.r_max}")
    try:
        if args.command == "norms":
            report = _run_norms(cfg)
        else:
            report = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolutionOverflowError as exc:
        report = ExperimentReport(cfg.scenario, provenance=_provenance(cfg))
        report.failure = f"overflow: {exc} (last good time {exc.last_good_time})"
        report.flags.append(
            Flag("run_completed", False, 0.0, "evolution reached t_final")
        )
        os.makedirs(cfg.out_dir, exist_ok=True)
        if exc.trajectory is not None:
            ckpt = os.path.join(cfg.out_dir, "partial.ckpt")
            save_checkpoint(exc.trajectory.snapshots[-1], ckpt)
            report.notes.append(f"partial trajectory checkpointed to {ckpt}")
        _write_outputs(cfg, report, args.quiet)
        return 1

    _write_outputs(cfg, report, args.quiet)
    return 0 if report.passed else 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
