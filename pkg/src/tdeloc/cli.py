"""Command-line surface: simulations, sweeps, measured-data runs, reports.

Every run writes an RFC-4180 style CSV whose leading ``#`` comment lines
pin the schema name, a short hash of the effective configuration, and the
seed, so any output file can be traced back to the run that produced it.
The ``report`` subcommand turns such a CSV into a JSON summary.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration
error (unknown key, bad value, missing input file).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, TdelocError
from .ingest import evaluate_measurement, load_measurement
from .interp import METHODS
from .locate import pair_indices
from .scenario import ScenarioConfig, SweepSpec, run_sweep, run_trial

SCHEMA_SIMULATE = "tdeloc-simulate-v1"
SCHEMA_SWEEP = "tdeloc-sweep-v1"
SCHEMA_INGEST = "tdeloc-ingest-v1"

_SWEEP_UNITS = {
    "rate_hz": "Hz",
    "factor": "ratio",
    "snr_db": "dB",
    "window_ms": "ms",
    "s": "samples",
}


# configuration keys


def _as_float(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _as_int(value):
    if isinstance(value, bool):
        raise ValueError(f"expected an integer, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"expected an integer, got {value!r}")
    if not isinstance(value, (int, float)):
        raise ValueError(f"expected an integer, got {value!r}")
    return int(value)


def _as_optional_float(value):
    if value is None:
        return None
    return _as_float(value)


def _as_optional_int(value):
    if value is None:
        return None
    return _as_int(value)


def _as_snr(value):
    # null or "inf" disables noise
    if value is None or value == "inf":
        return math.inf
    return _as_float(value)


def _as_str(value):
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _as_methods(value):
    if isinstance(value, str):
        value = [m.strip() for m in value.split(",") if m.strip()]
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ValueError(f"expected a non-empty method list, got {value!r}")
    bad = [m for m in value if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}; expected from {list(METHODS)}")
    return tuple(value)


def _as_values(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ValueError(f"expected a non-empty list of numbers, got {value!r}")
    return tuple(_as_float(v) for v in value)


def _scenario_defaults() -> dict:
    base = ScenarioConfig()
    return {f.name: getattr(base, f.name) for f in fields(ScenarioConfig)}


_SCENARIO_CONVERTERS = {
    "rate_hz": _as_float,
    "c": _as_float,
    "snr_db": _as_snr,
    "window_samples": _as_int,
    "num_sources": _as_int,
    "bandlimit_hz": _as_optional_float,
    "array_radius_m": _as_float,
    "num_sensors": _as_int,
    "interp_factor": _as_int,
    "s_sinc": _as_optional_int,
    "s_ws": _as_int,
    "thiran_order": _as_int,
    "seed": _as_int,
}


def _command_keys(command: str) -> tuple:
    """Converters and defaults for one subcommand's configuration."""
    common = {"methods": _as_methods, "output": _as_str}
    defaults = {"methods": METHODS, "output": "-"}
    if command == "simulate":
        converters = {**_SCENARIO_CONVERTERS, **common}
        defaults.update(_scenario_defaults())
    elif command == "sweep":
        converters = {
            **_SCENARIO_CONVERTERS,
            **common,
            "parameter": _as_str,
            "values": _as_values,
        }
        defaults.update(_scenario_defaults())
        # desk-scale sweep default; the single-run bench default is larger
        defaults["num_sources"] = 200
        defaults["parameter"] = None
        defaults["values"] = None
    elif command == "ingest":
        converters = {
            **common,
            "audio_path": _as_str,
            "geometry_path": _as_str,
            "factor": _as_int,
            "interp_factor": _as_int,
            "s_sinc": _as_int,
            "s_ws": _as_int,
            "window_ms": _as_float,
            "num_events": _as_int,
            "c": _as_float,
        }
        defaults.update(
            audio_path=None,
            geometry_path=None,
            factor=6,
            interp_factor=500,
            s_sinc=3,
            s_ws=13,
            window_ms=2.0,
            num_events=4,
            c=343.0,
        )
    else:
        raise ValueError(f"no configuration table for {command!r}")
    return converters, defaults


def _apply_entries(config: dict, converters: dict, entries) -> None:
    for key, raw in entries:
        if key not in converters:
            raise ConfigError(
                f"unknown configuration key {key!r}; "
                f"expected one of {sorted(converters)}"
            )
        try:
            config[key] = converters[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc


def _parse_set_value(text: str):
    # JSON where it parses, bare string otherwise, so --set seed=7 and
    # --set parameter=rate_hz both read naturally
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(command: str, config_path, overrides) -> dict:
    """Merge defaults, an optional JSON file, and KEY=VALUE overrides.

    Raises
    ------
    ConfigError
        On an unknown key, an unusable value, or an unreadable file.
    """
    converters, config = _command_keys(command)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        _apply_entries(config, converters, loaded.items())
    pairs = []
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
        pairs.append((key, _parse_set_value(value)))
    _apply_entries(config, converters, pairs)
    return config


def _config_hash(config: dict) -> str:
    # the destination path is not part of what the run computes
    canon = {k: v for k, v in config.items() if k != "output"}
    text = json.dumps(canon, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


# output helpers


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_header(out, schema: str, config: dict, units: str,
                  notes=()) -> None:
    out.write(f"# schema: {schema}\n")
    out.write(f"# config: {_config_hash(config)}\n")
    if "seed" in config:
        out.write(f"# seed: {config['seed']}\n")
    out.write(f"# units: {units}\n")
    for note in notes:
        out.write(f"# note: {note}\n")


def _write_csv(path: str, write_body) -> None:
    if path == "-":
        write_body(sys.stdout)
        return
    with open(path, "w", newline="") as out:
        write_body(out)


# subcommands


def _scenario_from(config: dict) -> ScenarioConfig:
    kwargs = {f.name: config[f.name] for f in fields(ScenarioConfig)}
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(config: dict) -> None:
    """Run one scenario and write per-(source, method) error rows."""
    scen = _scenario_from(config)
    methods = config["methods"]
    results = run_trial(scen, methods=methods)

    def body(out):
        _write_header(
            out, SCHEMA_SIMULATE, config,
            "toa_error_s seconds; tdoa_error_s seconds; "
            "pos_error fraction of source range",
        )
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["source", "method", "toa_error_s", "tdoa_error_s",
                    "pos_error"])
        for k in range(scen.num_sources):
            for method in methods:
                errs = results[method]
                w.writerow([
                    k + 1,
                    method,
                    _fmt(float(np.mean(errs.toa_errors[k]))),
                    _fmt(float(np.mean(errs.tdoa_errors[k]))),
                    _fmt(float(errs.pos_errors[k])),
                ])

    _write_csv(config["output"], body)


def cmd_sweep(config: dict) -> None:
    """Sweep one parameter and write aggregated rows per (value, method)."""
    if config["parameter"] is None or config["values"] is None:
        missing = [k for k in ("parameter", "values") if config[k] is None]
        raise ConfigError(f"sweep requires keys {missing}")
    base = _scenario_from(config)
    try:
        spec = SweepSpec(
            parameter=config["parameter"],
            values=config["values"],
            methods=config["methods"],
            num_sources=config["num_sources"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    table = run_sweep(spec, base)
    unit = _SWEEP_UNITS[spec.parameter]

    def body(out):
        _write_header(
            out, SCHEMA_SWEEP, config,
            f"{spec.parameter} {unit}; toa_/tdoa_ columns seconds; "
            "pos_ columns fraction of source range",
        )
        w = csv.writer(out, lineterminator="\n")
        w.writerow([
            spec.parameter, "method", "num_sources", "failures",
            "toa_mean_s", "toa_median_s", "toa_std_s",
            "tdoa_mean_s", "tdoa_median_s", "tdoa_std_s",
            "pos_mean", "pos_median", "pos_std",
        ])
        for row in table.rows:
            w.writerow([
                _fmt(row.value), row.method, row.num_sources, row.failures,
                _fmt(row.toa.mean), _fmt(row.toa.median), _fmt(row.toa.std),
                _fmt(row.tdoa.mean), _fmt(row.tdoa.median), _fmt(row.tdoa.std),
                _fmt(row.pos.mean), _fmt(row.pos.median), _fmt(row.pos.std),
            ])

    _write_csv(config["output"], body)


def cmd_ingest(config: dict) -> None:
    """Evaluate a measurement file set and write per-pair error rows."""
    missing = [k for k in ("audio_path", "geometry_path")
               if config[k] is None]
    if missing:
        raise ConfigError(f"ingest requires keys {missing}")
    for key in ("audio_path", "geometry_path"):
        if not Path(config[key]).is_file():
            raise ConfigError(f"{key} not found: {config[key]}")
    mset = load_measurement(config["audio_path"], config["geometry_path"])
    truth, rows = evaluate_measurement(
        mset,
        factor=config["factor"],
        methods=config["methods"],
        interp_factor=config["interp_factor"],
        s_sinc=config["s_sinc"],
        s_ws=config["s_ws"],
        window_ms=config["window_ms"],
        num_events=config["num_events"],
        c=config["c"],
    )
    pairs = pair_indices(mset.num_channels)

    def body(out):
        _write_header(
            out, SCHEMA_INGEST, config,
            "tdoa_error_s seconds; pos_error_m meters",
            notes=(truth.note,),
        )
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["source", "event", "method", "pair", "tdoa_error_s",
                    "pos_error_m"])
        for row in rows:
            for p, (m, n) in enumerate(pairs):
                w.writerow([
                    mset.source_label,
                    row.event,
                    row.method,
                    f"{m}-{n}",
                    _fmt(float(row.tdoa_errors[p])),
                    _fmt(float(row.pos_error_m)),
                ])

    _write_csv(config["output"], body)


# report


def _read_table(csv_path: str) -> tuple:
    """Read a run CSV back: (schema, comments, header, rows)."""
    path = Path(csv_path)
    if not path.is_file():
        raise ConfigError(f"input CSV not found: {path}")
    comments = []
    data_lines = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line:
            data_lines.append(line)
    schema = None
    for comment in comments:
        if comment.startswith("schema:"):
            schema = comment.split(":", 1)[1].strip()
    if schema is None:
        raise ConfigError("input CSV has no '# schema:' line")
    rows = list(csv.reader(data_lines))
    if not rows:
        raise ConfigError("input CSV has no header row")
    return schema, comments, rows[0], rows[1:]


def _group_summary(header, rows, group_cols, value_cols) -> list:
    idx = {name: header.index(name) for name in header}
    for name in group_cols + value_cols:
        if name not in idx:
            raise ConfigError(f"input CSV is missing column {name!r}")
    groups: dict = {}
    order = []
    for row in rows:
        key = tuple(row[idx[c]] for c in group_cols)
        if key not in groups:
            groups[key] = {c: [] for c in value_cols}
            order.append(key)
        for c in value_cols:
            groups[key][c].append(float(row[idx[c]]))
    summary = []
    for key in order:
        entry = {c: v for c, v in zip(group_cols, key)}
        for c in value_cols:
            vals = np.asarray(groups[key][c])
            finite = vals[np.isfinite(vals)]
            if len(finite) == 0:
                entry[c] = None
                continue
            entry[c] = {
                "n": int(len(finite)),
                "mean": float(np.mean(finite)),
                "median": float(np.sort(finite)[(len(finite) - 1) // 2]),
                "std": float(np.std(finite)),
            }
        summary.append(entry)
    return summary


def cmd_report(csv_path: str, output: str) -> None:
    """Summarize a run CSV as JSON grouped by the schema's key columns."""
    schema, comments, header, rows = _read_table(csv_path)
    if schema == SCHEMA_SIMULATE:
        group_cols = ["method"]
        value_cols = ["toa_error_s", "tdoa_error_s", "pos_error"]
    elif schema == SCHEMA_SWEEP:
        group_cols = [header[0], "method"]
        value_cols = ["toa_mean_s", "tdoa_mean_s", "pos_mean"]
    elif schema == SCHEMA_INGEST:
        group_cols = ["event", "method"]
        value_cols = ["tdoa_error_s", "pos_error_m"]
    else:
        raise ConfigError(f"unknown schema {schema!r}")
    notes = [c.split(":", 1)[1].strip() for c in comments
             if c.startswith("note:")]
    doc = {
        "schema": schema,
        "source": str(csv_path),
        "notes": notes,
        "groups": _group_summary(header, rows, group_cols, value_cols),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdeloc",
        description="Subsample time-delay estimation bench: simulate "
                    "reflection scenarios, sweep parameters, evaluate "
                    "measured impulse responses, and summarize results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "run one scenario, one CSV row per source and method"),
        ("sweep", "vary one parameter, one aggregated row per value and "
                  "method"),
        ("ingest", "evaluate measured impulse responses against their "
                   "full-rate reference"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", metavar="FILE",
                        help="JSON object with configuration keys")
        sp.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
        sp.add_argument("-o", "--output", default=None,
                        help="CSV path, '-' for stdout (default)")
    rp = sub.add_parser("report", help="summarize a run CSV as JSON")
    rp.add_argument("csv_path", help="CSV produced by simulate/sweep/ingest")
    rp.add_argument("-o", "--output", default="-",
                    help="JSON path, '-' for stdout (default)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            cmd_report(args.csv_path, args.output)
        else:
            config = build_config(args.command, args.config, args.overrides)
            if args.output is not None:
                config["output"] = args.output
            run = {"simulate": cmd_simulate, "sweep": cmd_sweep,
                   "ingest": cmd_ingest}[args.command]
            run(config)
    except ConfigError as exc:
        print(f"tdeloc: error: {exc}", file=sys.stderr)
        return 2
    except (TdelocError, OSError) as exc:
        print(f"tdeloc: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
