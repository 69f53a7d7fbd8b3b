"""Experiment runner CLI: ``run``, ``bench`` and ``preset`` verbs.

Config files are JSON or a flat ``dotted.key = value`` text format (values
parse as JSON scalars, commas make lists).  Outputs are written atomically:
``metrics.csv`` (one row per method/run/step), ``tracks.jsonl`` (one record
per method/run/step) and ``bench.csv``/``bench_fit.csv`` for sweeps.

Exit codes: 0 ok, 1 runtime failure, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    bench_sweep,
    parse_method,
    run_experiment,
)
from .metrics import OspaParams
from .sim import ScenarioSpec, Segment, TargetSpec, build_scenario1, build_scenario2

METRICS_COLUMNS = [
    "method",
    "run",
    "step",
    "ospa2_total",
    "ospa2_group",
    "ospa2_single",
    "n_confirmed",
    "bp_iters",
    "t_predict_ms",
    "t_assoc_ms",
    "t_update_ms",
]

BENCH_COLUMNS = ["sweep", "value", "run", "mean_step_ms", "total_s", "steps", "method"]

PRESETS = {
    "scenario1": {
        "scenario": {"preset": "scenario1"},
        "methods": ["bp", "gtbp-2best", "gtbp-4best"],
        "runs": 100,
        "seed": 0,
        "particle_budget": 3000,
    },
    "scenario2": {
        "scenario": {"preset": "scenario2"},
        "methods": ["bp", "gtbp-2best"],
        "runs": 100,
        "seed": 0,
        "filter": {"l_particles": 1000, "bp_fixed_iterations": 20},
        "ospa": {"window": 20},
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


def parse_config_text(text: str) -> dict:
    """Parse JSON or the dotted key/value format into a nested dict."""
    stripped = text.strip()
    if not stripped:
        raise ConfigError("empty config")
    if stripped.startswith("{"):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as e:
            raise ConfigError(f"bad JSON config: {e}") from e
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"line {lineno}: {key} nests under a scalar")
        node[parts[-1]] = _parse_value(value)
    return out


def _parse_value(token: str):
    if "," in token:
        return [_parse_value(t.strip()) for t in token.split(",") if t.strip()]
    try:
        return json.loads(token)
    except json.JSONDecodeError:
        return token


def scenario_from_dict(data: dict) -> ScenarioSpec:
    if "preset" in data:
        name = data["preset"]
        extra = {k: v for k, v in data.items() if k != "preset"}
        if name == "scenario1":
            spec = build_scenario1()
        elif name == "scenario2":
            spec = build_scenario2(**{k: extra.pop(k) for k in list(extra) if k in ("n_targets", "spacing", "centered")})
        else:
            raise ConfigError(f"scenario.preset: unknown preset {name!r}")
        if extra:
            try:
                spec = dataclasses.replace(spec, **extra)
            except TypeError as e:
                raise ConfigError(f"scenario: {e}") from e
        return spec
    try:
        targets = tuple(
            TargetSpec(
                born=int(t["born"]),
                died=int(t["died"]),
                initial=tuple(float(v) for v in t["initial"]),
                segments=tuple(
                    Segment(kind=s["kind"], steps=int(s["steps"]), omega=s.get("omega"))
                    for s in t["segments"]
                ),
            )
            for t in data["targets"]
        )
        fields = {
            k: v
            for k, v in data.items()
            if k in ("duration", "dt", "region_radius", "sigma_w", "p_d", "clutter_mean", "birth_mean", "seed")
        }
        groups = {str(k): tuple(v) for k, v in data.get("groups", {}).items()}
        return ScenarioSpec(targets=targets, groups=groups, **fields)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"scenario: {e}") from e


def experiment_from_dict(data: dict) -> ExperimentConfig:
    if "scenario" not in data:
        raise ConfigError("scenario: missing")
    scenario = scenario_from_dict(data["scenario"])
    methods_raw = data.get("methods")
    if not methods_raw:
        raise ConfigError("methods: at least one method required")
    if isinstance(methods_raw, str):
        methods_raw = [methods_raw]
    try:
        methods = [parse_method(m) for m in methods_raw]
    except ValueError as e:
        raise ConfigError(f"methods: {e}") from e
    try:
        ospa = OspaParams(**data.get("ospa", {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"ospa: {e}") from e
    try:
        config = ExperimentConfig(
            scenario=scenario,
            methods=methods,
            runs=int(data.get("runs", 1)),
            base_seed=int(data.get("seed", 0)),
            filter_overrides=dict(data.get("filter", {})),
            ospa=ospa,
            steps=data.get("steps"),
            particle_budget=data.get("particle_budget"),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    try:
        from .experiments import filter_config_for

        for method in config.methods:
            filter_config_for(config, method)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"filter: {e}") from e
    return config


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer(handle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_metrics(path: Path, rows) -> None:
    def go(handle):
        out = csv.DictWriter(handle, fieldnames=METRICS_COLUMNS)
        out.writeheader()
        for row in rows:
            formatted = dict(row)
            for key in ("ospa2_total", "ospa2_group", "ospa2_single"):
                formatted[key] = f"{row[key]:.9g}"
            for key in ("t_predict_ms", "t_assoc_ms", "t_update_ms"):
                formatted[key] = f"{row[key]:.3f}"
            out.writerow(formatted)

    _atomic_write(path, go)


def write_tracks(path: Path, records) -> None:
    def go(handle):
        for record in records:
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")

    _atomic_write(path, go)


def write_bench(path: Path, rows) -> None:
    def go(handle):
        out = csv.DictWriter(handle, fieldnames=BENCH_COLUMNS)
        out.writeheader()
        for row in rows:
            formatted = dict(row)
            formatted["mean_step_ms"] = f"{row['mean_step_ms']:.3f}"
            formatted["total_s"] = f"{row['total_s']:.3f}"
            out.writerow(formatted)

    _atomic_write(path, go)


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        data = parse_config_text(text)
        if args.runs is not None:
            data["runs"] = args.runs
        if args.seed is not None:
            data["seed"] = args.seed
        config = experiment_from_dict(data)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    try:
        rows, records = run_experiment(config)
    except Exception as e:  # noqa: BLE001 - report and exit nonzero
        print(f"runtime failure (seed {config.base_seed}): {e}", file=sys.stderr)
        return 1
    write_metrics(out_dir / "metrics.csv", rows)
    write_tracks(out_dir / "tracks.jsonl", records)
    print(f"wrote {out_dir / 'metrics.csv'} ({len(rows)} rows) and tracks.jsonl")
    return 0


def cmd_bench(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
        if len(values) < 2:
            raise ValueError("need at least 2 sweep values")
    except ValueError as e:
        print(f"config error: values: {e}", file=sys.stderr)
        return 2
    try:
        rows, fit = bench_sweep(
            args.sweep,
            values,
            runs=args.runs,
            steps=args.steps,
            l_particles=args.particles,
            base_seed=args.seed,
        )
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    write_bench(out_dir / "bench.csv", rows)

    def go(handle):
        out = csv.DictWriter(handle, fieldnames=["sweep", "slope", "intercept", "r2", "loglog"])
        out.writeheader()
        out.writerow({"sweep": args.sweep, **{k: fit[k] for k in ("slope", "intercept", "r2", "loglog")}})

    _atomic_write(out_dir / "bench_fit.csv", go)
    kind = "log-log slope" if fit["loglog"] else "slope"
    print(f"{args.sweep} sweep: {kind} {fit['slope']:.3f}, R^2 {fit['r2']:.4f}")
    return 0


def cmd_preset(args) -> int:
    if args.name not in PRESETS:
        print(f"config error: unknown preset {args.name!r}", file=sys.stderr)
        return 2
    text = json.dumps(PRESETS[args.name], indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grouptrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo experiment batch")
    p_run.add_argument("--config", required=True, help="JSON or key=value config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--runs", type=int, default=None, help="override run count")
    p_run.add_argument("--seed", type=int, default=None, help="override base seed")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="runtime scaling sweeps")
    p_bench.add_argument("--sweep", required=True, choices=["m", "clutter", "targets"])
    p_bench.add_argument("--values", required=True, help="comma-separated sweep values")
    p_bench.add_argument("--out", default="bench_out", help="output directory")
    p_bench.add_argument("--runs", type=int, default=2)
    p_bench.add_argument("--steps", type=int, default=20)
    p_bench.add_argument("--particles", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=cmd_bench)

    p_preset = sub.add_parser("preset", help="emit a canned experiment config")
    p_preset.add_argument("--name", required=True, help="scenario1 or scenario2")
    p_preset.add_argument("--out", default=None, help="write to file instead of stdout")
    p_preset.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
