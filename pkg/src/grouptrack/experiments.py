"""Monte Carlo experiment and benchmark machinery behind the CLI.

A batch runs every (method, run) cell on the same synthesized measurement
sequences (the per-run sensor seed is shared across methods so comparisons are
paired) and produces per-step metric rows plus track records.  Seeds derive
deterministically from the base seed, so a batch is reproducible byte for
byte apart from wall-clock timing columns.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import OspaParams, ospa2_decomposed
from .sim import ScenarioSpec, build_scenario2, simulate_truth, synthesize
from .tracker import FilterConfig, run_filter

WORKERS_ENV = "GROUPTRACK_WORKERS"

_SIM_SALT = 101
_FILTER_SALT = 202


@dataclass(frozen=True)
class MethodSpec:
    """A tracker variant: baseline (no grouping) or grouped with M partitions."""

    name: str
    grouping: bool
    m_best: int


def parse_method(name: str) -> MethodSpec:
    token = name.strip().lower()
    if token in ("bp", "bp-baseline"):
        return MethodSpec(name=token, grouping=False, m_best=1)
    if token == "gtbp":
        return MethodSpec(name=token, grouping=True, m_best=2)
    if token.startswith("gtbp-") and token.endswith("best"):
        m = int(token[len("gtbp-") : -len("best")])
        if m < 1:
            raise ValueError(f"bad partition count in method {name!r}")
        return MethodSpec(name=token, grouping=True, m_best=m)
    raise ValueError(f"unknown method {name!r}")


@dataclass
class ExperimentConfig:
    """A full batch: scenario, methods, run count, seeds and filter knobs."""

    scenario: ScenarioSpec
    methods: list[MethodSpec]
    runs: int = 1
    base_seed: int = 0
    filter_overrides: dict = field(default_factory=dict)
    ospa: OspaParams = field(default_factory=OspaParams)
    steps: int | None = None
    particle_budget: int | None = None  # when set, l_particles = budget // m_best

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.methods:
            raise ValueError("at least one method is required")


def filter_config_for(config: ExperimentConfig, method: MethodSpec) -> FilterConfig:
    """Filter configuration for one method, scenario defaults applied."""
    spec = config.scenario
    overrides = dict(config.filter_overrides)
    overrides.setdefault("dt", spec.dt)
    overrides.setdefault("prune_threshold", 1e-5 * spec.assumed_clutter_mean)
    if config.particle_budget is not None:
        overrides["l_particles"] = max(config.particle_budget // method.m_best, 1)
    return FilterConfig(
        grouping=method.grouping,
        m_best=method.m_best,
        **overrides,
    )


def _truncate(frames, steps):
    return frames if steps is None else frames[:steps]


def run_cell(config: ExperimentConfig, method: MethodSpec, run: int):
    """Execute one (method, run) cell; returns (metric rows, track records)."""
    spec = config.scenario
    truth = simulate_truth(spec)
    sim_rng = np.random.default_rng(np.random.SeedSequence([config.base_seed, run, _SIM_SALT]))
    frames = _truncate(synthesize(truth, spec, sim_rng), config.steps)
    fc = filter_config_for(config, method)
    reports, _ = run_filter(
        frames, fc, np.random.SeedSequence([config.base_seed, run, _FILTER_SALT])
    )

    truth_tracks = truth.positions()
    last = frames[-1].k if frames else 0
    for per in truth_tracks.values():
        for k in [k for k in per if k > last]:
            del per[k]
    est_tracks: dict[int, dict[int, np.ndarray]] = {}
    for report in reports:
        for tid in report.confirmed:
            if tid in report.estimates:
                est_tracks.setdefault(tid, {})[report.step] = report.estimates[tid][[0, 2]]

    subsets = {name: ids for name, ids in spec.groups.items()}
    rows = []
    records = []
    for report in reports:
        parts = ospa2_decomposed(truth_tracks, est_tracks, config.ospa, report.step, subsets)
        timings = report.timings
        rows.append(
            {
                "method": method.name,
                "run": run,
                "step": report.step,
                "ospa2_total": parts["total"],
                "ospa2_group": parts.get("group", 0.0),
                "ospa2_single": parts.get("single", 0.0),
                "n_confirmed": len(report.confirmed),
                "bp_iters": report.bp_iterations,
                "t_predict_ms": 1e3 * timings["predict"],
                "t_assoc_ms": 1e3 * timings["associate"],
                "t_update_ms": 1e3 * (timings["update"] + timings["resample"]),
            }
        )
        records.append(
            {
                "method": method.name,
                "run": run,
                "step": report.step,
                "estimates": [
                    {
                        "id": tid,
                        "x": [float(v) for v in report.estimates[tid]],
                        "existence": report.existences[tid],
                        "confirmed": tid in report.confirmed,
                    }
                    for tid in sorted(report.estimates)
                ],
                "partitions": [
                    {
                        "labels": list(labels),
                        "alpha": float(report.alpha[i]),
                        "posterior": float(report.posterior[i]),
                    }
                    for i, labels in enumerate(report.partitions)
                ],
                "partition_ids": list(report.partition_ids),
                "bp_iters": report.bp_iterations,
            }
        )
    return rows, records


def _cell_args(config: ExperimentConfig):
    for run in range(config.runs):
        for method in config.methods:
            yield method, run


def run_experiment(config: ExperimentConfig, workers: int | None = None):
    """All cells of the batch; rows/records ordered by (run, method, step)."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    cells = list(_cell_args(config))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_star, [(config, m, r) for m, r in cells]))
    else:
        results = []
        for method, run in cells:
            try:
                results.append(run_cell(config, method, run))
            except Exception as e:
                raise RuntimeError(f"method {method.name}, run {run}: {e}") from e
    rows = []
    records = []
    for cell_rows, cell_records in results:
        rows.extend(cell_rows)
        records.extend(cell_records)
    return rows, records


def _run_cell_star(args):
    config, method, run = args
    try:
        return run_cell(config, method, run)
    except Exception as e:
        raise RuntimeError(f"method {method.name}, run {run}: {e}") from e


def mean_ospa2(rows, method: str, column: str, step_range: tuple[int, int]) -> float:
    """Mean of a metric column for one method over an inclusive step range."""
    lo, hi = step_range
    vals = [r[column] for r in rows if r["method"] == method and lo <= r["step"] <= hi]
    if not vals:
        raise ValueError(f"no rows for method {method} in steps {step_range}")
    return float(np.mean(vals))


# -- benchmark sweeps --------------------------------------------------------

SWEEPS = ("m", "clutter", "targets")


def _bench_config(sweep: str, value: float, steps: int, l_particles: int) -> ExperimentConfig:
    if sweep == "m":
        scenario = build_scenario2(n_targets=5, duration=steps)
        method = MethodSpec(f"gtbp-{int(value)}best", True, int(value))
        n_max = 8
    elif sweep == "clutter":
        scenario = replace(build_scenario2(n_targets=5, duration=steps), clutter_mean=float(value))
        method = MethodSpec("gtbp-2best", True, 2)
        n_max = 8
    elif sweep == "targets":
        scenario = build_scenario2(n_targets=int(value), centered=True, duration=steps)
        method = MethodSpec("gtbp-2best", True, 2)
        # roomy cap: measuring the scaling requires the capacity cap not to
        # saturate at the large end (short-lived duplicate candidates add ~n)
        n_max = 2 * int(value) + 10
    else:
        raise ValueError(f"unknown sweep {sweep!r}; expected one of {SWEEPS}")
    return ExperimentConfig(
        scenario=scenario,
        methods=[method],
        filter_overrides={
            "l_particles": l_particles,
            "n_max": n_max,
            "bp_fixed_iterations": 20,
        },
    )


def bench_sweep(
    sweep: str,
    values,
    runs: int = 2,
    steps: int = 20,
    l_particles: int = 1000,
    base_seed: int = 0,
):
    """Measure mean per-step wall time against one swept parameter.

    Returns ``(rows, fit)`` where rows carry raw per-run timings and ``fit``
    holds a least-squares line: runtime vs value for the m/clutter sweeps and
    log runtime vs log value for the target sweep, each with its R^2.
    """
    values = list(values)
    if len(values) < 2:
        raise ValueError("sweeps need at least 2 points")
    rows = []
    for value in values:
        config = _bench_config(sweep, value, steps, l_particles)
        config = replace(config, runs=runs, base_seed=base_seed)
        method = config.methods[0]
        spec = config.scenario
        truth = simulate_truth(spec)
        for run in range(runs):
            sim_rng = np.random.default_rng(
                np.random.SeedSequence([base_seed, run, _SIM_SALT])
            )
            frames = synthesize(truth, spec, sim_rng)
            fc = filter_config_for(config, method)
            t0 = time.perf_counter()
            reports, _ = run_filter(
                frames, fc, np.random.SeedSequence([base_seed, run, _FILTER_SALT])
            )
            wall = time.perf_counter() - t0
            # skip the spin-up steps where tracks are still being initiated
            steady = reports[5:] if len(reports) > 8 else reports
            per_step = [sum(r.timings.values()) for r in steady]
            rows.append(
                {
                    "sweep": sweep,
                    "value": value,
                    "run": run,
                    "mean_step_ms": 1e3 * float(np.mean(per_step)),
                    "total_s": wall,
                    "steps": len(reports),
                    "method": method.name,
                }
            )
    fit = fit_sweep(rows, loglog=(sweep == "targets"))
    return rows, fit


def fit_sweep(rows, loglog: bool) -> dict:
    """Least-squares line over the per-value mean step times.

    Runs at the same sweep value are averaged first, so the fit measures the
    shape of the curve rather than run-to-run timing jitter.
    """
    by_value: dict[float, list[float]] = {}
    for r in rows:
        by_value.setdefault(float(r["value"]), []).append(float(r["mean_step_ms"]))
    x = np.array(sorted(by_value))
    # median over repeated runs: robust to scheduler/GC interference
    y = np.array([np.median(by_value[v]) for v in x])
    if loglog:
        x, y = np.log(x), np.log(y)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "loglog": loglog}
