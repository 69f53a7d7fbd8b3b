"""Render figures from experiment CSV files.

Three figure kinds, all driven purely by column names so the tool works on
any CSV with the documented schemas:

- ``ospa-vs-step``: tracking error against the time step, one curve per group
  (method by default), values averaged over repeated runs.
- ``sweep``: a summary value against a swept parameter (falls back to the
  step column when no sweep column exists).
- ``runtime``: per-step computation time against the sweep value or step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

KINDS = ("ospa-vs-step", "sweep", "runtime")

TIMING_COLUMNS = ("t_predict_ms", "t_assoc_ms", "t_update_ms")


class RenderError(ValueError):
    """Bad figure request: unknown kind, missing column, or empty input."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSV, figure kind, grouping column, output path."""

    input_path: str
    kind: str
    output_path: str
    group_by: str | None = "method"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


@dataclass
class RenderResult:
    """Where the figure went and which curves it contains."""

    output_path: str
    curves: list[str] = field(default_factory=list)
    x_column: str = ""
    y_column: str = ""


def _read_rows(path: str) -> list[dict]:
    try:
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as e:
        raise RenderError(f"cannot read {path}: {e}") from e
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return rows


def _pick(rows: list[dict], candidates: tuple[str, ...], what: str) -> str:
    for name in candidates:
        if name in rows[0]:
            return name
    raise RenderError(f"missing column for {what}: tried {', '.join(candidates)}")


def _axes(kind: str, rows: list[dict]) -> tuple[str, str, str]:
    """(x column, y column, y label with units) for a figure kind."""
    if kind == "ospa-vs-step":
        x = _pick(rows, ("step",), "time step")
        y = _pick(rows, ("ospa2_total",), "tracking error")
        return x, y, "track-set OSPA [m]"
    if kind == "sweep":
        x = _pick(rows, ("value", "step"), "swept parameter")
        y = _pick(rows, ("ospa2_total", "mean_step_ms"), "summary value")
        unit = "[m]" if y.startswith("ospa") else "[ms]"
        return x, y, f"{y} {unit}"
    x = _pick(rows, ("value", "step"), "swept parameter")
    if "mean_step_ms" in rows[0]:
        return x, "mean_step_ms", "mean step time [ms]"
    _pick(rows, TIMING_COLUMNS, "step timings")
    return x, "+".join(TIMING_COLUMNS), "step time [ms]"


def _y_value(row: dict, y_column: str) -> float:
    if "+" in y_column:
        return sum(float(row[c]) for c in y_column.split("+"))
    return float(row[y_column])


def render(spec: FigureSpec) -> RenderResult:
    """Render the figure and write it to ``spec.output_path``."""
    rows = _read_rows(spec.input_path)
    x_col, y_col, y_label = _axes(spec.kind, rows)
    group_col = spec.group_by if spec.group_by and spec.group_by in rows[0] else None

    series: dict[str, dict[float, list[float]]] = {}
    for row in rows:
        key = row[group_col] if group_col else "all"
        try:
            x = float(row[x_col])
            y = _y_value(row, y_col)
        except (KeyError, ValueError) as e:
            raise RenderError(f"bad row in {spec.input_path}: {e}") from e
        series.setdefault(key, {}).setdefault(x, []).append(y)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    curves = []
    for key in sorted(series):
        xs = sorted(series[key])
        ys = [sum(series[key][x]) / len(series[key][x]) for x in xs]
        marker = "o" if len(xs) <= 12 else None
        ax.plot(xs, ys, label=str(key), marker=marker)
        curves.append(str(key))
    ax.set_xlabel("time step" if x_col == "step" else x_col)
    ax.set_ylabel(y_label)
    ax.grid(True, alpha=0.3)
    if group_col:
        ax.legend(title=group_col)
    fig.tight_layout()
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return RenderResult(
        output_path=str(out), curves=curves, x_column=x_col, y_column=y_col
    )
