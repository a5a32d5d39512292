"""Aggregation and figure layout for the drsub benchmark CSV.

Input is the `# drsub-csv v1` file emitted by the benchmark harness; this
package touches nothing else from the solver side. One figure = four panels
(value-ratio and rounds versus n, for the nqp and dpp families), each series
being the per-seed mean with +-1 standard deviation error bars.

Deterministic color per algorithm:
  greedy   #1f77b4 (blue)
  parallel #d62728 (red)
  mwu      #2ca02c (green)
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field

CSV_VERSION_LINE = "# drsub-csv v1"
EXPECTED_COLUMNS = ["family", "n", "seed", "algorithm", "value", "value_ratio",
                    "rounds", "queries", "iterations", "min_f_seen", "wall_ms"]
PANEL_FAMILIES = ("nqp", "dpp")
PANEL_METRICS = ("value_ratio", "rounds")
ALGORITHM_COLORS = {"greedy": "#1f77b4", "parallel": "#d62728", "mwu": "#2ca02c"}
METRIC_LABELS = {"value_ratio": "function value (ratio to greedy)",
                 "rounds": "adaptive rounds"}


class SchemaError(ValueError):
    """The input file is not a drsub-csv v1 document."""


@dataclass
class Row:
    family: str
    n: int
    seed: int
    algorithm: str
    value_ratio: float
    rounds: float


@dataclass
class Series:
    algorithm: str
    n_values: list[int]
    means: list[float]
    stds: list[float]


@dataclass
class Panel:
    family: str
    metric: str
    title: str
    series: list[Series] = field(default_factory=list)


@dataclass
class Figure:
    panels: list[Panel]
    warnings: list[str] = field(default_factory=list)


def load_rows(path: str) -> list[Row]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_VERSION_LINE:
        raise SchemaError(f"{path}: missing '{CSV_VERSION_LINE}' header line")
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    if reader.fieldnames != EXPECTED_COLUMNS:
        raise SchemaError(f"{path}: unexpected columns {reader.fieldnames}")
    rows = []
    for rec in reader:
        if not rec["value_ratio"] or not rec["rounds"]:
            continue  # failed cell; the harness records the error message instead
        rows.append(Row(family=rec["family"], n=int(rec["n"]), seed=int(rec["seed"]),
                        algorithm=rec["algorithm"],
                        value_ratio=float(rec["value_ratio"]),
                        rounds=float(rec["rounds"])))
    return rows


def _mean_std(values: list[float]) -> tuple[float, float]:
    m = sum(values) / len(values)
    return m, math.sqrt(sum((v - m) ** 2 for v in values) / len(values))


def build_figure(rows: list[Row]) -> Figure:
    """Aggregate rows into the four-panel layout. Families with no rows are
    dropped with a warning rather than rendered empty.
    """
    grouped: dict[tuple[str, int, str], list[Row]] = {}
    for row in rows:
        grouped.setdefault((row.family, row.n, row.algorithm), []).append(row)
    figure = Figure(panels=[])
    for family in PANEL_FAMILIES:
        n_values = sorted({n for (fam, n, _alg) in grouped if fam == family})
        if not n_values:
            figure.warnings.append(f"no rows for family {family!r}; panels skipped")
            continue
        algorithms = [alg for alg in ALGORITHM_COLORS
                      if any(fam == family and alg == a for (fam, _n, a) in grouped)]
        for metric in PANEL_METRICS:
            panel = Panel(family=family, metric=metric,
                          title=f"{family} instances: {METRIC_LABELS[metric]}")
            for algorithm in algorithms:
                ns, means, stds = [], [], []
                for n in n_values:
                    members = grouped.get((family, n, algorithm))
                    if not members:
                        figure.warnings.append(
                            f"no rows for ({family}, n={n}, {algorithm}); point skipped")
                        continue
                    samples = [getattr(r, metric) for r in members]
                    mean, std = _mean_std(samples)
                    ns.append(n)
                    means.append(mean)
                    stds.append(std)
                panel.series.append(Series(algorithm=algorithm, n_values=ns,
                                           means=means, stds=stds))
            figure.panels.append(panel)
    return figure


def render(csv_path: str, out_dir: str) -> list[str]:
    """Write one PDF and one PNG per panel into out_dir; returns the paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    figure = build_figure(load_rows(csv_path))
    for warning in figure.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for panel in figure.panels:
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for series in panel.series:
            ax.errorbar(series.n_values, series.means, yerr=series.stds,
                        label=series.algorithm, color=ALGORITHM_COLORS[series.algorithm],
                        marker="o", capsize=3)
        ax.set_title(panel.title)
        ax.set_xlabel("n")
        ax.set_ylabel(METRIC_LABELS[panel.metric])
        ax.legend()
        fig.tight_layout()
        stem = f"{panel.family}-{'value' if panel.metric == 'value_ratio' else 'iters'}"
        for ext in ("pdf", "png"):
            path = out / f"{stem}.{ext}"
            fig.savefig(path)
            written.append(str(path))
        plt.close(fig)
    return written
