"""Experiment runner: generates instances, runs the requested solvers, and
emits a versioned CSV plus a per-cell summary.

CSV schema (`# drsub-csv v1` comment line, then a header row):
family,n,seed,algorithm,value,value_ratio,rounds,queries,iterations,min_f_seen,wall_ms

Reruns with an identical spec are byte-identical except the wall_ms column.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

from . import instances
from .baselines import GreedyConfig, continuous_greedy, mwu_solve
from .solver import SolveResult, SolverConfig, solve_with_target_guess
from .vectors import EvalLedger

CSV_VERSION_LINE = "# drsub-csv v1"
CSV_COLUMNS = ("family", "n", "seed", "algorithm", "value", "value_ratio",
               "rounds", "queries", "iterations", "min_f_seen", "wall_ms")
ALGORITHMS = ("greedy", "parallel", "mwu")
DECAY_MODES = ("guarantee", "experiment")
EXPERIMENT_DECAY = 0.75


@dataclass
class ExperimentSpec:
    families: tuple[str, ...] = ("nqp", "dpp")
    n_values: tuple[int, ...] = (25, 50, 100, 200)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    epsilon: float = 0.05
    k: float = 10.0
    algorithms: tuple[str, ...] = ALGORITHMS
    decay_mode: str = "experiment"

    def validate(self) -> None:
        if not self.families:
            raise ValueError("families must be non-empty")
        if not self.n_values:
            raise ValueError("n_values must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.algorithms:
            raise ValueError("algorithms must be non-empty")
        for fam in self.families:
            if fam not in instances.FAMILIES:
                raise ValueError(f"unknown family {fam!r}")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {alg!r}")
        if self.decay_mode not in DECAY_MODES:
            raise ValueError(f"decay_mode must be one of {DECAY_MODES}")

    def solver_config(self) -> SolverConfig:
        decay = EXPERIMENT_DECAY if self.decay_mode == "experiment" else None
        return SolverConfig(epsilon=self.epsilon, k=self.k, decay=decay)


@dataclass
class ResultRow:
    family: str
    n: int
    seed: int
    algorithm: str
    value: float | None = None
    value_ratio: float | None = None
    rounds: int | None = None
    queries: int | None = None
    iterations: int | None = None
    min_f_seen: float | None = None
    wall_ms: float | None = None
    error: str | None = None

    def as_csv(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            return repr(v) if isinstance(v, float) else str(v)

        return [self.family, str(self.n), str(self.seed), self.algorithm,
                fmt(self.value), fmt(self.value_ratio), fmt(self.rounds),
                fmt(self.queries), fmt(self.iterations), fmt(self.min_f_seen),
                fmt(self.wall_ms)]


def _run_cell(family: str, n: int, seed: int, spec: ExperimentSpec) -> list[ResultRow]:
    rows: list[ResultRow] = []
    inst = instances.generate(instances.InstanceSpec(family, n, seed))
    greedy_value: float | None = None
    m_for_mwu: float | None = None

    def run(algorithm: str) -> tuple[SolveResult, float]:
        oracle = instances.make_oracle(inst, EvalLedger())
        start = time.perf_counter()
        if algorithm == "greedy":
            result = continuous_greedy(oracle, GreedyConfig(epsilon=spec.epsilon, k=spec.k))
        elif algorithm == "parallel":
            result = solve_with_target_guess(oracle, spec.solver_config())
        else:
            result = mwu_solve(oracle, spec.k, spec.epsilon, _mwu_target(spec, inst))
        return result, (time.perf_counter() - start) * 1000.0

    def _mwu_target(spec, inst) -> float:
        # The grid winner from the parallel run is shared for parity, but MWU
        # needs a target within (1 + eps) of the optimum to make progress, so
        # it is capped by the scaled greedy value when one is available.
        cap = (1.0 + spec.epsilon) * greedy_value if greedy_value else None
        M = m_for_mwu
        if M is not None and cap is not None:
            return min(M, cap)
        if M is not None:
            return M
        if cap is not None:
            return cap
        probe = instances.make_oracle(inst, EvalLedger())
        return _fallback_target(probe, spec)

    # greedy first so ratios exist, then parallel so mwu can share its target
    order = [a for a in ("greedy", "parallel", "mwu") if a in spec.algorithms]
    for algorithm in order:
        row = ResultRow(family=family, n=n, seed=seed, algorithm=algorithm)
        try:
            result, wall_ms = run(algorithm)
        except Exception as exc:  # failed cells are data, the sweep continues
            row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        row.value = result.value
        row.rounds = result.ledger.rounds
        row.queries = result.ledger.total_queries
        row.iterations = len(result.trace)
        row.min_f_seen = None if math.isinf(result.ledger.min_value_seen) else result.ledger.min_value_seen
        row.wall_ms = wall_ms
        if algorithm == "greedy":
            greedy_value = result.value
        if algorithm == "parallel":
            m_for_mwu = result.m_used
        if greedy_value is not None:
            row.value_ratio = result.value / greedy_value if greedy_value != 0.0 else None
        rows.append(row)
    return rows


def _fallback_target(oracle, spec: ExperimentSpec) -> float:
    # mwu requested without the parallel run that normally supplies its
    # target: fall back to the concavity upper bound from the guess round
    from .solver import target_grid

    return target_grid(oracle, spec.solver_config()).upper


def rows_to_csv(rows: list[ResultRow]) -> str:
    out = io.StringIO()
    out.write(CSV_VERSION_LINE + "\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())
    return out.getvalue()


@dataclass
class CellSummary:
    family: str
    n: int
    algorithm: str
    mean_ratio: float | None
    std_ratio: float | None
    mean_rounds: float | None
    std_rounds: float | None
    runs: int = 0
    failures: int = 0


def summarize(rows: list[ResultRow]) -> list[CellSummary]:
    groups: dict[tuple[str, int, str], list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.family, row.n, row.algorithm), []).append(row)
    out = []
    for (family, n, algorithm), members in sorted(groups.items()):
        ok = [r for r in members if r.error is None]
        ratios = [r.value_ratio for r in ok if r.value_ratio is not None]
        rounds = [float(r.rounds) for r in ok if r.rounds is not None]
        out.append(CellSummary(
            family=family, n=n, algorithm=algorithm,
            mean_ratio=_mean(ratios), std_ratio=_std(ratios),
            mean_rounds=_mean(rounds), std_rounds=_std(rounds),
            runs=len(members), failures=len(members) - len(ok),
        ))
    return out


def _mean(xs):
    return sum(xs) / len(xs) if xs else None


def _std(xs):
    if not xs:
        return None
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


def format_summary(summaries: list[CellSummary]) -> str:
    lines = [f"{'family':<6} {'n':>5} {'algorithm':<9} {'value_ratio':>22} {'rounds':>22} {'runs':>5}"]
    for s in summaries:
        ratio = "-" if s.mean_ratio is None else f"{s.mean_ratio:.4f} +- {s.std_ratio:.4f}"
        rounds = "-" if s.mean_rounds is None else f"{s.mean_rounds:.1f} +- {s.std_rounds:.1f}"
        flag = f"{s.runs}" if not s.failures else f"{s.runs} ({s.failures} failed)"
        lines.append(f"{s.family:<6} {s.n:>5} {s.algorithm:<9} {ratio:>22} {rounds:>22} {flag:>5}")
    return "\n".join(lines)


def run_experiment(spec: ExperimentSpec, out_path: str | None = None) -> list[ResultRow]:
    """Run every (family, n, seed, algorithm) cell, write the CSV if a path is
    given, print the summary, and return the rows in deterministic order.
    """
    spec.validate()
    rows: list[ResultRow] = []
    for family in sorted(spec.families):
        for n in sorted(spec.n_values):
            for seed in sorted(spec.seeds):
                rows.extend(_run_cell(family, n, seed, spec))
    rows.sort(key=lambda r: (r.family, r.n, r.seed, ALGORITHMS.index(r.algorithm)))
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(rows))
    print(format_summary(summarize(rows)))
    return rows
