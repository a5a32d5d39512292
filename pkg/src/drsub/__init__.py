"""Solvers and benchmarks for DR-submodular maximization under a cardinality
constraint: a low-adaptivity parallel threshold algorithm, continuous-greedy
and MWU baselines, seeded instance families, and an experiment harness.
"""

from .baselines import GreedyConfig, continuous_greedy, linear_maximizer, mwu_solve
from .harness import ExperimentSpec, ResultRow, run_experiment
from .instances import (
    CutInstance,
    DppInstance,
    InstanceSpec,
    NqpInstance,
    gen_cut,
    gen_dpp,
    gen_nqp,
    generate,
    make_oracle,
    verify_dr,
)
from .solver import (
    IterationRecord,
    SolveResult,
    SolverConfig,
    solve,
    solve_with_target_guess,
    trace_to_csv,
)
from .vectors import EvalLedger, Oracle, batch_eval, hadamard, join, meet, norms, point

__all__ = [
    "CutInstance", "DppInstance", "EvalLedger", "ExperimentSpec", "GreedyConfig",
    "InstanceSpec", "IterationRecord", "NqpInstance", "Oracle", "ResultRow",
    "SolveResult", "SolverConfig", "batch_eval", "continuous_greedy", "gen_cut",
    "gen_dpp", "gen_nqp", "generate", "hadamard", "join", "linear_maximizer",
    "make_oracle", "meet", "mwu_solve", "norms", "point", "run_experiment",
    "solve", "solve_with_target_guess", "trace_to_csv", "verify_dr",
]
