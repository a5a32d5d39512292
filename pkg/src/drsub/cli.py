"""Command-line entry point.

Subcommands:
  run     sweep (family, n, seed, algorithm) cells and write the results CSV
  gen     emit a generated instance as JSON
  verify  diminishing-returns and gradient checks for one instance
  trace   single solver run, emit the per-iteration trace CSV

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import instances
from .baselines import GreedyConfig, continuous_greedy, mwu_solve
from .harness import ALGORITHMS, DECAY_MODES, ExperimentSpec, run_experiment
from .solver import solve_with_target_guess, trace_to_csv
from .vectors import GRAD, batch_eval

DEFAULT_DR_TOL = {"nqp": 1e-9, "dpp": 1e-7, "cut": 1e-7}
DEFAULT_FD_TOL = {"nqp": 1e-6, "dpp": 1e-4, "cut": 1e-9}
# central differences have zero truncation error on the quadratic and
# multilinear families, so a larger step there only reduces cancellation; the
# dpp family needs a small step to keep the O(step^2) truncation term down
DEFAULT_FD_STEP = {"nqp": 1e-4, "dpp": 1e-5, "cut": 1e-3}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drsub", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep")
    run.add_argument("--config", help="JSON file with spec fields; flags override")
    run.add_argument("--out", help="output CSV path", default="results.csv")
    run.add_argument("--families", help="comma-separated subset of nqp,dpp,cut")
    run.add_argument("--n", help="comma-separated dimensions")
    run.add_argument("--seeds", help="comma-separated seeds")
    run.add_argument("--epsilon", type=float)
    run.add_argument("--k", type=float)
    run.add_argument("--algorithms", help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    run.add_argument("--decay", choices=DECAY_MODES)

    gen = sub.add_parser("gen", help="emit an instance as JSON")
    gen.add_argument("--family", required=True, choices=instances.FAMILIES)
    gen.add_argument("--n", required=True, type=int)
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--out", help="output path (default: stdout)")

    verify = sub.add_parser("verify", help="DR-submodularity and gradient checks")
    verify.add_argument("--family", required=True, choices=instances.FAMILIES)
    verify.add_argument("--n", required=True, type=int)
    verify.add_argument("--seed", required=True, type=int)
    verify.add_argument("--trials", type=int, default=100)
    verify.add_argument("--tol", type=float)

    trace = sub.add_parser("trace", help="single run, emit the iteration trace CSV")
    trace.add_argument("--family", required=True, choices=instances.FAMILIES)
    trace.add_argument("--n", required=True, type=int)
    trace.add_argument("--seed", required=True, type=int)
    trace.add_argument("--algorithm", default="parallel", choices=ALGORITHMS)
    trace.add_argument("--epsilon", type=float, default=0.05)
    trace.add_argument("--k", type=float, default=10.0)
    trace.add_argument("--decay", choices=DECAY_MODES, default="experiment")
    trace.add_argument("--out", help="output path (default: stdout)")
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    fields: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            fields.update(json.load(fh))
    if args.families is not None:
        fields["families"] = _csv_list(args.families)
    if args.n is not None:
        fields["n_values"] = [int(v) for v in _csv_list(args.n)]
    if args.seeds is not None:
        fields["seeds"] = [int(v) for v in _csv_list(args.seeds)]
    if args.epsilon is not None:
        fields["epsilon"] = args.epsilon
    if args.k is not None:
        fields["k"] = args.k
    if args.algorithms is not None:
        fields["algorithms"] = _csv_list(args.algorithms)
    if args.decay is not None:
        fields["decay_mode"] = args.decay
    spec = ExperimentSpec()
    for key, value in fields.items():
        if not hasattr(spec, key):
            raise ValueError(f"unknown spec field {key!r}")
        if key in ("families", "n_values", "seeds", "algorithms"):
            value = tuple(value)
        setattr(spec, key, value)
    spec.validate()
    return spec


def _finite_difference_check(inst, seed: int, points: int = 20, step: float = 1e-5) -> float:
    """Max per-coordinate relative error of the analytic gradient vs central
    finite differences at random interior points.
    """
    oracle = instances.make_oracle(inst)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        x = rng.uniform(0.05, 0.95, size=oracle.dim)
        g = oracle.grad_fn(x)
        fd = np.empty_like(g)
        for i in range(oracle.dim):
            hi, lo = x.copy(), x.copy()
            hi[i] += step
            lo[i] -= step
            fd[i] = (oracle.value_fn(hi) - oracle.value_fn(lo)) / (2.0 * step)
        rel = np.abs(fd - g) / np.maximum(np.abs(g), 1e-8)
        worst = max(worst, float(np.max(rel)))
    return worst


def _cmd_run(args) -> int:
    spec = _spec_from_args(args)
    run_experiment(spec, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_gen(args) -> int:
    text = instances.instance_to_json(instances.InstanceSpec(args.family, args.n, args.seed))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_verify(args) -> int:
    inst = instances.generate(instances.InstanceSpec(args.family, args.n, args.seed))
    tol = args.tol if args.tol is not None else DEFAULT_DR_TOL[args.family]
    oracle = instances.make_oracle(inst)
    report = instances.verify_dr(oracle, trials=args.trials, seed=args.seed, tol=tol)
    fd_err = _finite_difference_check(inst, seed=args.seed,
                                      step=DEFAULT_FD_STEP[args.family])
    fd_tol = DEFAULT_FD_TOL[args.family]
    print(f"{len(report.violations)} DR violations in {args.trials} trials (tol {tol})")
    print(f"gradient max relative error {fd_err:.3e} (tol {fd_tol})")
    return 0 if report.ok and fd_err <= fd_tol else 2


def _cmd_trace(args) -> int:
    inst = instances.generate(instances.InstanceSpec(args.family, args.n, args.seed))
    oracle = instances.make_oracle(inst)
    spec = ExperimentSpec(families=(args.family,), n_values=(args.n,), seeds=(args.seed,),
                          epsilon=args.epsilon, k=args.k, decay_mode=args.decay)
    spec.validate()
    if args.algorithm == "parallel":
        result = solve_with_target_guess(oracle, spec.solver_config())
    elif args.algorithm == "greedy":
        result = continuous_greedy(oracle, GreedyConfig(epsilon=args.epsilon, k=args.k))
    else:
        from .solver import target_grid
        probe = instances.make_oracle(inst)
        result = mwu_solve(oracle, args.k, args.epsilon,
                           target_grid(probe, spec.solver_config()).upper)
    text = trace_to_csv(result.trace)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"run": _cmd_run, "gen": _cmd_gen, "verify": _cmd_verify, "trace": _cmd_trace}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
