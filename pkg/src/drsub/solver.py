"""Low-adaptivity threshold solver for cardinality-constrained DR-submodular
maximization.

The solver keeps two coupled iterates 0 <= x <= z. Each phase j targets a
value level that decays geometrically with j; within a phase, a threshold v
selects the candidate coordinates whose masked gradient (1 - z) ∘ grad f(z)
still clears v, and the step size is the largest one that (a) keeps at least
a (1 - eps) fraction of the candidates above threshold and (b) respects the
phase budget eps*j*k on ||z||_1. Steps are found with batched t-ary search so
the whole inner iteration costs O(1) adaptive rounds.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .vectors import GRAD, VALUE, EvalLedger, Oracle, batch_eval


class InvalidBudget(ValueError):
    """k must satisfy 0 < k <= n."""


class BudgetExhausted(RuntimeError):
    """Step computation requested after the phase l1 budget was already met."""


class DegenerateObjective(RuntimeError):
    """No positive direction exists: every upper bound on the optimum is <= 0."""


class IterationCapExceeded(RuntimeError):
    """The run exceeded the provable iteration bound; indicates a bug."""


class InvariantViolation(RuntimeError):
    """A per-iteration solver invariant failed."""


@dataclass
class SolverConfig:
    epsilon: float = 0.05
    k: float = 10.0
    decay: float | None = None      # threshold decay factor; None -> 1 - eps
    arity: int = 8                  # t-ary search branching factor
    delta: float | None = None      # step-search resolution; None -> auto
    delta_constant: float = 0.1     # constant in eps^4 / (ln n * ln(1/eps))
    delta_floor: float = 1e-12
    l1_tol: float = 1e-12
    check_invariants: bool = True

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 0.25):
            raise ValueError("epsilon must be in (0, 0.25]")
        if self.arity < 2:
            raise ValueError("arity must be >= 2")
        if self.decay is not None and not (0.0 < self.decay < 1.0):
            raise ValueError("decay must be in (0, 1)")

    def phases(self) -> int:
        return math.ceil(1.0 / self.epsilon)

    def eps_internal(self) -> float:
        # Round phases up to an integer and rescale so the per-phase budgets
        # and (1 - eps)^j targets align exactly.
        return 1.0 / self.phases()

    def resolved_decay(self) -> float:
        return self.decay if self.decay is not None else 1.0 - self.eps_internal()

    def resolved_delta(self, n: int) -> float:
        eps = self.eps_internal()
        if self.delta is not None:
            d = self.delta
        elif n < 2:
            d = self.delta_floor
        else:
            d = self.delta_constant * eps**4 / (math.log(n) * math.log(1.0 / eps))
        return min(max(d, self.delta_floor), eps * eps)

    def iteration_cap(self, n: int) -> int:
        eps = self.eps_internal()
        gamma = self.resolved_decay()
        thresholds = math.ceil(math.log(eps) / math.log(gamma))
        large = math.ceil(2.0 / eps)
        small = math.ceil(2.0 * math.log(max(n, 2)) / eps) + 1
        return self.phases() * thresholds * (large + small)


@dataclass
class IterationRecord:
    phase: int
    v: float
    set_size: int
    eta: float
    eta1: float
    eta2: float
    kind: str       # "large" | "smaller" | "threshold-drop" (solvers reuse: "greedy" | "mwu")
    z_l1: float
    f_x: float
    f_z: float
    round_index: int


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    trace: list[IterationRecord]
    ledger: EvalLedger
    m_used: float = float("nan")


TRACE_COLUMNS = ("phase", "v", "setsize", "eta", "eta1", "eta2", "kind", "z_l1", "f_x", "f_z", "round")


def trace_to_csv(trace: list[IterationRecord]) -> str:
    out = io.StringIO()
    out.write(",".join(TRACE_COLUMNS) + "\n")
    for r in trace:
        out.write(
            f"{r.phase},{r.v!r},{r.set_size},{r.eta!r},{r.eta1!r},{r.eta2!r},"
            f"{r.kind},{r.z_l1!r},{r.f_x!r},{r.f_z!r},{r.round_index}\n"
        )
    return out.getvalue()


def candidate_set(z: np.ndarray, z_start: np.ndarray, g: np.ndarray, v: float,
                  j: int, eps: float) -> np.ndarray:
    """Indices whose masked gradient clears the threshold and whose coordinate
    still has headroom, both globally (z_i <= 1 - (1-eps)^j) and within this
    phase (growth < eps fraction of the remaining gap at phase start).

    Comparisons are exact float comparisons.
    """
    room = 1.0 - (1.0 - eps) ** j
    keep = (g >= v) & (z <= room) & (z - z_start < eps * (1.0 - z_start))
    return np.nonzero(keep)[0]


def stepped_point(z: np.ndarray, members: np.ndarray, eta: float) -> np.ndarray:
    """z(eta) = z + eta (1 - z) on the member coordinates."""
    out = z.copy()
    out[members] = z[members] + eta * (1.0 - z[members])
    return out


def step_sets(z: np.ndarray, members: np.ndarray, eta: float, grad_at: np.ndarray,
              v: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Given grad f at z(eta), return (z(eta), masked gradient g(eta),
    surviving set S(eta) = {i: g(eta)_i >= v}, positive set T(eta) = {i: g(eta)_i > 0}).
    """
    z_eta = stepped_point(z, members, eta)
    g_eta = (1.0 - z_eta) * grad_at
    s_eta = members[g_eta[members] >= v]
    t_eta = members[g_eta[members] > 0.0]
    return z_eta, g_eta, s_eta, t_eta


def budget_step_cap(z: np.ndarray, members: np.ndarray, eps: float, j: int,
                    k: float, l1_tol: float = 1e-12) -> float:
    """Largest step in [0, eps^2] keeping ||z(eta)||_1 within the phase budget
    eps*j*k: min{eps^2, (eps j k - ||z||_1) / sum_{i in S}(1 - z_i)}.
    """
    z_l1 = float(np.sum(z))
    budget = eps * j * k
    if z_l1 >= budget - l1_tol:
        raise BudgetExhausted(f"||z||_1 = {z_l1} already at phase budget {budget}")
    denom = len(members) - float(np.sum(z[members]))
    return min(eps * eps, (budget - z_l1) / denom)


def find_set_step(oracle: Oracle, z: np.ndarray, members: np.ndarray, v: float,
                  eps: float, delta: float, arity: int,
                  extra: tuple[float, ...] = ()) -> tuple[float, dict[float, np.ndarray]]:
    """Approximate the largest step eta in [0, eps^2] for which at least
    ceil((1 - eps)|S|) candidates keep a masked gradient >= v.

    t-ary search, one ledger batch per level; the first level also probes
    eta = eps^2 so the early exit (gradient never decays enough) costs the
    same round, plus any `extra` steps the caller wants evaluated for reuse.
    Returns (eta1, probed) where probed maps a step to the gradient seen at
    z(step) -- it always covers the extras and, after a full search, the
    bracket endpoint eta1 - (hi - lo) <= eta1 within delta of the maximizer.
    The result overshoots the exact maximizer by at most delta.
    """
    cap = eps * eps
    need = math.ceil((1.0 - eps) * len(members))

    def survivors(grad_at: np.ndarray, eta: float) -> int:
        z_eta = stepped_point(z, members, eta)
        g_eta = (1.0 - z_eta) * grad_at
        return int(np.sum(g_eta[members] >= v))

    probed: dict[float, np.ndarray] = {}
    lo, hi = 0.0, cap
    first = True
    while True:
        probes = [lo + (hi - lo) * i / arity for i in range(1, arity)]
        if first:
            probes.append(cap)
            probes.extend(p for p in extra if 0.0 < p < cap and p not in probes)
        grads = batch_eval(oracle, [(GRAD, stepped_point(z, members, p)) for p in probes])
        probed.update(zip(probes, grads))
        if first:
            if survivors(probed[cap], cap) >= need:
                return cap, probed
            probes = probes[:arity - 1]
            first = False
        for p in probes:
            if survivors(probed[p], p) >= need:
                lo = p
            else:
                hi = p
                break
        if hi - lo <= delta:
            return hi, probed


def solve(oracle: Oracle, config: SolverConfig, M: float) -> SolveResult:
    """Run the threshold algorithm against a target value M (ideally an
    (1 + eps)-approximate guess of the optimum; see solve_with_target_guess).
    """
    n = oracle.dim
    k = config.k
    if k <= 0 or k > n:
        raise InvalidBudget(f"need 0 < k <= n, got k={k}, n={n}")
    if not (M > 0):
        raise ValueError("target value M must be positive")

    eps = config.eps_internal()
    phases = config.phases()
    gamma = config.resolved_decay()
    delta = config.resolved_delta(n)
    cap = eps * eps
    l1_tol = config.l1_tol
    max_iters = config.iteration_cap(n)
    ledger = oracle.ledger

    x = np.zeros(n)
    z = np.zeros(n)
    trace: list[IterationRecord] = []

    # The oracle work per iteration is pipelined to keep the adaptive round
    # count at 1 + (search levels) per update and 0 per threshold drop:
    #   - grad f(z) and f(z) are cached and only re-queried after z moves,
    #     so consecutive threshold drops spend no extra rounds;
    #   - the values f(z'), f(x') that decide the x <- z swap ride along in
    #     the next iteration's gradient batch (nothing in between depends on
    #     them), resolved by _settle before anything reads f_x.
    grad_z, f_x = batch_eval(oracle, [(GRAD, z), (VALUE, z)])
    f_z = f_x
    x_pending: np.ndarray | None = None
    record_pending: IterationRecord | None = None

    def _settle(values):
        nonlocal x, f_x, f_z, x_pending, record_pending
        f_z, f_x_cand = values
        if f_z > f_x_cand:
            x, f_x = z.copy(), f_z
        else:
            x, f_x = x_pending, f_x_cand
        record_pending.f_x, record_pending.f_z = f_x, f_z
        record_pending.round_index = ledger.rounds
        x_pending = record_pending = None
        if config.check_invariants:
            _check_iteration(x, z, f_x, f_z, record_phase, eps,
                             eps * record_phase * k, l1_tol)

    for j in range(1, phases + 1):
        if x_pending is not None:
            _settle(batch_eval(oracle, [(VALUE, z), (VALUE, x_pending)]))
        z_start = z.copy()
        v_start = (((1.0 - eps) ** j - 2.0 * eps) * M - f_x) / k
        if v_start <= 0.0:
            # current value already exceeds the phase target; looping would
            # chase a negative threshold
            continue
        v = v_start
        budget = eps * j * k

        while v > eps * v_start and float(np.sum(z)) < budget - l1_tol:
            if len(trace) >= max_iters:
                raise IterationCapExceeded(
                    f"{len(trace)} iterations at phase {j}, v={v}; cap {max_iters}"
                )
            if grad_z is None:
                queries = [(GRAD, z)]
                if x_pending is not None:
                    queries += [(VALUE, z), (VALUE, x_pending)]
                results = batch_eval(oracle, queries)
                grad_z = results[0]
                if x_pending is not None:
                    _settle(results[1:])
            g = (1.0 - z) * grad_z
            S = candidate_set(z, z_start, g, v, j, eps)

            if len(S) == 0:
                trace.append(IterationRecord(
                    phase=j, v=v, set_size=0, eta=0.0, eta1=0.0, eta2=0.0,
                    kind="threshold-drop", z_l1=float(np.sum(z)),
                    f_x=f_x, f_z=f_z, round_index=ledger.rounds,
                ))
                v *= gamma
                continue

            eta2 = budget_step_cap(z, S, eps, j, k, l1_tol)
            eta1, probed = find_set_step(oracle, z, S, v, eps, delta, config.arity,
                                         extra=(max(eta2 - delta, 0.0),))
            eta = min(eta1, eta2)

            # Update set from the gradient at the nearest probe below eta:
            # the search bracket endpoint or the pre-seeded eta2 - delta point,
            # either way within delta of eta, matching the approximate-step
            # analysis. When the search early-exits at eta = eps^2 the step is
            # exact and no backoff is needed.
            back = max((p for p in probed if p <= eta), default=0.0)
            grad_back = probed[back] if back > 0.0 else grad_z
            _, _, _, T = step_sets(z, S, back, grad_back, v)

            x_new = x.copy()
            x_new[T] = x[T] + eta * (1.0 - x[T])
            z = stepped_point(z, S, eta)
            grad_z = None
            x_pending = x_new
            record_pending = IterationRecord(
                phase=j, v=v, set_size=len(S), eta=eta, eta1=eta1, eta2=eta2,
                kind="large" if eta == cap else "smaller",
                z_l1=float(np.sum(z)), f_x=math.nan, f_z=math.nan,
                round_index=ledger.rounds,
            )
            record_phase = j
            trace.append(record_pending)

    if x_pending is not None:
        _settle(batch_eval(oracle, [(VALUE, z), (VALUE, x_pending)]))
    return SolveResult(x=x, value=f_x, trace=trace, ledger=ledger.snapshot(), m_used=M)


def _check_iteration(x, z, f_x, f_z, j, eps, budget, l1_tol):
    if np.any(x > z + 1e-12):
        raise InvariantViolation("x <= z failed")
    if float(np.max(z)) > 1.0 - (1.0 - eps) ** j + eps * eps:
        raise InvariantViolation("||z||_inf bound failed")
    if float(np.sum(z)) > budget + l1_tol:
        raise InvariantViolation("||z||_1 phase budget failed")
    if f_x < f_z - 1e-9 * abs(f_x):
        raise InvariantViolation("f(x) >= f(z) failed after swap")


@dataclass
class TargetGuess:
    lower: float
    upper: float
    candidates: list[float] = field(default_factory=list)


def target_grid(oracle: Oracle, config: SolverConfig) -> TargetGuess:
    """One parallel round of queries bracketing the optimum: singletons give a
    lower bound; concavity along non-negative directions gives the upper bound
    f(0) + k * max_i grad_i f(0)^+. The geometric grid m0 (1+eps)^t covers the
    bracket and then continues up to m1 / ((1-eps)^J - 2 eps): the phase-j
    target is ((1-eps)^j - 2 eps) M, so a run only keeps every phase active
    (and fills the whole l1 budget) when M exceeds the reachable value divided
    by the last phase's factor. Targets beyond the bracket cost extra
    candidate runs but never hurt the best-of-grid value.
    """
    n = oracle.dim
    k = config.k
    eps = config.eps_internal()
    coord = min(1.0, k)
    queries = [(VALUE, np.zeros(n))]
    for i in range(n):
        e = np.zeros(n)
        e[i] = coord
        queries.append((VALUE, e))
    queries.append((GRAD, np.zeros(n)))
    results = batch_eval(oracle, queries)
    f0 = results[0]
    singles = results[1:n + 1]
    g0 = results[-1]
    m0_raw = max(singles)
    m1_raw = max(m0_raw, f0 + k * max(float(np.max(g0)), 0.0))
    if m1_raw <= 0.0:
        raise DegenerateObjective("no candidate target value is positive")
    m0 = max(m0_raw, 1e-12)
    m1 = max(m1_raw, m0)
    last_factor = (1.0 - eps) ** config.phases() - 2.0 * eps
    top = m1 / last_factor if last_factor > 0.0 else m1
    steps = max(0, math.ceil(math.log(top / m0) / math.log1p(eps)))
    candidates = [m0 * (1.0 + eps) ** t for t in range(steps + 1)]
    return TargetGuess(lower=m0, upper=m1, candidates=candidates)


def solve_with_target_guess(oracle: Oracle, config: SolverConfig) -> SolveResult:
    """Guess the target value over a geometric grid and return the best run.

    Candidate runs are independent given the grid, so they execute in
    (conceptually) parallel lockstep: the combined ledger merges round r of
    every candidate into one round, making `rounds` the true adaptivity
    (1 guess round + max over candidates) while query totals still sum.
    """
    guess = target_grid(oracle, config)
    merged = oracle.ledger.snapshot()
    best: SolveResult | None = None
    per_round: list[int] = []
    for M in guess.candidates:
        sub = oracle.with_ledger(EvalLedger())
        result = solve(sub, config, M)
        for r, size in enumerate(result.ledger.per_round_sizes):
            if r < len(per_round):
                per_round[r] += size
            else:
                per_round.append(size)
        merged.total_value_queries += result.ledger.total_value_queries
        merged.total_grad_queries += result.ledger.total_grad_queries
        merged.min_value_seen = min(merged.min_value_seen, result.ledger.min_value_seen)
        if best is None or result.value > best.value:
            best = result
    assert best is not None
    merged.per_round_sizes.extend(per_round)
    merged.rounds += len(per_round)
    return SolveResult(x=best.x, value=best.value, trace=best.trace,
                       ledger=merged, m_used=best.m_used)
