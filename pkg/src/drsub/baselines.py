"""Sequential and parallel comparison solvers: a measured continuous-greedy
variant and a multiplicative-weights-update (MWU) solver specialized to one
cardinality constraint. Both route every oracle query through the ledger so
round/query counts are comparable with the threshold solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .solver import IterationCapExceeded, IterationRecord, InvalidBudget, SolveResult
from .vectors import GRAD, VALUE, Oracle, batch_eval


@dataclass
class GreedyConfig:
    epsilon: float = 0.05
    k: float = 10.0
    step: float | None = None   # None -> epsilon / n (experiment mode)
    conservative: bool = False  # use the epsilon / n^3 step of the worst-case guarantee

    def resolved_step(self, n: int) -> float:
        if self.step is not None:
            eta = self.step
        elif self.conservative:
            eta = self.epsilon / n**3
        else:
            eta = self.epsilon / n
        if not (0.0 < eta <= 1.0):
            raise ValueError("step must be in (0, 1]")
        return eta


def linear_maximizer(grad: np.ndarray, cap: np.ndarray, k: float) -> np.ndarray:
    """Maximize <grad, d> over {0 <= d <= cap, ||d||_1 <= k}.

    Fractional knapsack: fill coordinates in decreasing gradient order (ties
    broken by lower index), fractional last coordinate; non-positive gradients
    contribute nothing and get d_i = 0.
    """
    if np.any(cap < 0.0):
        raise ValueError("cap must be non-negative")
    d = np.zeros_like(cap)
    remaining = k
    for i in np.argsort(-grad, kind="stable"):
        if grad[i] <= 0.0 or remaining <= 0.0:
            break
        take = min(cap[i], remaining)
        d[i] = take
        remaining -= take
    return d


def continuous_greedy(oracle: Oracle, config: GreedyConfig) -> SolveResult:
    """Frank-Wolfe-style ascent with a fractional-knapsack direction oracle.

    T = ceil(1/eta) iterations, one ledger round each; the last step is
    shortened so the step sizes sum to exactly 1, which keeps ||x||_1 <= k.
    A final round evaluates the returned point.
    """
    n = oracle.dim
    k = config.k
    if k <= 0 or k > n:
        raise InvalidBudget(f"need 0 < k <= n, got k={k}, n={n}")
    eta = config.resolved_step(n)
    T = math.ceil(1.0 / eta)
    ledger = oracle.ledger

    x = np.zeros(n)
    trace: list[IterationRecord] = []
    for t in range(1, T + 1):
        step = eta if t < T else 1.0 - eta * (T - 1)
        f_x, grad = batch_eval(oracle, [(VALUE, x), (GRAD, x)])
        d = linear_maximizer(grad, 1.0 - x, k)
        x = x + step * d
        trace.append(IterationRecord(
            phase=t, v=0.0, set_size=int(np.sum(d > 0.0)), eta=step,
            eta1=float("nan"), eta2=float("nan"), kind="greedy",
            z_l1=float(np.sum(x)), f_x=f_x, f_z=f_x, round_index=ledger.rounds,
        ))
    value = batch_eval(oracle, [(VALUE, x)])[0]
    return SolveResult(x=x, value=value, trace=trace, ledger=ledger.snapshot())


def mwu_solve(oracle: Oracle, k: float, epsilon: float, M: float,
              max_iterations: int | None = None) -> SolveResult:
    """MWU solver with exponential weights on the n box constraints plus the
    cardinality constraint, run until the simulated time reaches 1 - epsilon.

    Weight magnitudes are handled in shifted log form (log-sum-exp), one
    ledger round per loop iteration plus a final evaluation round.
    """
    n = oracle.dim
    if k <= 0 or k > n:
        raise InvalidBudget(f"need 0 < k <= n, got k={k}, n={n}")
    if not (M > 0):
        raise ValueError("target value M must be positive")
    eta = epsilon / (2.0 * math.log(n + 1))
    if max_iterations is None:
        max_iterations = math.ceil(40.0 * math.log(n + 1) ** 2 / epsilon**2)
    ledger = oracle.ledger

    x = (epsilon / n) * np.ones(n)
    z = x.copy()

    def weight_state(z):
        exponents = np.append(z / eta, np.sum(z) / (eta * k))
        lse = float(logsumexp(exponents))
        return exponents, lse

    exponents, lse = weight_state(z)
    t = eta * lse
    trace: list[IterationRecord] = []

    while t < 1.0 - epsilon:
        if len(trace) >= max_iterations:
            raise IterationCapExceeded(f"MWU exceeded {max_iterations} iterations at t={t}")
        f_x, grad = batch_eval(oracle, [(VALUE, x), (GRAD, (1.0 + eta) * x)])
        lam = M * (math.exp(-t) - 2.0 * epsilon) - f_x
        c = np.maximum((1.0 - x) * grad, 0.0)
        ratios = np.exp(exponents - lse)
        m = np.zeros(n)
        nz = c > 0.0
        m[nz] = np.clip(1.0 - lam * (ratios[:n][nz] + ratios[n] / k) / c[nz], 0.0, 1.0)
        d = eta * x * m
        trace.append(IterationRecord(
            phase=len(trace) + 1, v=lam, set_size=int(np.sum(m > 0.0)), eta=eta,
            eta1=float("nan"), eta2=float("nan"), kind="mwu",
            z_l1=float(np.sum(z)), f_x=f_x, f_z=t, round_index=ledger.rounds,
        ))
        if not np.any(d > 0.0):
            break
        x = x + d * (1.0 - x)
        z = z + d
        exponents, lse = weight_state(z)
        t = eta * lse

    value = batch_eval(oracle, [(VALUE, x)])[0]
    return SolveResult(x=x, value=value, trace=trace, ledger=ledger.snapshot(), m_used=M)
