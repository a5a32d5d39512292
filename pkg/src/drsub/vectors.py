"""Dense vector algebra, the objective-oracle contract, and query/round accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DimensionMismatch(ValueError):
    """Operands or query points do not match the expected dimension."""


class NonFiniteValue(ArithmeticError):
    """An oracle returned NaN or infinity, or a point contained one."""


def point(values, dim: int | None = None) -> np.ndarray:
    """Build a solution vector, clamping coordinates into [0, 1].

    Out-of-box inputs are clamped rather than rejected: the objective is
    extended outside the unit box by f(x) = f(x ∧ 1), so evaluating at a
    clamped point is exact.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"expected length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("point contains NaN or infinite coordinates")
    return np.clip(v, 0.0, 1.0)


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"length mismatch: {a.shape} vs {b.shape}")


def join(a, b) -> np.ndarray:
    """Coordinate-wise maximum."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_same_length(a, b)
    return np.maximum(a, b)


def meet(a, b) -> np.ndarray:
    """Coordinate-wise minimum."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_same_length(a, b)
    return np.minimum(a, b)


def hadamard(a, b) -> np.ndarray:
    """Coordinate-wise product."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_same_length(a, b)
    return a * b


def norms(a) -> tuple[float, float]:
    """Return (l1, linf) of a vector."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0, 0.0
    return float(np.sum(np.abs(a))), float(np.max(np.abs(a)))


@dataclass
class EvalLedger:
    """Counts oracle queries and the sequential rounds they were issued in.

    One batch of queries, regardless of its size, costs one round; the round
    count is the adaptivity of a run.
    """

    rounds: int = 0
    total_value_queries: int = 0
    total_grad_queries: int = 0
    per_round_sizes: list[int] = field(default_factory=list)
    min_value_seen: float = math.inf

    def record_batch(self, n_value: int, n_grad: int) -> None:
        size = n_value + n_grad
        if size == 0:
            return
        self.rounds += 1
        self.total_value_queries += n_value
        self.total_grad_queries += n_grad
        self.per_round_sizes.append(size)

    @property
    def total_queries(self) -> int:
        return self.total_value_queries + self.total_grad_queries

    def snapshot(self) -> "EvalLedger":
        return EvalLedger(
            rounds=self.rounds,
            total_value_queries=self.total_value_queries,
            total_grad_queries=self.total_grad_queries,
            per_round_sizes=list(self.per_round_sizes),
            min_value_seen=self.min_value_seen,
        )


@dataclass
class Oracle:
    """Black-box value/gradient access to an objective on [0, 1]^n.

    value_fn and grad_fn must be deterministic and side-effect free; all
    queries go through batch_eval so the ledger sees every evaluation.
    """

    dim: int
    value_fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    ledger: EvalLedger = field(default_factory=EvalLedger)
    # optional vectorized entry points taking a list of points; purely a
    # speedup, must agree with the per-point functions
    value_many: Callable[[list], list] | None = None
    grad_many: Callable[[list], list] | None = None

    def with_ledger(self, ledger: EvalLedger) -> "Oracle":
        return Oracle(self.dim, self.value_fn, self.grad_fn, ledger,
                      self.value_many, self.grad_many)


VALUE = "value"
GRAD = "grad"


def batch_eval(oracle: Oracle, queries: Sequence[tuple[str, np.ndarray]]) -> list:
    """Evaluate a batch of ("value"|"grad", point) queries in one round.

    Results come back in input order. An empty batch is a no-op and does not
    consume a round. Non-finite oracle output raises NonFiniteValue.
    """
    if not queries:
        return []
    pts = []
    for kind, raw in queries:
        if kind not in (VALUE, GRAD):
            raise ValueError(f"unknown query kind {kind!r}")
        pts.append((kind, point(raw, dim=oracle.dim)))
    value_ix = [i for i, (kind, _) in enumerate(pts) if kind == VALUE]
    grad_ix = [i for i, (kind, _) in enumerate(pts) if kind == GRAD]
    results: list = [None] * len(pts)

    if value_ix:
        if oracle.value_many is not None:
            vals = oracle.value_many([pts[i][1] for i in value_ix])
        else:
            vals = [oracle.value_fn(pts[i][1]) for i in value_ix]
        for i, raw_val in zip(value_ix, vals):
            val = float(raw_val)
            if not math.isfinite(val):
                raise NonFiniteValue(f"value oracle returned {val}")
            if val < oracle.ledger.min_value_seen:
                oracle.ledger.min_value_seen = val
            results[i] = val

    if grad_ix:
        if oracle.grad_many is not None:
            grads = oracle.grad_many([pts[i][1] for i in grad_ix])
        else:
            grads = [oracle.grad_fn(pts[i][1]) for i in grad_ix]
        for i, raw_g in zip(grad_ix, grads):
            g = np.asarray(raw_g, dtype=float)
            if g.shape != (oracle.dim,):
                raise DimensionMismatch(f"gradient has shape {g.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteValue("gradient oracle returned non-finite entries")
            results[i] = g

    oracle.ledger.record_batch(len(value_ix), len(grad_ix))
    return results
