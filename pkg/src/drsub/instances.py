"""Seeded instance generators and oracles for the three benchmark families.

Families:
  * nqp -- non-concave quadratic f(x) = 1/2 x'Hx + h'x with entrywise
    non-positive H, h = -0.2 H'1.
  * dpp -- softmax extension f(x) = log det(diag(x)(L - I) + I) for a random
    PSD kernel L.
  * cut -- multilinear extension of a random directed-cut set function,
    evaluated by exact enumeration (ground-truth family, n <= 16).

Generation is a pure function of (family, n, seed); sampling order is fixed
so instances are reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .vectors import EvalLedger, Oracle

CUT_MAX_N = 16  # exact-enumeration bound: oracles sum over all 2^n subsets

_DET_FLOOR = 1e-300


class SingularMatrix(ArithmeticError):
    """diag(x)(L - I) + I is numerically singular or has non-positive determinant."""


@dataclass(frozen=True)
class NqpInstance:
    H: np.ndarray  # n x n, entries in [-10, 0]
    h: np.ndarray  # -0.2 H'1, entrywise >= 0

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class DppInstance:
    L: np.ndarray            # n x n symmetric PSD kernel
    eigenvalues: np.ndarray  # the sampled spectrum, entries in [e^-0.5, e]

    @property
    def n(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class CutInstance:
    n: int
    weights: np.ndarray  # n x n, non-negative, zero diagonal


@dataclass(frozen=True)
class InstanceSpec:
    family: str  # "nqp" | "dpp" | "cut"
    n: int
    seed: int


FAMILIES = ("nqp", "dpp", "cut")


def gen_nqp(n: int, seed: int) -> NqpInstance:
    """H entries i.i.d. uniform on [-10, 0], sampled row-major; h = -0.2 H'1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    H = rng.uniform(-10.0, 0.0, size=(n, n))
    h = -0.2 * (H.T @ np.ones(n))
    return NqpInstance(H=H, h=h)


def nqp_value(inst: NqpInstance, x: np.ndarray) -> float:
    return float(0.5 * x @ inst.H @ x + inst.h @ x)


def nqp_grad(inst: NqpInstance, x: np.ndarray) -> np.ndarray:
    return 0.5 * (inst.H + inst.H.T) @ x + inst.h


def gen_dpp(n: int, seed: int) -> DppInstance:
    """Sample the spectrum first (r_i uniform on [-0.5, 1], eigenvalue e^{r_i}),
    then a Haar orthogonal basis via QR of a Gaussian matrix with the usual
    R-diagonal sign correction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    r = rng.uniform(-0.5, 1.0, size=n)
    ell = np.exp(r)
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    signs = np.where(np.diag(R) >= 0.0, 1.0, -1.0)
    Q = Q * signs
    L = (Q * ell) @ Q.T
    L = 0.5 * (L + L.T)
    return DppInstance(L=L, eigenvalues=ell)


def _dpp_m(inst: DppInstance, x: np.ndarray) -> np.ndarray:
    # diag(x)(L - I) + I; not symmetric in general even though L is.
    return x[:, None] * (inst.L - np.eye(inst.n)) + np.eye(inst.n)


def dpp_value(inst: DppInstance, x: np.ndarray) -> float:
    M = _dpp_m(inst, x)
    lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    diag = np.diag(lu)
    sign = 1.0 if (np.sum(piv != np.arange(inst.n)) % 2 == 0) else -1.0
    sign *= np.prod(np.where(diag >= 0.0, 1.0, -1.0))
    if np.any(diag == 0.0):
        raise SingularMatrix("zero pivot in LU of diag(x)(L-I)+I")
    logdet = float(np.sum(np.log(np.abs(diag))))
    if sign <= 0.0 or logdet < math.log(_DET_FLOOR):
        raise SingularMatrix("determinant of diag(x)(L-I)+I is not positive")
    return logdet


def dpp_grad(inst: DppInstance, x: np.ndarray) -> np.ndarray:
    # d/dx_i log det M(x) = ((L - I) M(x)^{-1})_{ii}
    M = _dpp_m(inst, x)
    A = inst.L - np.eye(inst.n)
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    return np.einsum("ij,ji->i", A, Minv)


def _dpp_m_stack(inst: DppInstance, xs: list[np.ndarray]) -> np.ndarray:
    X = np.stack(xs)
    return X[:, :, None] * (inst.L - np.eye(inst.n)) + np.eye(inst.n)


def dpp_value_many(inst: DppInstance, xs: list[np.ndarray]) -> list[float]:
    signs, logdets = np.linalg.slogdet(_dpp_m_stack(inst, xs))
    if np.any(signs <= 0.0) or np.any(logdets < math.log(_DET_FLOOR)):
        raise SingularMatrix("determinant of diag(x)(L-I)+I is not positive")
    return [float(v) for v in logdets]


def dpp_grad_many(inst: DppInstance, xs: list[np.ndarray]) -> list[np.ndarray]:
    A = inst.L - np.eye(inst.n)
    try:
        Minv = np.linalg.inv(_dpp_m_stack(inst, xs))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    grads = np.einsum("ij,bji->bi", A, Minv)
    return list(grads)


def gen_cut(n: int, seed: int) -> CutInstance:
    """Directed-cut weights i.i.d. uniform on [0, 1], row-major, zero diagonal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > CUT_MAX_N:
        raise ValueError(f"cut family is enumeration-based, n must be <= {CUT_MAX_N}")
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.0, 1.0, size=(n, n))
    np.fill_diagonal(W, 0.0)
    return CutInstance(n=n, weights=W)


def cut_value(inst: CutInstance, members) -> float:
    """Directed cut weight of a set: sum of w[i][j] over i in S, j not in S."""
    inside = np.zeros(inst.n, dtype=bool)
    inside[list(members)] = True
    return float(inst.weights[np.ix_(inside, ~inside)].sum())


@lru_cache(maxsize=16)
def _cut_table(key: tuple[int, bytes]) -> np.ndarray:
    """F(S) for every subset mask of [n]; mask bit i = membership of node i."""
    n, raw = key
    W = np.frombuffer(raw, dtype=float).reshape(n, n)
    masks = np.arange(1 << n)
    bits = [(masks >> i) & 1 for i in range(n)]
    rowsums = W.sum(axis=1)
    # F(S) = sum_{i in S} rowsum_i - sum_{i,j in S} w_ij
    F = np.zeros(1 << n)
    for i in range(n):
        F += bits[i] * rowsums[i]
        for j in range(n):
            if W[i, j] != 0.0:
                F -= W[i, j] * (bits[i] & bits[j])
    return F


def _subset_probs(x: np.ndarray) -> np.ndarray:
    p = np.ones(1)
    for xi in x:
        p = np.concatenate([p * (1.0 - xi), p * xi])
    return p


def multilinear_value(inst: CutInstance, x: np.ndarray) -> float:
    """Exact expectation of the cut function under independent inclusion."""
    F = _cut_table((inst.n, inst.weights.tobytes()))
    return float(F @ _subset_probs(x))


@lru_cache(maxsize=16)
def _cut_grad_table(key: tuple[int, bytes]) -> np.ndarray:
    """Row i holds F(S | i in S) - F(S | i not in S) for every subset mask, so
    the multilinear gradient is one matrix-vector product with the mask
    probabilities instead of 2n value evaluations.
    """
    n, _ = key
    F = _cut_table(key)
    masks = np.arange(1 << n)
    G = np.empty((n, 1 << n))
    for i in range(n):
        G[i] = F[masks | (1 << i)] - F[masks & ~(1 << i)]
    return G


def multilinear_grad(inst: CutInstance, x: np.ndarray) -> np.ndarray:
    """grad_i = f(x | x_i=1) - f(x | x_i=0); exact since f is multilinear."""
    G = _cut_grad_table((inst.n, inst.weights.tobytes()))
    return G @ _subset_probs(x)


def _subset_probs_many(points: list[np.ndarray]) -> np.ndarray:
    # one doubling pass for the whole batch: column b holds probs for point b
    X = np.column_stack(points)
    p = np.ones((1, X.shape[1]))
    for row in X:
        p = np.concatenate([p * (1.0 - row), p * row])
    return p


def cut_value_many(inst: CutInstance, points: list[np.ndarray]) -> list[float]:
    F = _cut_table((inst.n, inst.weights.tobytes()))
    return [float(v) for v in F @ _subset_probs_many(points)]


def cut_grad_many(inst: CutInstance, points: list[np.ndarray]) -> list[np.ndarray]:
    G = _cut_grad_table((inst.n, inst.weights.tobytes()))
    out = G @ _subset_probs_many(points)
    return [out[:, b] for b in range(out.shape[1])]


def generate(spec: InstanceSpec):
    if spec.family == "nqp":
        return gen_nqp(spec.n, spec.seed)
    if spec.family == "dpp":
        return gen_dpp(spec.n, spec.seed)
    if spec.family == "cut":
        return gen_cut(spec.n, spec.seed)
    raise ValueError(f"unknown family {spec.family!r}")


def _memoized(fn, size: int = 8):
    """Tiny point-keyed cache: solvers legitimately re-query identical points
    (e.g. after a threshold drop), and the ledger must still count each query.
    """
    cache: dict[bytes, object] = {}

    def wrapped(x: np.ndarray):
        key = x.tobytes()
        if key not in cache:
            if len(cache) >= size:
                cache.pop(next(iter(cache)))
            cache[key] = fn(x)
        return cache[key]

    return wrapped


def make_oracle(inst, ledger: EvalLedger | None = None) -> Oracle:
    """Wrap an instance as a ledger-tracked value/gradient oracle."""
    value_many = grad_many = None
    if isinstance(inst, NqpInstance):
        value, grad, n = (lambda x: nqp_value(inst, x)), (lambda x: nqp_grad(inst, x)), inst.n
    elif isinstance(inst, DppInstance):
        value, grad, n = (lambda x: dpp_value(inst, x)), (lambda x: dpp_grad(inst, x)), inst.n
        value_many = lambda xs: dpp_value_many(inst, xs)
        grad_many = lambda xs: dpp_grad_many(inst, xs)
    elif isinstance(inst, CutInstance):
        value, grad, n = (lambda x: multilinear_value(inst, x)), (lambda x: multilinear_grad(inst, x)), inst.n
        value_many = lambda xs: cut_value_many(inst, xs)
        grad_many = lambda xs: cut_grad_many(inst, xs)
    else:
        raise TypeError(f"unsupported instance type {type(inst)!r}")
    return Oracle(
        dim=n,
        value_fn=_memoized(value),
        grad_fn=_memoized(grad),
        ledger=ledger if ledger is not None else EvalLedger(),
        value_many=value_many,
        grad_many=grad_many,
    )


@dataclass
class DrViolation:
    trial: int
    coordinate: int
    gap: float  # how far grad(x)_i fell below grad(y)_i - tol


@dataclass
class DrReport:
    trials: int
    tol: float
    violations: list[DrViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_dr(oracle: Oracle, trials: int, seed: int, tol: float) -> DrReport:
    """Empirical diminishing-returns check: sample pairs x <= y and verify
    grad f(x) >= grad f(y) - tol coordinate-wise. Violations are reported,
    not raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    from .vectors import GRAD, batch_eval

    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(trials):
        y = rng.uniform(size=oracle.dim)
        x = y * rng.uniform(size=oracle.dim)
        pairs.append((x, y))
    queries = []
    for x, y in pairs:
        queries.append((GRAD, x))
        queries.append((GRAD, y))
    grads = batch_eval(oracle, queries)
    report = DrReport(trials=trials, tol=tol)
    for t in range(trials):
        gx, gy = grads[2 * t], grads[2 * t + 1]
        bad = np.nonzero(gx < gy - tol)[0]
        for i in bad:
            report.violations.append(DrViolation(trial=t, coordinate=int(i), gap=float(gy[i] - tol - gx[i])))
    return report


def instance_to_json(spec: InstanceSpec) -> str:
    """Serialize (family, n, seed) plus the generated payload matrices,
    row-major, as decimal strings (exact float round-trip via repr).
    """
    inst = generate(spec)
    payload: dict[str, list[str]] = {}
    if isinstance(inst, NqpInstance):
        payload["H"] = [repr(float(v)) for v in inst.H.ravel()]
        payload["h"] = [repr(float(v)) for v in inst.h]
    elif isinstance(inst, DppInstance):
        payload["L"] = [repr(float(v)) for v in inst.L.ravel()]
        payload["eigenvalues"] = [repr(float(v)) for v in inst.eigenvalues]
    else:
        payload["weights"] = [repr(float(v)) for v in inst.weights.ravel()]
    doc = {"family": spec.family, "n": spec.n, "seed": spec.seed, "payload": payload}
    return json.dumps(doc, indent=2)


def instance_from_json(text: str):
    """Load and re-validate a serialized instance."""
    doc = json.loads(text)
    family, n = doc["family"], int(doc["n"])
    payload = {k: np.array([float(s) for s in v]) for k, v in doc["payload"].items()}
    if family == "nqp":
        H = payload["H"].reshape(n, n)
        h = payload["h"]
        if np.any(H > 0.0) or np.any(H < -10.0):
            raise ValueError("NQP matrix entries must lie in [-10, 0]")
        if not np.array_equal(h, -0.2 * (H.T @ np.ones(n))):
            raise ValueError("NQP linear term must equal -0.2 H'1")
        return NqpInstance(H=H, h=h)
    if family == "dpp":
        L = payload["L"].reshape(n, n)
        ell = payload["eigenvalues"]
        if not np.array_equal(L, L.T):
            raise ValueError("DPP kernel must be symmetric")
        lo, hi = math.exp(-0.5), math.e
        if np.any(ell < lo - 1e-12) or np.any(ell > hi + 1e-12):
            raise ValueError("DPP eigenvalues out of admissible range")
        recomputed = np.sort(np.linalg.eigvalsh(L))
        if np.max(np.abs(recomputed - np.sort(ell))) > 1e-8:
            raise ValueError("stored spectrum does not match the kernel")
        return DppInstance(L=L, eigenvalues=ell)
    if family == "cut":
        W = payload["weights"].reshape(n, n)
        if n > CUT_MAX_N:
            raise ValueError(f"cut family requires n <= {CUT_MAX_N}")
        if np.any(np.diag(W) != 0.0) or np.any(W < 0.0):
            raise ValueError("cut weights must be non-negative with zero diagonal")
        return CutInstance(n=n, weights=W)
    raise ValueError(f"unknown family {family!r}")
