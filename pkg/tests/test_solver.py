import math

import numpy as np
import pytest

from drsub.instances import gen_nqp, make_oracle
from drsub.solver import (
    BudgetExhausted,
    DegenerateObjective,
    InvalidBudget,
    SolverConfig,
    budget_step_cap,
    candidate_set,
    find_set_step,
    solve,
    solve_with_target_guess,
    stepped_point,
    step_sets,
    target_grid,
    trace_to_csv,
    TRACE_COLUMNS,
)
from drsub.vectors import GRAD, Oracle, batch_eval


def modular_oracle(c):
    c = np.asarray(c, dtype=float)
    return Oracle(dim=len(c), value_fn=lambda x: float(c @ x), grad_fn=lambda x: c.copy())


# --- configuration -----------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.3)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SolverConfig(arity=1)
    with pytest.raises(ValueError):
        SolverConfig(decay=1.0)


def test_internal_epsilon_rescaling():
    cfg = SolverConfig(epsilon=0.07)
    assert cfg.phases() == 15
    assert cfg.eps_internal() == pytest.approx(1.0 / 15.0)
    assert SolverConfig(epsilon=0.05).eps_internal() == 0.05


def test_delta_resolution_clamps():
    cfg = SolverConfig(epsilon=0.05)
    eps = cfg.eps_internal()
    expected = 0.1 * eps**4 / (math.log(100) * math.log(1.0 / eps))
    assert cfg.resolved_delta(100) == pytest.approx(expected)
    assert cfg.resolved_delta(100) <= eps * eps
    assert SolverConfig(epsilon=0.05, delta=1e-20).resolved_delta(100) == 1e-12
    assert SolverConfig(epsilon=0.05, delta=1.0).resolved_delta(100) == eps * eps


def test_default_decay_is_one_minus_eps():
    assert SolverConfig(epsilon=0.05).resolved_decay() == pytest.approx(0.95)
    assert SolverConfig(epsilon=0.05, decay=0.75).resolved_decay() == 0.75


# --- candidate set and step caps ---------------------------------------------

def test_candidate_set_by_hand():
    eps, j = 0.5, 1
    z = np.array([0.0, 0.2, 0.6, 0.0])
    z_start = np.zeros(4)
    g = np.array([1.0, 1.0, 1.0, 0.1])
    # room bound: z_i <= 1 - 0.5 = 0.5 kills index 2;
    # phase growth z - z_start < 0.5 admits index 1 (0.2 < 0.5);
    # threshold 0.5 kills index 3
    assert candidate_set(z, z_start, g, v=0.5, j=j, eps=eps).tolist() == [0, 1]


def test_candidate_set_phase_growth_is_strict():
    eps = 0.5
    z = np.array([0.5])
    z_start = np.zeros(1)
    g = np.array([1.0])
    # growth 0.5 equals eps*(1 - 0) exactly: excluded (strict inequality)
    assert candidate_set(z, z_start, g, v=0.1, j=2, eps=eps).size == 0


def test_budget_step_cap_arithmetic():
    eps, j, k = 0.1, 2, 5.0
    z = np.array([0.3, 0.5, 0.0])
    members = np.array([0, 2])
    # budget eps*j*k = 1.0, ||z||_1 = 0.8, denom = (1-0.3) + (1-0.0) = 1.7
    expected = min(eps * eps, 0.2 / 1.7)
    assert budget_step_cap(z, members, eps, j, k) == pytest.approx(expected)


def test_budget_step_cap_exhausted():
    z = np.array([1.0, 1.0])
    with pytest.raises(BudgetExhausted):
        budget_step_cap(z, np.array([0]), eps=0.1, j=1, k=10.0)


def test_stepped_point_moves_only_members():
    z = np.array([0.5, 0.5])
    out = stepped_point(z, np.array([1]), 0.1)
    assert out[0] == 0.5 and out[1] == pytest.approx(0.55)
    assert z[1] == 0.5  # input untouched


# --- step search --------------------------------------------------------------

def _search_state(n=14, seed=2, quantile=0.5):
    inst = gen_nqp(n, seed)
    oracle = make_oracle(inst)
    z = np.zeros(n)
    g = batch_eval(oracle, [(GRAD, z)])[0]  # equals masked gradient at z = 0
    v = float(np.quantile(g, quantile))
    members = candidate_set(z, z, g, v, j=1, eps=0.05)
    return oracle, z, members, v


def test_find_set_step_early_exit_costs_one_round():
    oracle, z, members, _ = _search_state()
    v = 1e-6  # threshold so low nothing decays below it within eps^2
    before = oracle.ledger.rounds
    eta1, probed = find_set_step(oracle, z, members, v, eps=0.05, delta=1e-7, arity=8)
    assert eta1 == 0.05**2
    assert oracle.ledger.rounds - before == 1
    assert eta1 in probed


def test_find_set_step_level_count_matches_formula():
    oracle, z, members, v = _search_state(quantile=0.95)
    eps, arity = 0.05, 8
    delta = eps**2 / arity**3  # exactly three levels
    before = oracle.ledger.rounds
    eta1, _ = find_set_step(oracle, z, members, v, eps=eps, delta=delta, arity=arity)
    levels = oracle.ledger.rounds - before
    if eta1 < eps * eps:  # no early exit
        assert levels == math.ceil(math.log(eps**2 / delta) / math.log(arity)) == 3


def test_find_set_step_keeps_survivor_fraction():
    oracle, z, members, v = _search_state(quantile=0.9)
    eps = 0.05
    eta1, _ = find_set_step(oracle, z, members, v, eps=eps, delta=1e-8, arity=8)
    need = math.ceil((1.0 - eps) * len(members))
    # within delta below eta1 the survivor count is still >= need
    grad = batch_eval(oracle, [(GRAD, stepped_point(z, members, max(eta1 - 1e-8, 0.0)))])[0]
    _, _, s_lo, _ = step_sets(z, members, max(eta1 - 1e-8, 0.0), grad, v)
    assert len(s_lo) >= need


def test_survivor_sets_shrink_with_eta():
    oracle, z, members, v = _search_state(quantile=0.7)
    etas = [0.0, 0.001, 0.002, 0.0025]
    grads = batch_eval(oracle, [(GRAD, stepped_point(z, members, e)) for e in etas])
    sets = [set(step_sets(z, members, e, g, v)[2].tolist()) for e, g in zip(etas, grads)]
    for small, large in zip(sets[1:], sets[:-1]):
        assert small <= large


def test_find_set_step_probes_requested_extras():
    oracle, z, members, v = _search_state(quantile=0.9)
    extra = 0.0013
    _, probed = find_set_step(oracle, z, members, v, eps=0.05, delta=1e-7, arity=8,
                              extra=(extra,))
    assert extra in probed


# --- full solve ----------------------------------------------------------------

def test_solve_rejects_bad_inputs():
    oracle = modular_oracle([1.0, 1.0])
    with pytest.raises(InvalidBudget):
        solve(oracle, SolverConfig(epsilon=0.1, k=5.0), M=1.0)
    with pytest.raises(ValueError):
        solve(oracle, SolverConfig(epsilon=0.1, k=1.0), M=-1.0)


def test_solve_modular_guarantee():
    # modular objective: optimum is the sum of the top-k coefficients
    c = np.array([9.0, 7.0, 5.0, 3.0, 2.0, 1.0, 0.5, 0.25])
    k = 3
    opt = 21.0
    eps = 0.1
    oracle = modular_oracle(c)
    result = solve(oracle, SolverConfig(epsilon=eps, k=float(k)), M=opt)
    assert float(np.sum(result.x)) <= k + 1e-9
    assert result.value >= (1.0 / math.e - 6.0 * eps) * opt
    assert result.value == pytest.approx(float(c @ result.x))


def test_solve_trace_is_bounded_and_ordered():
    oracle = make_oracle(gen_nqp(20, 1))
    cfg = SolverConfig(epsilon=0.1, k=5.0)
    result = solve(oracle, cfg, M=target_grid(make_oracle(gen_nqp(20, 1)), cfg).upper)
    assert len(result.trace) <= cfg.iteration_cap(20)
    rounds = [r.round_index for r in result.trace]
    assert all(b >= a for a, b in zip(rounds, rounds[1:]))
    for rec in result.trace:
        assert rec.kind in ("large", "smaller", "threshold-drop")
        assert rec.z_l1 <= cfg.eps_internal() * rec.phase * cfg.k + 1e-9


def test_solve_respects_linf_invariant():
    oracle = make_oracle(gen_nqp(15, 4))
    cfg = SolverConfig(epsilon=0.1, k=4.0)  # check_invariants defaults on
    result = solve(oracle, cfg, M=50.0)
    eps = cfg.eps_internal()
    assert float(np.max(result.x)) <= 1.0 - (1.0 - eps) ** cfg.phases() + eps * eps + 1e-12


# --- target guessing -------------------------------------------------------------

def test_target_grid_covers_the_optimum():
    c = np.array([4.0, 3.0, 1.0, 0.5])
    opt = 7.0  # k = 2
    oracle = modular_oracle(c)
    cfg = SolverConfig(epsilon=0.1, k=2.0)
    guess = target_grid(oracle, cfg)
    assert oracle.ledger.rounds == 1  # one parallel round of bracketing queries
    assert guess.lower <= opt <= guess.upper
    eps = cfg.eps_internal()
    assert any(opt <= m <= (1.0 + eps) * opt for m in guess.candidates)
    assert guess.candidates[-1] >= guess.upper  # grid extends past the bracket


def test_target_grid_rejects_degenerate_objective():
    oracle = Oracle(dim=3, value_fn=lambda x: -float(np.sum(x)),
                    grad_fn=lambda x: -np.ones(3))
    with pytest.raises(DegenerateObjective):
        target_grid(oracle, SolverConfig(epsilon=0.1, k=2.0))


def test_guess_and_solve_merged_ledger_is_consistent():
    oracle = make_oracle(gen_nqp(12, 6))
    cfg = SolverConfig(epsilon=0.1, k=3.0)
    result = solve_with_target_guess(oracle, cfg)
    led = result.ledger
    assert led.rounds == len(led.per_round_sizes)
    assert sum(led.per_round_sizes) == led.total_queries
    assert math.isfinite(result.m_used)


def test_guess_and_solve_beats_single_run_at_true_target():
    c = np.array([5.0, 4.0, 2.0, 1.0, 0.5])
    opt = 9.0  # k = 2
    cfg = SolverConfig(epsilon=0.1, k=2.0)
    best = solve_with_target_guess(modular_oracle(c), cfg)
    single = solve(modular_oracle(c), cfg, M=opt)
    assert best.value >= single.value - 1e-12


# --- trace serialization ----------------------------------------------------------

def test_trace_csv_shape():
    oracle = make_oracle(gen_nqp(10, 2))
    result = solve(oracle, SolverConfig(epsilon=0.1, k=3.0), M=30.0)
    text = trace_to_csv(result.trace)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == len(result.trace) + 1
    assert all(len(line.split(",")) == len(TRACE_COLUMNS) for line in lines)
