import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cascade, linear_power, random_irreducible
from multiplex_contagion.contagion import (propagate_linear, simulate_multiplex, simulate_stepwise,
                                           sweep_triggers)


def random_impact(rng, n, scale=0.4, density=0.5):
    S = rng.uniform(0, scale, (n, n)) * (rng.uniform(size=(n, n)) < density)
    np.fill_diagonal(S, 0)
    return S


def test_all_seeds():
    tr = simulate_stepwise(np.ones((3, 3)) - np.eye(3), 0.2, [0, 1, 2])
    assert tr.q_stop == 0 and tr.outcome == "all_failed"


def test_zero_matrix():
    tr = simulate_stepwise(np.zeros((4, 4)), 0.2, [1])
    assert tr.q_stop == 1 and tr.outcome == "contained"
    assert tr.failed == {1}


def test_hand_cascade():
    # 0 -> 1 strong enough, 1 -> 2 strong enough, 2 -> 3 too weak alone
    S = np.zeros((4, 4))
    S[0, 1], S[1, 2], S[2, 3], S[0, 3] = 0.3, 0.25, 0.1, 0.05
    tr = simulate_stepwise(S, 0.2, [0])
    assert [set(b) for b in tr.failed_steps] == [{0}, {1}, {2}, set()]
    assert tr.q_stop == 3
    # node 3 accumulates: q=1 gets 0.05 from 0; q=2 decays; q=3 gets 0.1 from 2
    p3 = [pr[3] for pr in tr.probabilities]
    assert p3[1] == pytest.approx(0.05)
    assert p3[2] == pytest.approx(0.8 * 0.05)
    assert p3[3] == pytest.approx(0.8 * 0.8 * 0.05 + 0.1)
    # failed nodes: 1 at their step, 0 afterwards
    assert tr.probabilities[1][1] == 1.0 and tr.probabilities[2][1] == 0.0


def test_failure_uses_cumulative_set():
    # neither failure alone tips node 2, together they do
    S = np.zeros((3, 3))
    S[0, 1] = 0.5
    S[0, 2], S[1, 2] = 0.15, 0.1
    tr = simulate_stepwise(S, 0.2, [0])
    assert tr.failed == {0, 1, 2}


def test_initial_values_ignored_at_first_step(rng):
    S = random_impact(rng, 5, 0.1)
    a = simulate_stepwise(S, 0.3, [0])
    b = simulate_stepwise(S, 0.3, [0], initial_probability=np.full(5, 1e-6))
    np.testing.assert_array_equal(a.probabilities[1], b.probabilities[1])


def test_errors():
    with pytest.raises(ValueError):
        simulate_stepwise(np.zeros((2, 2)), 0.2, [])
    with pytest.raises(ValueError):
        simulate_stepwise(np.zeros((2, 2)), 0.0, [0])
    with pytest.raises(ValueError):
        simulate_stepwise(np.zeros((2, 2)), 0.2, [5])


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.floats(0.05, 0.5))
def test_matches_cascade_oracle(n, seed, p):
    rng = np.random.default_rng(seed)
    S = random_impact(rng, n)
    for s in range(n):
        tr = simulate_stepwise(S, p, [s])
        assert list(tr.failed_steps) == cascade(S, p, [s])
        cum = tr.cumulative
        for a, b in zip(cum, cum[1:]):
            assert a <= b
        steps = tr.failed_steps
        assert sum(len(b) for b in steps) == len(tr.failed)
        assert tr.q_stop == len(steps) - 1
        for pr in tr.probabilities:
            assert np.all(np.isfinite(pr)) and np.all(pr >= 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 7), st.integers(0, 2**32 - 1), st.floats(0.05, 0.5))
def test_larger_seed_sets_never_shrink(n, seed, p):
    rng = np.random.default_rng(seed)
    S = random_impact(rng, n)
    small = {int(rng.integers(n))}
    big = small | {int(rng.integers(n))}
    a, b = simulate_stepwise(S, p, small), simulate_stepwise(S, p, big)
    ca, cb = a.cumulative, b.cumulative
    for q in range(max(len(ca), len(cb))):
        assert ca[min(q, len(ca) - 1)] <= cb[min(q, len(cb) - 1)]


def test_multiplex_failures_are_institution_wide(rng):
    m = 3
    U = np.zeros((9, 9))
    U[0, 1] = 0.5  # FI instance of 0 hits FI instance of 1
    tr = simulate_multiplex(U, 0.2, [0], m)
    assert tr.failed == {0, 3, 6, 1, 4, 7}
    assert tr.failed_groups() == [[0], [1], []]
    groups = [v % m for v in range(9)]
    for s in range(m):
        S = random_impact(rng, 9, 0.3, 0.3)
        tr = simulate_multiplex(S, 0.25, [s], m)
        assert list(tr.failed_steps) == cascade(S, 0.25, [s], groups)


def test_linear_trivial_cases(rng):
    pi0 = rng.uniform(size=4)
    np.testing.assert_array_equal(propagate_linear(rng.uniform(size=(4, 4)), 0.2, pi0, 0), pi0)
    np.testing.assert_allclose(propagate_linear(np.zeros((4, 4)), 0.2, pi0, 5), 0.8 ** 5 * pi0, rtol=1e-15)
    with pytest.raises(ValueError):
        propagate_linear(np.zeros((2, 2)), 0.2, [1, 0], -1)
    with pytest.raises(ValueError):
        propagate_linear(np.zeros((2, 2)), 0.2, [-1, 0], 1)


def test_linear_matches_matrix_power(rng):
    S = random_impact(rng, 6)
    pi0 = rng.uniform(size=6)
    np.testing.assert_allclose(propagate_linear(S, 0.15, pi0, 4), linear_power(S, 0.15, pi0, 4),
                               rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.floats(0.05, 0.5))
def test_stepwise_linear_consistency(n, seed, p):
    rng = np.random.default_rng(seed)
    S = random_impact(rng, n)
    tr = simulate_stepwise(S, p, [0])
    pi0 = np.zeros(n)
    pi0[0] = 1.0
    survivors = np.array([v not in tr.failed_steps[1] and v != 0 for v in range(n)])
    # first step: no earlier survivor mass, so the two agree exactly
    np.testing.assert_allclose(tr.probabilities[1][survivors], propagate_linear(S, p, pi0, 1)[survivors],
                               rtol=0, atol=1e-12)
    # later steps: one linear step from the stepwise state differs only by survivor-to-survivor impact
    cum = tr.cumulative
    for q in range(2, tr.q_stop + 1):
        prev = tr.probabilities[q - 1]
        alive = np.array([v not in cum[q] for v in range(n)])
        alive_before = np.array([v not in cum[q - 1] for v in range(n)])
        lin = propagate_linear(S, p, prev, 1)
        correction = S[alive_before].T @ prev[alive_before]
        np.testing.assert_allclose(tr.probabilities[q][alive], (lin - correction)[alive], rtol=0, atol=1e-12)


def test_sweep_examples():
    out = sweep_triggers(np.zeros((3, 3)), 0.2)
    assert [(t.failures, t.outcome) for t in out] == [(1, "contained")] * 3
    S = np.full((3, 3), 0.9)
    np.fill_diagonal(S, 0)
    assert all(t.outcome == "all_failed" for t in sweep_triggers(S, 0.2))
    out = sweep_triggers(S, 0.2, [(2,), (0, 1)])
    assert [t.seeds for t in out] == [(2,), (0, 1)]
    grouped = sweep_triggers(np.zeros((6, 6)), 0.2, groups=[0, 1, 0, 1, 0, 1])
    assert len(grouped) == 2 and all(t.failures == 1 for t in grouped)
    with pytest.raises(ValueError):
        sweep_triggers(S, 0.2, [])


def test_divergence_criterion(rng):
    for target_ratio in (0.7, 1.3):
        S = random_irreducible(rng, 6)
        lam = np.max(np.abs(np.linalg.eigvals(S)))
        p = 0.2
        S = S * (target_ratio * p / lam)
        pi = np.full(6, 1e-3)
        norms = []
        for _ in range(200):
            pi = propagate_linear(S, p, pi, 1)
            norms.append(np.abs(pi).max())
        if target_ratio > 1:
            assert norms[-1] > norms[-2] > norms[0]
        else:
            assert norms[-1] < norms[-2] < norms[0]
