import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_rebalance, dominant_eigenvalue, random_irreducible
from multiplex_contagion import stabilisation as stab
from multiplex_contagion.spectral import assess
from multiplex_contagion.stabilisation import (GAMMA_MAX, InconsistentInputsError, NonMonotoneError,
                                               NonPositiveFactorError, StabilisationError, Target,
                                               UnachievableTargetError, blend_indexes, column_factors,
                                               compute_surcharges, distribute, optimize_gamma,
                                               rebalance_multiplex, rebalance_single, rebalance_with_deduction)
from multiplex_contagion.tensor import MultiplexImpactTensor, unfold


def random_tensor(rng, m, density=0.5):
    within = []
    for _ in range(3):
        S = rng.uniform(0, 0.1, (m, m)) * (rng.uniform(size=(m, m)) < density)
        np.fill_diagonal(S, 0)
        within.append(S)
    return MultiplexImpactTensor(tuple(within), tuple(w.sum(axis=0) for w in within), tuple(range(m)), 0.2)


def indexes_for(structure, p=0.2):
    mat = unfold(structure) if isinstance(structure, MultiplexImpactTensor) else structure
    mode = "multiplex" if isinstance(structure, MultiplexImpactTensor) else "single"
    return assess(mat, p, mode).indexes


def test_surcharge_examples(rng):
    assert not np.any(compute_surcharges([0.6, 0.4], [100, 100], 0.0))
    np.testing.assert_allclose(compute_surcharges([0.6, 0.4], [100, 100], 0.01), [0.6, 0.4])
    sii = rng.dirichlet(np.ones(6))
    C = rng.uniform(10, 1000, 6)
    assert compute_surcharges(sii, C, 0.03).sum() == pytest.approx(0.03 * np.sum(sii * C), rel=1e-14)
    with pytest.raises(StabilisationError):
        compute_surcharges([1.0], [1.0], GAMMA_MAX)
    with pytest.raises(StabilisationError):
        compute_surcharges([1.0], [1.0], -0.1)


def test_single_identity_and_halving():
    S = np.array([[0, 0.2], [0.1, 0]])
    np.testing.assert_array_equal(rebalance_single(S, [0.5, 0.5], [100, 100], 0.2, 0.0), S)
    # only institution 0 pays, all to 1: X = 0.4 * 1 * 50 = 20 = p * C_1, so column 1 halves
    out = rebalance_single(S, [1.0, 0.0], [50, 100], 0.2, 0.4)
    assert out[0, 1] == pytest.approx(0.1)
    assert out[1, 0] == pytest.approx(0.1)


def test_single_matches_direct_formula(rng):
    for _ in range(10):
        S = random_irreducible(rng, 6)
        sii = indexes_for(S)
        C = rng.uniform(50, 500, 6)
        out = rebalance_single(S, sii, C, 0.2, 0.05)
        np.testing.assert_allclose(out, brute_rebalance(S, sii, C, 0.2, 0.05), rtol=1e-13, atol=0)


def test_distribution_rejects_stranded_surcharge():
    with pytest.raises(InconsistentInputsError):
        distribute([1.0, 0.0], np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(1e-4, 0.49))
def test_single_invariants(n, seed, gamma):
    rng = np.random.default_rng(seed)
    S = random_irreducible(rng, n)
    sii = indexes_for(S)
    C = rng.uniform(50, 500, n)
    out, X, sur = rebalance_single(S, sii, C, 0.2, gamma, return_distribution=True)
    np.testing.assert_allclose(X.sum(axis=1), sur, rtol=1e-12)
    assert X.sum() == pytest.approx(sur.sum(), rel=1e-12)
    assert np.all(X >= 0) and np.all(X[S == 0] == 0)
    assert np.all(out >= 0) and np.all((out > 0) == (S > 0))
    assert dominant_eigenvalue(out) <= dominant_eigenvalue(S) * (1 + 1e-12)


def test_multiplex_identity_and_single_layer(rng):
    t = random_tensor(rng, 5)
    sii = indexes_for(t)
    C = rng.uniform(50, 500, 5)
    assert rebalance_multiplex(t, sii, C, 0.2, 0.0) is t
    # couplings zeroed and only D populated: the D block equals the single-layer result
    D = t.within[2]
    z = np.zeros((5, 5))
    only_d = MultiplexImpactTensor((z, z, D), (np.zeros(5),) * 3, t.members, 0.2)
    got = rebalance_multiplex(only_d, sii, C, 0.2, 0.02)
    np.testing.assert_allclose(got.within[2], rebalance_single(D, sii, C, 0.2, 0.02), rtol=1e-14)
    # with several layers and no couplings, every block shares the factors of the summed layer
    bare = t.without_couplings()
    got = rebalance_multiplex(bare, sii, C, 0.2, 0.02)
    W = sum(bare.within)
    ratio = np.divide(rebalance_single(W, sii, C, 0.2, 0.02), W, out=np.zeros_like(W), where=W > 0)
    for l in range(3):
        np.testing.assert_allclose(got.within[l], bare.within[l] * ratio.max(axis=0)[None, :], rtol=1e-12)


def test_multiplex_invariants(rng):
    for _ in range(10):
        t = random_tensor(rng, int(rng.integers(3, 7)))
        m = t.m
        sii = indexes_for(t)
        C = rng.uniform(50, 500, m)
        out, X, sur = rebalance_multiplex(t, sii, C, 0.2, 0.01, return_distribution=True)
        np.testing.assert_allclose(X.sum(axis=1), sur, rtol=1e-12)
        U0, U1 = unfold(t), unfold(out)
        assert np.array_equal(U0 > 0, U1 > 0)
        assert dominant_eigenvalue(U1) < dominant_eigenvalue(U0)
        # one factor per target institution across all target layers
        f = np.divide(U0, U1, out=np.full_like(U0, np.nan), where=U1 > 0)
        for j in range(m):
            col = f[:, [l * m + j for l in range(3)]]
            vals = col[~np.isnan(col)]
            if vals.size:
                np.testing.assert_allclose(vals, vals[0], rtol=1e-12)


def test_deduction_variant(rng):
    t = random_tensor(rng, 5)
    sii = indexes_for(t)
    C = rng.uniform(50, 500, 5)
    plain = rebalance_multiplex(t, sii, C, 0.2, 0.03)
    zero_q = rebalance_with_deduction(t, sii, C, 0.2, 0.03, 0.0)
    np.testing.assert_array_equal(unfold(plain), unfold(zero_q))
    # choose gamma_Q so that institution 0's deduction equals what it receives
    _, X, _ = rebalance_multiplex(t, sii, C, 0.2, 0.03, return_distribution=True)
    gq = X[:, 0].sum() / (sii[0] * C[0])
    if gq < GAMMA_MAX:
        out = rebalance_with_deduction(t, sii, C, 0.2, 0.03, gq)
        np.testing.assert_allclose(out.within[1][:, 0], t.within[1][:, 0], rtol=1e-12)
    f = column_factors(X, C, 0.2, deduction=X.sum(axis=0))
    np.testing.assert_allclose(f, 1.0)
    with pytest.raises(NonPositiveFactorError) as err:
        rebalance_with_deduction(t, np.eye(5)[0], np.r_[1e6, np.ones(4)], 0.2, 0.0, 0.49)
    assert err.value.positions == [0]


def test_blend():
    np.testing.assert_allclose(blend_indexes([1, 0], [0, 1]), [0.5, 0.5])
    np.testing.assert_allclose(blend_indexes([1, 0], [0, 1], 1.0), [1, 0])
    with pytest.raises(StabilisationError):
        blend_indexes([1], [1], 1.5)


def test_target():
    assert Target("risk", 0).lambda_bound(0.2) == 0.2
    assert Target("resilience", 0.05).lambda_bound(0.2) == pytest.approx(0.15)
    assert Target("risk", 0.01).met(0.205, 0.2)
    with pytest.raises(ValueError):
        Target("other", 0)
    with pytest.raises(ValueError):
        Target("risk", -1)


def fragile_single(rng, n=6):
    S = random_irreducible(rng, n)
    lam = dominant_eigenvalue(S)
    return S * (0.26 / lam)  # lambda = 0.26 against p_min = 0.2


def test_already_stable_is_noop(rng):
    S = random_irreducible(rng, 5)
    S *= 0.1 / dominant_eigenvalue(S)
    plan = optimize_gamma(S, indexes_for(S), np.full(5, 100.0), 0.2)
    assert plan.gamma == 0.0
    np.testing.assert_array_equal(plan.structure, S)
    assert not np.any(plan.surcharges)


def test_search_brackets_minimum(rng):
    found = 0
    for _ in range(30):
        S = fragile_single(rng)
        sii = indexes_for(S)
        C = rng.uniform(50, 500, 6)
        try:
            plan = optimize_gamma(S, sii, C, 0.2)
        except UnachievableTargetError:
            continue
        found += 1
        lam = lambda g: dominant_eigenvalue(rebalance_single(S, sii, C, 0.2, g))
        assert lam(plan.gamma) <= 0.2 + 1e-12
        assert lam(plan.gamma - 1e-6) > 0.2
        assert plan.risk <= 1e-12
        np.testing.assert_allclose(plan.net_position, plan.compensations - plan.surcharges)
    assert found >= 5


def test_resilience_target(rng):
    for _ in range(30):
        S = fragile_single(rng)
        sii, C = indexes_for(S), rng.uniform(50, 500, 6)
        try:
            plan = optimize_gamma(S, sii, C, 0.2, Target("resilience", 0.01))
        except UnachievableTargetError:
            continue
        assert plan.resilience >= 0.01 - 1e-12
        return
    pytest.skip("no achievable instance drawn")


def test_unachievable_reports(rng):
    S = random_irreducible(rng, 5)
    S *= 50 * 0.2 / dominant_eigenvalue(S)
    with pytest.raises(UnachievableTargetError) as err:
        optimize_gamma(S, indexes_for(S), np.full(5, 100.0), 0.2)
    assert err.value.lambda_at_max > err.value.lambda_target


def test_non_monotone_is_reported(rng, monkeypatch):
    S = fragile_single(rng)
    calls = iter([0.25, 0.27] + [0.1] * 100)
    monkeypatch.setattr(stab, "spectral_radius", lambda *a, **k: next(calls))
    with pytest.raises(NonMonotoneError) as err:
        optimize_gamma(S, indexes_for(S), np.full(6, 100.0), 0.2, lambda_original=0.26)
    assert len(err.value.gammas) == len(err.value.lambdas)


def test_search_input_errors(rng):
    with pytest.raises(ValueError):
        optimize_gamma(np.eye(2), [0.5, 0.5], [1, 1], 0.2, tol=0)
