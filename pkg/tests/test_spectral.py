import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dominant_eigenvalue, random_irreducible
from multiplex_contagion.spectral import (NonConvergenceError, assess, power_iterate, rank_institutions,
                                          risk_measures)


def test_symmetric_pair():
    a = 0.37
    res = power_iterate(np.array([[0, a], [a, 0]]))
    assert res.lambda_max == pytest.approx(a, abs=1e-12)
    assert res.u[0] == pytest.approx(res.u[1])


def test_three_cycle():
    S = np.zeros((3, 3))
    S[0, 1] = S[1, 2] = S[2, 0] = 0.2
    res = power_iterate(S)
    assert res.lambda_max == pytest.approx(0.2, abs=1e-12)


def test_periodic_pattern_terminates():
    # bipartite pattern {0, 1} <-> {2, 3}: eigenvalues +lambda and -lambda share a modulus
    S = np.array([[0, 0, 0.5, 0.1], [0, 0, 0.2, 0.3], [0.3, 0.6, 0, 0], [0.4, 0.1, 0, 0]])
    res = power_iterate(S)
    assert res.lambda_max == pytest.approx(dominant_eigenvalue(S), rel=1e-9)
    assert res.shift > 0


def test_errors():
    with pytest.raises(ValueError):
        power_iterate(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        power_iterate(np.ones((2, 3)))
    S = random_irreducible(np.random.default_rng(1), 6)
    with pytest.raises(NonConvergenceError) as err:
        power_iterate(S, tol=1e-300, max_iter=5)
    assert err.value.iterations == 5


def test_random_eight_by_eight(rng):
    for _ in range(10):
        S = random_irreducible(rng, 8)
        res = power_iterate(S)
        assert res.lambda_max == pytest.approx(dominant_eigenvalue(S), rel=1e-9)
        assert np.abs(S.T @ res.v - res.lambda_max * res.v).max() / np.abs(res.v).max() < 1e-9
        assert res.u @ res.v == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("lam,p,risk,res,region", [
    (0.07268, 0.14573, 0.0, 0.07305, "resilience"),
    (0.47440, 0.14573, 0.32867, 0.0, "fragility"),
    (0.14568, 0.14573, 0.0, 0.00005, "resilience"),
])
def test_published_measures(lam, p, risk, res, region):
    r, s, g = risk_measures(lam, p)
    assert r == pytest.approx(risk, abs=1e-9)
    assert s == pytest.approx(res, abs=1e-9)
    assert g == region


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.floats(0.01, 1.0))
def test_spectral_properties(seed, n, p):
    rng = np.random.default_rng(seed)
    S = random_irreducible(rng, n)
    res = power_iterate(S)
    bound = min(S.sum(axis=1).max(), S.sum(axis=0).max())
    assert res.lambda_max <= bound * (1 + 1e-12)
    # shifting by (1 - p) I moves the eigenvalue and keeps the eigenvector
    T = (1 - p) * np.eye(n) + S.T
    shifted = power_iterate(T.T)
    assert shifted.lambda_max == pytest.approx(1 - p + res.lambda_max, rel=1e-9)
    np.testing.assert_allclose(shifted.v, res.v, atol=1e-7)
    # scale covariance
    c = float(rng.uniform(0.1, 10))
    a1, a2 = assess(S, 0.5), assess(c * S, 0.5)
    assert a2.lambda_max == pytest.approx(c * a1.lambda_max, rel=1e-9)
    np.testing.assert_allclose(a1.indexes, a2.indexes, atol=1e-9)


def test_assess_single_and_multiplex(rng):
    S = random_irreducible(rng, 4)
    a = assess(S, 0.15, "single", members=(1, 2, 4, 5), n=7)
    assert a.indexes.shape == (7,)
    assert a.indexes[[0, 3, 6]].sum() == 0
    assert a.indexes.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(a.core_indexes, a.spectral.u / a.spectral.u.sum())
    U = random_irreducible(rng, 6)
    b = assess(U, 0.15, "multiplex", members=(0, 2), n=3)
    r = b.spectral.u.reshape(3, 2).sum(axis=0)
    np.testing.assert_allclose(b.indexes, [r[0] / r.sum(), 0.0, r[1] / r.sum()])
    assert b.eigenmatrix.shape == (2, 3)
    assert b.stability_condition == "lambda_max < 0.15000"
    with pytest.raises(ValueError):
        assess(S, 0.0)
    with pytest.raises(ValueError):
        assess(random_irreducible(rng, 5), 0.1, "multiplex")


def test_ranking():
    from multiplex_contagion.spectral import RiskAssessment
    a = RiskAssessment(0.1, 0.05, 0, 0.05, "resilience", "single", (0, 1, 2),
                       np.array([0.2, 0.5, 0.3, 0.0]))
    assert [e.rank for e in rank_institutions(a)] == [3, 1, 2, 0]
    tied = RiskAssessment(0.1, 0.05, 0, 0.05, "resilience", "single", (0, 1, 2),
                          np.array([0.25, 0.5, 0.25]))
    assert [e.rank for e in rank_institutions(tied)] == [2, 1, 3]
