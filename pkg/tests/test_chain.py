import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regimeswitch.chain import expand, minorization, stationary, support_mask
from regimeswitch.errors import NoMinorizationError, ReducibleChainError


def _random_P(rng, M, positive=False):
    P = rng.dirichlet(np.ones(M), size=M)
    if positive:
        P = 0.02 + 0.9 * P
        P /= P.sum(axis=1, keepdims=True)
    return P


def test_expand_two_regimes_depth_two():
    ch = expand([[0.9, 0.1], [0.2, 0.8]], 2)
    row = ch.T[ch.index((0, 0))]
    assert row[ch.index((0, 0))] == 0.9
    assert row[ch.index((1, 0))] == 0.1
    assert row[ch.index((0, 1))] == 0.0
    assert row[ch.index((1, 1))] == 0.0


def test_expand_depth_one_is_identity_map():
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    assert np.array_equal(expand(P, 1).T, P)


def test_mask_zeros_survive():
    P = np.array([[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]])
    mask = P > 0
    T = expand(P, 1, mask).T
    assert T[0, 2] == 0.0 and T[2, 0] == 0.0


def test_expand_rejects_bad_rows():
    with pytest.raises(ValueError):
        expand([[0.5, 0.6], [0.5, 0.5]], 2)


def test_state_index_round_trip():
    ch = expand(np.full((3, 3), 1 / 3), 3)
    for k in range(ch.n_states):
        assert ch.index(ch.tuple(k)) == k
    assert ch.tuple(5) == (0, 1, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 3))
def test_expanded_rows_stochastic(seed, M, p):
    rng = np.random.default_rng(seed)
    ch = expand(_random_P(rng, M), p)
    assert np.allclose(ch.T.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    # every nonzero entry respects the shift structure
    src, dst = np.nonzero(ch.T)
    assert np.array_equal(ch.states[dst, 1:], ch.states[src, :-1])
    if p >= 2 and M >= 2:
        assert np.any(ch.T == 0)


def test_stationary_symmetric():
    assert np.allclose(stationary(expand([[0.9, 0.1], [0.1, 0.9]], 1)), [0.5, 0.5], atol=1e-14)


def test_stationary_closed_form():
    p11, p22 = 0.9049, 0.7550
    pi = stationary(expand([[p11, 1 - p11], [1 - p22, p22]], 1))
    assert pi[0] == pytest.approx((1 - p22) / (2 - p11 - p22), abs=1e-14)


def test_expanded_stationary_marginal_by_power_iteration():
    P = np.array([[0.9049, 0.0951], [0.245, 0.755]])
    ch = expand(P, 2)
    pi = stationary(ch)
    brute = np.linalg.matrix_power(ch.T, 2000)[0]
    assert np.allclose(pi, brute, atol=1e-12)
    first = [pi[ch.states[:, 0] == i].sum() for i in range(2)]
    assert np.allclose(first, stationary(P), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 3))
def test_stationary_consistency(seed, M, p):
    rng = np.random.default_rng(seed)
    P = _random_P(rng, M, positive=True)
    ch = expand(P, p)
    pi = stationary(ch)
    assert np.max(np.abs(pi @ ch.T - pi)) <= 1e-12
    first = np.array([pi[ch.states[:, 0] == i].sum() for i in range(M)])
    assert np.allclose(first, stationary(P), atol=1e-10)


def test_reducible_chain():
    with pytest.raises(ReducibleChainError):
        stationary(expand(np.eye(2), 1))


def test_minorization_depth_one():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    mc = minorization(expand(P, 1))
    assert mc.p_min == 1
    assert mc.sigma_minus == 0.1
    assert mc.sigma_plus == 0.9


def test_minorization_depth_two_needs_two_steps():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    ch = expand(P, 2)
    assert np.any(ch.T == 0)
    T2 = ch.T @ ch.T
    assert np.all(T2 > 0)
    mc = minorization(ch)
    assert mc.p_min == 2
    assert mc.sigma_minus == pytest.approx(T2.min(), abs=1e-15)
    assert mc.sigma_plus == pytest.approx(T2.max(), abs=1e-15)


def test_minorization_cyclic():
    with pytest.raises(NoMinorizationError):
        minorization(expand([[0.0, 1.0], [1.0, 0.0]], 1))


def test_minorization_with_mask_uses_support():
    P = np.array([[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]])
    ch = expand(P, 2, P > 0)
    sup = support_mask(ch)
    # tuples containing the forbidden transitions 1->3 and 3->1
    assert not sup[ch.index((2, 0))] and not sup[ch.index((0, 2))]
    mc = minorization(ch)
    block = np.linalg.matrix_power(ch.T, mc.p_min)[:, sup]
    assert np.all(block >= mc.sigma_minus) and np.all(block <= mc.sigma_plus)
    assert np.all(np.linalg.matrix_power(ch.T, mc.p_min - 1)[:, sup].min() <= 1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 3))
def test_minorization_bounds_by_direct_power(seed, M, p):
    rng = np.random.default_rng(seed)
    ch = expand(_random_P(rng, M, positive=True), p)
    mc = minorization(ch)
    Tp = np.linalg.matrix_power(ch.T, mc.p_min)
    assert mc.p_min == p
    assert 0 < mc.sigma_minus <= Tp.min() + 1e-15
    assert Tp.max() <= mc.sigma_plus + 1e-15


def test_json_uses_one_based_states():
    doc = expand([[0.9, 0.1], [0.2, 0.8]], 2).to_json()
    assert doc["states"][0] == [1, 1] and doc["states"][-1] == [2, 2]
    assert len(doc["T"]) == 4
