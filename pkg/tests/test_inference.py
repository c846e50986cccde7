import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regimeswitch import (
    BounceBack,
    FitOptions,
    HamiltonAR,
    MSCDWeibull,
    ModelSpec,
    PointMass,
    SeriesData,
    SwitchingARCH,
    Theta,
    fit,
    simulate,
)
from regimeswitch.errors import (
    DegenerateIntervalWarning,
    NonPositiveDefiniteError,
    ScaleError,
    SingularInformationError,
)
from regimeswitch.inference import (
    confidence_intervals,
    fd_gradient,
    fd_hessian,
    hessian_fd,
    information_to_covariance,
    louis_hessian_small,
    observed_hessian,
    opg,
    score_fd,
    score_louis,
)
from regimeswitch.model import Distribution

from conftest import random_theta

FAMILIES = [HamiltonAR(0), HamiltonAR(2), SwitchingARCH(1), SwitchingARCH(1, "student_t"),
            BounceBack(1), MSCDWeibull()]


def _gaussian(n, mu=0.4, sigma=1.3, seed=0):
    spec = ModelSpec(HamiltonAR(0), 1)
    th = Theta([mu, sigma], [[1.0]])
    y = np.random.default_rng(seed).normal(mu, sigma, n)
    return spec, th, SeriesData(y)


def _rel_inf(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(range(len(FAMILIES))), st.integers(1, 3))
def test_louis_matches_finite_differences(seed, which, M):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(FAMILIES[which], M)
    th = random_theta(spec, rng, min_prob=0.1)
    data, _ = simulate(spec, th, 60, burn_in=20, seed=seed)
    xi = Distribution(rng.dirichlet(np.ones(spec.n_states)))
    a = score_louis(spec, th, data, xi).total
    b = score_fd(spec, th, data, xi).total
    assert _rel_inf(a, b) <= 1e-5


def test_gaussian_mean_score_closed_form():
    spec, th, data = _gaussian(200)
    y = data.y
    assert score_louis(spec, th, data, PointMass(0)).total[0] == pytest.approx(
        np.sum(y - 0.4) / 1.3**2, rel=1e-10
    )
    rep = score_fd(spec, th, data, PointMass(0))
    assert np.allclose(rep.per_obs[:, 0], (y - 0.4) / 1.3**2, atol=1e-6)


def test_per_obs_scores_sum_to_total_difference():
    spec = ModelSpec(HamiltonAR(1), 2)
    th = random_theta(spec, np.random.default_rng(1))
    data, _ = simulate(spec, th, 150, seed=1)
    from regimeswitch.inference import _obs_loglik_fn, _unconstrained

    param, v = _unconstrained(spec, th)
    fn = _obs_loglik_fn(spec, param, data, PointMass(0))
    per_obs = fd_gradient(fn, v)
    total = fd_gradient(lambda x: float(np.sum(fn(x))), v)
    # only the rounding of the two summations differs
    assert np.allclose(per_obs.sum(axis=0), total, rtol=1e-10, atol=1e-7)
    rep = score_fd(spec, th, data, PointMass(0))
    assert np.array_equal(rep.total, rep.per_obs.sum(axis=0))


def test_opg_gaussian_information():
    spec, th, data = _gaussian(10_000)
    est = opg(spec, th, data, PointMass(0))
    assert est.I_hat[0, 0] == pytest.approx(1 / 1.3**2, rel=0.05)
    assert np.array_equal(est.I_hat, est.I_hat.T)
    assert np.allclose(est.se, np.sqrt(np.diag(est.cov)))


def test_hessian_gaussian_closed_form():
    spec, th, data = _gaussian(500)
    est = hessian_fd(spec, th, data, PointMass(0))
    assert est.I_hat[0, 0] == pytest.approx(1 / 1.3**2, abs=1e-4)


def test_fd_hessian_exact_on_quadratic():
    A = np.array([[3.0, -1.0, 0.5], [-1.0, 2.0, 0.25], [0.5, 0.25, 1.0]])
    b = np.array([0.3, -0.2, 1.0])
    f = lambda x: 0.5 * x @ A @ x + b @ x + 4.0
    x = np.array([0.1, -0.4, 0.7])
    # the truncation error vanishes, so only rounding remains; with a
    # power-of-two step it stays far below 1e-8
    H = fd_hessian(f, x, steps=np.full(3, 2.0**-6))
    assert np.allclose(H, A, atol=1e-8, rtol=0)
    assert np.allclose(fd_hessian(f, x), A, atol=1e-6, rtol=0)


def test_singular_information():
    with pytest.raises(SingularInformationError):
        information_to_covariance(np.diag([1.0, 1e-14]), 10, ["a", "b"], "opg")


def test_non_positive_definite_reports_eigenvalues():
    with pytest.raises(NonPositiveDefiniteError) as exc:
        information_to_covariance(np.diag([1.0, -2.0]), 10, ["a", "b"], "hessian", check="pd")
    assert np.allclose(sorted(exc.value.eigenvalues), [-2.0, 1.0])


@pytest.mark.parametrize("seed", range(4))
def test_louis_hessian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    family = [HamiltonAR(0), MSCDWeibull()][seed % 2]
    spec = ModelSpec(family, 2)
    th = random_theta(spec, rng, min_prob=0.1)
    data, _ = simulate(spec, th, 8, burn_in=20, seed=seed)
    init = PointMass(int(rng.integers(spec.n_states)))
    a = louis_hessian_small(spec, th, data, init)
    b = observed_hessian(spec, th, data, init)
    assert np.array_equal(a, a.T)
    assert _rel_inf(a, b) <= 1e-4


def test_louis_hessian_single_regime_has_no_variance_term():
    spec, th, data = _gaussian(10)
    H = louis_hessian_small(spec, th, data, PointMass(0))
    y = data.y
    expected = np.array([
        [-10 / 1.3**2, -2 * np.sum(y - 0.4) / 1.3**3],
        [-2 * np.sum(y - 0.4) / 1.3**3, 10 / 1.3**2 - 3 * np.sum((y - 0.4) ** 2) / 1.3**4],
    ])
    assert np.allclose(H, expected, rtol=1e-10)


def test_louis_hessian_scale_limit():
    spec = ModelSpec(HamiltonAR(0), 2)
    th = Theta([0.0, 1.0, 1.0], [[0.9, 0.1], [0.1, 0.9]])
    data = SeriesData(np.zeros(30))
    with pytest.raises(ScaleError):
        louis_hessian_small(spec, th, data, PointMass(0))


def test_confidence_interval_quantile_and_degenerate_case():
    spec, th, data = _gaussian(400, seed=3)
    res = fit(spec, data, PointMass(0), FitOptions(n_starts=1))
    ci = confidence_intervals(res, 0.95)
    lo, hi = ci["mu_1"]
    assert (hi - lo) / (2 * res.opg.se[0]) == pytest.approx(1.959964, abs=1e-6)
    zero = type(res.opg)(res.opg.names, res.opg.I_hat, res.opg.cov, np.zeros(2),
                         res.opg.condition_number, "opg", res.opg.n_obs)
    from dataclasses import replace

    with pytest.warns(DegenerateIntervalWarning):
        ci0 = confidence_intervals(replace(res, opg=zero))
    assert ci0["mu_1"][0] == ci0["mu_1"][1]


def test_hamilton_intervals_cover_every_parameter(hamilton):
    spec, th = hamilton
    data, _ = simulate(spec, th, 800, seed=0)
    res = fit(spec, data, opts=FitOptions(n_starts=2))
    for method in ("opg", "hessian"):
        ci = confidence_intervals(res, method=method)
        assert list(ci) == ["mu_1", "mu_2", "ar_1", "ar_2", "ar_3", "ar_4", "sigma", "p_11", "p_22"]
        assert all(lo < hi for lo, hi in ci.values())


def test_hessian_and_opg_agree_on_hamilton(hamilton):
    spec, th = hamilton
    rel_gaps, se_ratios = [], []
    for seed in range(20):
        data, _ = simulate(spec, th, 2000, seed=100 + seed)
        init = PointMass(spec.n_states - 1)
        a = opg(spec, th, data, init)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            b = hessian_fd(spec, th, data, init)
        rel_gaps.append(np.linalg.norm(a.I_hat - b.I_hat) / np.linalg.norm(a.I_hat))
        se_ratios.append(np.max(np.abs(a.se / b.se - 1)))
    assert np.mean(rel_gaps) <= 0.15
    assert np.median(se_ratios) <= 0.25
