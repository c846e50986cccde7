"""
Scores, information matrices and confidence intervals.

Reported parameters are the family parameters followed by the free
transition probabilities (see :meth:`ModelSpec.param_names`). Derivatives
are taken in the unconstrained coordinates of :class:`Parametrization` and
mapped back through the transform Jacobian.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import (
    DegenerateIntervalWarning,
    NonPositiveDefiniteError,
    ScaleError,
    SingularInformationError,
)
from .filtering import (
    backward_pass,
    pair_weights,
    prepare,
    run_filter,
    transition_counts,
)
from .model import ModelSpec, Parametrization, SeriesData, Theta

__all__ = [
    "ScoreReport",
    "CovarianceEstimate",
    "fd_gradient",
    "fd_hessian",
    "emission_gradient",
    "loglik_and_grad",
    "score_louis",
    "score_fd",
    "opg",
    "hessian_fd",
    "observed_hessian",
    "information_to_covariance",
    "confidence_intervals",
    "louis_hessian_small",
]

EPS = np.finfo(float).eps
GRAD_POWER = 1.0 / 3.0
HESS_POWER = 1.0 / 4.0
MAX_PATHS = 10**7


@dataclass(frozen=True, eq=False)
class ScoreReport:
    total: np.ndarray
    per_obs: Optional[np.ndarray]
    method: str
    names: tuple = ()


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    names: tuple
    I_hat: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    condition_number: float
    method: str
    n_obs: int
    hessian: Optional[np.ndarray] = None

    def to_json(self):
        return {
            "method": self.method,
            "I_hat": self.I_hat.tolist(),
            "cov": self.cov.tolist(),
            "se": dict(zip(self.names, self.se.tolist())),
            "condition_number": self.condition_number,
        }


def _steps(x, power):
    return EPS**power * (1.0 + np.abs(x))


def fd_gradient(f, x, steps=None):
    """Central-difference gradient (or Jacobian, if ``f`` is vector valued)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, GRAD_POWER) if steps is None else np.asarray(steps, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h[i]))
    return np.stack(cols, axis=-1)


def fd_hessian(f, x, steps=None):
    """Central second differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    q = x.size
    h = _steps(x, HESS_POWER) if steps is None else np.asarray(steps, dtype=float)
    f0 = f(x)
    H = np.empty((q, q))
    unit = np.eye(q) * h
    for i in range(q):
        ei = unit[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = unit[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4.0 * h[i] * h[j]
            )
            H[i, j] = H[j, i] = val
    return H


def emission_gradient(spec: ModelSpec, values, window, w=None):
    """d log g / d family parameters, shape (n, S, q_f).

    Uses the family's analytic gradient when it has one, otherwise central
    differences of the vectorized log density.
    """
    fam, m, states = spec.family, spec.n_regimes, spec.states
    grad = fam.grad_log_density(values, m, window, states, w)
    if grad is not None:
        return grad
    values = np.asarray(values, dtype=float)
    h = _steps(values, GRAD_POWER)
    out = np.empty(window.shape[:1] + (states.shape[0], values.size))
    for k in range(values.size):
        up, dn = values.copy(), values.copy()
        up[k] += h[k]
        dn[k] -= h[k]
        out[:, :, k] = (
            fam.log_density(up, m, window, states, w) - fam.log_density(dn, m, window, states, w)
        ) / (2.0 * h[k])
    return out


def _emission_hessian(spec: ModelSpec, values, window, w=None):
    values = np.asarray(values, dtype=float)
    h = _steps(values, GRAD_POWER)
    q = values.size
    out = np.empty(window.shape[:1] + (spec.n_states, q, q))
    for k in range(q):
        up, dn = values.copy(), values.copy()
        up[k] += h[k]
        dn[k] -= h[k]
        out[:, :, :, k] = (
            emission_gradient(spec, up, window, w) - emission_gradient(spec, dn, window, w)
        ) / (2.0 * h[k])
    return 0.5 * (out + np.swapaxes(out, 2, 3))


def _regime_onehot(spec):
    onehot = np.zeros((spec.n_states, spec.n_regimes))
    onehot[np.arange(spec.n_states), spec.states[:, 0]] = 1.0
    return onehot


def loglik_and_grad(param: Parametrization, v, data: SeriesData, init=None):
    """Log-likelihood and its gradient in unconstrained coordinates.

    The gradient uses the missing-information identity: the observed score is
    the posterior expectation of the complete-data score, built from the
    smoothed transition counts and smoothed state marginals.

    Parameters
    ----------
    param : Parametrization
    v : ndarray
        Unconstrained vector.
    data : SeriesData
    init : PointMass, Distribution or ndarray, optional
        Initial law; ignored when ``param`` estimates xi.
    """
    spec = param.spec
    theta, xi = param.unpack(v)
    window = data.window(spec.s)
    w = data.covariates(spec.s)
    logg = spec.family.log_density(theta.values, spec.n_regimes, window, spec.states, w)
    logg, trans, xi = prepare(spec, theta, data, xi if xi is not None else init, logg=logg)
    out = run_filter(logg, trans, xi)
    beta, marginal, initial = backward_pass(logg, trans, xi, out)
    grad = np.empty(param.dim)
    pos = 0
    if param.free_fam:
        dlog = emission_gradient(spec, theta.values, window, w)[:, :, param.free_fam]
        dfam = np.einsum("ts,tsk->k", marginal, dlog)
        for k, idx in enumerate(param.free_fam):
            prm = param.fam_params[idx]
            x = theta.values[idx]
            scale = 1.0 if prm.kind == "real" else (x if prm.kind == "positive" else x - 2.0)
            grad[pos] = dfam[k] * scale
            pos += 1
    if any(row[0] for row in param.rows):
        pairs = transition_counts(trans, xi, out, pair_weights(logg, out, beta))
        onehot = _regime_onehot(spec)
        counts = onehot.T @ pairs @ onehot
        P = theta.transition
        for i, (active, ref, _, mass) in enumerate(param.rows):
            if not active:
                continue
            total = counts[i, active].sum() + counts[i, ref]
            for j in active:
                grad[pos] = counts[i, j] - P[i, j] / mass * total
                pos += 1
    if param.estimate_xi:
        grad[pos:] = initial[:-1] - xi[:-1]
    return out.total, grad


def _unconstrained(spec, theta):
    param = Parametrization(spec)
    return param, param.pack(theta)


def score_louis(spec: ModelSpec, theta: Theta, data: SeriesData, init) -> ScoreReport:
    """Total score w.r.t. the reported parameters via smoothed expectations."""
    param, v = _unconstrained(spec, theta)
    _, gv = loglik_and_grad(param, v, data, init)
    jac, _ = param.theta_jacobian(theta)
    return ScoreReport(jac.T @ gv, None, "louis", tuple(spec.param_names()))


def _obs_loglik_fn(spec, param, data, init):
    window = data.window(spec.s)
    w = data.covariates(spec.s)

    def fn(v):
        theta, _ = param.unpack(v)
        logg = spec.family.log_density(theta.values, spec.n_regimes, window, spec.states, w)
        return run_filter(*prepare(spec, theta, data, init, logg=logg)).obs_loglik

    return fn


def score_fd(spec: ModelSpec, theta: Theta, data: SeriesData, init) -> ScoreReport:
    """Per-observation scores by central differences of ``obs_loglik``.

    Differences are taken in unconstrained coordinates with steps
    ``eps**(1/3) * (1 + |v_i|)`` and mapped to the reported parameters.
    """
    param, v = _unconstrained(spec, theta)
    per_obs_v = fd_gradient(_obs_loglik_fn(spec, param, data, init), v)
    jac, _ = param.theta_jacobian(theta)
    per_obs = per_obs_v @ jac
    return ScoreReport(per_obs.sum(axis=0), per_obs, "finite_difference", tuple(spec.param_names()))


def information_to_covariance(info, n_obs, names, method, hessian=None, check="condition"):
    info = 0.5 * (info + info.T)
    eig = np.linalg.eigvalsh(info)
    if check == "pd" and eig.min() < 1e-10:
        raise NonPositiveDefiniteError(
            "negative Hessian per observation is not positive definite", eig
        )
    cond = float(np.linalg.cond(info))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInformationError(f"information matrix condition number {cond:.3g}")
    cov = np.linalg.inv(info) / n_obs
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return CovarianceEstimate(tuple(names), info, cov, se, cond, method, n_obs, hessian)


def opg(spec: ModelSpec, theta: Theta, data: SeriesData, init, scores: Optional[ScoreReport] = None):
    """Outer-product-of-gradients information estimate.

    Raises
    ------
    SingularInformationError
        If the condition number of the estimate exceeds 1e12.
    """
    if scores is None:
        scores = score_fd(spec, theta, data, init)
    s = scores.per_obs
    n = s.shape[0]
    return information_to_covariance(s.T @ s / n, n, spec.param_names(), "opg")


def observed_hessian(spec: ModelSpec, theta: Theta, data: SeriesData, init) -> np.ndarray:
    """Hessian of the log-likelihood w.r.t. the reported parameters.

    Second differences in unconstrained coordinates (steps
    ``eps**(1/4) * (1 + |v_i|)``) are mapped back with the chain rule,
    including the curvature of the transform.
    """
    param, v = _unconstrained(spec, theta)
    fn = _obs_loglik_fn(spec, param, data, init)
    Hv = fd_hessian(lambda x: float(np.sum(fn(x))), v)
    _, gv = loglik_and_grad(param, v, data, init)
    jac, second = param.theta_jacobian(theta)
    H = jac.T @ Hv @ jac + np.einsum("i,ijk->jk", gv, second)
    return 0.5 * (H + H.T)


def hessian_fd(spec: ModelSpec, theta: Theta, data: SeriesData, init):
    """Observed-information estimate ``-Hessian / n``.

    Raises
    ------
    NonPositiveDefiniteError
        If ``-Hessian / n`` has an eigenvalue below 1e-10.
    """
    H = observed_hessian(spec, theta, data, init)
    n = data.window(spec.s).shape[0]
    return information_to_covariance(-H / n, n, spec.param_names(), "hessian", H, check="pd")


def confidence_intervals(fit, level: float = 0.95, method: str = "opg"):
    """Wald intervals ``theta_i +- z * se_i`` in reported units.

    Parameters
    ----------
    fit : FitResult
    level : float
    method : {"opg", "hessian"}

    Returns
    -------
    dict
        ``name -> (lower, upper)``.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    est = fit.opg if method == "opg" else fit.hessian
    if est is None:
        raise ValueError(f"fit has no {method} covariance estimate")
    z = norm.ppf(0.5 * (1.0 + level))
    center = fit.spec.theta_vector(fit.theta_hat)
    out = {}
    for name, c, se in zip(est.names, center, est.se):
        if se == 0:
            warnings.warn(f"zero-width interval for {name}", DegenerateIntervalWarning, stacklevel=2)
        out[name] = (float(c - z * se), float(c + z * se))
    return out


def louis_hessian_small(spec: ModelSpec, theta: Theta, data: SeriesData, init):
    """Observed Hessian by exact enumeration of hidden paths.

    Computes ``E[d2 complete | Y] + Var[d complete | Y]`` over all paths of
    the expanded chain. Meant as a test oracle for small problems.

    Raises
    ------
    ScaleError
        If more than 1e7 paths would be enumerated.
    """
    logg, trans, xi = prepare(spec, theta, data, init)
    n, S = logg.shape
    starts = np.flatnonzero(xi > 0)
    if len(starts) * float(S) ** n > MAX_PATHS:
        raise ScaleError(f"{len(starts) * float(S) ** n:.3g} paths exceed the enumeration limit")
    paths = np.array([(x0,) + rest for x0 in starts for rest in product(range(S), repeat=n)])
    steps = np.arange(1, n + 1)
    with np.errstate(divide="ignore"):
        logw = np.log(xi[paths[:, 0]])
        logw = logw + np.log(trans[paths[:, :-1], paths[:, 1:]]).sum(axis=1)
    logw = logw + logg[steps - 1, paths[:, 1:]].sum(axis=1)
    keep = np.isfinite(logw)
    paths, logw = paths[keep], logw[keep]
    wts = np.exp(logw - logw.max())
    wts /= wts.sum()

    window = data.window(spec.s)
    w = data.covariates(spec.s)
    nf = len(spec.family_params())
    q = spec.n_params
    dg = emission_gradient(spec, theta.values, window, w)
    hg = _emission_hessian(spec, theta.values, window, w)

    grads = np.zeros((len(paths), q))
    grads[:, :nf] = dg[steps - 1, paths[:, 1:]].sum(axis=1)
    marg = np.zeros((n, S))
    for t in range(n):
        np.add.at(marg[t], paths[:, t + 1], wts)
    hess = np.zeros((q, q))
    hess[:nf, :nf] = np.einsum("ts,tsjk->jk", marg, hg)

    cur = spec.states[:, 0]
    m = spec.n_regimes
    counts = np.zeros((len(paths), m, m))
    for t in range(n):
        np.add.at(counts, (np.arange(len(paths)), cur[paths[:, t]], cur[paths[:, t + 1]]), 1.0)
    P = theta.transition
    pos = nf
    for i, (free, ref) in enumerate(spec.transition_layout()):
        idx = list(range(pos, pos + len(free)))
        for a, j in zip(idx, free):
            grads[:, a] = counts[:, i, j] / P[i, j] - counts[:, i, ref] / P[i, ref]
            mean_ref = wts @ counts[:, i, ref]
            for b in idx:
                hess[a, b] -= mean_ref / P[i, ref] ** 2
            hess[a, a] -= (wts @ counts[:, i, j]) / P[i, j] ** 2
        pos += len(free)
    mean = wts @ grads
    centered = grads - mean
    hess += (centered * wts[:, None]).T @ centered
    return 0.5 * (hess + hess.T)
