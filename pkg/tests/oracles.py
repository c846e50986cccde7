"""Independent reference computations used by the tests.

Densities are written point by point with scipy.stats, and likelihoods and
posteriors come from enumerating every regime path, so none of this shares
code with the vectorized implementation under test.
"""

import itertools
import math

import numpy as np
from scipy import stats


def point_logpdf(family, values, M, y, ylags, regimes):
    """log g for one observation; ``ylags`` is (y_{k-1}, ..., y_{k-s})."""
    name = family.name
    v = list(values)
    if name == "hamilton_ar":
        r = family.ar_order
        mu, ar, sigma = v[:M], v[M:M + r], v[M + r]
        u = y - mu[regimes[0]]
        pred = sum(ar[l] * (ylags[l] - mu[regimes[l + 1]]) for l in range(r))
        return stats.norm.logpdf(u - pred, scale=sigma)
    if name == "mscd_weibull":
        mu, beta, gam = v[:M], v[M], v[M + 1]
        lam = (mu[regimes[0]] + beta * ylags[0]) / math.gamma(1.0 + 1.0 / gam)
        return stats.weibull_min.logpdf(y, c=gam, scale=lam)
    if name == "bounce_back":
        mu, lam, sigma = v[:M], v[M], v[M + 1]
        mean = mu[regimes[0]] + lam * sum(regimes[1:])
        return stats.norm.logpdf(y, loc=mean, scale=sigma)
    if name == "switching_arch":
        a = family.arch_order
        mu, ar_y = v[0], v[1]
        sig = v[2:2 + M]
        arch = v[2 + M:2 + M + a]
        full = [y] + list(ylags)
        h2 = 1.0
        for l in range(1, a + 1):
            z = full[l] - mu - ar_y * full[l + 1]
            h2 += arch[l - 1] * (z / sig[regimes[l]]) ** 2
        scale = sig[regimes[0]] * math.sqrt(h2)
        z0 = y - mu - ar_y * ylags[0]
        if family.innovation == "gaussian":
            return stats.norm.logpdf(z0, scale=scale)
        dof = v[2 + M + a]
        tscale = scale * math.sqrt((dof - 2.0) / dof)
        return stats.t.logpdf(z0, df=dof, scale=tscale)
    raise ValueError(name)


def enumerate_posterior(spec, theta, y, xi):
    """Log-likelihood and posteriors by summing over all regime paths.

    Parameters
    ----------
    y : array
        Full series including the s presample values.
    xi : array
        Law of the expanded state at time 0.

    Returns
    -------
    loglik, marginal (n, S), initial (S,), pairwise (n-1, S, S)
    """
    fam, M, p, s = spec.family, spec.n_regimes, spec.p, spec.s
    P = np.asarray(theta.transition)
    n = len(y) - s
    S = M ** p

    def index(tup):
        idx = 0
        for r in tup:
            idx = idx * M + r
        return idx

    dens = np.empty((n, S))
    for k in range(n):
        for tup in itertools.product(range(M), repeat=p):
            t = k + s
            lags = [y[t - l] for l in range(1, s + 1)]
            dens[k, index(tup)] = math.exp(point_logpdf(fam, theta.values, M, y[t], lags, tup))
    total = 0.0
    marginal = np.zeros((n, S))
    initial = np.zeros(S)
    pairwise = np.zeros((max(n - 1, 0), S, S))
    # regimes r_{1-p}, ..., r_0, r_1, ..., r_n (oldest first)
    for path in itertools.product(range(M), repeat=n + p):
        states = []
        for k in range(n + 1):
            cur = p - 1 + k
            states.append(index([path[cur - j] for j in range(p)]))
        w = xi[states[0]]
        if w == 0:
            continue
        for k in range(1, n + 1):
            w *= P[path[p - 2 + k], path[p - 1 + k]] * dens[k - 1, states[k]]
        if w == 0:
            continue
        total += w
        initial[states[0]] += w
        for k in range(1, n + 1):
            marginal[k - 1, states[k]] += w
        for k in range(1, n):
            pairwise[k - 1, states[k], states[k + 1]] += w
    return math.log(total), marginal / total, initial / total, pairwise / total
