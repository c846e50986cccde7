"""
Pure Python/numpy versions of the filtering recursions.

Used when the compiled extension is unavailable, or when
``REGIMESWITCH_PURE_PYTHON=1`` is set. Results agree with the compiled
kernels to rounding error.
"""

import numpy as np

from .errors import NumericalUnderflowError

__all__ = ["forward", "backward"]


def forward(logg, trans, init):
    """
    Scaled forward (predict-update) recursion.

    Parameters
    ----------
    logg : ndarray
        n by S matrix of log observation densities, one column per hidden state.
    trans : ndarray
        S by S transition matrix, rows index the origin state.
    init : ndarray
        Distribution of the hidden state at time 0.

    Returns
    -------
    predicted : ndarray
        n by S one-step predicted probabilities.
    filtered : ndarray
        n by S filtered probabilities.
    obs_loglik : ndarray
        Log predictive density of each observation.
    shift : ndarray
        Per-step max log density used for scaling; needed by ``backward``.
    """
    logg = np.ascontiguousarray(logg, dtype=float)
    nobs, nstate = logg.shape
    predicted = np.empty((nobs, nstate))
    filtered = np.empty((nobs, nstate))
    obs_loglik = np.empty(nobs)
    shift = np.empty(nobs)
    prev = np.asarray(init, dtype=float)
    for t in range(nobs):
        pred = prev @ trans
        live = pred > 0.0
        row = logg[t]
        m = row[live].max() if live.any() else -np.inf
        if not np.isfinite(m):
            raise NumericalUnderflowError(
                f"observation {t + 1} has zero density under every reachable state"
            )
        dens = np.where(live, np.exp(np.where(live, row - m, 0.0)), 0.0)
        joint = pred * dens
        c = joint.sum()
        if not (c > 0.0 and np.isfinite(c)):
            raise NumericalUnderflowError(
                f"observation {t + 1} has zero density under every reachable state"
            )
        predicted[t] = pred
        filtered[t] = joint / c
        obs_loglik[t] = np.log(c) + m
        shift[t] = m
        prev = filtered[t]
    return predicted, filtered, obs_loglik, shift


def backward(logg, trans, predicted, obs_loglik, shift):
    """
    Scaled backward recursion matching ``forward``.

    Returns an (n + 1) by S array ``beta`` with ``beta[t]`` the scaled
    backward variable at time t (``beta[n] = 1``). Smoothed probabilities are
    ``filtered[t - 1] * beta[t]`` for t >= 1 and ``init * beta[0]``.
    """
    logg = np.asarray(logg, dtype=float)
    nobs, nstate = logg.shape
    beta = np.empty((nobs + 1, nstate))
    beta[nobs] = 1.0
    for t in range(nobs, 0, -1):
        live = predicted[t - 1] > 0.0
        dens = np.where(live, np.exp(np.where(live, logg[t - 1] - shift[t - 1], 0.0)), 0.0)
        scale = np.exp(obs_loglik[t - 1] - shift[t - 1])
        beta[t - 1] = trans @ (dens * beta[t]) / scale
    return beta
