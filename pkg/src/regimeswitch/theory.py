"""
Exact checks of the forgetting of the conditional hidden chain.

On a finite state space the law of ``X_k`` given the data and an initial
law at time ``-m`` can be computed exactly, so the total-variation distance
between two initializations can be compared with the product bound
``prod_i (1 - omega_i)`` over blocks of length p (the minorization order).

Times are relative to the start of the data segment: the initial state sits
at relative time 0 and the j-th usable observation at relative time j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chain import expand, minorization, support_mask
from .filtering import backward_pass, prepare, run_filter
from .model import ModelSpec, SeriesData, Theta

__all__ = [
    "OmegaSeries",
    "MixingCheck",
    "omega_window",
    "omega_series",
    "conditional_filter_exact",
    "check_mixing_bound",
    "forgetting_curve",
    "total_variation",
]

MARGIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OmegaSeries:
    values: np.ndarray
    p: int
    theta_mode: str


@dataclass(frozen=True)
class MixingCheck:
    tv_distance: float
    bound: float
    margin: float
    passed: bool


def total_variation(a, b) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def _sigma_ratio(spec: ModelSpec, thetas):
    """Common minorization order and ``inf sigma_- / sup sigma_+`` over thetas."""
    chains = [expand(th.transition, spec.p) for th in thetas]
    p_min = max(minorization(ch).p_min for ch in chains)
    lo, hi = np.inf, 0.0
    for ch in chains:
        # positivity on the support persists for higher powers
        block = np.linalg.matrix_power(ch.T, p_min)[:, support_mask(ch)]
        lo, hi = min(lo, block.min()), max(hi, block.max())
    return p_min, lo / hi


def _log_g_bounds(spec: ModelSpec, thetas, window, w=None):
    """Row-wise min and max of log g over states (and over the theta grid)."""
    lo = hi = None
    for th in thetas:
        lg = spec.family.log_density(th.values, spec.n_regimes, window, spec.states, w)
        rlo, rhi = lg.min(axis=1), lg.max(axis=1)
        lo = rlo if lo is None else np.minimum(lo, rlo)
        hi = rhi if hi is None else np.maximum(hi, rhi)
    return lo, hi


def omega_window(
    spec: ModelSpec,
    theta: Theta,
    ylags_window=None,
    w_window=None,
    theta_grid: Optional[Sequence[Theta]] = None,
) -> float:
    """Minorization coefficient for one block.

    Parameters
    ----------
    spec : ModelSpec
    theta : Theta
    ylags_window : array_like
        ``p + s - 1`` consecutive observations, oldest first, where p is the
        minorization order. The last ``p - 1`` enter the density ratio; the
        first ``s`` serve as their lags. Ignored when p = 1.
    w_window : array_like, optional
        Matching covariate rows.
    theta_grid : sequence of Theta, optional
        Take the infimum and supremum over these parameters as well
        (``theta`` is included).

    Returns
    -------
    float
        ``sigma_-/sigma_+ * (inf prod g / sup prod g)**2``, in (0, 1].
    """
    thetas = [theta] + list(theta_grid or [])
    p_min, ratio = _sigma_ratio(spec, thetas)
    if p_min == 1:
        return ratio
    y = np.asarray(ylags_window, dtype=float).ravel()
    need = p_min + spec.s - 1
    if y.shape[0] != need:
        raise ValueError(f"window must hold {need} observations")
    data = SeriesData(y, w_window)
    lo, hi = _log_g_bounds(spec, thetas, data.window(spec.s), data.covariates(spec.s))
    return float(ratio * np.exp(2.0 * np.sum(lo - hi)))


def omega_series(spec: ModelSpec, theta: Theta, data: SeriesData, theta_grid=None) -> OmegaSeries:
    """omega for block i = 1, 2, ... of the data segment.

    Block i covers relative times ``p*i - p .. p*i - 1``; its density ratio
    uses observations at relative times ``p*i - p + 1 .. p*i - 1``.
    """
    thetas = [theta] + list(theta_grid or [])
    p_min, ratio = _sigma_ratio(spec, thetas)
    n = len(data) - spec.s
    nblocks = n // p_min + 1
    if p_min == 1:
        vals = np.full(nblocks, ratio)
    else:
        lo, hi = _log_g_bounds(spec, thetas, data.window(spec.s), data.covariates(spec.s))
        gap = np.concatenate(([0.0], lo - hi))  # indexed by relative time
        vals = np.empty(nblocks)
        for i in range(1, nblocks + 1):
            times = np.arange(p_min * i - p_min + 1, p_min * i)
            times = times[times <= n]
            vals[i - 1] = ratio * np.exp(2.0 * gap[times].sum())
    return OmegaSeries(vals, p_min, "theta_grid" if theta_grid else "fixed_theta")


def conditional_filter_exact(
    spec: ModelSpec, theta: Theta, data: SeriesData, init, smoothed: bool = False
) -> np.ndarray:
    """Law of ``X_k`` for k = 0..n given ``X_0 ~ init`` and the data.

    Row k conditions on observations through k (filtering) or on the whole
    segment when ``smoothed`` is set.
    """
    logg, trans, xi = prepare(spec, theta, data, init)
    out = run_filter(logg, trans, xi)
    if not smoothed:
        return np.vstack((xi[None, :], out.filtered))
    beta, marginal, initial = backward_pass(logg, trans, xi, out)
    return np.vstack((initial[None, :], marginal))


def _per_state_laws(spec, theta, data, smoothed, states):
    """Conditional law of X_k given X_0 = x for each x in ``states``."""
    laws = {}
    for x in states:
        xi = np.zeros(spec.n_states)
        xi[x] = 1.0
        laws[x] = conditional_filter_exact(spec, theta, data, xi, smoothed)
    return laws


def _mixture(laws, mu):
    return sum(mu[x] * laws[x] for x in laws)


def _bound_products(omegas, count):
    out = np.ones(count + 1)
    for j in range(1, count + 1):
        out[j] = out[j - 1] * (1.0 - omegas[j - 1])
    return out


def forgetting_curve(
    spec: ModelSpec,
    theta: Theta,
    data: SeriesData,
    m: int,
    inits,
    smoothed: bool = True,
    theta_grid=None,
):
    """Tabulate TV distance and bound for every k in ``-m .. n - m``.

    Parameters
    ----------
    m : int
        The initial state is ``X_{-m}``; it sits at the start of ``data``.
    inits : pair of array_like
        Initial distributions mu_1 and mu_2 over the expanded states.

    Returns
    -------
    list of (k, tv_distance, bound)
    """
    mu1, mu2 = (np.asarray(mu, dtype=float) for mu in inits)
    n = len(data) - spec.s
    support = sorted(set(np.flatnonzero(mu1 > 0)) | set(np.flatnonzero(mu2 > 0)))
    laws = _per_state_laws(spec, theta, data, smoothed, support)
    a, b = _mixture(laws, mu1), _mixture(laws, mu2)
    om = omega_series(spec, theta, data, theta_grid)
    prods = _bound_products(om.values, n // om.p)
    rows = []
    for j in range(n + 1):
        rows.append((j - m, total_variation(a[j], b[j]), float(prods[j // om.p])))
    return rows


def check_mixing_bound(
    spec: ModelSpec,
    theta: Theta,
    data: SeriesData,
    k: int,
    m: int,
    mu1,
    mu2,
    smoothed: bool = True,
    theta_grid=None,
) -> MixingCheck:
    """Compare the exact TV distance at time k with the product bound.

    The chain starts at ``X_{-m}`` (the start of ``data``); conditioning is
    on the whole segment (or on data through k when ``smoothed`` is False).
    """
    n = len(data) - spec.s
    if not -m <= k <= n - m:
        raise ValueError("need -m <= k <= n - m")
    curve = forgetting_curve(spec, theta, data, m, (mu1, mu2), smoothed, theta_grid)
    _, tv, bound = curve[k + m]
    margin = bound - tv
    return MixingCheck(tv, bound, margin, margin >= -MARGIN_TOL)
