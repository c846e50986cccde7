"""
Forward filtering and forward-backward smoothing over the expanded chain.

``obs_loglik[k]`` is the log predictive density of the k-th usable
observation; ``total`` is their sum in time order. For a distribution ``xi``
over the time-0 state the first prediction is ``T' xi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .chain import expanded_transition
from .model import ModelSpec, SeriesData, Theta

__all__ = [
    "FilterOutput",
    "SmoothOutput",
    "forward_filter",
    "filter",
    "loglik",
    "smooth",
]


@dataclass(frozen=True, eq=False)
class FilterOutput:
    predicted: np.ndarray
    filtered: np.ndarray
    obs_loglik: np.ndarray
    total: float
    shift: np.ndarray


@dataclass(frozen=True, eq=False)
class SmoothOutput:
    marginal: np.ndarray
    pairwise: np.ndarray
    regime_marginal: np.ndarray
    initial: np.ndarray  # posterior of the time-0 state


def prepare(spec: ModelSpec, theta: Theta, data: SeriesData, init, logg=None):
    """Log-density matrix, expanded transition matrix and initial vector."""
    spec.validate_data(data)
    if logg is None:
        logg = spec.log_density_matrix(theta, data)
    trans = expanded_transition(theta.transition, spec.p)
    xi = init if isinstance(init, np.ndarray) else spec.init_vector(init)
    return logg, trans, xi


def run_filter(logg, trans, xi) -> FilterOutput:
    predicted, filtered, obs, shift = kernels.forward(logg, trans, xi)
    # plain left-to-right sum, so total is reproducible from obs_loglik
    return FilterOutput(predicted, filtered, obs, float(sum(obs.tolist())), shift)


def forward_filter(spec: ModelSpec, theta: Theta, data: SeriesData, init) -> FilterOutput:
    """Predicted and filtered expanded-state probabilities.

    Parameters
    ----------
    spec : ModelSpec
    theta : Theta
    data : SeriesData
    init : PointMass or Distribution
        Law of the hidden state at time 0.

    Raises
    ------
    NumericalUnderflowError
        If an observation has zero density under every reachable state.
    """
    return run_filter(*prepare(spec, theta, data, init))


filter = forward_filter  # noqa: A001  (module-level name mirrors the operation)


def loglik(spec: ModelSpec, theta: Theta, data: SeriesData, init) -> float:
    return forward_filter(spec, theta, data, init).total


def backward_pass(logg, trans, xi, out: FilterOutput):
    beta = kernels.backward(logg, trans, out.predicted, out.obs_loglik, out.shift)
    marginal = out.filtered * beta[1:]
    initial = xi * beta[0]
    initial = initial / initial.sum()
    return beta, marginal, initial


def pair_weights(logg, out: FilterOutput, beta):
    """Rows ``d_t * beta_t / c_t`` used by the pairwise posteriors."""
    live = out.predicted > 0
    dens = np.where(live, np.exp(np.where(live, logg - out.shift[:, None], 0.0)), 0.0)
    scale = np.exp(out.obs_loglik - out.shift)
    return dens * beta[1:] / scale[:, None]


def transition_counts(trans, xi, out: FilterOutput, weights):
    """Posterior expected number of each expanded transition, t = 1..n."""
    prev = np.vstack((xi[None, :], out.filtered[:-1]))
    return (prev.T @ weights) * trans


def regime_marginal(spec: ModelSpec, marginal: np.ndarray) -> np.ndarray:
    current = spec.states[:, 0]
    out = np.zeros((marginal.shape[0], spec.n_regimes))
    for i in range(spec.n_regimes):
        out[:, i] = marginal[:, current == i].sum(axis=1)
    return out


def smooth(spec: ModelSpec, theta: Theta, data: SeriesData, init, pairwise=True) -> SmoothOutput:
    """Forward-backward smoothing.

    ``pairwise[k - 1]`` is the joint posterior of the states at the (k-1)-th
    and k-th usable observations (k = 2..n). Pass ``pairwise=False`` to skip
    building that array for long series.
    """
    logg, trans, xi = prepare(spec, theta, data, init)
    out = run_filter(logg, trans, xi)
    beta, marginal, initial = backward_pass(logg, trans, xi, out)
    if pairwise:
        w = pair_weights(logg, out, beta)
        pairs = out.filtered[:-1, :, None] * trans[None, :, :] * w[1:, None, :]
    else:
        pairs = np.empty((0, spec.n_states, spec.n_states))
    return SmoothOutput(marginal, pairs, regime_marginal(spec, marginal), initial)
