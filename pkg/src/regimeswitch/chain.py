"""
Expanded regime chains.

With regime memory p the hidden state is the tuple
``X_k = (r_k, r_{k-1}, ..., r_{k-p+1})``. States are enumerated
lexicographically with the current regime as the most significant digit, so
the tuple ``(i_1, ..., i_p)`` has index ``sum_j i_j M**(p - j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NoMinorizationError, ReducibleChainError
from .model import regime_tuples

__all__ = [
    "ExpandedChain",
    "MinorizationConstants",
    "expand",
    "expanded_transition",
    "stationary",
    "minorization",
    "support_mask",
]

ZERO_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class ExpandedChain:
    n_regimes: int
    depth: int
    states: np.ndarray
    T: np.ndarray
    regime_transition: np.ndarray

    @property
    def n_states(self):
        return self.T.shape[0]

    def index(self, regimes) -> int:
        idx = 0
        for r in regimes:
            idx = idx * self.n_regimes + int(r)
        return idx

    def tuple(self, index: int) -> tuple:
        return tuple(int(r) for r in self.states[index])

    def to_json(self) -> dict:
        return {
            "n_regimes": self.n_regimes,
            "depth": self.depth,
            "states": [[int(r) + 1 for r in row] for row in self.states],
            "T": self.T.tolist(),
        }


@dataclass(frozen=True)
class MinorizationConstants:
    p_min: int
    sigma_minus: float
    sigma_plus: float


def expanded_transition(P, depth: int) -> np.ndarray:
    """Transition matrix of the expanded chain for regime matrix ``P``."""
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    if P.ndim != 2 or P.shape[1] != m:
        raise DimensionError("regime transition matrix must be square")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth == 1:
        return P.copy()
    n = m**depth
    block = m ** (depth - 1)
    origin = np.arange(n)
    current = origin // block
    shifted = origin // m  # (i_1, ..., i_{p-1}) as the lag part of the successor
    T = np.zeros((n, n))
    for j in range(m):
        T[origin, j * block + shifted] = P[current, j]
    return T


def expand(P, depth: int, mask=None) -> ExpandedChain:
    """Build the expanded chain.

    Parameters
    ----------
    P : array_like
        M by M row-stochastic regime transition matrix.
    depth : int
        Regime memory p.
    mask : array_like of bool, optional
        Allowed transitions; entries outside the mask must be zero in ``P``.
    """
    P = np.asarray(P, dtype=float)
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("rows of P must be probability vectors")
    if mask is not None and np.any(P[~np.asarray(mask, dtype=bool)] != 0):
        raise ValueError("masked entries of P must be zero")
    m = P.shape[0]
    return ExpandedChain(m, depth, regime_tuples(m, depth), expanded_transition(P, depth), P.copy())


def _as_matrix(chain):
    return chain.T if isinstance(chain, ExpandedChain) else np.asarray(chain, dtype=float)


def stationary(chain) -> np.ndarray:
    """Stationary distribution by a direct linear solve.

    Raises
    ------
    ReducibleChainError
        If the unit eigenvalue is not simple.
    """
    T = _as_matrix(chain)
    n = T.shape[0]
    a = np.eye(n) - T.T
    if np.linalg.matrix_rank(a, tol=1e-10) != n - 1:
        raise ReducibleChainError("the chain has no unique stationary distribution")
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(a, rhs)
    pi[np.abs(pi) < 1e-300] = 0.0
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def support_mask(chain: ExpandedChain) -> np.ndarray:
    """States whose consecutive regimes are possible transitions.

    These are the states the chain can occupy after p steps; the remaining
    tuples are kept in the matrix but never entered.
    """
    P = chain.regime_transition
    ok = np.ones(chain.n_states, dtype=bool)
    st = chain.states
    for j in range(chain.depth - 1):
        ok &= P[st[:, j + 1], st[:, j]] > 0
    return ok


def minorization(chain) -> MinorizationConstants:
    """Smallest r with a strictly positive r-step kernel on the support.

    Rows range over every state and columns over the support. ``sigma_minus``
    and ``sigma_plus`` are the smallest and largest of those entries.
    """
    if isinstance(chain, ExpandedChain):
        T, cols, m = chain.T, support_mask(chain), chain.n_regimes
    else:
        T = np.asarray(chain, dtype=float)
        cols, m = np.ones(T.shape[0], dtype=bool), T.shape[0]
    n = T.shape[0]
    power = np.eye(n)
    for r in range(1, m * n + 1):
        power = power @ T
        block = power[:, cols]
        if block.min() > ZERO_TOL:
            return MinorizationConstants(r, float(block.min()), float(block.max()))
    raise NoMinorizationError("no power of the transition matrix is strictly positive")
