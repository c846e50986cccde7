"""
Regime-conditional observation densities, parameters and simulation.

A model is a :class:`ModelSpec`: a density family, the number of regimes M
and a boolean mask of allowed regime transitions. The density of ``y_k`` reads
``s`` lagged observations and the ``p``-tuple of current and lagged regimes
``(r_k, r_{k-1}, ..., r_{k-p+1})``; the hidden chain is the expanded chain on
these tuples (see :mod:`regimeswitch.chain`).

Parameters live in a :class:`Theta` (family parameters plus the regime
transition matrix). The *reported* parameter vector lists the family
parameters followed by the free transition probabilities ``p_ij`` row by row.
One allowed entry per row (the last allowed off-diagonal column) is the
reference category and is implied by the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import digamma, gammaln

from .errors import (
    DataDegeneracyError,
    DimensionError,
    DomainError,
    NonFiniteError,
    ReducibleChainError,
)

LOG_2PI = float(np.log(2.0 * np.pi))
BOX = 15.0

__all__ = [
    "Param",
    "DensityFamily",
    "HamiltonAR",
    "SwitchingARCH",
    "BounceBack",
    "MSCDWeibull",
    "ModelSpec",
    "Theta",
    "SeriesData",
    "PointMass",
    "Distribution",
    "EstimateXi",
    "Parametrization",
    "log_g",
    "to_unconstrained",
    "from_unconstrained",
    "simulate",
    "regime_tuples",
    "canonicalize",
]


@dataclass(frozen=True)
class Param:
    name: str
    kind: str = "real"  # real | positive | dof
    regime: Optional[int] = None
    lower: Optional[float] = None  # optimizer floor in natural units


def _to_free(kind, x):
    if kind == "real":
        return x
    if kind == "positive":
        return np.log(x)
    return np.log(x - 2.0)


def _from_free(kind, v):
    if kind == "real":
        return v
    if kind == "positive":
        return np.exp(v)
    return 2.0 + np.exp(v)


def regime_tuples(n_regimes: int, depth: int) -> np.ndarray:
    """All regime tuples ``(r_k, ..., r_{k-depth+1})`` in lexicographic order.

    The current regime is the most significant digit.
    """
    return np.array(list(product(range(n_regimes), repeat=depth)), dtype=np.intp).reshape(
        -1, depth
    )


def _kmeans_1d(y, k, iters=25):
    centers = np.quantile(y, (np.arange(k) + 0.5) / k)
    for _ in range(iters):
        labels = np.argmin(np.abs(y[:, None] - centers[None, :]), axis=1)
        new = np.array(
            [y[labels == j].mean() if np.any(labels == j) else centers[j] for j in range(k)]
        )
        if np.allclose(new, centers):
            break
        centers = new
    labels = np.argmin(np.abs(y[:, None] - centers[None, :]), axis=1)
    order = np.argsort(centers)
    return centers[order], np.argsort(order)[labels]


class DensityFamily:
    """Base class for regime-conditional density families.

    Subclasses define ``s`` (lags of y read), ``p`` (regimes read),
    the parameter layout and a vectorized log density.
    """

    name = "base"
    label_param: Optional[str] = None
    positive_data = False

    @property
    def s(self) -> int:
        raise NotImplementedError

    @property
    def p(self) -> int:
        raise NotImplementedError

    def params(self, n_regimes: int) -> list[Param]:
        raise NotImplementedError

    def log_density(self, values, n_regimes, window, states, w=None):
        """Log densities for every row of ``window`` and every regime tuple.

        Parameters
        ----------
        values : ndarray
            Family parameters in the order of :meth:`params`.
        n_regimes : int
        window : ndarray
            n by (s + 1) array; column ``l`` holds ``y_{k-l}``.
        states : ndarray
            S by p array of regime tuples, current regime first.
        w : ndarray, optional
            Covariate rows aligned with ``window``. Unused by the built-in
            families.

        Returns
        -------
        ndarray
            n by S matrix of log densities.
        """
        raise NotImplementedError

    def grad_log_density(self, values, n_regimes, window, states, w=None):
        """Gradient of :meth:`log_density` w.r.t. the family parameters.

        Returns an n by S by q array, or None when only the numeric version
        is available.
        """
        return None

    def draw(self, values, n_regimes, ylags, regimes, rng):
        raise NotImplementedError

    def presample(self, values, n_regimes) -> np.ndarray:
        return np.zeros(self.s)

    def start_values(self, y, n_regimes) -> np.ndarray:
        raise NotImplementedError

    def validate_values(self, values, n_regimes):
        for prm, x in zip(self.params(n_regimes), values):
            if not np.isfinite(x):
                raise NonFiniteError(f"{prm.name} is not finite")
            if prm.kind == "positive" and not x > 0:
                raise NonFiniteError(f"{prm.name} must be positive, got {x}")
            if prm.kind == "dof" and not x > 2:
                raise NonFiniteError(f"{prm.name} must exceed 2, got {x}")

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class HamiltonAR(DensityFamily):
    """Regime-switching mean with Gaussian AR(r) deviations.

    ``y_k = mu_{r_k} + u_k`` with ``u_k = sum_l ar_l u_{k-l} + sigma e_k``.
    """

    ar_order: int = 0
    name = "hamilton_ar"
    label_param = "mu"

    def __post_init__(self):
        if self.ar_order < 0:
            raise ValueError("ar_order must be >= 0")

    @property
    def s(self):
        return self.ar_order

    @property
    def p(self):
        return self.ar_order + 1

    def params(self, n_regimes):
        out = [Param(f"mu_{i + 1}", "real", i) for i in range(n_regimes)]
        out += [Param(f"ar_{j + 1}") for j in range(self.ar_order)]
        out.append(Param("sigma", "positive"))
        return out

    def _unpack(self, values, m):
        values = np.asarray(values, dtype=float)
        return values[:m], values[m : m + self.ar_order], values[m + self.ar_order]

    def _resid(self, values, m, window, states):
        mu, ar, sigma = self._unpack(values, m)
        coef = np.concatenate(([1.0], -ar))
        e = (window @ coef)[:, None] - (mu[states] @ coef)[None, :]
        return e, mu, ar, sigma, coef

    def log_density(self, values, n_regimes, window, states, w=None):
        e, _, _, sigma, _ = self._resid(values, n_regimes, window, states)
        return -0.5 * LOG_2PI - np.log(sigma) - 0.5 * (e / sigma) ** 2

    def grad_log_density(self, values, n_regimes, window, states, w=None):
        m = n_regimes
        e, mu, ar, sigma, coef = self._resid(values, m, window, states)
        es = e / sigma**2
        nobs, nstate = e.shape
        out = np.empty((nobs, nstate, m + self.ar_order + 1))
        # d e / d mu_i = -sum_l coef_l [state_l == i]
        dmu = np.zeros((nstate, m))
        for lag in range(self.p):
            np.add.at(dmu, (np.arange(nstate), states[:, lag]), coef[lag])
        out[:, :, :m] = es[:, :, None] * dmu[None, :, :]
        for j in range(self.ar_order):
            dev = window[:, j + 1][:, None] - mu[states[:, j + 1]][None, :]
            out[:, :, m + j] = es * dev
        out[:, :, -1] = -1.0 / sigma + e**2 / sigma**3
        return out

    def draw(self, values, n_regimes, ylags, regimes, rng):
        mu, ar, sigma = self._unpack(values, n_regimes)
        u_lags = np.asarray(ylags) - mu[np.asarray(regimes[1:], dtype=int)]
        return mu[regimes[0]] + float(ar @ u_lags) + sigma * rng.standard_normal()

    def presample(self, values, n_regimes):
        mu, _, _ = self._unpack(values, n_regimes)
        return np.full(self.s, mu.mean())

    def start_values(self, y, n_regimes):
        centers, labels = _kmeans_1d(y, n_regimes)
        resid = y - centers[labels]
        sigma = max(float(resid.std()), 1e-3 * float(y.std()) + 1e-12)
        return np.concatenate((centers, np.zeros(self.ar_order), [sigma]))

    def to_json(self):
        return {"name": self.name, "ar_order": self.ar_order}


@dataclass(frozen=True)
class SwitchingARCH(DensityFamily):
    """Switching ARCH with regime-dependent scale.

    ``y_k = mu + ar_y y_{k-1} + sigma_{r_k} h_k e_k`` and
    ``h_k^2 = 1 + sum_l arch_l u_{k-l}^2`` with
    ``u_{k-l} = (y_{k-l} - mu - ar_y y_{k-l-1}) / sigma_{r_{k-l}}``.
    The ARCH intercept is normalized to one so the regime scales are
    identified. Student-t innovations are scaled to unit variance.
    """

    arch_order: int = 1
    innovation: str = "gaussian"
    name = "switching_arch"
    label_param = "sigma"

    def __post_init__(self):
        if self.arch_order < 1:
            raise ValueError("arch_order must be >= 1")
        if self.innovation not in ("gaussian", "student_t"):
            raise ValueError("innovation must be 'gaussian' or 'student_t'")

    @property
    def s(self):
        return self.arch_order + 1

    @property
    def p(self):
        return self.arch_order + 1

    def params(self, n_regimes):
        out = [Param("mu"), Param("ar_y")]
        out += [Param(f"sigma_{i + 1}", "positive", i) for i in range(n_regimes)]
        out += [Param(f"arch_{j + 1}", "positive") for j in range(self.arch_order)]
        if self.innovation == "student_t":
            out.append(Param("dof", "dof"))
        return out

    def _unpack(self, values, m):
        values = np.asarray(values, dtype=float)
        a = self.arch_order
        mu, ar_y = values[0], values[1]
        sig = values[2 : 2 + m]
        arch = values[2 + m : 2 + m + a]
        dof = values[2 + m + a] if self.innovation == "student_t" else None
        return mu, ar_y, sig, arch, dof

    def _log_std(self, e, dof):
        if dof is None:
            return -0.5 * LOG_2PI - 0.5 * e**2
        c = gammaln(0.5 * (dof + 1)) - gammaln(0.5 * dof) - 0.5 * np.log(np.pi * (dof - 2))
        return c - 0.5 * (dof + 1) * np.log1p(e**2 / (dof - 2))

    def log_density(self, values, n_regimes, window, states, w=None):
        mu, ar_y, sig, arch, dof = self._unpack(values, n_regimes)
        z = window[:, :-1] - mu - ar_y * window[:, 1:]
        h2 = np.ones((window.shape[0], states.shape[0]))
        for lag in range(1, self.arch_order + 1):
            u = z[:, lag][:, None] / sig[states[:, lag]][None, :]
            h2 = h2 + arch[lag - 1] * u**2
        if np.any(h2 <= 0):
            raise NonFiniteError("non-positive conditional variance")
        scale = sig[states[:, 0]][None, :] * np.sqrt(h2)
        return self._log_std(z[:, 0][:, None] / scale, dof) - np.log(scale)

    def draw(self, values, n_regimes, ylags, regimes, rng):
        mu, ar_y, sig, arch, dof = self._unpack(values, n_regimes)
        ylags = np.asarray(ylags, dtype=float)
        h2 = 1.0
        for lag in range(1, self.arch_order + 1):
            z = ylags[lag - 1] - mu - ar_y * ylags[lag]
            h2 += arch[lag - 1] * (z / sig[regimes[lag]]) ** 2
        if dof is None:
            eps = rng.standard_normal()
        else:
            eps = rng.standard_t(dof) * np.sqrt((dof - 2) / dof)
        return mu + ar_y * ylags[0] + sig[regimes[0]] * np.sqrt(h2) * eps

    def presample(self, values, n_regimes):
        mu, ar_y, *_ = self._unpack(values, n_regimes)
        level = mu / (1 - ar_y) if abs(ar_y) < 1 else mu
        return np.full(self.s, level)

    def start_values(self, y, n_regimes):
        dev = np.abs(y - y.mean())
        centers, labels = _kmeans_1d(dev, n_regimes)
        sig = np.array(
            [max(float(np.sqrt(np.mean((y[labels == j] - y.mean()) ** 2))), 1e-3)
             if np.any(labels == j) else float(y.std()) for j in range(n_regimes)]
        )
        sig = np.sort(sig) / np.sqrt(1.2)
        out = [float(y.mean()), 0.0, *sig, *([0.1] * self.arch_order)]
        if self.innovation == "student_t":
            out.append(8.0)
        return np.array(out)

    def to_json(self):
        return {"name": self.name, "arch_order": self.arch_order, "innovation": self.innovation}


@dataclass(frozen=True)
class BounceBack(DensityFamily):
    """Post-recession bounce-back in growth rates.

    ``y_k = mu_{r_k} + lambda * sum_{j=1..memory} code(r_{k-j}) + sigma e_k``
    with regimes coded numerically as 0, ..., M-1. Relabeling regimes changes
    the model, so no label canonicalization applies.
    """

    memory: int = 1
    name = "bounce_back"
    label_param = None

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")

    @property
    def s(self):
        return 0

    @property
    def p(self):
        return self.memory + 1

    def params(self, n_regimes):
        out = [Param(f"mu_{i + 1}", "real", i) for i in range(n_regimes)]
        return out + [Param("lambda"), Param("sigma", "positive")]

    def log_density(self, values, n_regimes, window, states, w=None):
        values = np.asarray(values, dtype=float)
        mu, lam, sigma = values[:n_regimes], values[n_regimes], values[n_regimes + 1]
        mean = mu[states[:, 0]] + lam * states[:, 1:].sum(axis=1)
        e = window[:, 0][:, None] - mean[None, :]
        return -0.5 * LOG_2PI - np.log(sigma) - 0.5 * (e / sigma) ** 2

    def draw(self, values, n_regimes, ylags, regimes, rng):
        mu, lam, sigma = values[:n_regimes], values[n_regimes], values[n_regimes + 1]
        return mu[regimes[0]] + lam * float(np.sum(regimes[1:])) + sigma * rng.standard_normal()

    def start_values(self, y, n_regimes):
        centers, labels = _kmeans_1d(y, n_regimes)
        sigma = max(float((y - centers[labels]).std()), 1e-3)
        return np.concatenate((centers, [0.0, sigma]))

    def to_json(self):
        return {"name": self.name, "memory": self.memory}


@dataclass(frozen=True)
class MSCDWeibull(DensityFamily):
    """Switching conditional duration model with unit-mean Weibull errors.

    ``y_k = (mu_{r_k} + beta y_{k-1}) e_k``; the conditional density is
    Weibull with shape ``gamma`` and scale
    ``(mu_{r_k} + beta y_{k-1}) / Gamma(1 + 1/gamma)``.
    """

    name = "mscd_weibull"
    label_param = "mu"
    positive_data = True

    @property
    def s(self):
        return 1

    @property
    def p(self):
        return 1

    def params(self, n_regimes):
        out = [Param(f"mu_{i + 1}", "positive", i) for i in range(n_regimes)]
        return out + [Param("beta", "positive"), Param("gamma", "positive", lower=0.1)]

    def _parts(self, values, m, window, states):
        values = np.asarray(values, dtype=float)
        mu, beta, gam = values[:m], values[m], values[m + 1]
        y = window[:, 0][:, None]
        level = mu[states[:, 0]][None, :] + beta * window[:, 1][:, None]
        if np.any(level <= 0):
            raise NonFiniteError("non-positive conditional mean duration")
        loglam = np.log(level) - gammaln(1.0 + 1.0 / gam)
        logy = np.log(y)
        z = np.exp(gam * (logy - loglam))
        return y, logy, level, loglam, z, beta, gam

    def log_density(self, values, n_regimes, window, states, w=None):
        if np.any(window[:, 0] <= 0):
            raise DomainError("durations must be strictly positive")
        _, logy, _, loglam, z, _, gam = self._parts(values, n_regimes, window, states)
        return np.log(gam) + (gam - 1.0) * logy - gam * loglam - z

    def grad_log_density(self, values, n_regimes, window, states, w=None):
        m = n_regimes
        y, logy, level, loglam, z, beta, gam = self._parts(values, m, window, states)
        dl = gam * (z - 1.0)  # d logg / d loglam
        nobs, nstate = level.shape
        out = np.zeros((nobs, nstate, m + 2))
        onehot = np.zeros((nstate, m))
        onehot[np.arange(nstate), states[:, 0]] = 1.0
        out[:, :, :m] = (dl / level)[:, :, None] * onehot[None, :, :]
        out[:, :, m] = dl * window[:, 1][:, None] / level
        dloglam_dgam = digamma(1.0 + 1.0 / gam) / gam**2
        direct = 1.0 / gam + (logy - loglam) * (1.0 - z)
        out[:, :, m + 1] = direct + dl * dloglam_dgam
        return out

    def draw(self, values, n_regimes, ylags, regimes, rng):
        mu, beta, gam = values[:n_regimes], values[n_regimes], values[n_regimes + 1]
        lam = (mu[regimes[0]] + beta * ylags[0]) / np.exp(gammaln(1.0 + 1.0 / gam))
        return lam * rng.weibull(gam)

    def presample(self, values, n_regimes):
        mu, beta = values[:n_regimes], values[n_regimes]
        level = mu.mean() / (1 - beta) if beta < 1 else mu.mean()
        return np.array([level])

    def start_values(self, y, n_regimes):
        centers, _ = _kmeans_1d(y, n_regimes)
        beta = 0.05
        mu = np.maximum(centers * (1 - beta), 1e-3)
        return np.concatenate((mu, [beta, 1.0]))

    def to_json(self):
        return {"name": self.name}


FAMILIES = {
    "hamilton_ar": HamiltonAR,
    "switching_arch": SwitchingARCH,
    "bounce_back": BounceBack,
    "mscd_weibull": MSCDWeibull,
}


def family_from_json(doc: dict) -> DensityFamily:
    doc = dict(doc)
    cls = FAMILIES[doc.pop("name")]
    return cls(**doc)


@dataclass(frozen=True, eq=False)
class Theta:
    """Family parameters and the M by M regime transition matrix."""

    values: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).copy())
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float).copy())
        self.values.setflags(write=False)
        self.transition.setflags(write=False)

    @property
    def n_regimes(self):
        return self.transition.shape[0]


@dataclass(frozen=True)
class PointMass:
    """Initial hidden state fixed at an expanded-state index."""

    state: int


@dataclass(frozen=True, eq=False)
class Distribution:
    """Initial hidden state drawn from ``xi`` over the expanded states."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float).copy()
        if np.any(xi < 0) or abs(xi.sum() - 1.0) > 1e-12:
            raise ValueError("xi must be a probability vector")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class EstimateXi:
    """Request that the initial distribution be estimated jointly with theta."""


Init = Union[PointMass, Distribution]


@dataclass(frozen=True, eq=False)
class SeriesData:
    """Observed series; the first ``s`` values are conditioning lags."""

    y: np.ndarray
    w: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel().copy()
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.w is not None:
            w = np.asarray(self.w, dtype=float).copy()
            if w.ndim == 1:
                w = w[:, None]
            if w.shape[0] != y.shape[0]:
                raise DimensionError("covariates must have one row per observation")
            w.setflags(write=False)
            object.__setattr__(self, "w", w)

    def __len__(self):
        return self.y.shape[0]

    def window(self, s: int) -> np.ndarray:
        """Rows ``(y_k, y_{k-1}, ..., y_{k-s})`` for every usable k."""
        if self.y.shape[0] <= s:
            raise DimensionError(f"need more than {s} observations, got {self.y.shape[0]}")
        win = np.lib.stride_tricks.sliding_window_view(self.y, s + 1)
        return np.ascontiguousarray(win[:, ::-1])

    def covariates(self, s: int):
        return None if self.w is None else self.w[s:]


@dataclass(frozen=True)
class ModelSpec:
    """A density family, the number of regimes and the allowed transitions.

    ``mask[i][j]`` is True when the transition from regime i to j is allowed.
    """

    family: DensityFamily
    n_regimes: int
    mask: Optional[tuple] = None
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        m = self.n_regimes
        if m < 1:
            raise ValueError("n_regimes must be >= 1")
        mask = np.ones((m, m), dtype=bool) if self.mask is None else np.asarray(self.mask, bool)
        if mask.shape != (m, m):
            raise DimensionError("mask must be M by M")
        if not mask.any(axis=1).all():
            raise ValueError("every row of the mask needs an allowed entry")
        object.__setattr__(self, "mask", tuple(tuple(bool(x) for x in row) for row in mask))

    @property
    def allowed(self) -> np.ndarray:
        return np.array(self.mask, dtype=bool)

    @property
    def s(self):
        return self.family.s

    @property
    def p(self):
        return self.family.p

    @property
    def n_states(self):
        return self.n_regimes**self.p

    @property
    def states(self) -> np.ndarray:
        if "states" not in self._cache:
            self._cache["states"] = regime_tuples(self.n_regimes, self.p)
        return self._cache["states"]

    def family_params(self) -> list[Param]:
        return self.family.params(self.n_regimes)

    def transition_layout(self):
        """Per row: (free columns, reference column)."""
        if "layout" not in self._cache:
            allowed = self.allowed
            layout = []
            for i in range(self.n_regimes):
                cols = [j for j in range(self.n_regimes) if allowed[i, j]]
                off = [j for j in cols if j != i]
                ref = off[-1] if off else i
                layout.append(([j for j in cols if j != ref], ref))
            self._cache["layout"] = layout
        return self._cache["layout"]

    def transition_names(self) -> list[str]:
        return [
            f"p_{i + 1}{j + 1}"
            for i, (free, _) in enumerate(self.transition_layout())
            for j in free
        ]

    def param_names(self) -> list[str]:
        return [prm.name for prm in self.family_params()] + self.transition_names()

    @property
    def n_params(self):
        return len(self.param_names())

    def theta_vector(self, theta: Theta) -> np.ndarray:
        trans = [
            theta.transition[i, j]
            for i, (free, _) in enumerate(self.transition_layout())
            for j in free
        ]
        return np.concatenate((theta.values, trans))

    def theta_from_vector(self, vec) -> Theta:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got {vec.shape}")
        nf = len(self.family_params())
        trans = np.zeros((self.n_regimes, self.n_regimes))
        pos = nf
        for i, (free, ref) in enumerate(self.transition_layout()):
            for j in free:
                trans[i, j] = vec[pos]
                pos += 1
            trans[i, ref] = 1.0 - trans[i, free].sum()
        return Theta(vec[:nf], trans)

    def theta_from_dict(self, params: dict, transition=None) -> Theta:
        fam = np.array([float(params[prm.name]) for prm in self.family_params()])
        if transition is not None:
            return Theta(fam, np.asarray(transition, dtype=float))
        vec = np.concatenate((fam, [float(params[n]) for n in self.transition_names()]))
        return self.theta_from_vector(vec)

    def check_theta(self, theta: Theta):
        m = self.n_regimes
        if theta.values.shape != (len(self.family_params()),):
            raise DimensionError("wrong number of family parameters")
        if theta.transition.shape != (m, m):
            raise DimensionError("transition matrix must be M by M")
        self.family.validate_values(theta.values, m)
        trans = theta.transition
        if np.any(trans[~self.allowed] != 0.0):
            raise ValueError("masked transition entries must be exactly zero")
        if np.any(trans < 0) or np.any(np.abs(trans.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must be probability vectors")

    def validate_data(self, data: SeriesData):
        if len(data) <= self.s:
            raise DimensionError(f"need more than s={self.s} observations")
        if self.family.positive_data and np.any(data.y <= 0):
            raise DomainError("durations must be strictly positive")
        if not np.all(np.isfinite(data.y)):
            raise DomainError("observations must be finite")

    def log_density_matrix(self, theta: Theta, data: SeriesData) -> np.ndarray:
        window = data.window(self.s)
        return self.family.log_density(
            theta.values, self.n_regimes, window, self.states, data.covariates(self.s)
        )

    def init_vector(self, init: Init, theta: Optional[Theta] = None) -> np.ndarray:
        if isinstance(init, PointMass):
            if not 0 <= init.state < self.n_states:
                raise DimensionError(f"state index {init.state} out of range")
            out = np.zeros(self.n_states)
            out[init.state] = 1.0
            return out
        if isinstance(init, Distribution):
            if init.xi.shape != (self.n_states,):
                raise DimensionError(f"xi must have {self.n_states} entries")
            return np.array(init.xi)
        raise TypeError(f"unsupported initial condition {init!r}")

    def state_index(self, regimes: Sequence[int]) -> int:
        """Index of a regime tuple (0-based regimes, current first)."""
        regimes = list(regimes)
        if len(regimes) != self.p:
            raise DimensionError(f"state tuples have length {self.p}")
        idx = 0
        for r in regimes:
            idx = idx * self.n_regimes + int(r)
        return idx

    def uniform_over_lags(self, regime: int) -> Distribution:
        """Initial distribution fixing the current regime, uniform over lags."""
        xi = (self.states[:, 0] == regime).astype(float)
        return Distribution(xi / xi.sum())

    def default_theta(self, y) -> Theta:
        values = self.family.start_values(np.asarray(y, dtype=float), self.n_regimes)
        m = self.n_regimes
        allowed = self.allowed
        trans = np.zeros((m, m))
        for i in range(m):
            cols = np.flatnonzero(allowed[i])
            if len(cols) == 1:
                trans[i, cols[0]] = 1.0
            elif allowed[i, i]:
                trans[i, cols] = 0.1 / (len(cols) - 1)
                trans[i, i] = 0.9
            else:
                trans[i, cols] = 1.0 / len(cols)
        return Theta(values, trans)

    def to_json(self) -> dict:
        return {
            "family": self.family.to_json(),
            "n_regimes": self.n_regimes,
            "mask": [list(row) for row in self.mask],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelSpec":
        return cls(family_from_json(doc["family"]), int(doc["n_regimes"]), doc.get("mask"))


class Parametrization:
    """Bijection between unconstrained vectors and (Theta, xi).

    Real parameters map to themselves, positive ones through log, Student-t
    degrees of freedom through ``log(v - 2)``. Each transition row maps
    through a multinomial logit relative to its reference column. When
    ``estimate_xi`` is set, softmax coordinates for the initial distribution
    (relative to the last expanded state) are appended.

    ``fixed`` holds reported parameters pinned at given values; they are
    removed from the unconstrained vector.
    """

    def __init__(self, spec: ModelSpec, fixed: Optional[dict] = None, estimate_xi=False):
        self.spec = spec
        self.fixed = dict(fixed or {})
        unknown = set(self.fixed) - set(spec.param_names())
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        self.estimate_xi = estimate_xi
        self.fam_params = spec.family_params()
        self.free_fam = [k for k, prm in enumerate(self.fam_params) if prm.name not in self.fixed]
        self.rows = []
        for i, (free, ref) in enumerate(spec.transition_layout()):
            pinned = {j: self.fixed[f"p_{i + 1}{j + 1}"] for j in free
                      if f"p_{i + 1}{j + 1}" in self.fixed}
            active = [j for j in free if j not in pinned]
            mass = 1.0 - sum(pinned.values())
            if mass <= 0 and active:
                raise ValueError(f"fixed entries exhaust row {i + 1}")
            self.rows.append((active, ref, pinned, mass))
        self.n_theta = len(self.free_fam) + sum(len(r[0]) for r in self.rows)
        self.n_xi = spec.n_states - 1 if estimate_xi else 0

    @property
    def dim(self):
        return self.n_theta + self.n_xi

    @property
    def names(self):
        fam = [self.fam_params[k].name for k in self.free_fam]
        trans = [f"p_{i + 1}{j + 1}" for i, row in enumerate(self.rows) for j in row[0]]
        return fam + trans + [f"xi_logit_{k + 1}" for k in range(self.n_xi)]

    def bounds(self):
        out = []
        for k in self.free_fam:
            prm = self.fam_params[k]
            if prm.kind == "real":
                out.append((None, None))
            else:
                lo = -BOX if prm.lower is None else max(-BOX, float(_to_free(prm.kind, prm.lower)))
                out.append((lo, BOX))
        out += [(-BOX, BOX)] * (self.dim - len(out))
        return out

    def unpack(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionError(f"expected vector of length {self.dim}, got {v.shape}")
        spec = self.spec
        values = np.empty(len(self.fam_params))
        for k, prm in enumerate(self.fam_params):
            if prm.name in self.fixed:
                values[k] = self.fixed[prm.name]
        pos = 0
        for k in self.free_fam:
            values[k] = _from_free(self.fam_params[k].kind, v[pos])
            pos += 1
        m = spec.n_regimes
        trans = np.zeros((m, m))
        for i, (active, ref, pinned, mass) in enumerate(self.rows):
            for j, val in pinned.items():
                trans[i, j] = val
            a = v[pos : pos + len(active)]
            pos += len(active)
            top = max(0.0, float(a.max())) if len(a) else 0.0
            ex = np.exp(a - top)
            denom = np.exp(-top) + ex.sum()
            trans[i, active] = mass * ex / denom
            trans[i, ref] = mass * np.exp(-top) / denom
        theta = Theta(values, trans)
        xi = None
        if self.estimate_xi:
            b = np.concatenate((v[pos:], [0.0]))
            b = np.exp(b - b.max())
            xi = b / b.sum()
        return theta, xi

    def pack(self, theta: Theta, xi=None) -> np.ndarray:
        out = [_to_free(self.fam_params[k].kind, theta.values[k]) for k in self.free_fam]
        for i, (active, ref, _, _) in enumerate(self.rows):
            out += list(np.log(theta.transition[i, active] / theta.transition[i, ref]))
        if self.estimate_xi:
            if xi is None:
                xi = np.full(self.spec.n_states, 1.0 / self.spec.n_states)
            xi = np.clip(np.asarray(xi, dtype=float), np.exp(-2 * BOX), None)
            out += list(np.log(xi[:-1] / xi[-1]))
        return np.array(out, dtype=float)

    def theta_jacobian(self, theta: Theta):
        """Derivatives of the unconstrained coordinates w.r.t. reported ones.

        Only valid for the unrestricted parametrization. Returns ``(jac,
        second)`` where ``jac[i, j] = d v_i / d theta_j`` and
        ``second[i] = d^2 v_i / d theta d theta'``.
        """
        if self.fixed:
            raise ValueError("jacobian is defined for the unrestricted parametrization")
        q = self.n_theta
        jac = np.zeros((q, q))
        second = np.zeros((q, q, q))
        pos = 0
        for k in self.free_fam:
            kind, x = self.fam_params[k].kind, theta.values[k]
            if kind == "real":
                jac[pos, pos] = 1.0
            elif kind == "positive":
                jac[pos, pos] = 1.0 / x
                second[pos, pos, pos] = -1.0 / x**2
            else:
                jac[pos, pos] = 1.0 / (x - 2.0)
                second[pos, pos, pos] = -1.0 / (x - 2.0) ** 2
            pos += 1
        for i, (active, ref, _, _) in enumerate(self.rows):
            idx = list(range(pos, pos + len(active)))
            pref = theta.transition[i, ref]
            for a, j in zip(idx, active):
                pj = theta.transition[i, j]
                for b in idx:
                    jac[a, b] = 1.0 / pref
                    for c in idx:
                        second[a, b, c] = 1.0 / pref**2
                jac[a, a] += 1.0 / pj
                second[a, a, a] -= 1.0 / pj**2
            pos += len(active)
        return jac, second


def to_unconstrained(theta: Theta, spec: ModelSpec) -> np.ndarray:
    return Parametrization(spec).pack(theta)


def from_unconstrained(v, spec: ModelSpec) -> Theta:
    return Parametrization(spec).unpack(v)[0]


def log_g(family: DensityFamily, theta: Theta, y: float, ylags=(), regimes=(0,), w=None) -> float:
    """Log density of a single observation.

    Parameters
    ----------
    family : DensityFamily
    theta : Theta
    y : float
        Current observation.
    ylags : sequence of float
        ``(y_{k-1}, ..., y_{k-s})``.
    regimes : sequence of int
        ``(r_k, ..., r_{k-p+1})``, 0-based.
    w : array_like, optional
        Covariate row (unused by the built-in families).
    """
    ylags = np.atleast_1d(np.asarray(ylags, dtype=float))[: family.s]
    if ylags.shape[0] != family.s:
        raise DimensionError(f"{family.name} reads {family.s} lags")
    if len(regimes) != family.p:
        raise DimensionError(f"{family.name} reads {family.p} regimes")
    if family.positive_data and not y > 0:
        raise DomainError("durations must be strictly positive")
    window = np.concatenate(([y], ylags))[None, :]
    states = np.asarray(regimes, dtype=np.intp)[None, :]
    wrow = None if w is None else np.atleast_2d(w)
    out = family.log_density(theta.values, theta.n_regimes, window, states, wrow)
    return float(out[0, 0])


def _stationary_regimes(trans):
    m = trans.shape[0]
    a = np.eye(m) - trans.T
    if np.linalg.matrix_rank(a, tol=1e-10) != m - 1:
        raise ReducibleChainError("regime chain has no unique stationary distribution")
    a[-1] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    pi = np.linalg.solve(a, rhs)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def simulate(spec: ModelSpec, theta: Theta, n: int, burn_in: int = 800, seed=None):
    """Simulate ``n`` usable observations (plus ``s`` presample lags).

    The regime chain starts from its stationary distribution and the first
    ``burn_in`` periods are discarded.

    Returns
    -------
    data : SeriesData
        ``n + s`` observations.
    regimes : ndarray
        Regime of every returned observation (0-based).
    """
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    spec.check_theta(theta)
    rng = np.random.default_rng(seed)
    fam, m = spec.family, spec.n_regimes
    trans = theta.transition
    pi = _stationary_regimes(trans)
    s, p = fam.s, fam.p
    total = burn_in + n + s
    lead = p - 1
    cum = np.cumsum(trans, axis=1)
    regimes = np.empty(total + lead, dtype=np.intp)
    regimes[0] = rng.choice(m, p=pi)
    uniforms = rng.random(total + lead)
    for t in range(1, total + lead):
        regimes[t] = min(int(np.searchsorted(cum[regimes[t - 1]], uniforms[t], side="right")), m - 1)
    y = np.empty(total + s)
    y[:s] = fam.presample(theta.values, m)[::-1]
    values = theta.values
    for t in range(total):
        k = t + s
        lags = y[k - s : k][::-1]
        tup = regimes[t + lead - np.arange(p)]
        y[k] = fam.draw(values, m, lags, tup, rng)
    keep = n + s
    return SeriesData(y[-keep:]), regimes[lead:][-keep:].copy()


def canonicalize(spec: ModelSpec, theta: Theta, order: str = "ascending", init=None):
    """Relabel regimes so the family's label parameter is sorted.

    Returns ``(theta, init, perm)`` where new regime ``a`` is old regime
    ``perm[a]``. The mask must be invariant under the permutation, otherwise
    labels are left unchanged.
    """
    m = spec.n_regimes
    ident = np.arange(m)
    key_name = spec.family.label_param
    if order == "none" or key_name is None or m == 1:
        return theta, init, ident
    params = spec.family_params()
    key = np.array([theta.values[k] for k, prm in enumerate(params)
                    if prm.regime is not None and prm.name.startswith(key_name + "_")])
    perm = np.argsort(key, kind="stable")
    if order == "descending":
        perm = perm[::-1]
    elif order != "ascending":
        raise ValueError(f"unknown label order {order!r}")
    return permute_regimes(spec, theta, perm, init)


def permute_regimes(spec: ModelSpec, theta: Theta, perm, init=None):
    perm = np.asarray(perm, dtype=np.intp)
    m = spec.n_regimes
    allowed = spec.allowed
    if not np.array_equal(allowed[np.ix_(perm, perm)], allowed):
        return theta, init, np.arange(m)
    params = spec.family_params()
    values = np.array(theta.values)
    by_regime = {}
    for k, prm in enumerate(params):
        if prm.regime is not None:
            base = prm.name.rsplit("_", 1)[0]
            by_regime.setdefault(base, {})[prm.regime] = k
    for base, idx in by_regime.items():
        for a in range(m):
            values[idx[a]] = theta.values[idx[perm[a]]]
    trans = theta.transition[np.ix_(perm, perm)]
    new_theta = Theta(values, trans)
    states = spec.states
    # new state tuple (a_1..a_p) is old tuple (perm[a_1]..perm[a_p])
    old_index = np.array([spec.state_index(perm[row]) for row in states])
    new_init = init
    if isinstance(init, Distribution):
        new_init = Distribution(init.xi[old_index])
    elif isinstance(init, PointMass):
        new_init = PointMass(int(np.flatnonzero(old_index == init.state)[0]))
    elif init is not None and not isinstance(init, EstimateXi):
        xi = np.asarray(init)[old_index]
        new_init = xi
    return new_theta, new_init, perm


def check_not_degenerate(data: SeriesData):
    if np.ptp(data.y) == 0:
        raise DataDegeneracyError("the observed series is constant")
