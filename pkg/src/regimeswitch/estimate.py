"""
Maximum-likelihood fitting.

Multistart L-BFGS-B on ``-l_n / n`` in unconstrained coordinates, with
gradients from smoothed expectations of the complete-data score. The first
start is a data-driven default (1-D k-means split of y, 0.9 on the
transition diagonal); the others perturb it by N(0, 0.5^2) per coordinate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize

from .errors import (
    BoundaryWarning,
    NonFiniteError,
    NoConvergenceError,
    NumericalUnderflowError,
    RegimeSwitchError,
)
from .filtering import loglik
from .inference import CovarianceEstimate, hessian_fd, loglik_and_grad, opg
from .model import (
    Distribution,
    EstimateXi,
    ModelSpec,
    Parametrization,
    PointMass,
    SeriesData,
    Theta,
    canonicalize,
    check_not_degenerate,
)

__all__ = ["FitOptions", "FitResult", "fit", "profile_refit"]

PENALTY = 1e10
SATURATION = 1e-4


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``label_order`` is ``"ascending"``, ``"descending"`` or ``"none"``; the
    sort key is the family's regime-specific location (mu) or scale (sigma).
    """

    n_starts: int = 10
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    seed: int = 0
    estimate_xi: bool = False
    label_order: str = "ascending"
    covariance: bool = True
    start_scale: float = 0.5

    def __post_init__(self):
        if self.n_starts < 1 or self.max_iterations < 1 or self.gradient_tolerance <= 0:
            raise ValueError("n_starts, max_iterations and gradient_tolerance must be positive")
        if self.label_order not in ("ascending", "descending", "none"):
            raise ValueError(f"unknown label_order {self.label_order!r}")


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    theta_hat: Theta
    loglik: float
    score_norm: float
    opg: Optional[CovarianceEstimate]
    hessian: Optional[CovarianceEstimate]
    starts_summary: tuple
    converged: bool
    init_used: Union[PointMass, Distribution]
    init_request: object
    n_obs: int
    iterations: int
    options: FitOptions
    messages: tuple = ()
    fixed: dict = field(default_factory=dict)
    data: Optional[SeriesData] = field(default=None, repr=False)

    @property
    def names(self):
        return self.spec.param_names()

    @property
    def estimates(self) -> dict:
        return dict(zip(self.names, self.spec.theta_vector(self.theta_hat).tolist()))

    @property
    def se(self):
        return None if self.opg is None else self.opg.se

    @property
    def xi_hat(self):
        return self.init_used.xi if isinstance(self.init_used, Distribution) else None

    def to_json(self) -> dict:
        est = self.spec.theta_vector(self.theta_hat)
        se = self.se if self.se is not None else np.full(len(est), np.nan)
        hse = self.hessian.se if self.hessian is not None else np.full(len(est), np.nan)
        table = {
            name: {"Estimate": float(x), "S.D.": _num(s), "S.D. (Hessian)": _num(h)}
            for name, x, s, h in zip(self.names, est, se, hse)
        }
        if isinstance(self.init_used, PointMass):
            init = {
                "type": "point_mass",
                "state": int(self.init_used.state),
                "regimes": [int(r) + 1 for r in self.spec.states[self.init_used.state]],
            }
        else:
            init = {"type": "distribution", "xi": self.init_used.xi.tolist()}
        return {
            "model": self.spec.to_json(),
            "parameters": table,
            "Log-likelihood": float(self.loglik),
            "loglik": float(self.loglik),
            "transition": self.theta_hat.transition.tolist(),
            "init": init,
            "xi_estimated": isinstance(self.init_request, EstimateXi),
            "se": {n: _num(s) for n, s in zip(self.names, se)},
            "cov": None if self.opg is None else self.opg.cov.tolist(),
            "opg": None if self.opg is None else self.opg.to_json(),
            "hessian": None if self.hessian is None else self.hessian.to_json(),
            "score_norm": float(self.score_norm),
            "converged": bool(self.converged),
            "starts_summary": [_num(x) for x in self.starts_summary],
            "n_obs": int(self.n_obs),
            "iterations": int(self.iterations),
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "messages": list(self.messages),
        }


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _objective(param: Parametrization, data: SeriesData, init_vec, n_obs, track):
    def fun(v):
        try:
            ll, grad = loglik_and_grad(param, v, data, init_vec)
        except (NumericalUnderflowError, NonFiniteError, FloatingPointError):
            return PENALTY, np.zeros_like(v)
        if not (np.isfinite(ll) and np.all(np.isfinite(grad))):
            return PENALTY, np.zeros_like(v)
        f = -ll / n_obs
        if f < track["f"]:
            track["f"], track["v"], track["g"] = f, v.copy(), -grad / n_obs
        return f, -grad / n_obs

    return fun


def _projected_gradient(g, v, bounds):
    pg = np.array(g, dtype=float)
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and v[i] <= lo + 1e-12 and g[i] > 0:
            pg[i] = 0.0
        if hi is not None and v[i] >= hi - 1e-12 and g[i] < 0:
            pg[i] = 0.0
    return pg


def _run_start(param, v0, data, init_vec, n_obs, opts):
    bounds = param.bounds()
    track = {"f": np.inf, "v": None, "g": None}
    fun = _objective(param, data, init_vec, n_obs, track)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        res = minimize(
            fun,
            v0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": opts.max_iterations,
                "gtol": opts.gradient_tolerance,
                "ftol": 1e-14,
                "maxcor": 20,
            },
        )
    if track["v"] is None:
        return None
    pg = np.abs(_projected_gradient(track["g"], track["v"], bounds)).max() if param.dim else 0.0
    converged = bool(res.success) or pg <= 10 * opts.gradient_tolerance
    return track["v"], track["f"], converged, int(res.nit), str(res.message), pg


def _clip(v, bounds):
    out = np.array(v, dtype=float)
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None:
            out[i] = max(out[i], lo)
        if hi is not None:
            out[i] = min(out[i], hi)
    return out


def _boundary_messages(param: Parametrization, v, theta: Theta):
    msgs = []
    for name, (lo, hi), x in zip(param.names[: param.n_theta], param.bounds(), v):
        if (lo is not None and x - lo < SATURATION) or (hi is not None and hi - x < SATURATION):
            msgs.append(f"{name} is at its optimization bound")
    for i, (active, ref, _, _) in enumerate(param.rows):
        for j in list(active) + [ref]:
            p = theta.transition[i, j]
            if (p < SATURATION or p > 1 - SATURATION) and len(active):
                msgs.append(f"p_{i + 1}{j + 1} = {p:.3g} is near the edge of the simplex")
    return msgs


def fit(
    spec: ModelSpec,
    data: SeriesData,
    init=None,
    opts: Optional[FitOptions] = None,
    start: Optional[Theta] = None,
    start_xi=None,
    fixed: Optional[dict] = None,
) -> FitResult:
    """Maximum-likelihood estimate of theta.

    Parameters
    ----------
    spec : ModelSpec
    data : SeriesData
    init : PointMass, Distribution or EstimateXi
        Initial law of the hidden state; ``EstimateXi()`` estimates it
        jointly. Defaults to ``EstimateXi()``.
    opts : FitOptions, optional
    start : Theta, optional
        Replaces the data-driven default as the first start.
    start_xi : ndarray, optional
        First-start value of xi when it is estimated.
    fixed : dict, optional
        Reported parameters held at given values.

    Returns
    -------
    FitResult

    Raises
    ------
    NoConvergenceError
        If no start converges.
    DataDegeneracyError
        If the series is constant.
    """
    opts = opts or FitOptions()
    if init is None or opts.estimate_xi:
        init = EstimateXi()
    spec.validate_data(data)
    check_not_degenerate(data)
    estimate_xi = isinstance(init, EstimateXi)
    fixed = dict(fixed or {})
    param = Parametrization(spec, fixed, estimate_xi)
    n_obs = len(data) - spec.s
    init_vec = None if estimate_xi else spec.init_vector(init)

    theta0 = start if start is not None else spec.default_theta(data.y[spec.s :])
    bounds = param.bounds()
    v0 = _clip(param.pack(theta0, start_xi), bounds)
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.n_starts)
    starts = [v0]
    for ss in seeds[1:]:
        rng = np.random.default_rng(ss)
        starts.append(_clip(v0 + rng.normal(0.0, opts.start_scale, size=v0.shape), bounds))

    best = None
    summary = []
    messages = []
    for k, v in enumerate(starts):
        out = _run_start(param, v, data, init_vec, n_obs, opts)
        if out is None:
            summary.append(np.nan)
            messages.append(f"start {k + 1}: no finite evaluation")
            continue
        v_hat, f_hat, ok, nit, msg, _ = out
        summary.append(-f_hat * n_obs)
        if not ok:
            messages.append(f"start {k + 1}: {msg}")
            continue
        if best is None or f_hat < best[1]:
            best = (v_hat, f_hat, nit)
    if best is None:
        raise NoConvergenceError(f"none of {opts.n_starts} starts converged")

    v_hat, _, nit = best
    theta, xi = param.unpack(v_hat)
    ll_check, grad = loglik_and_grad(param, v_hat, data, init_vec)
    score_norm = float(np.abs(_projected_gradient(-grad, v_hat, bounds)).max()) if param.dim else 0.0
    boundary = _boundary_messages(param, v_hat, theta)
    for msg in boundary:
        warnings.warn(msg, BoundaryWarning, stacklevel=2)
    messages.extend(boundary)

    init_used = Distribution(xi) if estimate_xi else init
    if not fixed:
        theta, init_used, _ = canonicalize(spec, theta, opts.label_order, init_used)
    ll = loglik(spec, theta, data, init_used)

    cov_opg = cov_hess = None
    if opts.covariance and not fixed:
        try:
            cov_opg = opg(spec, theta, data, init_used)
        except RegimeSwitchError as exc:
            messages.append(f"opg: {exc}")
        try:
            cov_hess = hessian_fd(spec, theta, data, init_used)
        except RegimeSwitchError as exc:
            messages.append(f"hessian: {exc}")

    return FitResult(
        spec=spec,
        theta_hat=theta,
        loglik=ll,
        score_norm=score_norm,
        opg=cov_opg,
        hessian=cov_hess,
        starts_summary=tuple(summary),
        converged=True,
        init_used=init_used,
        init_request=init,
        n_obs=n_obs,
        iterations=nit,
        options=opts,
        messages=tuple(messages),
        fixed=fixed,
        data=data,
    )


def profile_refit(result: FitResult, fixed) -> FitResult:
    """Re-optimize with some reported parameters held fixed.

    Parameters
    ----------
    result : FitResult
        Unrestricted fit; its data and options are reused.
    fixed : dict or iterable of str
        Names mapped to values, or names to hold at their estimates.
    """
    if result.data is None:
        raise ValueError("the fit does not carry its data")
    est = result.estimates
    if not isinstance(fixed, dict):
        fixed = {name: est[name] for name in fixed}
    opts = replace(result.options, n_starts=1, estimate_xi=False)
    return fit(
        result.spec,
        result.data,
        result.init_request,
        opts,
        start=result.theta_hat,
        start_xi=result.xi_hat,
        fixed=fixed,
    )
