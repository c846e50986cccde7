"""
Coverage experiments for Wald intervals.

Each replication simulates a series (after a burn-in), fits the model with
the initial distribution estimated, and records the standard errors from
every requested covariance method, so all methods share the same fits.
Replication seeds are children of ``SeedSequence(seed)`` and do not depend
on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import RegimeSwitchError
from .estimate import FitOptions, fit
from .inference import hessian_fd, opg
from .model import EstimateXi, ModelSpec, PointMass, Theta, simulate

__all__ = [
    "CI_METHODS",
    "Replication",
    "CoverageReport",
    "run_replications",
    "summarize",
    "coverage_experiment",
    "compare_ci_methods",
    "coverage_table_csv",
    "resolve_threads",
]

CI_METHODS = ("opg_xi", "opg_x0", "hessian")
BURN_IN = 800


@dataclass(frozen=True, eq=False)
class Replication:
    index: int
    estimate: Optional[np.ndarray]
    se: dict
    error: Optional[str] = None


@dataclass(frozen=True, eq=False)
class CoverageReport:
    names: tuple
    theta_star: np.ndarray
    coverage: np.ndarray
    mc_se: np.ndarray
    mean: np.ndarray
    bias: np.ndarray
    bias_se: np.ndarray
    rmse: np.ndarray
    n: int
    R: int
    method: str
    failed: int
    level: float = 0.95

    @property
    def R_effective(self):
        return self.R - self.failed

    @property
    def failure_flag(self):
        return self.failed > 0.02 * self.R

    def as_dict(self):
        return dict(zip(self.names, self.coverage.tolist()))

    def to_json(self) -> dict:
        per = {
            name: {
                "coverage": _num(c),
                "mc_se": _num(s),
                "mean": _num(mu),
                "bias": _num(b),
                "bias_se": _num(bs),
                "rmse": _num(r),
                "true": float(t),
            }
            for name, c, s, mu, b, bs, r, t in zip(
                self.names, self.coverage, self.mc_se, self.mean, self.bias,
                self.bias_se, self.rmse, self.theta_star,
            )
        }
        return {
            "method": self.method,
            "n": self.n,
            "R": self.R,
            "R_effective": self.R_effective,
            "failed": self.failed,
            "failure_flag": self.failure_flag,
            "level": self.level,
            "parameters": per,
        }


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def resolve_threads(threads: Optional[int] = None) -> int:
    env = os.environ.get("REGIMESWITCH_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(threads or 1))


def label_order_for(spec: ModelSpec, theta: Theta) -> str:
    key = spec.family.label_param
    if key is None or spec.n_regimes == 1:
        return "none"
    vals = [theta.values[k] for k, prm in enumerate(spec.family_params())
            if prm.regime is not None and prm.name.startswith(key + "_")]
    if np.all(np.diff(vals) >= 0):
        return "ascending"
    if np.all(np.diff(vals) <= 0):
        return "descending"
    return "none"


def _replicate(job):
    spec, theta_star, n, opts, seed_seq, methods, burn_in, x0, index = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            data, _ = simulate(spec, theta_star, n, burn_in=burn_in, seed=seed_seq)
            res = fit(spec, data, EstimateXi(), opts)
        except RegimeSwitchError as exc:
            return Replication(index, None, {}, f"{exc.code}: {exc}")
        est = spec.theta_vector(res.theta_hat)
        se = {}
        for method in methods:
            try:
                if method == "opg_xi":
                    cov = opg(spec, res.theta_hat, data, res.init_used)
                elif method == "opg_x0":
                    cov = opg(spec, res.theta_hat, data, PointMass(x0))
                elif method == "hessian":
                    cov = hessian_fd(spec, res.theta_hat, data, res.init_used)
                else:
                    raise ValueError(f"unknown CI method {method!r}")
                se[method] = cov.se
            except RegimeSwitchError:
                se[method] = None
    return Replication(index, est, se)


def run_replications(
    spec: ModelSpec,
    theta_star: Theta,
    n: int,
    R: int,
    opts: Optional[FitOptions] = None,
    seed: int = 0,
    methods: Sequence[str] = CI_METHODS,
    burn_in: int = BURN_IN,
    threads: Optional[int] = None,
    x0_regime: int = 1,
):
    """Simulate, fit and compute standard errors for R replications.

    The fit uses ``opts`` with covariance estimation switched off and the
    label order taken from ``theta_star``. ``opg_x0`` conditions on the
    expanded state whose regimes all equal ``x0_regime`` (0-based).
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    spec.check_theta(theta_star)
    opts = replace(opts or FitOptions(), covariance=False,
                   label_order=label_order_for(spec, theta_star))
    regime = min(x0_regime, spec.n_regimes - 1)
    x0 = spec.state_index([regime] * spec.p)
    seeds = np.random.SeedSequence(seed).spawn(R)
    jobs = [(spec, theta_star, n, opts, seeds[r], tuple(methods), burn_in, x0, r) for r in range(R)]
    workers = resolve_threads(threads)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replicate, jobs, chunksize=max(1, R // (4 * workers))))
    return [_replicate(job) for job in jobs]


def summarize(spec, theta_star, n, reps, method, level=0.95) -> CoverageReport:
    """Fold replications (in index order) into a coverage report."""
    truth = spec.theta_vector(theta_star)
    z = norm.ppf(0.5 * (1 + level))
    ests, hits = [], []
    failed = 0
    for rep in sorted(reps, key=lambda r: r.index):
        se = rep.se.get(method) if rep.estimate is not None else None
        if se is None:
            failed += 1
            continue
        ests.append(rep.estimate)
        hits.append(np.abs(rep.estimate - truth) <= z * se)
    R = len(reps)
    q = len(truth)
    if ests:
        ests = np.array(ests)
        hits = np.array(hits, dtype=float)
        r_eff = len(ests)
        cov = hits.mean(axis=0)
        mean = ests.mean(axis=0)
        bias = mean - truth
        bias_se = ests.std(axis=0, ddof=1) / np.sqrt(r_eff) if r_eff > 1 else np.full(q, np.nan)
        rmse = np.sqrt(((ests - truth) ** 2).mean(axis=0))
        mc_se = np.sqrt(cov * (1 - cov) / r_eff)
    else:
        cov = mc_se = mean = bias = bias_se = rmse = np.full(q, np.nan)
    return CoverageReport(
        tuple(spec.param_names()), truth, cov, mc_se, mean, bias, bias_se, rmse,
        n, R, method, failed, level,
    )


def coverage_experiment(
    spec: ModelSpec,
    theta_star: Theta,
    n: int,
    R: int,
    ci_method: str = "opg_xi",
    opts: Optional[FitOptions] = None,
    seed: int = 0,
    threads: Optional[int] = None,
    burn_in: int = BURN_IN,
) -> CoverageReport:
    """Empirical coverage of nominal 95% intervals for one CI method."""
    if ci_method not in CI_METHODS:
        raise ValueError(f"ci_method must be one of {CI_METHODS}")
    reps = run_replications(spec, theta_star, n, R, opts, seed, (ci_method,), burn_in, threads)
    return summarize(spec, theta_star, n, reps, ci_method)


def compare_ci_methods(
    spec: ModelSpec,
    theta_star: Theta,
    n: int,
    R: int,
    seed: int = 0,
    opts: Optional[FitOptions] = None,
    threads: Optional[int] = None,
    burn_in: int = BURN_IN,
):
    """Coverage of ``opg_xi`` and ``opg_x0`` intervals on the same fits.

    Returns
    -------
    (CoverageReport, CoverageReport, dict)
        The two reports and the per-parameter coverage difference.
    """
    reps = run_replications(
        spec, theta_star, n, R, opts, seed, ("opg_xi", "opg_x0"), burn_in, threads
    )
    a = summarize(spec, theta_star, n, reps, "opg_xi")
    b = summarize(spec, theta_star, n, reps, "opg_x0")
    return a, b, dict(zip(a.names, (a.coverage - b.coverage).tolist()))


def coverage_table_csv(reports: Sequence[CoverageReport], digits: int = 6) -> str:
    """Rows = sample sizes, columns = parameters."""
    if not reports:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "method", *reports[0].names, "R_effective"])
    for rep in reports:
        writer.writerow(
            [rep.n, rep.method, *(f"{c:.{digits}f}" for c in rep.coverage), rep.R_effective]
        )
    return buf.getvalue()
