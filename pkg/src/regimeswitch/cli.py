"""
Command line front end.

Exit status is 0 on success, 1 when the computation fails (one line
``error: CODE: message`` on stderr) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import warnings

import numpy as np

from . import __version__
from .chain import expand
from .errors import RegimeSwitchError
from .estimate import FitOptions, fit
from .filtering import smooth
from .io import (
    dumps_json,
    load_fit,
    load_model,
    load_theta,
    read_series_csv,
    series_csv,
    theta_to_json,
    write_atomic,
)
from .model import Distribution, EstimateXi, PointMass, simulate
from .montecarlo import (
    coverage_table_csv,
    resolve_threads,
    run_replications,
    summarize,
)
from .theory import forgetting_curve, omega_series

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: E_USAGE: {message}", file=sys.stderr)
        sys.exit(2)


def _existing(path):
    if not os.path.exists(path):
        raise UsageError(f"file not found: {path}")
    return path


def _out_format(path, allowed):
    ext = os.path.splitext(path)[1].lower().lstrip(".")
    if ext not in allowed:
        raise UsageError(f"output must end in one of {', '.join('.' + a for a in allowed)}")
    return ext


def _sidecar(path):
    return os.path.splitext(path)[0] + ".json"


def _fmt(x, digits):
    return f"{x:.{digits}f}"


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _parse_init(text, spec):
    if text in (None, "estimate"):
        return EstimateXi()
    if text == "xi":
        return Distribution(np.full(spec.n_states, 1.0 / spec.n_states))
    if text.startswith("x0="):
        val = text[3:]
        if "," in val:
            return PointMass(spec.state_index([int(r) - 1 for r in val.split(",")]))
        # a single regime label puts every lag in that regime
        return PointMass(spec.state_index([int(val) - 1] * spec.p))
    raise UsageError("--init must be 'estimate', 'xi' or 'x0=<state>'")


def cmd_fit(args):
    spec = load_model(_existing(args.model))
    data = read_series_csv(_existing(args.data))
    fmt = _out_format(args.out, ("json", "csv"))
    init = _parse_init(args.init, spec)
    opts = FitOptions(
        n_starts=args.starts,
        max_iterations=args.max_iter,
        seed=args.seed,
        label_order=args.label_order,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fit(spec, data, init, opts)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if fmt == "json":
        write_atomic(args.out, dumps_json(res.to_json()))
        return
    digits = 3 if args.paper_format else 6
    rows = []
    doc = res.to_json()
    for name, entry in doc["parameters"].items():
        sd = entry["S.D."]
        rows.append([name, _fmt(entry["Estimate"], digits), "" if sd is None else _fmt(sd, digits)])
    rows.append(["Log-likelihood", _fmt(res.loglik, digits), ""])
    write_atomic(args.out, _csv_text(["parameter", "Estimate", "S.D."], rows))


def cmd_simulate(args):
    spec = load_model(_existing(args.model))
    theta = load_theta(spec, _existing(args.theta))
    _out_format(args.out, ("csv",))
    data, regimes = simulate(spec, theta, args.n, burn_in=args.burn_in, seed=args.seed)
    write_atomic(args.out, series_csv(data, regimes))


def cmd_coverage(args):
    spec = load_model(_existing(args.model))
    theta = load_theta(spec, _existing(args.theta))
    fmt = _out_format(args.out, ("csv", "json"))
    methods = ["opg_xi", "opg_x0", "hessian"] if args.ci == "all" else [args.ci.replace("-", "_")]
    opts = FitOptions(n_starts=args.starts, max_iterations=args.max_iter, seed=args.seed)
    reports = []
    for n in args.n:
        reps = run_replications(
            spec, theta, n, args.reps, opts, args.seed, methods, args.burn_in, args.threads
        )
        reports += [summarize(spec, theta, n, reps, m) for m in methods]
    side = {"model": spec.to_json(), "theta": theta_to_json(spec, theta), "seed": args.seed,
            "reports": [r.to_json() for r in reports]}
    if fmt == "json":
        write_atomic(args.out, dumps_json(side))
        return
    digits = 3 if args.paper_format else 6
    write_atomic(args.out, coverage_table_csv(reports, digits))
    write_atomic(_sidecar(args.out), dumps_json(side))


def cmd_smooth(args):
    spec, theta, init = load_fit(_existing(args.fit))
    data = read_series_csv(_existing(args.data))
    _out_format(args.out, ("csv",))
    sm = smooth(spec, theta, data, init, pairwise=False)
    digits = 3 if args.paper_format else 6
    header = ["t"] + [f"prob_regime_{i + 1}" for i in range(spec.n_regimes)]
    rows = [[t + 1] + [_fmt(p, digits) for p in row] for t, row in enumerate(sm.regime_marginal)]
    write_atomic(args.out, _csv_text(header, rows))


def _parse_mu(text, spec):
    if text is None:
        return None
    if text == "uniform":
        return np.full(spec.n_states, 1.0 / spec.n_states)
    init = _parse_init("x0=" + text, spec)
    out = np.zeros(spec.n_states)
    out[init.state] = 1.0
    return out


def cmd_diagnose_mixing(args):
    spec = load_model(_existing(args.model))
    theta = load_theta(spec, _existing(args.theta))
    data = read_series_csv(_existing(args.data))
    _out_format(args.out, ("csv",))
    mu1 = _parse_mu(args.mu1, spec)
    mu2 = _parse_mu(args.mu2, spec)
    if mu1 is None:
        mu1 = np.eye(spec.n_states)[0]
    if mu2 is None:
        mu2 = np.eye(spec.n_states)[-1]
    rows = forgetting_curve(spec, theta, data, args.m, (mu1, mu2), smoothed=not args.filtered)
    digits = 3 if args.paper_format else 6
    body = [[k, f"{tv:.{digits}e}", f"{b:.{digits}e}", f"{b - tv:.{digits}e}"] for k, tv, b in rows]
    write_atomic(args.out, _csv_text(["k", "tv_distance", "bound", "margin"], body))
    om = omega_series(spec, theta, data)
    margins = [b - tv for _, tv, b in rows]
    summary = {
        "passed": bool(min(margins) >= -1e-12),
        "min_margin": float(min(margins)),
        "p": int(om.p),
        "omega_mode": om.theta_mode,
        "omega_min": float(om.values.min()),
        "omega_max": float(om.values.max()),
        "m": args.m,
        "conditioning": "filtered" if args.filtered else "smoothed",
    }
    write_atomic(_sidecar(args.out), dumps_json(summary))


def cmd_diagnose(args):
    spec = load_model(_existing(args.model))
    theta = load_theta(spec, _existing(args.theta))
    _out_format(args.out, ("json",))
    write_atomic(args.out, dumps_json(expand(theta.transition, spec.p).to_json()))


def build_parser():
    parser = _Parser(
        prog="regimeswitch", description="Markov regime switching estimation tools"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=1, help="worker processes")
    parser.add_argument(
        "--paper-format", action="store_true", help="three decimals in CSV tables"
    )
    # the global flags are also accepted after the subcommand
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--paper-format", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="estimate a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument(
        "--init", default="estimate",
        help="estimate | xi (uniform) | x0=<r> or x0=<r1,...,rp> (1-based regimes)",
    )
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-order", default="ascending",
                   choices=["ascending", "descending", "none"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[common], help="simulate a series")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=800)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", parents=[common], help="Monte Carlo coverage of 95%% intervals")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--ci", default="opg-xi", choices=["opg-xi", "opg-x0", "hessian", "all"])
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--burn-in", type=int, default=800)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("smooth", parents=[common], help="smoothed regime probabilities")
    p.add_argument("--fit", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("diagnose-mixing", parents=[common], help="exact forgetting curve and bound")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--mu1", default=None, help="state (e.g. 1,2) or 'uniform'")
    p.add_argument("--mu2", default=None, help="state (e.g. 2,2) or 'uniform'")
    p.add_argument("--filtered", action="store_true", help="condition on data through k only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose_mixing)

    p = sub.add_parser("diagnose", parents=[common], help="dump the expanded transition matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.threads = resolve_threads(args.threads)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: E_USAGE: {exc}", file=sys.stderr)
        return 2
    except RegimeSwitchError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: E_INPUT: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
