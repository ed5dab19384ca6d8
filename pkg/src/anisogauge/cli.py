"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a numeric criterion fails,
2 for usage or validation errors.
"""

import argparse
import csv
import io
import itertools
import json
import os
import platform
import sys
import warnings
from importlib import metadata

import numpy as np

from . import acceptance
from ._parallel import ENV_VAR, thread_count
from .exceptions import AnisoGaugeError, BudgetWarning, DomainError, RegimeWarning
from .fundsol import Bump, FundamentalSolution, weak_form_test, weak_test_config
from .gauge import ProductGauge, Theta0Settings, eikonal_residual, theta, theta0, theta0_variational
from .minkowski import (dual_norm, dual_square_field, finsler_laplacian, norm_from_dict,
                        verify_duality_suite)
from .operators import OperatorParams, profile, radial_consistency_report, sample_smooth_points
from .quadrature import METHODS, QuadratureConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_GAUGE = {"phi": {"family": "euclidean", "dim": 2},
                 "psi": {"family": "euclidean", "dim": 1}, "alpha": 1.0}

IDENTITY_TOL = 1e-9
DOUBLE_DUAL_TOL = 1e-6
LAPLACIAN_H = 1e-3
CERTIFICATE_TOL = 1e-4
WEAK_TOL = 0.02


class UsageError(Exception):
    pass


def _load_json(text, what):
    """Parse inline JSON or read it from a file."""
    try:
        if text.lstrip().startswith("{"):
            return json.loads(text)
        with open(text) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} JSON from {text!r}: {exc}") from None


def _gauge(args, alpha=None):
    spec = _load_json(args.gauge, "gauge") if args.gauge else dict(DEFAULT_GAUGE)
    if not isinstance(spec, dict):
        raise UsageError("gauge JSON must be an object")
    if alpha is not None:
        spec = {**spec, "alpha": alpha}
    return ProductGauge.from_dict(spec)


def _versions():
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "scikit-learn"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _manifest(args):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "format")}
    return {"command": args.command, "params": params, "seed": args.seed,
            "threads": thread_count(), "versions": _versions()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _emit(args, rows, passed, extra=None):
    """Write the rows (list of flat dicts) with the manifest embedded."""
    manifest = _manifest(args)
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(_jsonable(manifest)) + "\n")
        fields = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.DictWriter(buf, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(_jsonable(v)) if isinstance(v, (dict, list)) else v
                        for k, v in r.items()})
        text = buf.getvalue()
    else:
        doc = {"manifest": manifest, "passed": passed, "results": rows}
        if extra:
            doc.update(extra)
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_FAIL


def _check(name, measured, threshold):
    return {"check": name, "measured": float(measured), "threshold": threshold,
            "passed": bool(measured <= threshold)}


# -- commands ------------------------------------------------------------------

def cmd_norms_verify(args):
    norm = norm_from_dict(_load_json(args.norm, "norm"))
    rep = verify_duality_suite(norm, args.samples, args.seed)
    rows = [_check(k, getattr(rep, k), IDENTITY_TOL)
            for k in ("unit_gradient", "inverse_gradient", "euler", "cauchy_schwarz", "homogeneity")]
    rows.append(_check("double_dual", rep.double_dual, DOUBLE_DUAL_TOL))
    rng = np.random.default_rng(args.seed)
    x = rng.uniform(0.3, 1.5, (20, norm.dim)) * rng.choice([-1.0, 1.0], (20, norm.dim))
    lap = finsler_laplacian(norm, dual_square_field(norm), x, LAPLACIAN_H)
    rows.append(_check("laplacian_of_half_dual_square", np.max(np.abs(lap - norm.dim)),
                       10 * LAPLACIAN_H**2))
    for r in rows:
        r["family"] = norm.family
    return _emit(args, rows, all(r["passed"] for r in rows))


def cmd_gauge_check(args):
    g = _gauge(args, args.alpha)
    x = sample_smooth_points(g, args.samples, args.seed, rho_range=(0.1, 10.0), tube=1e-3)
    ref = theta0(g, x)
    var = theta0_variational(g, x, Theta0Settings(seed=args.seed))
    rows = [_check("legendre_certificate", np.max(np.abs(var - ref) / ref), CERTIFICATE_TOL),
            _check("eikonal", np.max(np.abs(eikonal_residual(g, x))), IDENTITY_TOL)]
    t = np.array([0.1, 1.0, 7.0])
    hom = max(np.max(np.abs(f(g.dilate(s, x)) - s * f(x)) / (s * f(x)))
              for s in t for f in (g.theta, g.rho))
    rows.append(_check("dilation_homogeneity", hom, 1e-10))
    for r in rows:
        r["Q"] = g.Q
    return _emit(args, rows, all(r["passed"] for r in rows))


def cmd_op_radial_check(args):
    g = _gauge(args, args.alpha)
    params = OperatorParams(g.alpha, args.p)
    rows = []
    for name in args.profile:
        rep = radial_consistency_report(g, params, profile(name), args.samples, args.seed, args.h)
        row = _check(f"radial:{name}", rep.max_deviation, args.tol)
        if rep.linearity_residual is not None:
            row["linearity_residual"] = rep.linearity_residual
            row["passed"] = row["passed"] and rep.linearity_residual <= args.tol
        row.update(alpha=g.alpha, p=params.p, h=args.h)
        rows.append(row)
    return _emit(args, rows, all(r["passed"] for r in rows))


def cmd_fundsol(args):
    alphas = args.alpha or [None]
    rows, passed = [], True
    for a, p in itertools.product(alphas, args.p):
        g = _gauge(args, a)
        if args.weak_test and g.Q < p:
            raise UsageError(f"--weak-test refused: Q = {g.Q:g} < p = {p:g}; the normalization "
                             "constant is negative there and the weak identity is not verified")
        cfg = QuadratureConfig(args.method or _default_method(g), args.budget, args.rel_err, args.seed)
        G = FundamentalSolution(g, p, pole_sigma=args.pole_sigma, config=cfg).fit()
        row = G.record()
        if args.weak_test:
            pole = np.concatenate([np.zeros(g.m), G.pole_])
            bump = Bump(pole, args.bump_radius)
            res = weak_form_test(G, bump, weak_test_config(args.seed))
            ok = abs(res.ratio - 1) <= WEAK_TOL
            row.update(weak_value=res.value, weak_error=res.error, weak_target=res.target,
                       weak_ratio=res.ratio, weak_passed=ok)
            passed = passed and ok
        rows.append(row)
    return _emit(args, rows, passed)


def _default_method(g):
    return "adaptive" if g.dim <= 4 else "monte-carlo"


def cmd_suite(args):
    selection = [s for s in (args.criteria or "").split(",") if s.strip()]
    try:
        ids = acceptance.resolve(selection)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = [acceptance.CRITERIA[i][1](seed=args.seed) for i in ids]
    for r in results:
        print(r.line(), file=sys.stderr)
    return _emit(args, [r.row() for r in results], all(r.passed for r in results))


# -- parser ---------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _common(fmt="json"):
    # a fresh parent per subcommand: parents share action objects, so a
    # per-subcommand default would otherwise leak into all of them
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root random seed (default 0)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=fmt, help=f"default {fmt}")
    return common


def build_parser():

    gauge = argparse.ArgumentParser(add_help=False)
    gauge.add_argument("--gauge", help="gauge JSON file (or inline JSON); default Euclidean m=2, k=1, alpha=1")

    parser = argparse.ArgumentParser(
        prog="anisogauge",
        description="Anisotropic gauges, their Legendre transform, Finsler Grushin-type "
                    f"operators and fundamental solutions. Set {ENV_VAR} for parallelism.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms-verify", parents=[_common()], help="duality and Finsler Laplacian identities")
    p.add_argument("--norm", required=True, help="norm JSON file or inline JSON")
    p.add_argument("--samples", type=_positive_int, default=100)
    p.set_defaults(func=cmd_norms_verify)

    p = sub.add_parser("gauge-check", parents=[_common(), gauge],
                       help="variational Legendre certificate, eikonal identity, homogeneity")
    p.add_argument("--alpha", type=float, help="override the gauge exponent")
    p.add_argument("--samples", type=_positive_int, default=100)
    p.set_defaults(func=cmd_gauge_check)

    p = sub.add_parser("op-radial-check", parents=[_common(), gauge],
                       help="difference operator versus the radial action formula")
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--profile", nargs="+", default=["identity", "square", "log"],
                   help="profiles: identity, square, cube, log, power:<gamma>")
    p.add_argument("--samples", type=_positive_int, default=20)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_op_radial_check)

    p = sub.add_parser("fundsol", parents=[_common(), gauge],
                       help="normalization constants and the weak-form test")
    p.add_argument("--alpha", type=float, nargs="+", help="one or more exponents (sweep)")
    p.add_argument("--p", type=float, nargs="+", default=[2.0], help="one or more p values (sweep)")
    p.add_argument("--budget", type=int, default=20_000_000)
    p.add_argument("--rel-err", type=float, default=1e-3)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--weak-test", action="store_true", help="also run the weak-form delta test")
    p.add_argument("--pole-sigma", type=float, nargs="+")
    p.add_argument("--bump-radius", type=float, default=0.8)
    p.set_defaults(func=cmd_fundsol)

    p = sub.add_parser("suite", parents=[_common("csv")], help="run the acceptance criteria")
    p.add_argument("--criteria", help="comma-separated ids, names or groups "
                                      f"({', '.join(acceptance.GROUPS)})")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        thread_count()
        with warnings.catch_warnings():
            warnings.simplefilter("always", BudgetWarning)
            warnings.simplefilter("always", RegimeWarning)
            return args.func(args)
    except (UsageError, ValueError, TypeError, KeyError, DomainError) as exc:
        print(f"anisogauge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnisoGaugeError as exc:
        print(f"anisogauge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
