"""Command-line entry point: ``ovaplugin <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import datagen
from .classifier import effective_sample_size, fit_plug_in, theory_bandwidth
from .experiments import (
    ConfigError,
    ExperimentConfig,
    classify_regime,
    deviation_probability,
    draw_training_sample,
    excess_risk_oracle,
    run_experiment,
    test_seed,
    theoretical_exponent,
)
from .kernels import gaussian_kernel, validate_kernel

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float(text: str) -> float:
    return math.inf if text.lower() in ("inf", "+inf", "infinity") else float(text)


def _dist_args(p):
    p.add_argument("--family", choices=["crossing", "hard_margin"], default="crossing")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--g0", type=float, default=0.2)


def _regime_args(p):
    p.add_argument("--regime", choices=["iid", "mixing", "drift"], default="iid")
    p.add_argument("--rho", type=float, default=0.5, help="hold probability (mixing)")
    p.add_argument("--amplitude", type=float, default=0.2, help="drift amplitude A")
    p.add_argument("--seed", type=int, default=0)


def _make_dist(args):
    try:
        if args.family == "crossing":
            return datagen.make_crossing_distribution(args.d, args.alpha, args.beta)
        return datagen.make_hard_margin_distribution(args.d, args.m, args.g0, args.beta, alpha=args.alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _finite(obj):
    # strict JSON has no NaN/inf; report them as null
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(record):
    print(json.dumps(_finite(record), sort_keys=True, allow_nan=False))


def cmd_rate(args):
    config = ExperimentConfig.from_file(args.config)
    fit = run_experiment(config, n_jobs=args.jobs)
    _emit(
        {
            "fitted_slope": fit.fitted_slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "theoretical_exponent": fit.theoretical_exponent,
            "regime": fit.regime,
            "x_axis": fit.x_axis,
            "raw_n_slope": fit.raw_n_slope,
        }
    )


def cmd_risk(args):
    dist = _make_dist(args)
    mix = datagen.MixingChainSpec(args.rho).mixing_spec if args.regime == "mixing" else None
    h = theory_bandwidth(args.n, dist.beta, dist.d, mix)
    sample = draw_training_sample(dist, args.n, args.regime, args.seed, args.rho, args.amplitude)
    if args.save_sample:
        datagen.save_sample(sample, args.save_sample)
    model = fit_plug_in(sample, dist.beta, h, gaussian_kernel(dist.d))
    est = excess_risk_oracle(model, dist, args.n_test, test_seed(args.seed))
    _emit(
        {
            "n": args.n,
            "n_e": effective_sample_size(args.n, mix) if mix else args.n,
            "bandwidth": h,
            "oracle_excess": est.oracle_excess,
            "zero_one_excess": est.zero_one_excess,
            "std_error": est.std_error,
            "n_test": est.n_test,
        }
    )


def cmd_deviation(args):
    dist = _make_dist(args)
    p = deviation_probability(
        dist, args.n, args.j, [args.x] * dist.d, args.delta, args.replicates, args.seed,
        args.regime, args.rho, args.amplitude,
    )
    _emit({"n": args.n, "j": args.j, "delta": args.delta, "probability": p, "replicates": args.replicates})


def cmd_validate_kernel(args):
    report = validate_kernel(gaussian_kernel(args.d), args.beta, args.d, args.tol)
    _emit(
        {
            "valid": report.valid,
            "lower_bound_constant": gaussian_kernel(args.d).lower_bound_constant,
            "integral": report.integral,
            "tail_bound": report.tail_bound,
            "sup_condition_value": report.sup_condition_value,
            "square_integral_value": report.square_integral_value,
            "lower_bound_margin": report.lower_bound_margin,
        }
    )
    return EXIT_OK if report.valid else EXIT_RUNTIME


def cmd_verify_dist(args):
    dist = _make_dist(args)
    t_grid = [float(v) for v in args.t_grid.split(",")]
    margin = datagen.verify_margin(dist, args.n_probe, t_grid, args.seed)
    holder = datagen.verify_holder(dist, args.n_pairs, args.seed)
    _emit(
        {
            "family": dist.family,
            "alpha": dist.alpha,
            "C0": dist.C0,
            "margin_passed": margin.all_passed,
            "margin_slope": margin.slope,
            "p_hat": margin.p_hat.tolist(),
            "holder_L": dist.L,
            "holder_max_ratio": holder.max_ratio,
            "holder_passed": holder.passed,
        }
    )
    return EXIT_OK if margin.all_passed and holder.passed else EXIT_RUNTIME


def cmd_regime(args):
    setting = "drift_or_iid" if math.isinf(args.c3) and not args.mixing else "mixing"
    _emit(
        {
            "regime": classify_regime(args.alpha, args.beta, args.d, setting, args.c3),
            "exponent": theoretical_exponent(args.alpha, args.beta, args.d, "drift_or_iid"),
            "raw_n_exponent": theoretical_exponent(args.alpha, args.beta, args.d, "mixing_raw_n", args.c3),
            "setting": setting,
        }
    )


def build_parser():
    parser = _Parser(prog="ovaplugin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="run a rate experiment from a config file")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("risk", help="train once and estimate excess risk")
    _dist_args(p)
    _regime_args(p)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--save-sample", default=None, help="write the training sample to this path")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("deviation", help="estimate P(|eta_hat_j(x) - eta_j(x)| >= delta)")
    _dist_args(p)
    _regime_args(p)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--x", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--replicates", type=int, default=100)
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("validate-kernel", help="check the Gaussian kernel conditions")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_validate_kernel)

    p = sub.add_parser("verify-dist", help="margin and Hoelder checks for a synthetic distribution")
    _dist_args(p)
    p.add_argument("--n-probe", type=int, default=100_000)
    p.add_argument("--n-pairs", type=int, default=10_000)
    p.add_argument("--t-grid", default="0.01,0.03,0.1,0.3,1.0")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_dist)

    p = sub.add_parser("regime", help="classify the rate regime")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--c3", type=_float, default=math.inf)
    p.add_argument("--mixing", action="store_true", help="use the mixing inequalities even for C3 = inf")
    p.set_defaults(func=cmd_regime)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        code = args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
