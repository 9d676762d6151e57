"""Command-line entry point: ``shapelab <kind> [flags]``.

Experiment kinds share the flags ``--dim --nmin --nmax --grid --trials --seed
--out --config``; values from ``--config`` (a flat ``key = value`` file) are
overridden by flags given on the command line.  The exit status is 0 when the
experiment's pass flag is true or the kind is report-only, 1 when a rate
misses its target and 2 on usage errors.

``fit-convex`` and ``mle1d`` fit a single data file and print the fit as JSON.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .estimators.convex_regression import convex_ls_fit
from .estimators.logconcave import logconcave_mle_1d
from .exceptions import ShapelabError, UsageError
from .experiments import KINDS, ExperimentConfig, _to_int, read_config_file, run_experiment

# kind-specific flags: (flag, config key, type, help)
_KIND_FLAGS = {
    "convreg-rate": [
        ("--noise-sd", "noise_sd", float, "standard deviation of the Gaussian noise (1.0)"),
        ("--gamma", "gamma", float, "range bound of the fitted class (1.0)"),
        ("--eval-points", "eval_points", int, "fresh points for the L2 risk (10000)"),
    ],
    "mle1d-rate": [("--truth", "truth", str, "beta22 (default), uniform or normal")],
    "hull-deficit": [("--mc-budget", "mc_budget", int, "probe points per trial when d >= 4")],
    "discrepancy": [
        ("--mode", "mode", str, "exact (1-D), hull-statistic or local-search"),
        ("--mc-budget", "mc_budget", int, "probe points for hull probabilities"),
    ],
    "verify-family": [
        ("--family", "family", str, "bump (default) or cap"),
        ("--delta", "delta", float, "bump radius (0.1)"),
        ("--pairs", "pairs", int, "Hamming-1 and far pairs to measure (10)"),
        ("--c1", "c1", float, "cap count multiplier (2.0)"),
    ],
    "chaining-eval": [
        ("--amplitude", "amplitude", float, "entropy amplitude A (1.0)"),
        ("--exponent", "exponent", float, "entropy exponent p (1.5)"),
    ],
    "fixed-point": [
        ("--amplitude", "amplitude", float, "entropy amplitude A (1.0)"),
        ("--exponent", "exponent", float, "entropy exponent p ((dim - 1) / 2)"),
        ("--fp-kind", "fp_kind", str, "lecam, donsker, bracket13 or newfp (default)"),
    ],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _number(text):
    """Accept 4096, 2**12 or 1e20 style integers."""
    text = text.strip()
    if "**" in text:
        base, power = text.split("**", 1)
        return int(base) ** int(power)
    return _to_int(text)


def build_parser():
    parser = _Parser(prog="shapelab", description="Shape-constrained estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
        p.add_argument("--dim", type=int)
        p.add_argument("--nmin", type=_number)
        p.add_argument("--nmax", type=_number)
        p.add_argument("--grid", type=int, help="number of geometric n-grid points")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--tolerance", type=float, help="allowed |slope - target|")
        p.add_argument("--out", help="output prefix for <out>.csv and <out>.json")
        for flag, key, cast, text in _KIND_FLAGS.get(kind, []):
            p.add_argument(flag, dest=key, type=cast, help=text)

    p = sub.add_parser("fit-convex", help="bounded convex least squares on a data file")
    p.add_argument("input", type=Path, help="CSV with feature columns followed by the response")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("mle1d", help="one-dimensional log-concave MLE of a data file")
    p.add_argument("input", type=Path, help="text file of numbers, one per line")
    p.add_argument("--out", type=Path)
    return parser


def config_from_args(args):
    """Merge a config file with command-line flags (flags win)."""
    mapping = read_config_file(args.config) if getattr(args, "config", None) else {}
    if mapping.get("kind", args.command) != args.command:
        raise UsageError(f"config file is for {mapping['kind']!r}, not {args.command!r}")
    mapping["kind"] = args.command
    flags = dict(vars(args))
    for key in ("command", "config"):
        flags.pop(key, None)
    for key, value in flags.items():
        if value is not None:
            mapping[key] = value
    return ExperimentConfig.from_mapping(mapping)


def _emit(text, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def _fit_convex(args):
    data = np.loadtxt(args.input, delimiter=",", ndmin=2)
    if data.shape[1] < 2:
        raise UsageError("fit-convex needs at least one feature column and a response column")
    Y = data[:, -1]
    fit = convex_ls_fit(data[:, :-1], Y, Gamma=args.gamma, tol=args.tol)
    payload = {**fit.to_dict(), "Y": Y.tolist(), "residuals": (Y - fit.g).tolist()}
    _emit(json.dumps(payload, sort_keys=True), args.out)
    return 0 if fit.converged else 1


def _mle1d(args):
    data = np.loadtxt(args.input, ndmin=1).ravel()
    fit = logconcave_mle_1d(data)
    _emit(json.dumps(fit.to_dict(), sort_keys=True), args.out)
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "fit-convex":
            return _fit_convex(args)
        if args.command == "mle1d":
            return _mle1d(args)
        report = run_experiment(config_from_args(args))
    except UsageError as exc:
        print(f"shapelab: error: {exc}", file=sys.stderr)
        return 2
    except (ShapelabError, OSError, ValueError) as exc:
        print(f"shapelab: {exc}", file=sys.stderr)
        return 1
    print(report.to_json())
    return 0 if report.passed in (True, None) else 1


if __name__ == "__main__":
    sys.exit(main())
