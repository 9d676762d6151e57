"""Seeded experiment runner.

An :class:`ExperimentConfig` names an experiment kind, a dimension, an n-grid,
a trial count and a seed; :func:`run_experiment` dispatches to the owning
module and returns a :class:`~shapelab.reports.RateReport` (for rate
experiments) or a :class:`SummaryReport` (report-only kinds), writing CSV and
JSON outputs when a path is configured.  Every random draw comes from a
stream keyed by (seed, n, trial), so reruns reproduce outputs byte for byte.
"""

import json
import os
from decimal import Decimal
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ._validation import rng_for
from .densities import Gaussian, UniformBall, UniformInterval
from .empirical_process import (
    EntropyModel,
    convex_discrepancy,
    fixed_point,
    fixed_point_rate,
    hull_deficit_experiment,
    interval_discrepancy_1d,
    optimal_chaining_bound,
)
from .estimators.convex_regression import convex_ls_fit, convex_predict
from .estimators.logconcave import logconcave_mle_1d
from .estimators.tournament import TournamentNet, tournament_estimate
from .exceptions import ExperimentError, ShapelabError, UsageError
from .geometry import sample_ball
from .lower_bounds import BumpFamily, build_cap_instance, verify_family
from .reports import RateReport

__all__ = [
    "KINDS",
    "REPORT_ONLY",
    "ExperimentConfig",
    "SummaryReport",
    "run_experiment",
    "read_config_file",
    "MLE_TRUTHS",
]

KINDS = (
    "hull-deficit",
    "convreg-rate",
    "mle1d-rate",
    "tournament-rate",
    "discrepancy",
    "verify-family",
    "chaining-eval",
    "fixed-point",
)
REPORT_ONLY = ("tournament-rate", "discrepancy", "verify-family")

# kind -> (nmin, nmax, grid points, trials)
_DEFAULTS = {
    "hull-deficit": (2**7, 2**13, 7, 200),
    "convreg-rate": (2**6, 2**12, 7, 50),
    "mle1d-rate": (2**7, 2**13, 7, 50),
    "tournament-rate": (2**6, 2**12, 7, 20),
    "discrepancy": (2**6, 2**12, 7, 50),
    "verify-family": (10**4, 10**4, 1, 1),
    "chaining-eval": (10**20, 10**60, 5, 1),
    "fixed-point": (10**80, 10**120, 5, 1),
}

MLE_TRUTHS = {
    "beta22": lambda: stats.beta(2, 2),
    "uniform": lambda: stats.uniform(0, 1),
    "normal": lambda: stats.norm(),
}

_INT_KEYS = ("dim", "grid", "trials", "seed", "nmin", "nmax")


def _round_n(value):
    """Nearest integer; beyond 2^53 keep 12 significant digits (1e80 -> 10**80)."""
    value = float(value)
    if abs(value) < 2.0**53:
        return int(round(value))
    return int(Decimal(f"{value:.12g}"))


def _to_int(value):
    if isinstance(value, str):
        value = value.strip()
        try:
            return int(value)
        except ValueError:
            return _round_n(value)
    return _round_n(value) if isinstance(value, float) else int(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun an experiment.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    dim : int
    nmin, nmax, grid : int, optional
        Geometric n-grid with ``grid`` points; kind defaults when omitted.
    n_grid : tuple of int, optional
        Explicit grid, overriding nmin/nmax/grid.
    trials : int, optional
    seed : int
    tolerance : float, optional
        Allowed |slope - target|; kind default when omitted.
    params : dict
        Kind-specific settings (see :func:`run_experiment`).
    out : str, optional
        Output prefix; ``<out>.csv`` and ``<out>.json`` are written.
    """

    kind: str
    dim: int = 1
    nmin: int = None
    nmax: int = None
    grid: int = None
    n_grid: tuple = None
    trials: int = None
    seed: int = 0
    tolerance: float = None
    params: dict = field(default_factory=dict)
    out: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.dim < 1:
            raise UsageError("dim must be at least 1")
        if self.trials is not None and self.trials < 1:
            raise UsageError("trials must be at least 1")
        ns = self.resolved_grid()
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise UsageError(f"n-grid must be strictly increasing, got {list(ns)}")

    def resolved_grid(self):
        if self.n_grid is not None:
            return tuple(int(n) for n in self.n_grid)
        nmin, nmax, grid, _ = _DEFAULTS[self.kind]
        nmin = nmin if self.nmin is None else self.nmin
        nmax = nmax if self.nmax is None else self.nmax
        grid = grid if self.grid is None else self.grid
        if grid == 1 or nmin == nmax:
            return (int(nmin),)
        if grid < 1 or nmin < 1 or nmax < nmin:
            raise UsageError("need 1 <= nmin <= nmax and grid >= 1")
        return tuple(_round_n(v) for v in np.geomspace(float(nmin), float(nmax), grid))

    def resolved_trials(self):
        return _DEFAULTS[self.kind][3] if self.trials is None else int(self.trials)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from flat string/number pairs; unknown keys become params."""
        kwargs, params = {}, {}
        for key, value in mapping.items():
            key = key.replace("-", "_")
            if value is None:
                continue
            if key in _INT_KEYS:
                kwargs[key] = _to_int(value)
            elif key == "tolerance":
                kwargs[key] = float(value)
            elif key in ("kind", "out"):
                kwargs[key] = str(value)
            elif key == "n_grid":
                items = value.split(",") if isinstance(value, str) else value
                kwargs[key] = tuple(_to_int(v) for v in items)
            else:
                params[key] = value
        if "kind" not in kwargs:
            raise UsageError("configuration lacks an experiment kind")
        return cls(params=params, **kwargs)

    def to_dict(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "n_grid": list(self.resolved_grid()),
            "trials": self.resolved_trials(),
            "seed": self.seed,
            "tolerance": self.tolerance,
            "params": {k: self.params[k] for k in sorted(self.params)},
        }


def read_config_file(path):
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    mapping = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        mapping[key] = value
    return mapping


@dataclass(frozen=True)
class SummaryReport:
    """Result of a report-only experiment, or of a non-rate computation."""

    kind: str
    data: dict
    passed: bool = None

    def summary(self):
        return {"kind": self.kind, "pass": self.passed, **self.data}

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True)


def _threads():
    try:
        return max(1, int(os.environ.get("SHAPELAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(func, items):
    """Ordered map; trials run on SHAPELAB_THREADS worker threads."""
    items = list(items)
    workers = min(_threads(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _param(config, key, default, cast=float):
    value = config.params.get(key, default)
    return default if value is None else cast(value)


# ---------------------------------------------------------------------------
# experiment kinds
# ---------------------------------------------------------------------------


def _hull_deficit(config):
    tol = config.tolerance
    return hull_deficit_experiment(
        config.dim, config.resolved_grid(), config.resolved_trials(), config.seed,
        mc_budget=_param(config, "mc_budget", 100_000, int), tolerance=tol,
    )


def convreg_trial(d, n, seed, trial, noise_sd=1.0, Gamma=1.0, eval_points=10_000):
    """One regression trial: f*(x) = |x|^2 on the unit ball, Gaussian noise.

    Returns the Monte-Carlo L2(P)^2 distance between the fitted predictor and
    f* over ``eval_points`` fresh design points.
    """
    rng = rng_for(seed, n, trial)
    X = sample_ball(d, n, rng)
    Y = np.sum(X**2, axis=1) + noise_sd * rng.standard_normal(n)
    fit = convex_ls_fit(X, Y, Gamma=Gamma)
    Z = sample_ball(d, eval_points, rng_for(seed, n, trial, 1))
    return float(np.mean((convex_predict(fit, Z) - np.sum(Z**2, axis=1)) ** 2))


def _convreg(config):
    d = config.dim
    noise = _param(config, "noise_sd", 1.0)
    Gamma = _param(config, "gamma", 1.0)
    evals = _param(config, "eval_points", 10_000, int)
    tasks = [(n, t) for n in config.resolved_grid() for t in range(config.resolved_trials())]
    risks = _map(lambda nt: convreg_trial(d, nt[0], config.seed, nt[1], noise, Gamma, evals), tasks)
    rows = [(n, t, r, config.seed) for (n, t), r in zip(tasks, risks)]
    tol = 0.1 if config.tolerance is None else config.tolerance
    return RateReport.from_rows(rows, target=-4.0 / (d + 4), tolerance=tol,
                                extra={"noise_sd": noise, "gamma": Gamma})


def mle1d_trial(truth, n, seed, trial):
    """Squared Hellinger loss of the log-concave MLE from n draws of ``truth``."""
    dist = MLE_TRUTHS[truth]()
    x = dist.rvs(size=n, random_state=rng_for(seed, n, trial))
    fit = logconcave_mle_1d(x)
    return fit.hellinger_sq(lambda p: dist.pdf(p[:, 0]), truth_cdf=lambda p: dist.cdf(p[:, 0]))


def _mle1d(config):
    if config.dim != 1:
        raise UsageError("mle1d-rate is one-dimensional")
    truth = str(config.params.get("truth", "beta22"))
    if truth not in MLE_TRUTHS:
        raise UsageError(f"unknown truth {truth!r}; choose from {', '.join(MLE_TRUTHS)}")
    tasks = [(n, t) for n in config.resolved_grid() for t in range(config.resolved_trials())]
    risks = _map(lambda nt: mle1d_trial(truth, nt[0], config.seed, nt[1]), tasks)
    rows = [(n, t, r, config.seed) for (n, t), r in zip(tasks, risks)]
    tol = 0.1 if config.tolerance is None else config.tolerance
    return RateReport.from_rows(rows, target=-0.8, tolerance=tol, extra={"truth": truth})


def _gaussian_tv(a, b):
    return float(2.0 * stats.norm.cdf(abs(a - b) / 2.0) - 1.0)


def _tournament(config):
    """Tournament over a Gaussian location net with spacing n^-1/2 on [-1/2, 1/2].

    The truth's location is uniform on the same interval and the loss is the
    total variation between the selected candidate and the truth.
    """
    if config.dim != 1:
        raise UsageError("tournament-rate uses one-dimensional location nets")
    rows = []
    for n in config.resolved_grid():
        m = int(np.ceil(np.sqrt(n))) + 1
        means = np.linspace(-0.5, 0.5, m)
        net = TournamentNet([Gaussian(mean=[mu], cov=[[1.0]]) for mu in means], epsilon=1.0 / (m - 1))

        def trial(t, n=n, net=net, means=means):
            rng = rng_for(config.seed, n, t)
            mu = rng.uniform(-0.5, 0.5)
            x = mu + rng.standard_normal(n)
            return _gaussian_tv(means[tournament_estimate(x, net)], mu)

        for t, risk in enumerate(_map(trial, range(config.resolved_trials()))):
            rows.append((n, t, risk, config.seed))
    return RateReport.from_rows(rows, extra={"net": "gaussian-location"})


def _discrepancy(config):
    d = config.dim
    mode = str(config.params.get("mode", "exact" if d == 1 else "hull-statistic"))
    budget = _param(config, "mc_budget", 200_000, int)
    rows = []
    for n in config.resolved_grid():
        def trial(t, n=n):
            rng = rng_for(config.seed, n, t)
            if d == 1 and mode == "exact":
                x = rng.random(n)
                return interval_discrepancy_1d(x, UniformInterval(0.0, 1.0).cdf).value
            x = sample_ball(d, n, rng)
            return convex_discrepancy(x, UniformBall(d), mode=mode, seed=rng_for(config.seed, n, t, 1),
                                      budget=budget).value

        for t, value in enumerate(_map(trial, range(config.resolved_trials()))):
            rows.append((n, t, float(value), config.seed))
    return RateReport.from_rows(rows, extra={"mode": mode})


def _verify_family(config):
    family = str(config.params.get("family", "bump"))
    pairs = _param(config, "pairs", 10, int)
    if family == "bump":
        delta = _param(config, "delta", 0.1)
        fam = BumpFamily(config.dim, delta, seed=config.seed, C=_param(config, "C", 1.0))
        info = {"delta": delta}
    elif family == "cap":
        n = config.resolved_grid()[0]
        fam, inst = build_cap_instance(config.dim, n, seed=config.seed, c1=_param(config, "c1", 2.0))
        info = {"n": n, "K": inst.K, "eta": inst.eta, "c": inst.c}
    else:
        raise UsageError(f"unknown family {family!r}; choose bump or cap")
    verification = verify_family(fam, n_pairs=pairs, seed=config.seed)
    return SummaryReport("verify-family", {**verification.to_dict(), **info, "K": fam.K})


def _chaining(config):
    p = _param(config, "exponent", 1.5)
    model = EntropyModel(_param(config, "amplitude", 1.0), p, "L1-bracketing")
    C = _param(config, "C", 2.0)
    rows = [(n, 0, optimal_chaining_bound(model, n, C=C)[1], config.seed) for n in config.resolved_grid()]
    tol = 0.01 if config.tolerance is None else config.tolerance
    return RateReport.from_rows(rows, target=-1.0 / (1.0 + p), tolerance=tol, extra={"exponent": p})


def _fixed_point(config):
    kind = str(config.params.get("fp_kind", "newfp"))
    p = _param(config, "exponent", (config.dim - 1) / 2 if config.dim > 1 else 1.5)
    model = EntropyModel(_param(config, "amplitude", 1.0), p, str(config.params.get("bracket", "L1-bracketing")))
    rows = [(n, 0, fixed_point(model, kind, n) ** 2, config.seed) for n in config.resolved_grid()]
    tol = 1e-6 if config.tolerance is None else config.tolerance
    return RateReport.from_rows(rows, target=2.0 * fixed_point_rate(kind, p), tolerance=tol,
                                extra={"fp_kind": kind, "exponent": p})


_DISPATCH = {
    "hull-deficit": _hull_deficit,
    "convreg-rate": _convreg,
    "mle1d-rate": _mle1d,
    "tournament-rate": _tournament,
    "discrepancy": _discrepancy,
    "verify-family": _verify_family,
    "chaining-eval": _chaining,
    "fixed-point": _fixed_point,
}


def write_outputs(report, out):
    """Write ``<out>.csv`` (rate reports only) and ``<out>.json``."""
    base = Path(out)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    if isinstance(report, RateReport):
        path = base.with_name(base.name + ".csv")
        path.write_text(report.to_csv())
        paths.append(path)
    path = base.with_name(base.name + ".json")
    path.write_text(report.to_json() + "\n")
    paths.append(path)
    return paths


def run_experiment(config):
    """Run one configured experiment.

    Kind-specific ``params``:

    * convreg-rate: ``noise_sd`` (1.0), ``gamma`` (1.0), ``eval_points`` (10^4).
    * mle1d-rate: ``truth`` in :data:`MLE_TRUTHS` (``beta22``).
    * discrepancy: ``mode`` (``exact`` in 1-D, else ``hull-statistic``).
    * verify-family: ``family`` (``bump`` or ``cap``), ``delta``, ``pairs``.
    * chaining-eval, fixed-point: ``amplitude``, ``exponent``, ``fp_kind``.

    Returns
    -------
    RateReport or SummaryReport
        Report-only kinds carry ``passed = None``.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_mapping(config)
    try:
        report = _DISPATCH[config.kind](config)
    except UsageError:
        raise
    except ShapelabError as exc:
        raise ExperimentError(f"{config.kind} (dim={config.dim}, seed={config.seed}): {exc}") from exc
    if config.out:
        write_outputs(report, config.out)
    return report

