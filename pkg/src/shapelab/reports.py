"""Monte-Carlo rate reports and log-log slope fitting."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import InsufficientDataError

__all__ = ["RateReport", "fit_slope", "fit_line"]

CSV_HEADER = ("n", "trial", "risk", "seed")


def fit_line(rows):
    """Least squares line through (log n, log mean risk).

    Returns
    -------
    slope, intercept, stderr : float
    """
    rows = list(rows)
    ns = np.array(sorted({int(r[0]) for r in rows}))
    if len(ns) < 3:
        raise InsufficientDataError(f"need at least 3 distinct n values, got {len(ns)}")
    risk = np.array([np.mean([r[2] for r in rows if int(r[0]) == n]) for n in ns])
    if np.any(risk <= 0):
        raise InsufficientDataError("mean risk must be positive to take logs")
    fit = stats.linregress(np.log(ns.astype(float)), np.log(risk))
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


def fit_slope(rows):
    """Slope and its standard error for rows of (n, trial, risk[, seed])."""
    slope, _, stderr = fit_line(rows)
    return slope, stderr


@dataclass(frozen=True)
class RateReport:
    """Risk per (n, trial) together with the fitted exponent.

    ``passed`` is True when |slope - target| <= tolerance; without a target
    it is None.
    """

    rows: tuple
    slope: float
    intercept: float
    stderr: float
    target: float = None
    tolerance: float = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows, target=None, tolerance=None, extra=None):
        rows = tuple((int(n), int(t), float(r), int(s)) for n, t, r, s in rows)
        slope, intercept, stderr = fit_line(rows)
        return cls(rows, slope, intercept, stderr, target, tolerance, dict(extra or {}))

    @property
    def passed(self):
        if self.target is None or self.tolerance is None:
            return None
        return bool(abs(self.slope - self.target) <= self.tolerance)

    def mean_risk(self):
        ns = sorted({r[0] for r in self.rows})
        return {n: float(np.mean([r[2] for r in self.rows if r[0] == n])) for n in ns}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for n, trial, risk, seed in self.rows:
            writer.writerow((n, trial, repr(risk), seed))
        return buf.getvalue()

    def summary(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "target": self.target,
            "pass": self.passed,
        }

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True)
