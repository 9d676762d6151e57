"""Log-concave maximum likelihood in one dimension.

The estimator maximises sum_i w_i phi(x_i) - int exp(phi) over concave phi.
The maximiser is piecewise linear with kinks at a subset of the distinct
observations, is -inf off [x_(1), x_(n)], and automatically integrates to
one.  We solve it with an active-set method over knot subsets: for a fixed
knot set the problem is smooth and strictly concave in the knot values and
is solved by damped Newton; knots are added where the directional
derivative along a new concave kink is positive, and removed when a Newton
step would break concavity.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_points
from ..densities import Density
from ..exceptions import DegenerateSampleError

__all__ = ["MLE1D", "logconcave_mle_1d", "LogConcaveMLE1D"]

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(24)


def _series(t, k, terms=30):
    # E_k(t) = int_0^1 u^k e^{tu} du = sum_n t^n / (n! (n + k + 1))
    out = np.zeros_like(t)
    term = np.ones_like(t)
    for n in range(terms):
        out += term / (n + k + 1)
        term = term * t / (n + 1)
    return out


def _moments(t, order=2):
    """E_0 .. E_order at t <= 0, accurate through t = 0."""
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < 1.0
    ts = np.where(small, -2.0, t)
    e = np.exp(ts)
    closed = [np.expm1(ts) / ts, (e * (ts - 1) + 1) / ts**2, (e * (ts * ts - 2 * ts + 2) - 2) / ts**3]
    out = []
    for k in range(order + 1):
        value = closed[k]
        if small.any():
            value[small] = _series(t[small], k)
        out.append(value)
    return out


def _segment_moments(a, b, width, order=2):
    """M_k = width * int_0^1 u^k exp((1-u) a + u b) du for k = 0, 1, 2.

    The exponential is always factored out at the larger endpoint so that
    steep segments neither overflow nor cancel.
    """
    t = b - a
    flip = t > 0
    s = np.where(flip, -t, t)
    top = np.where(flip, b, a)
    E = _moments(s, order)
    scale = width * np.exp(top)
    if order == 0:
        return (scale * E[0],)
    E0, E1, E2 = E
    M0 = scale * E0
    M1 = scale * np.where(flip, E0 - E1, E1)
    M2 = scale * np.where(flip, E0 - 2 * E1 + E2, E2)
    return M0, M1, M2


def _objective(theta, c, widths):
    M0 = _segment_moments(theta[:-1], theta[1:], widths, order=0)[0]
    return c @ theta - M0.sum()


def _newton(theta, c, widths, tol=1e-22, max_iter=200):
    """Maximise c.theta - int exp(linear spline(theta)) over theta."""
    L = len(theta)
    value = _objective(theta, c, widths)
    for _ in range(max_iter):
        M0, M1, M2 = _segment_moments(theta[:-1], theta[1:], widths)
        grad = c.copy()
        grad[:-1] -= M0 - M1
        grad[1:] -= M1
        diag = np.zeros(L)
        diag[:-1] += M0 - 2 * M1 + M2
        diag[1:] += M2
        off = M1 - M2
        H = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        step = np.linalg.solve(H, grad)
        decrement = grad @ step
        if decrement <= tol:
            break
        if decrement < 1e-8:
            # quadratic convergence region: the objective change is below
            # rounding, so a line search cannot certify progress
            theta = theta + step
            continue
        t = 1.0
        while True:
            trial = theta + t * step
            new = _objective(trial, c, widths)
            if new >= value + 0.25 * t * decrement:
                break
            t *= 0.5
            if t < 1e-10:
                return theta
        theta, value = trial, new
    return theta


def _kinks(theta, widths):
    slopes = np.diff(theta) / widths
    return np.diff(slopes)


def _solve(x, w, tol=1e-10, max_outer=10_000):
    """Active-set iterations; returns log-density values at every x."""
    m = len(x)
    span = x[-1] - x[0]
    knots = np.array([0, m - 1])
    theta = np.full(2, -np.log(span))
    for _ in range(max_outer):
        # restricted optimum with step-back and knot removal
        while True:
            xk = x[knots]
            widths = np.diff(xk)
            c = _knot_weights(x, w, knots)
            target = _newton(theta, c, widths)
            kink_new = _kinks(target, widths)
            if len(kink_new) == 0 or kink_new.max() <= 0.0:
                theta = target
                break
            kink_old = np.minimum(_kinks(theta, widths), 0.0)
            grow = kink_new > 0
            ratio = np.full(len(kink_new), np.inf)
            ratio[grow] = -kink_old[grow] / (kink_new[grow] - kink_old[grow])
            t = float(min(ratio.min(), 1.0))
            theta = theta + t * (target - theta)
            drop = np.flatnonzero(ratio <= t + 1e-12) + 1
            keep = np.setdiff1d(np.arange(len(knots)), drop)
            knots, theta = knots[keep], theta[keep]
        phi = np.interp(x, x[knots], theta)
        gain = _kink_gains(x, w, phi)
        gain[knots] = -np.inf
        bad = gain > tol * span
        if not bad.any():
            return phi, knots, float(max(gain.max(), 0.0))
        # one knot per round keeps every step-back strictly positive
        knots = np.sort(np.append(knots, np.argmax(gain)))
        theta = phi[knots]
    raise RuntimeError("log-concave MLE active set did not terminate")


def _knot_weights(x, w, knots):
    # phi(x_i) is linear in the knot values; c = B' w
    xk = x[knots]
    seg = np.clip(np.searchsorted(xk, x, side="right") - 1, 0, len(knots) - 2)
    a = (xk[seg + 1] - x) / (xk[seg + 1] - xk[seg])
    c = np.zeros(len(knots))
    np.add.at(c, seg, w * a)
    np.add.at(c, seg + 1, w * (1 - a))
    return c


def _kink_gains(x, w, phi):
    """Directional derivative of the objective along -(x - x_j)_+ for each j.

    Equals int (x - x_j)_+ exp(phi) - sum_i w_i (x_i - x_j)_+; a positive
    value means a concave kink at x_j increases the likelihood.
    """
    widths = np.diff(x)
    M0, M1, _ = _segment_moments(phi[:-1], phi[1:], widths)
    # integrals of (x - x_j) e^phi over segments to the right of x_j
    a0 = np.concatenate([np.cumsum(M0[::-1])[::-1], [0.0]])
    a1 = np.concatenate([np.cumsum((x[:-1] * M0 + widths * M1)[::-1])[::-1], [0.0]])
    b0 = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    b1 = np.concatenate([np.cumsum((w * x)[::-1])[::-1][1:], [0.0]])
    return (a1 - x * a0) - (b1 - x * b0)


@dataclass(frozen=True, eq=False)
class MLE1D(Density):
    """Fitted log-concave density: concave piecewise-linear log-density.

    Attributes
    ----------
    knots : ndarray
        Sorted distinct observations; the log-density is linear between
        consecutive entries.
    log_values : ndarray
        Log-density at each knot (a concave sequence).
    active_knots : ndarray
        Indices into ``knots`` where the slope actually changes.
    gap : float
        Largest directional derivative along an admissible new kink at the
        returned solution (zero at the exact optimum).
    """

    knots: np.ndarray
    log_values: np.ndarray
    active_knots: np.ndarray
    gap: float = 0.0

    d = 1

    @property
    def support(self):
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def support_radius(self):
        return float(np.max(np.abs(self.knots)))

    @property
    def is_log_concave(self):
        return True

    def logpdf(self, x):
        x = self._points(x)[:, 0]
        out = np.interp(x, self.knots, self.log_values)
        out[(x < self.knots[0]) | (x > self.knots[-1])] = -np.inf
        return out

    def _masses(self):
        return _segment_moments(self.log_values[:-1], self.log_values[1:], np.diff(self.knots))

    def integral(self):
        return float(self._masses()[0].sum())

    def mean(self):
        M0, M1, _ = self._masses()
        return float(np.sum(self.knots[:-1] * M0 + np.diff(self.knots) * M1))

    def breakpoints(self):
        return self.knots[self.active_knots]

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        M0 = self._masses()[0]
        cum = np.concatenate([[0.0], np.cumsum(M0)])
        k = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 2)
        lo, hi = self.knots[k], self.knots[k + 1]
        frac = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        a, b = self.log_values[k], self.log_values[k + 1]
        # mass of [lo, x] on a linear piece: width*frac * E_0 at slope t*frac
        partial = _segment_moments(a, a + (b - a) * frac, (hi - lo) * frac)[0]
        out = cum[k] + partial
        out[x <= self.knots[0]] = 0.0
        out[x >= self.knots[-1]] = 1.0
        return np.clip(out, 0.0, 1.0)

    def _draw(self, n, rng):
        # inverse cdf: pick a segment by mass, then invert the exponential piece
        M0 = self._masses()[0]
        seg = rng.choice(len(M0), size=n, p=M0 / M0.sum())
        u = rng.random(n)
        lo, width = self.knots[seg], np.diff(self.knots)[seg]
        t = self.log_values[seg + 1] - self.log_values[seg]
        flat = np.abs(t) < 1e-10
        ts = np.where(flat, 1.0, t)
        frac = np.where(flat, u, np.log1p(u * np.expm1(ts)) / ts)
        return (lo + width * frac)[:, None], n

    def hellinger_sq(self, truth_pdf, lo=None, hi=None, truth_cdf=None, nodes=_NODES, weights=_WEIGHTS):
        """h^2 against a density given as a vectorised callable on (m, 1) arrays.

        Integrates on every knot segment with Gauss-Legendre.  Outside the
        fitted support the fit vanishes, so that part contributes half the
        truth's mass there: exactly when ``truth_cdf`` is given, otherwise by
        quadrature over the parts of [lo, hi] beyond the knots.
        """
        if truth_cdf is not None:
            lo = hi = None
        grid = [self.knots]
        if lo is not None and lo < self.knots[0]:
            grid.append([lo])
        if hi is not None and hi > self.knots[-1]:
            grid.append([hi])
        edges = np.unique(np.concatenate(grid))
        a, b = edges[:-1], edges[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()[:, None]
        diff = (np.sqrt(self.pdf(pts)) - np.sqrt(truth_pdf(pts))) ** 2
        value = 0.5 * float((half[:, None] * diff.reshape(len(a), -1) * weights).sum())
        if truth_cdf is not None:
            ends = np.asarray(truth_cdf(self.knots[[0, -1]][:, None]), dtype=float).ravel()
            value += 0.5 * float(ends[0] + 1.0 - ends[1])
        return value

    def to_dict(self):
        return {
            "kind": "logconcave_mle_1d",
            "knots": self.knots.tolist(),
            "log_values": (self.log_values + 0.0).tolist(),
            "active_knots": self.active_knots.tolist(),
        }


def logconcave_mle_1d(X, weights=None, tol=1e-10):
    """Log-concave maximum likelihood estimate from one-dimensional data.

    Parameters
    ----------
    X : array-like of shape (n,) or (n, 1)
    weights : array-like of shape (n,), optional
        Non-negative observation weights; uniform by default.
    tol : float
        Knots are added while some kink direction increases the objective by
        more than ``tol`` times the sample range per unit step.

    Returns
    -------
    MLE1D
    """
    x = check_points(X, dim=1, min_samples=2)[:, 0]
    w = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=float).ravel()
    if len(w) != len(x) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative, one per sample, not all zero")
    ux, inv = np.unique(x, return_inverse=True)
    if len(ux) < 2:
        raise DegenerateSampleError("all samples are equal; the MLE does not exist")
    uw = np.bincount(inv, weights=w)
    uw = uw / uw.sum()
    phi, knots, gap = _solve(ux, uw, tol)
    # exact normalisation of the returned spline
    total = _segment_moments(phi[:-1], phi[1:], np.diff(ux))[0].sum()
    phi = phi - np.log(total)
    return MLE1D(knots=ux, log_values=phi, active_knots=knots, gap=gap)


class LogConcaveMLE1D(DensityMixin, BaseEstimator):
    """Scikit-learn wrapper around :func:`logconcave_mle_1d`.

    Parameters
    ----------
    tol : float, default=1e-10

    Attributes
    ----------
    density_ : MLE1D
    n_features_in_ : int
    """

    def __init__(self, tol=1e-10):
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        X = check_points(X, dim=1, min_samples=2)
        self.density_ = logconcave_mle_1d(X, weights=sample_weight, tol=self.tol)
        self.n_features_in_ = 1
        return self

    def score_samples(self, X):
        check_is_fitted(self, "density_")
        return self.density_.logpdf(X)

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=0):
        check_is_fitted(self, "density_")
        return self.density_.sample(n_samples, seed=random_state)
