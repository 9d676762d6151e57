"""Empirical processes indexed by convex sets.

Discrepancy statistics sup_C |P_n(C) - P(C)| (exact over intervals, from
below over convex sets in the plane), Monte-Carlo checks of the level-set
reduction and of the binomial maximal inequality, the chaining bound for
L1-bracketing entropy and the balance equations that turn an entropy
function into a rate.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.spatial import ConvexHull, QhullError

from ._validation import check_points, rng_for
from .densities import UniformBall
from .exceptions import FlatHullError, NoRootError, OutOfRegimeError
from .geometry import ball_volume, convex_hull, sample_ball
from .reports import RateReport

__all__ = [
    "EntropyModel",
    "DiscrepancyReport",
    "interval_discrepancy_1d",
    "convex_discrepancy",
    "hull_deficit_experiment",
    "levelset_rademacher_check",
    "binomial_max_bound_check",
    "chaining_bound",
    "optimal_chaining_bound",
    "shell_series",
    "shell_chaining_bound",
    "fixed_point",
    "fixed_point_exponent",
    "fixed_point_rate",
    "InequalityReport",
]

BRACKET_KINDS = ("L1-bracketing", "L2-metric")


@dataclass(frozen=True)
class EntropyModel:
    """Power-law entropy H(delta) = amplitude * delta**(-exponent).

    ``exponent = 0`` gives a constant entropy (a parametric class) and
    ``amplitude = 0`` an empty one.
    """

    amplitude: float
    exponent: float
    bracket_kind: str = "L1-bracketing"
    delta_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.amplitude < 0 or self.exponent < 0:
            raise ValueError("amplitude and exponent must be non-negative")
        if self.bracket_kind not in BRACKET_KINDS:
            raise ValueError(f"bracket_kind must be one of {BRACKET_KINDS}")
        lo, hi = self.delta_range
        if not 0 <= lo < hi:
            raise ValueError("delta_range must satisfy 0 <= lo < hi")

    def __call__(self, delta):
        delta = np.asarray(delta, dtype=float)
        return self.amplitude * delta ** (-self.exponent)

    def sqrt_integral(self, a, b, weight_power=0.0):
        """int_a^b sqrt(H(delta) * delta**(-weight_power)) d delta, in closed form."""
        if self.amplitude == 0 or b <= a:
            return 0.0
        q = 0.5 * (self.exponent + weight_power)
        if abs(q - 1.0) < 1e-14:
            return float(np.sqrt(self.amplitude) * np.log(b / a))
        if a == 0.0:
            if q > 1.0:
                return np.inf
            return float(np.sqrt(self.amplitude) * b ** (1 - q) / (1 - q))
        return float(np.sqrt(self.amplitude) * (b ** (1 - q) - a ** (1 - q)) / (1 - q))

    def to_dict(self):
        return {
            "amplitude": self.amplitude,
            "exponent": self.exponent,
            "bracket_kind": self.bracket_kind,
            "delta_range": list(self.delta_range),
        }


@dataclass(frozen=True)
class DiscrepancyReport:
    """Value of |P_n(W) - P(W)| for a witness set W.

    ``witness`` is a dict: interval endpoints with a ``closed`` flag in 1-D,
    polygon vertex indices in 2-D, or ``{"kind": "hull"}``.
    """

    value: float
    witness: dict
    mode: str
    stderr: float = 0.0

    def to_dict(self):
        return {"value": self.value, "witness": self.witness, "mode": self.mode, "stderr": self.stderr}


# ---------------------------------------------------------------------------
# discrepancy statistics
# ---------------------------------------------------------------------------


def _cdf_of(cdf):
    return cdf.cdf if hasattr(cdf, "cdf") else cdf


def _largest_rise(a, strict=False):
    """max a[j] - a[i] over i <= j (i < j when ``strict``) and the maximising pair."""
    run_min = np.minimum.accumulate(a)
    is_new = np.concatenate([[True], a[1:] < run_min[:-1]])
    arg_min = np.maximum.accumulate(np.where(is_new, np.arange(len(a)), 0))
    if strict:
        rise = a[1:] - run_min[:-1]
        j = int(np.argmax(rise))
        return float(rise[j]), int(arg_min[j]), j + 1
    rise = a - run_min
    j = int(np.argmax(rise))
    return float(rise[j]), int(arg_min[j]), j


def interval_discrepancy_1d(samples, cdf, method="linear"):
    """Exact sup over intervals I of |P_n(I) - P(I)| for a continuous law.

    Closed intervals between order statistics maximise P_n - P and open
    intervals between consecutive-or-further order statistics (including the
    half-lines) maximise P - P_n.  Both reduce to the largest rise of a
    sequence, computed in one pass after sorting (``method="linear"``) or by
    scanning every endpoint pair (``method="pairs"``).

    Parameters
    ----------
    samples : array-like of shape (n,) or (n, 1)
    cdf : callable or Density
        Distribution function of P, vectorised over a 1-D array.
    """
    x = np.sort(check_points(samples, dim=1)[:, 0])
    n = len(x)
    F = np.clip(np.asarray(_cdf_of(cdf)(x), dtype=float), 0.0, 1.0)
    k = np.arange(1, n + 1)
    # P - P_n over open (x_i, x_j); index 0 and n+1 are -inf and +inf
    Fo = np.concatenate([[0.0], F, [1.0]])
    a = Fo - np.arange(n + 2) / n
    # P_n - P over closed [x_i, x_j]
    b = k / n - F
    if method == "linear":
        up, i_o, j_o = _largest_rise(a, strict=True)
        down, i_c, j_c = _largest_rise(b)
    elif method == "pairs":
        D = a[None, :] - a[:, None]
        D[np.tril_indices(n + 2, 0)] = -np.inf
        i_o, j_o = np.unravel_index(np.argmax(D), D.shape)
        up = float(D[i_o, j_o])
        E = b[None, :] - b[:, None]
        E[np.tril_indices(n, -1)] = -np.inf
        i_c, j_c = np.unravel_index(np.argmax(E), E.shape)
        down = float(E[i_c, j_c])
    else:
        raise ValueError(f"unknown method {method!r}")
    up += 1.0 / n
    down += 1.0 / n
    xo = np.concatenate([[-np.inf], x, [np.inf]])
    if max(up, down) <= 0.0:
        return DiscrepancyReport(0.0, {"lower": 0.0, "upper": 0.0, "closed": False}, "exact")
    if up >= down:
        w = {"lower": float(xo[i_o]), "upper": float(xo[j_o]), "closed": False}
        return DiscrepancyReport(float(up), w, "exact")
    w = {"lower": float(x[i_c]), "upper": float(x[j_c]), "closed": True}
    return DiscrepancyReport(float(down), w, "exact")


def _hull_probability(body, density, budget, seed):
    """P(body) and its standard error."""
    d = body.dimension
    if d == 1:
        lo, hi = body.vertices[0, 0], body.vertices[-1, 0]
        F = _cdf_of(density)
        return float(F(np.array([hi]))[0] - F(np.array([lo]))[0]), 0.0
    if isinstance(density, UniformBall) and body.cached_volume is not None:
        return body.cached_volume / ball_volume(d, density.radius), 0.0
    pts = density.sample(budget, seed=rng_for(seed, 11))
    p = float(body.contains(pts).mean())
    return p, float(np.sqrt(p * (1 - p) / budget))


def _polygon_stat(pts, idx, samples, prob):
    try:
        hull = ConvexHull(pts[idx])
    except (QhullError, ValueError):
        return None
    verts = idx[hull.vertices]
    body = convex_hull(pts[verts])
    p_n = float(body.contains(samples).mean())
    return abs(p_n - prob(body)), verts


def convex_discrepancy(samples, density, mode="hull-statistic", seed=0, budget=200_000, n_steps=2000):
    """Lower bound on sup over convex C of |P_n(C) - P(C)|.

    Parameters
    ----------
    samples : array-like of shape (n, d)
    density : Density
        The law P.  Uniform balls get exact polygon and polytope areas;
        other laws use ``budget`` Monte-Carlo points.
    mode : {"hull-statistic", "local-search"}
        ``hull-statistic`` returns 1 - P(conv(samples)).  ``local-search``
        (d <= 2) starts from the hull and anneals over polygons with
        vertices among the samples; in one dimension it returns the exact
        interval supremum.

    Returns
    -------
    DiscrepancyReport
    """
    X = check_points(samples, dim=density.d)
    d = X.shape[1]
    if mode == "hull-statistic":
        body = convex_hull(X)
        p, se = _hull_probability(body, density, budget, seed)
        return DiscrepancyReport(1.0 - p, {"kind": "hull"}, "hull-statistic", se)
    if mode != "local-search":
        raise ValueError(f"unknown mode {mode!r}")
    if d == 1:
        return interval_discrepancy_1d(X, density)
    if d != 2:
        raise ValueError("local search is implemented for d <= 2")
    rng = rng_for(seed, 13)
    if isinstance(density, UniformBall):
        area = ball_volume(2, density.radius)

        def prob(body):
            return body.volume / area
    else:
        ref = density.sample(budget, seed=rng_for(seed, 11))

        def prob(body):
            return float(body.contains(ref).mean())

    start = _polygon_stat(X, np.arange(len(X)), X, prob)
    if start is None:
        raise FlatHullError(1, 2)
    value, verts = start
    best, best_verts = value, verts
    temp0 = max(value, 1.0 / len(X))
    for step in range(n_steps):
        temp = temp0 * 0.05 * (1 - step / n_steps) + 1e-12
        move = rng.random()
        if move < 0.5 and len(verts) > 3:
            cand = np.delete(verts, rng.integers(len(verts)))
        elif move < 0.8:
            cand = np.append(verts, rng.integers(len(X)))
        else:
            cand = verts.copy()
            cand[rng.integers(len(cand))] = rng.integers(len(X))
        res = _polygon_stat(X, np.unique(cand), X, prob)
        if res is None:
            continue
        new, new_verts = res
        if new >= value or rng.random() < np.exp((new - value) / temp):
            value, verts = new, new_verts
            if value > best:
                best, best_verts = value, verts
    return DiscrepancyReport(float(best), {"vertices": sorted(int(v) for v in best_verts)}, "local-search")


def _hull_deficit(X, d, mc_budget, rng):
    if d == 1:
        return 1.0 - (X.max() - X.min()) / 2.0
    body = convex_hull(X)
    if body.cached_volume is not None:
        return 1.0 - body.cached_volume / ball_volume(d)
    probe = sample_ball(d, mc_budget, rng)
    return float(1.0 - body.contains(probe).mean())


def hull_deficit_experiment(d, n_grid, trials, seed=0, mc_budget=100_000, tolerance=None):
    """E[1 - P(conv(X_1..X_n))] for X uniform on the unit ball, with the fitted slope.

    Volumes are exact for d <= 3; larger d uses ``mc_budget`` uniform probe
    points per trial.  The target exponent is -2/(d+1).
    """
    rows = []
    for n in n_grid:
        for trial in range(trials):
            rng = rng_for(seed, n, trial)
            X = sample_ball(d, int(n), rng)
            rows.append((int(n), trial, _hull_deficit(X, d, mc_budget, rng), seed))
    if tolerance is None:
        tolerance = 0.05 if d == 1 else 0.08
    return RateReport.from_rows(rows, target=-2.0 / (d + 1), tolerance=tolerance)


# ---------------------------------------------------------------------------
# level-set reduction and binomial maxima
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityReport:
    """Monte-Carlo left and right sides of an inequality lhs <= rhs."""

    lhs: float
    rhs: float
    lhs_se: float = 0.0
    rhs_se: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.lhs <= self.rhs + 3.0 * np.hypot(self.lhs_se, self.rhs_se))

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "lhs_se": self.lhs_se, "rhs_se": self.rhs_se,
                "passed": self.passed, **self.details}


def _evaluate(h, X):
    if hasattr(h, "predict"):
        return np.asarray(h.predict(X), dtype=float)
    return np.asarray(h(X), dtype=float)


def levelset_rademacher_check(functions, density, Gamma, n, trials=100, seed=0, C=1.0, levels=64,
                              budget=100_000):
    """Compare the Rademacher average of a class with its level-set discrepancy.

    lhs = E max_h (1/n) sum_i eps_i h(X_i) over the supplied functions and
    rhs = Gamma * E sup_C |P_n(C) - P(C)| + C * Gamma / sqrt(n).  The sup is
    exact over intervals in 1-D and, for d >= 2, the larger of the hull
    statistic and the discrepancy over the sublevel sets {h <= s} at
    ``levels`` equally spaced thresholds in [0, Gamma].

    Returns
    -------
    InequalityReport
        ``details["levelset_integral"]`` records the mean of
        max_h sum_s (Gamma/levels) |P_n(h <= s) - P(h <= s)|.
    """
    functions = list(functions)
    thresholds = (np.arange(levels) + 0.5) * Gamma / levels
    ref = density.sample(budget, seed=rng_for(seed, 17))
    ref_vals = np.array([_evaluate(h, ref) for h in functions])
    ref_cdf = np.array([[np.mean(v <= s) for s in thresholds] for v in ref_vals])
    lhs, sup, integral = [], [], []
    for trial in range(trials):
        rng = rng_for(seed, n, trial)
        X = density.sample(n, seed=rng)
        eps = rng.choice([-1.0, 1.0], size=n)
        vals = np.array([_evaluate(h, X) for h in functions])
        lhs.append(float(np.max(vals @ eps) / n))
        emp_cdf = (vals[:, :, None] <= thresholds[None, None, :]).mean(axis=1)
        gaps = np.abs(emp_cdf - ref_cdf)
        integral.append(float(np.max(gaps.sum(axis=1)) * Gamma / levels))
        if density.d == 1:
            s = interval_discrepancy_1d(X, density).value
        else:
            s = max(convex_discrepancy(X, density, seed=rng_for(seed, n, trial, 1)).value, gaps.max())
        sup.append(s)
    lhs, sup = np.array(lhs), np.array(sup)
    rhs = Gamma * sup.mean() + C * Gamma / np.sqrt(n)
    return InequalityReport(
        lhs=float(lhs.mean()),
        rhs=float(rhs),
        lhs_se=float(lhs.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0,
        rhs_se=float(Gamma * sup.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0,
        details={"levelset_integral": float(np.mean(integral)), "sup_mean": float(sup.mean())},
    )


def binomial_max_bound_check(k, p, n, trials=10_000, seed=0, p_list=None, C=3.0, chunk=1_000_000):
    """E max_i |Y_i/n - p_i| for independent Y_i ~ Bin(n, p_i), p_i <= p.

    The comparison value is C * sqrt(p log k / n); the inequality is only
    claimed when log k <= n p / 3.

    Raises
    ------
    OutOfRegimeError
        If log k > n p / 3.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    p_list = np.full(k, p, dtype=float) if p_list is None else np.asarray(p_list, dtype=float)
    if p_list.shape != (k,) or np.any(p_list < 0) or np.any(p_list > p):
        raise ValueError("p_list must hold k probabilities, each at most p")
    if np.log(k) > n * p / 3:
        raise OutOfRegimeError(f"log k = {np.log(k):.3g} exceeds n p / 3 = {n * p / 3:.3g}")
    rng = rng_for(seed, k, n)
    maxima = []
    per = max(1, chunk // k)
    for start in range(0, trials, per):
        m = min(per, trials - start)
        Y = rng.binomial(n, p_list, size=(m, k))
        maxima.append(np.abs(Y / n - p_list).max(axis=1))
    maxima = np.concatenate(maxima)
    bound = C * np.sqrt(p * np.log(k) / n)
    se = float(maxima.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return InequalityReport(
        lhs=float(maxima.mean()), rhs=float(bound), lhs_se=se,
        details={"k": k, "p": p, "n": n, "trials": trials},
    )


# ---------------------------------------------------------------------------
# chaining bound
# ---------------------------------------------------------------------------


def chaining_bound(model, n, epsilon, epsilon0=1.0, C=2.0):
    """Bernstein-chaining bound on E sup_A |P_n(A) - P(A)|.

    Evaluates 2^-r + C sum_i sqrt(2^-i H(2^-i) / n) with 2^-r = epsilon and
    the ladder i = r, r - 1, ... running down while 2^-i < epsilon0.  When
    epsilon is a power of two this is the usual dyadic sum; otherwise the
    ladder is anchored at epsilon.

    Raises
    ------
    OutOfRegimeError
        If H(epsilon) > epsilon n / 3, where the sub-exponential part of the
        Bernstein tail would dominate.
    """
    if model.bracket_kind != "L1-bracketing":
        raise ValueError("chaining_bound needs an L1-bracketing entropy model")
    n = float(n)
    if not 0 < epsilon < epsilon0:
        raise ValueError("need 0 < epsilon < epsilon0")
    H = float(model(epsilon))
    if H > epsilon * n / 3:
        raise OutOfRegimeError(
            f"H(epsilon) = {H:.4g} exceeds epsilon n / 3 = {epsilon * n / 3:.4g}"
        )
    r = -np.log2(epsilon)
    top = -np.log2(epsilon0)
    steps = int(np.floor(r - top - 1e-12)) + 1
    i = r - np.arange(steps)
    i = i[i > top]
    scales = 2.0 ** (-i)
    total = np.sum(np.sqrt(scales * model(scales) / n))
    return float(epsilon + C * total)


def optimal_chaining_bound(model, n, epsilon0=1.0, C=2.0, grid=400):
    """Minimise :func:`chaining_bound` over epsilon in the valid regime.

    Returns
    -------
    epsilon, value : float
    """
    n = float(n)

    def valid(eps):
        return model(eps) <= eps * n / 3

    hi = np.log(epsilon0) - 1e-9
    lo = hi - 2 * np.log(max(n, 2.0)) - 5
    us = np.linspace(lo, hi, grid)
    values = np.array([
        chaining_bound(model, n, np.exp(u), epsilon0, C) if valid(np.exp(u)) else np.inf
        for u in us
    ])
    if not np.isfinite(values).any():
        raise OutOfRegimeError("no epsilon below epsilon0 satisfies H(epsilon) <= epsilon n / 3")
    k = int(np.argmin(values))
    a, b = us[max(k - 1, 0)], us[min(k + 1, grid - 1)]
    res = optimize.minimize_scalar(
        lambda u: chaining_bound(model, n, np.exp(u), epsilon0, C) if valid(np.exp(u)) else np.inf,
        bounds=(a, b), method="bounded", options={"xatol": 1e-10},
    )
    if res.fun <= values[k]:
        return float(np.exp(res.x)), float(res.fun)
    return float(np.exp(us[k])), float(values[k])


def shell_series(d, M, tol=1e-14, max_terms=100_000):
    """sum_{i >= 0} M_i^((d-1)/(d+1)) (i+1)^(d(d-1)/(d+1)).

    ``M`` is a callable i -> M_i (for instance ``TailEnvelope.M``).  Terms
    are summed until 50 consecutive ones fall below ``tol`` times the
    running sum.

    Returns
    -------
    value : float
    n_terms : int
    converged : bool
    """
    a = (d - 1) / (d + 1)
    b = d * (d - 1) / (d + 1)
    total, quiet = 0.0, 0
    for i in range(max_terms):
        term = float(M(i)) ** a * (i + 1) ** b
        total += term
        quiet = quiet + 1 if term <= tol * total else 0
        if quiet >= 50:
            return total, i + 1, True
    return total, max_terms, False


def shell_chaining_bound(d, n, M, C=1.0, **kwargs):
    """C * shell_series(d, M) * n^(-2/(d+1)); ``inf`` if the series does not settle."""
    value, _, converged = shell_series(d, M, **kwargs)
    if not converged:
        return np.inf
    return float(C * value * n ** (-2.0 / (d + 1)))


# ---------------------------------------------------------------------------
# fixed points
# ---------------------------------------------------------------------------

FIXED_POINT_KINDS = ("lecam", "donsker", "bracket13", "newfp")


def _balance(model, kind, n):
    """log(lhs) - log(rhs) as a function of u = log epsilon (decreasing)."""
    sqn = np.sqrt(n)
    if kind == "lecam":
        def g(u):
            H = float(model(np.exp(u)))
            return (np.log(H) if H > 0 else -np.inf) - np.log(n) - 2 * u
    elif kind == "donsker":
        if model.amplitude > 0 and model.exponent >= 2:
            raise NoRootError("the entropy integral from 0 diverges (exponent >= 2)")

        def g(u):
            I = model.sqrt_integral(0.0, np.exp(u))
            return (np.log(I) if I > 0 else -np.inf) - np.log(sqn) - 2 * u
    elif kind == "bracket13":
        def g(u):
            I = model.sqrt_integral(np.exp(u), 1.0)
            return (np.log(I) if I > 0 else -np.inf) - np.log(sqn) - u
    elif kind == "newfp":
        def g(u):
            I = model.sqrt_integral(np.exp(2 * u), 1.0, weight_power=1.0)
            return (np.log(I) if I > 0 else -np.inf) - np.log(sqn) - 2 * u
    else:
        raise ValueError(f"kind must be one of {FIXED_POINT_KINDS}")
    return g


def fixed_point(model, kind, n, xtol=1e-13):
    """Solve a rate balance equation for epsilon in (0, 1].

    kind:
      ``lecam``      H(eps) / n = eps^2
      ``donsker``    n^-1/2 int_0^eps sqrt(H) = eps^2
      ``bracket13``  n^-1/2 int_eps^1 sqrt(H) = eps
      ``newfp``      n^-1/2 int_{eps^2}^1 sqrt(H(delta)/delta) d delta = eps^2

    The left side minus the right side is monotone in log epsilon, so the
    root is bracketed and refined by Brent's method.

    Raises
    ------
    NoRootError
        If the balance has no solution in (0, 1].
    """
    g = _balance(model, kind, float(n))
    if g(0.0) > 0:
        raise NoRootError(f"{kind}: the complexity side still dominates at epsilon = 1")
    lo = -1.0
    while g(lo) < 0:
        lo *= 2
        if lo < -700:
            raise NoRootError(f"{kind}: no root above epsilon = 1e-300")
    u = optimize.brentq(g, lo, 0.0, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.exp(u))


def fixed_point_exponent(model, kind, n, factor=16.0):
    """Local exponent log(eps(factor n)/eps(n)) / log(factor) of the solution."""
    e1 = fixed_point(model, kind, n)
    e2 = fixed_point(model, kind, n * factor)
    return float(np.log(e2 / e1) / np.log(factor))


def fixed_point_rate(kind, p):
    """Asymptotic exponent a in eps ~ n^a for the power law H(delta) = A delta^-p.

    Boundary exponents where a logarithm appears (p = 2 for ``bracket13``,
    p = 1 for ``newfp``) return the power part only.
    """
    if kind in ("lecam", "donsker"):
        if kind == "donsker" and p >= 2:
            raise NoRootError("the entropy integral from 0 diverges (exponent >= 2)")
        return -1.0 / (2.0 + p)
    if kind == "bracket13":
        return -1.0 / p if p > 2 else -0.5
    if kind == "newfp":
        return -0.5 / (1.0 + p) if p > 1 else -0.25
    raise ValueError(f"kind must be one of {FIXED_POINT_KINDS}")

