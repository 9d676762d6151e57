"""Bounded convex least squares regression.

The fit solves the finite-dimensional quadratic program

    min_{g, xi}  sum_i (Y_i - g_i)^2
    s.t.         g_j >= g_i + xi_i . (X_j - X_i)   for all i, j
                 0 <= g_i <= Gamma

In one dimension the n^2 constraints collapse to slope monotonicity on the
sorted design and the problem is solved exactly by knot insertion over a
small dense active-set QP.  For d >= 2 the constraint set is grown by
cutting planes: start from nearest-neighbour pairs, solve with the
interior-point solver Clarabel, add the most violated pair for every row,
and repeat until no pair is violated by more than the tolerance.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import clarabel
from scipy import sparse
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_points

__all__ = ["ConvexFit", "convex_ls_fit", "convex_predict", "ConvexRegressor"]


@dataclass(frozen=True, eq=False)
class ConvexFit:
    """Solution of the bounded convex least squares problem.

    Attributes
    ----------
    X : ndarray of shape (n, d)
    g : ndarray of shape (n,)
        Fitted values, in [0, Gamma].
    xi : ndarray of shape (n, d)
        Subgradients at the design points.
    Gamma : float
    objective : float
        sum_i (Y_i - g_i)^2.
    kkt_residual : float
        Largest of the primal violation (over all n^2 pairs), dual residual
        and complementarity gap, relative to max(1, |Y|_inf).
    converged : bool
    """

    X: np.ndarray
    g: np.ndarray
    xi: np.ndarray
    Gamma: float
    objective: float
    kkt_residual: float
    converged: bool
    n_constraints: int = 0

    def max_violation(self, chunk=2048):
        """max_{i,j} g_i + xi_i.(X_j - X_i) - g_j over every pair."""
        return _max_pair_violation(self.X, self.g, self.xi, chunk)[0]

    def predict(self, x):
        return convex_predict(self, x)

    def to_dict(self):
        return {
            "X": self.X.tolist(),
            "g": self.g.tolist(),
            "xi": self.xi.tolist(),
            "Gamma": self.Gamma,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
        }


def convex_predict(fit, x, clip=True):
    """Evaluate max_i g_i + xi_i.(x - X_i), clipped to [0, Gamma]."""
    x = check_points(x, dim=fit.X.shape[1])
    intercepts = fit.g - np.einsum("ij,ij->i", fit.xi, fit.X)
    out = np.full(len(x), -np.inf)
    for start in range(0, len(x), 1024):
        block = x[start : start + 1024]
        out[start : start + 1024] = np.max(block @ fit.xi.T + intercepts, axis=1)
    return np.clip(out, 0.0, fit.Gamma) if clip else out


def _max_pair_violation(X, g, xi, chunk=2048):
    """Largest violation and, for every row i, the most violated partner j."""
    n = len(g)
    worst = np.full(n, -np.inf)
    arg = np.zeros(n, dtype=int)
    intercept = g - np.einsum("ij,ij->i", xi, X)
    for start in range(0, n, chunk):
        rows = slice(start, start + chunk)
        # V[i, j] = g_i + xi_i.(X_j - X_i) - g_j
        V = intercept[rows, None] + xi[rows] @ X.T - g[None, :]
        j = np.argmax(V, axis=1)
        arg[rows] = j
        worst[rows] = V[np.arange(V.shape[0]), j]
    return float(worst.max(initial=0.0)), worst, arg


def _active_set_qp(H, c, G, h, x0, tol=1e-12, max_iter=10_000):
    """Dense primal active-set method for min 1/2 x'Hx - c'x s.t. Gx >= h.

    ``x0`` must be feasible.  Returns the minimiser and the multiplier of
    every constraint (zero off the working set).
    """
    x = np.array(x0, dtype=float)
    n = len(x)
    scale = 1.0 + np.abs(c).max()
    work = []
    slack = G @ x - h
    for j in np.argsort(slack):
        if slack[j] > 1e-12 * (1.0 + abs(h[j])):
            break
        if np.linalg.matrix_rank(G[work + [j]]) == len(work) + 1:
            work.append(int(j))
    for _ in range(max_iter):
        Gw = G[work]
        k = len(work)
        K = np.zeros((n + k, n + k))
        K[:n, :n] = H
        K[:n, n:] = -Gw.T
        K[n:, :n] = Gw
        sol = np.linalg.solve(K, np.concatenate([c, h[work]]))
        target, lam = sol[:n], sol[n:]
        p = target - x
        if np.abs(p).max() <= 1e-13 * (1.0 + np.abs(target).max()):
            x = target
            if k == 0 or lam.min() >= -tol * scale:
                mult = np.zeros(len(h))
                mult[work] = lam
                return x, mult
            work.pop(int(np.argmin(lam)))
            continue
        Gp = G @ p
        slack = G @ x - h
        free = np.ones(len(h), dtype=bool)
        free[work] = False
        blocking = free & (Gp < -1e-13 * (1.0 + np.abs(x).max()) * np.abs(G).max(axis=1))
        ratios = np.full(len(h), np.inf)
        ratios[blocking] = np.maximum(slack[blocking], 0.0) / -Gp[blocking]
        alpha, add = 1.0, None
        for j in np.argsort(ratios):
            if ratios[j] >= 1.0:
                break
            # skip constraints implied by the working set
            if np.linalg.matrix_rank(np.vstack([Gw, G[j]])) == k + 1:
                alpha, add = ratios[j], int(j)
                break
        x = x + alpha * p
        if add is not None:
            work.append(add)
    raise RuntimeError("active-set iteration limit reached")


def _knot_system(x, y, w, knots, Gamma):
    """Quadratic model and constraints for a linear spline with given knots."""
    L = len(knots)
    xk = x[knots]
    seg = np.clip(np.searchsorted(xk, x, side="right") - 1, 0, L - 2)
    a = (xk[seg + 1] - x) / (xk[seg + 1] - xk[seg])
    H = np.zeros((L, L))
    c = np.zeros(L)
    np.add.at(H, (seg, seg), w * a * a)
    np.add.at(H, (seg, seg + 1), w * a * (1 - a))
    np.add.at(H, (seg + 1, seg), w * a * (1 - a))
    np.add.at(H, (seg + 1, seg + 1), w * (1 - a) ** 2)
    np.add.at(c, seg, w * a * y)
    np.add.at(c, seg + 1, w * (1 - a) * y)
    # rows: slope increase at interior knots (scaled), g >= 0 at knots,
    # g <= Gamma at the two ends (a convex g peaks there)
    dk = np.diff(xk)
    G = np.zeros((2 * L, L))
    h = np.zeros(G.shape[0])
    for s in range(1, L - 1):
        sc = dk[s - 1] * dk[s] / (dk[s - 1] + dk[s])
        G[s - 1, s - 1 : s + 2] = [sc / dk[s - 1], -sc * (1 / dk[s - 1] + 1 / dk[s]), sc / dk[s]]
    G[L - 2 : 2 * L - 2] = np.eye(L)
    G[2 * L - 2, 0] = -1.0
    G[2 * L - 1, L - 1] = -1.0
    h[2 * L - 2 :] = -Gamma
    return H, c, G, h, seg, a


def _fit_knots(x, y, w, Gamma, tol=1e-11, max_outer=10_000):
    """Exact 1-D bounded convex LS on sorted distinct design points.

    The fit is a linear spline whose knots are a subset of the design.  For
    a fixed knot set the problem is a small dense QP.  A design point j
    becomes a new knot when the multiplier of the convexity constraint at j,

        lam_j = sum_i rho_i (x_i - x_j)_+,   rho = w (g - y) - mu,

    is negative (mu collects the bound multipliers).  Non-negative lam_j at
    every design point certifies optimality for the full problem.
    """
    m = len(x)
    if m == 1:
        return np.clip(y, 0.0, Gamma), np.zeros(1), 0.0
    knots = np.array([0, m - 1])
    c0 = float(np.clip(np.average(y, weights=w), 0.0, Gamma))
    if not 0.0 < c0 < Gamma:
        c0 = 0.5 * Gamma
    theta = np.array([c0, c0])
    scale = max(1.0, np.abs(y).max()) * w.sum() * (x[-1] - x[0])
    for _ in range(max_outer):
        L = len(knots)
        H, c, G, h, seg, a = _knot_system(x, y, w, knots, Gamma)
        theta, mult = _active_set_qp(H, c, G, h, theta)
        g = theta[seg] * a + theta[seg + 1] * (1 - a)
        rho = w * (g - y)
        rho[knots] -= mult[L - 2 : 2 * L - 2]
        rho[0] += mult[2 * L - 2]
        rho[m - 1] += mult[2 * L - 1]
        tail0 = np.concatenate([np.cumsum(rho[::-1])[::-1][1:], [0.0]])
        tail1 = np.concatenate([np.cumsum((rho * x)[::-1])[::-1][1:], [0.0]])
        lam = tail1 - x * tail0
        lam[knots] = np.inf
        bad = lam < -tol * scale
        if not bad.any():
            lam[knots] = 0.0
            return g, lam, max(0.0, -lam.min()) / scale
        # the most negative candidate inside every offending segment
        new = [
            idx[np.argmin(lam[idx])]
            for s in np.unique(seg[bad])
            for idx in [np.flatnonzero(bad & (seg == s))]
        ]
        knots = np.sort(np.concatenate([knots, new]))
        theta = g[knots]
    raise RuntimeError("knot insertion did not terminate")


def _fit_1d(X, Y, Gamma, tol):
    x = X[:, 0]
    ux, inv, counts = np.unique(x, return_inverse=True, return_counts=True)
    ybar = np.bincount(inv, weights=Y) / counts
    gm, _, dual_gap = _fit_knots(ux, ybar, counts.astype(float), Gamma)
    m = len(ux)
    if m == 1:
        knot_xi = np.zeros(1)
    else:
        slopes = np.diff(gm) / np.diff(ux)
        # right slope at each design point; the last point reuses the final slope
        knot_xi = np.concatenate([slopes, slopes[-1:]])
    g = gm[inv]
    xi = knot_xi[inv][:, None]
    return g, xi, dual_gap, max(m - 2, 0)


def _pair_matrix(X, pairs, n, d):
    """Rows g_j - g_i - xi_i.(X_j - X_i) for each (i, j) in ``pairs``."""
    i, j = pairs[:, 0], pairs[:, 1]
    k = len(pairs)
    diff = X[j] - X[i]
    r = np.arange(k)
    rows = np.concatenate([r, r, np.repeat(r, d)])
    cols = np.concatenate([j, i, (n + i[:, None] * d + np.arange(d)).ravel()])
    vals = np.concatenate([np.ones(k), -np.ones(k), -diff.ravel()])
    return sparse.csc_matrix((vals, (rows, cols)), shape=(k, n + n * d))


def _clarabel_qp(P, q, A, b, tol):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = 500
    cones = [clarabel.NonnegativeConeT(A.shape[0])]
    sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    return np.array(sol.x), np.array(sol.z)


def _fit_nd(X, Y, Gamma, tol, neighbors, max_rounds):
    n, d = X.shape
    P = sparse.diags(np.concatenate([np.ones(n), np.zeros(n * d)])).tocsc()
    q = np.concatenate([-Y, np.zeros(n * d)])
    box = sparse.hstack([sparse.eye(n), sparse.csc_matrix((n, n * d))]).tocsc()
    k = min(n - 1, neighbors)
    _, nbr = cKDTree(X).query(X, k=k + 1)
    pairs = np.column_stack([np.repeat(np.arange(n), k), nbr[:, 1:].ravel()])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    seen = set(map(tuple, pairs.tolist()))
    converged = False
    for _ in range(max_rounds):
        # Clarabel form: A z + s = b with s >= 0
        A = sparse.vstack([-_pair_matrix(X, pairs, n, d), -box, box]).tocsc()
        b = np.concatenate([np.zeros(len(pairs)), np.zeros(n), np.full(n, Gamma)])
        z, dual = _clarabel_qp(P, q, A, b, 0.01 * tol)
        g, xi = z[:n], z[n:].reshape(n, d)
        viol, row_worst, row_arg = _max_pair_violation(X, g, xi)
        if viol <= tol:
            converged = True
            break
        rows = np.flatnonzero(row_worst > tol)
        new = [(int(i), int(j)) for i, j in zip(rows, row_arg[rows]) if (i, j) not in seen]
        if not new:
            break
        seen.update(new)
        pairs = np.vstack([pairs, np.array(new)])
    slack = b - A @ z
    stationarity = np.abs(P @ z + q + A.T @ dual).max()
    complementarity = np.abs(slack * dual).max()
    kkt = max(viol, stationarity, complementarity, max(0.0, -slack.min()))
    return g, xi, kkt, len(pairs), converged


def convex_ls_fit(X, Y, Gamma=1.0, tol=1e-8, neighbors=10, max_rounds=100):
    """Least squares over convex functions with values in [0, Gamma].

    Parameters
    ----------
    X : array-like of shape (n, d) or (n,)
    Y : array-like of shape (n,)
    Gamma : float
        Upper bound on the fitted function.
    tol : float
        Target for the KKT residual (relative to max(1, |Y|_inf)).

    Returns
    -------
    ConvexFit
        ``converged`` is False when the solver stops before ``tol`` is met;
        the best iterate is still returned.
    """
    X = check_points(X)
    Y = np.asarray(Y, dtype=float).ravel()
    if len(Y) != len(X):
        raise ValueError(f"X has {len(X)} rows but Y has {len(Y)} entries")
    if not Gamma > 0:
        raise ValueError("Gamma must be positive")
    n, d = X.shape
    scale = max(1.0, float(np.abs(Y).max()))
    if d == 1:
        g, xi, kkt, ncons = _fit_1d(X, Y, Gamma, tol)
        converged = True
    else:
        g, xi, kkt, ncons, converged = _fit_nd(X, Y, Gamma, tol, neighbors, max_rounds)
    g = np.clip(g, 0.0, Gamma)
    kkt = kkt / scale
    converged = converged and kkt <= max(tol, 1e-6)
    if not converged:
        warnings.warn(f"convex LS stopped with KKT residual {kkt:.2e}", RuntimeWarning)
    return ConvexFit(
        X=X,
        g=g,
        xi=xi,
        Gamma=float(Gamma),
        objective=float(np.sum((Y - g) ** 2)),
        kkt_residual=float(kkt),
        converged=bool(converged),
        n_constraints=int(ncons),
    )


class ConvexRegressor(RegressorMixin, BaseEstimator):
    """Bounded convex least squares regressor.

    Parameters
    ----------
    Gamma : float, default=1.0
        Range bound: fitted functions take values in [0, Gamma].
    tol : float, default=1e-8
        KKT tolerance handed to :func:`convex_ls_fit`.
    neighbors : int, default=10
        Initial nearest-neighbour pairs per point (d >= 2).

    Attributes
    ----------
    fit_ : ConvexFit
    n_features_in_ : int
    """

    def __init__(self, Gamma=1.0, tol=1e-8, neighbors=10):
        self.Gamma = Gamma
        self.tol = tol
        self.neighbors = neighbors

    def fit(self, X, y):
        X = check_points(X)
        self.fit_ = convex_ls_fit(X, y, Gamma=self.Gamma, tol=self.tol, neighbors=self.neighbors)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return convex_predict(self.fit_, X)
