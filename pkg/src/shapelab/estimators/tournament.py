"""Minimum-distance selection over a finite net of candidate densities.

For candidates f_1..f_m the witness sets are the Scheffe sets
A_ij = {f_i > f_j}.  Each A_ij realises the total variation between f_i
and f_j as a probability gap.  The estimate is the candidate whose
probabilities are closest to the empirical ones uniformly over all witness
sets.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_points, rng_for

__all__ = ["WitnessSet", "TournamentNet", "tournament_scores", "tournament_estimate", "TournamentEstimator"]


@dataclass(frozen=True)
class WitnessSet:
    """The set {f_i > f_j}.

    In one dimension ``intervals`` lists its connected components; in higher
    dimensions membership is evaluated pointwise.
    """

    i: int
    j: int
    intervals: tuple = ()

    def contains(self, net, x):
        x = check_points(x, dim=net.d)
        return net.candidates[self.i].logpdf(x) > net.candidates[self.j].logpdf(x)


def _scheffe_intervals(p, q, grid_size):
    """Components of {p > q} on the real line, endpoints refined by root finding."""
    R = max(p.support_radius, q.support_radius)
    grid = np.unique(np.concatenate([
        np.linspace(-R, R, grid_size),
        np.clip(p.breakpoints(), -R, R),
        np.clip(q.breakpoints(), -R, R),
    ]))

    def gap(s):
        pv, qv = p.pdf(np.array([[s]]))[0], q.pdf(np.array([[s]]))[0]
        return pv - qv

    diff = p.pdf(grid[:, None]) - q.pdf(grid[:, None])
    inside = diff > 0
    edges = []
    for k in np.flatnonzero(inside[1:] != inside[:-1]):
        a, b = grid[k], grid[k + 1]
        ga, gb = gap(a), gap(b)
        # jumps (e.g. at a support edge) have no root; keep the grid point
        root = brentq(gap, a, b, xtol=1e-14) if ga * gb < 0 and np.isfinite(ga * gb) else b
        edges.append(float(root))
    bounds = ([-np.inf] if inside[0] else []) + edges + ([np.inf] if inside[-1] else [])
    bounds = [float(v) for v in bounds]
    return tuple(zip(bounds[0::2], bounds[1::2]))


@dataclass(frozen=True, eq=False)
class TournamentNet:
    """Candidates, their Scheffe witness sets and the candidate probabilities.

    Parameters
    ----------
    candidates : sequence of Density
    epsilon : float, optional
        Separation of the net, recorded for reporting.
    mc_budget : int
        Samples per candidate used to estimate witness probabilities when
        d >= 2.
    seed : int
    grid_size : int
        Initial grid for locating crossings in one dimension.

    Attributes
    ----------
    witnesses : list of WitnessSet
        One per unordered pair i < j.
    probs : ndarray of shape (m, len(witnesses))
        ``probs[k, a]`` is P_{f_k}(witnesses[a]).
    """

    candidates: tuple
    epsilon: float = None
    mc_budget: int = 200_000
    seed: int = 0
    grid_size: int = 4097
    witnesses: list = field(init=False)
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise ValueError("the net needs at least one candidate")
        if len({c.d for c in cands}) != 1:
            raise ValueError("candidates must share a dimension")
        object.__setattr__(self, "candidates", cands)
        m = len(cands)
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        if self.d == 1:
            witnesses = [
                WitnessSet(i, j, _scheffe_intervals(cands[i], cands[j], self.grid_size))
                for i, j in pairs
            ]
            probs = np.array([[_interval_mass(c, w.intervals) for w in witnesses] for c in cands])
        else:
            witnesses = [WitnessSet(i, j) for i, j in pairs]
            probs = np.empty((m, len(witnesses)))
            for k, c in enumerate(cands):
                x = c.sample(self.mc_budget, seed=rng_for(self.seed, k))
                probs[k] = [w.contains(self, x).mean() for w in witnesses]
        object.__setattr__(self, "witnesses", witnesses)
        object.__setattr__(self, "probs", probs.reshape(m, len(witnesses)))

    @property
    def d(self):
        return self.candidates[0].d

    def __len__(self):
        return len(self.candidates)

    def witness_gaps(self):
        """|P_{f_i}(A_ij) - P_{f_j}(A_ij)| for every witness, in witness order."""
        return np.array([abs(self.probs[w.i, a] - self.probs[w.j, a]) for a, w in enumerate(self.witnesses)])

    def empirical(self, samples):
        """Empirical probability of every witness set."""
        x = check_points(samples, dim=self.d)
        if self.d == 1:
            s = x[:, 0]
            return np.array([
                sum(np.count_nonzero((s > a) & (s < b)) for a, b in w.intervals) / len(s)
                for w in self.witnesses
            ])
        return np.array([w.contains(self, x).mean() for w in self.witnesses])


def _interval_mass(density, intervals):
    total = 0.0
    for a, b in intervals:
        lo = 0.0 if a == -np.inf else density.cdf(np.array([a]))[0]
        hi = 1.0 if b == np.inf else density.cdf(np.array([b]))[0]
        total += hi - lo
    return float(total)


def tournament_scores(samples, net):
    """max over witness sets of |P_n(A) - P_k(A)|, one score per candidate."""
    if not net.witnesses:
        return np.zeros(len(net))
    emp = net.empirical(samples)
    return np.abs(net.probs - emp[None, :]).max(axis=1)


def tournament_estimate(samples, net):
    """Index of the candidate with the smallest score; ties go to the smallest index."""
    return int(np.argmin(tournament_scores(samples, net)))


class TournamentEstimator(DensityMixin, BaseEstimator):
    """Select a density from a fixed candidate list.

    Parameters
    ----------
    candidates : sequence of Density
    mc_budget : int, default=200_000
    seed : int, default=0

    Attributes
    ----------
    net_ : TournamentNet
    scores_ : ndarray
    selected_index_ : int
    density_ : Density
    """

    def __init__(self, candidates=(), mc_budget=200_000, seed=0):
        self.candidates = candidates
        self.mc_budget = mc_budget
        self.seed = seed

    def fit(self, X, y=None):
        self.net_ = TournamentNet(tuple(self.candidates), mc_budget=self.mc_budget, seed=self.seed)
        X = check_points(X, dim=self.net_.d)
        self.scores_ = tournament_scores(X, self.net_)
        self.selected_index_ = int(np.argmin(self.scores_))
        self.density_ = self.net_.candidates[self.selected_index_]
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        check_is_fitted(self, "density_")
        return self.density_.logpdf(X)
