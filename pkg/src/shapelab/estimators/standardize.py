"""Sample splitting standardization.

The first third of the sample estimates the covariance, the second third
the mean of the whitened data, and the last third is returned whitened and
centred.  Because the last third is untouched by the estimation, it stays an
i.i.d. sample of an (approximately isotropic) affine image of the original
law, and total variation is invariant under the affine map.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_points
from ..exceptions import RankDeficiencyError

__all__ = ["AffineMap", "fit_affine_map", "standardize", "SplitStandardizer"]


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> A x + b with A invertible."""

    A: np.ndarray
    b: np.ndarray

    def __call__(self, x):
        return check_points(x, dim=len(self.b)) @ self.A.T + self.b

    def inverse(self, y):
        y = check_points(y, dim=len(self.b))
        return np.linalg.solve(self.A, (y - self.b).T).T

    def to_dict(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}


def _whitening(X):
    d = X.shape[1]
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    vals, vecs = np.linalg.eigh(cov)
    rank = int(np.sum(vals > vals.max(initial=0.0) * d * np.finfo(float).eps * 10))
    if rank < d or len(X) <= d:
        raise RankDeficiencyError(min(rank, len(X) - 1), d)
    return (vecs / np.sqrt(vals)) @ vecs.T


def _split(X):
    m = len(X) // 3
    if m == 0:
        raise ValueError("need at least 3 samples to split in thirds")
    return X[:m], X[m : 2 * m], X[2 * m : 3 * m], m


def fit_affine_map(X):
    X = check_points(X)
    first, second, _, _ = _split(X)
    W = _whitening(first)
    mu = (second @ W.T).mean(axis=0)
    return AffineMap(A=W, b=-mu)


def standardize(X):
    """Standardize the last third of ``X`` with statistics from the first two.

    Parameters
    ----------
    X : array-like of shape (n, d)
        Rows beyond the largest multiple of three are dropped.

    Returns
    -------
    T : AffineMap
        The map Sigma^{-1/2} x - mu, with Sigma from the first third and mu
        the mean of the whitened second third.
    Z : ndarray of shape (n // 3, d)
        ``T`` applied to the last third.

    Raises
    ------
    RankDeficiencyError
        If the first third has a singular empirical covariance.
    """
    X = check_points(X)
    T = fit_affine_map(X)
    return T, T(_split(X)[2])


class SplitStandardizer(TransformerMixin, BaseEstimator):
    """Transformer wrapper: ``fit`` learns the map from the first two thirds.

    Attributes
    ----------
    map_ : AffineMap
    holdout_ : slice
        Rows of the training data that played no part in fitting.
    """

    def fit(self, X, y=None):
        X = check_points(X)
        self.map_ = fit_affine_map(X)
        m = len(X) // 3
        self.holdout_ = slice(2 * m, 3 * m)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "map_")
        return self.map_(X)

    def inverse_transform(self, X):
        check_is_fitted(self, "map_")
        return self.map_.inverse(X)
