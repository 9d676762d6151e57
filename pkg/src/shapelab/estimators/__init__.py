"""Estimators with a scikit-learn style interface."""

from .convex_regression import ConvexFit, ConvexRegressor, convex_ls_fit, convex_predict
from .logconcave import MLE1D, LogConcaveMLE1D, logconcave_mle_1d
from .standardize import AffineMap, SplitStandardizer, fit_affine_map, standardize
from .tournament import (
    TournamentEstimator,
    TournamentNet,
    WitnessSet,
    tournament_estimate,
    tournament_scores,
)

__all__ = [
    "ConvexFit",
    "ConvexRegressor",
    "convex_ls_fit",
    "convex_predict",
    "MLE1D",
    "LogConcaveMLE1D",
    "logconcave_mle_1d",
    "AffineMap",
    "SplitStandardizer",
    "fit_affine_map",
    "standardize",
    "TournamentEstimator",
    "TournamentNet",
    "WitnessSet",
    "tournament_estimate",
    "tournament_scores",
]
