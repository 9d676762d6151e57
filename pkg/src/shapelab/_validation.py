"""Input validation and seeding helpers shared by every module."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import InvalidDimensionError


def check_points(X, dim=None, min_samples=1, name="X"):
    """Return ``X`` as a float64 array of shape (n, d).

    1-D input is read as n scalar points (d = 1).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, ensure_min_samples=min_samples, input_name=name)
    if dim is not None and X.shape[1] != dim:
        raise InvalidDimensionError(
            f"{name} has {X.shape[1]} columns, expected dimension {dim}"
        )
    return X


def check_dimension(d, minimum=1):
    if not isinstance(d, numbers.Integral) or d < minimum:
        raise InvalidDimensionError(f"dimension must be an integer >= {minimum}, got {d!r}")
    return int(d)


def check_seed(seed):
    if seed is None:
        return None
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def rng_for(seed, *keys):
    """Deterministic generator for ``(seed, *keys)``.

    Independent tasks pass distinct keys (task index, n-cell, trial) so that
    streams never overlap and results do not depend on scheduling order.
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            child = seed.bit_generator.seed_seq.spawn(1)[0]
            return np.random.default_rng(child)
        return seed
    entropy = [0 if seed is None else int(seed)] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def as_unit_vector(x, atol=1e-12):
    x = np.asarray(x, dtype=float).ravel()
    norm = np.linalg.norm(x)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"expected a unit vector, got norm {norm!r}")
    return x
