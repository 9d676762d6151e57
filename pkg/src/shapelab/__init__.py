"""Shape-constrained estimation: rates, lower bounds and empirical processes."""

__version__ = "0.1.0"
