"""Assouad hypercube lower bounds and the two explicit hypercube families.

Cap families (uniform laws on a ball with caps shaved off) give the
squared-Hellinger lower bound of order n^(-2/(d+1)); bump families
(Gaussians with log-quadratic bumps) give the total-variation lower bound of
order n^(-2/(d+4)).  Families of size 2^K are never materialised: a family
object builds the density for one bit vector on request.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import rng_for
from .densities import (
    BumpFamilyDensity,
    CapFamilyDensity,
    hellinger_sq,
    make_bump_family,
    total_variation,
)
from .exceptions import ConstructionError, DomainError, InfeasiblePackingError
from .geometry import cap_height_for_count, cap_packing
from .reports import fit_line

__all__ = [
    "AssouadInstance",
    "assouad_bound",
    "CapFamily",
    "BumpFamily",
    "build_cap_instance",
    "build_bump_instance",
    "FamilyVerification",
    "verify_family",
    "minimax_lb_report",
]


@dataclass(frozen=True)
class AssouadInstance:
    """Hypercube of 2^K laws.

    Every Hamming-neighbour pair is at loss distance at least ``eta`` per
    differing coordinate, and at squared Hellinger distance at most
    ``c / n`` (so the n-fold products stay indistinguishable).
    """

    K: int
    eta: float
    c: float

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not 0 < self.c < 1:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")


def assouad_bound(inst):
    """(K / 8) * (1 - sqrt(c)) * eta."""
    return inst.K / 8.0 * (1.0 - np.sqrt(inst.c)) * inst.eta


class _Family:
    """Lazily materialised hypercube family."""

    def __len__(self):
        return self.K

    def __getitem__(self, alpha):
        alpha = tuple(int(a) for a in np.asarray(alpha).ravel())
        if len(alpha) != self.K:
            raise ValueError(f"alpha must have length {self.K}")
        if alpha not in self._cache:
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[alpha] = self._build(np.array(alpha))
        return self._cache[alpha]

    def random_alpha(self, rng):
        return rng.integers(0, 2, size=self.K)


class CapFamily(_Family):
    """Cap densities indexed by 0/1 vectors over the kept caps of a packing."""

    kind = "cap"

    def __init__(self, packing, mc_budget=1_000_000, seed=0):
        self.packing = packing
        self.K = packing.k_kept
        self.mc_budget = mc_budget
        self.seed = seed
        self._cache = {}

    def _build(self, alpha):
        return CapFamilyDensity(self.packing.centers, self.packing.t, alpha, self.mc_budget, self.seed)


class BumpFamily(_Family):
    """Bump densities indexed by 0/1 vectors over antipodal pairs."""

    kind = "bump"

    def __init__(self, d, delta, seed=0, C=1.0):
        self.d = d
        self.delta = float(delta)
        base = make_bump_family(d, delta, seed=seed, C=C)
        self.centers = base.centers
        self.K = len(base.centers)
        self._cache = {tuple([1] * self.K): base}

    def _build(self, alpha):
        return BumpFamilyDensity(self.centers, self.delta, alpha)


def _one_bit_pairs(K, count, rng):
    """Hamming-1 pairs: every coordinate when K <= count, else a random subset."""
    coords = np.arange(K) if K <= count else np.sort(rng.choice(K, size=count, replace=False))
    base = rng.integers(0, 2, size=K)
    pairs = []
    for i in coords:
        other = base.copy()
        other[i] ^= 1
        pairs.append((base, other))
    return pairs


def _far_pairs(K, count, rng):
    return [(rng.integers(0, 2, size=K), rng.integers(0, 2, size=K)) for _ in range(count)]


@dataclass(frozen=True)
class FamilyVerification:
    """Measured distances for pairs of family members.

    ``predicted`` is the additive prediction ||alpha - beta||_0 times the
    mean one-bit value of the same metric; ``max_relative_deviation``
    compares it with the measured Hellinger values.
    """

    family: str
    hamming: tuple
    h2: tuple
    tv: tuple
    h2_stderr: tuple
    tv_stderr: tuple
    predicted_h2: tuple
    max_relative_deviation: float
    extra: dict = field(default_factory=dict)

    def one_bit(self, metric="h2"):
        values = np.array(getattr(self, metric))
        return values[np.array(self.hamming) == 1]

    def to_dict(self):
        return {
            "family": self.family,
            "hamming": list(self.hamming),
            "h2": list(self.h2),
            "tv": list(self.tv),
            "h2_stderr": list(self.h2_stderr),
            "tv_stderr": list(self.tv_stderr),
            "predicted_h2": list(self.predicted_h2),
            "max_relative_deviation": self.max_relative_deviation,
            **self.extra,
        }


def verify_family(family, n_pairs=10, seed=0, metrics=("h2", "tv")):
    """Distances for Hamming-1 pairs and random far pairs of a family.

    Every coordinate is flipped once when K <= ``n_pairs`` and otherwise a
    random subset of ``n_pairs`` coordinates; ``n_pairs`` random far pairs
    are added.
    """
    rng = rng_for(seed, 23)
    pairs = _one_bit_pairs(family.K, n_pairs, rng) + _far_pairs(family.K, n_pairs, rng)
    ham, h2, tv, h2se, tvse = [], [], [], [], []
    for a, b in pairs:
        p, q = family[a], family[b]
        ham.append(int(np.sum(a != b)))
        if "h2" in metrics:
            e = hellinger_sq(p, q)
            h2.append(float(e.value))
            h2se.append(float(e.stderr))
        if "tv" in metrics:
            e = total_variation(p, q)
            tv.append(float(e.value))
            tvse.append(float(e.stderr))
    ham = np.array(ham)
    predicted = np.zeros(len(ham))
    dev = 0.0
    if h2:
        one = np.mean(np.array(h2)[ham == 1])
        predicted = ham * one
        mask = ham > 0
        if mask.any():
            dev = float(np.max(np.abs(np.array(h2)[mask] - predicted[mask]) / predicted[mask]))
    return FamilyVerification(
        family=family.kind,
        hamming=tuple(int(h) for h in ham),
        h2=tuple(h2),
        tv=tuple(tv),
        h2_stderr=tuple(h2se),
        tv_stderr=tuple(tvse),
        predicted_h2=tuple(float(p) for p in predicted),
        max_relative_deviation=dev,
    )


def _one_bit_extremes(family, n, metric, n_pairs, seed):
    rng = rng_for(seed, 29)
    values, h2 = [], []
    for a, b in _one_bit_pairs(family.K, n_pairs, rng):
        p, q = family[a], family[b]
        h = float(hellinger_sq(p, q))
        h2.append(h)
        values.append(h if metric == "h2" else float(total_variation(p, q)))
    return min(values), n * max(h2)


def _min_cap_count(d):
    """Smallest N for which the cap threshold t_{d,N} exists."""
    N = 2
    while True:
        try:
            cap_height_for_count(d, N)
            return N
        except InfeasiblePackingError:
            N += 1


def build_cap_instance(d, n, seed=0, c1=2.0, n_pairs=10, mc_budget=100_000):
    """Cap family with N = ceil(c1 n^((d-1)/(d+1))) drawn caps.

    N is raised to the smallest count with a valid cap threshold, so tiny n
    still gives a (small) family.

    eta is the smallest one-bit squared Hellinger distance and c is n times
    the largest, over every coordinate when K <= ``n_pairs`` (otherwise a
    random subset of that size).

    Returns
    -------
    family : CapFamily
    instance : AssouadInstance
    """
    if d < 2:
        raise DomainError("cap families need d >= 2")
    N = max(int(np.ceil(c1 * n ** ((d - 1) / (d + 1)))), _min_cap_count(d))
    try:
        packing = cap_packing(d, N, seed=seed, mc_budget=mc_budget)
    except InfeasiblePackingError as exc:
        raise ConstructionError(f"cap packing with N = {N} failed: {exc}") from exc
    family = CapFamily(packing, mc_budget=mc_budget, seed=seed)
    eta, c = _one_bit_extremes(family, n, "h2", n_pairs, seed)
    try:
        inst = AssouadInstance(K=family.K, eta=eta, c=c)
    except ValueError as exc:
        raise ConstructionError(f"cap instance at n = {n}: {exc}; increase c1") from exc
    return family, inst


def bump_delta(d, n, c5=0.25):
    return c5 * np.sqrt(d) * n ** (-1.0 / (d + 4))


def build_bump_instance(d, n, seed=0, c5=0.25, C=1.0, n_pairs=10):
    """Bump family with delta = c5 sqrt(d) n^(-1/(d+4)).

    eta is the smallest one-bit total variation and c is n times the largest
    one-bit squared Hellinger distance.

    Returns
    -------
    family : BumpFamily
    instance : AssouadInstance
    delta : float

    Raises
    ------
    ConstructionError
        If delta >= exp(-C d); the message names the smallest valid n.
    """
    delta = bump_delta(d, n, c5)
    limit = np.exp(-C * d)
    if delta >= limit:
        n_min = int(np.ceil((c5 * np.sqrt(d) / limit) ** (d + 4)))
        raise ConstructionError(
            f"delta = {delta:.4g} is not below exp(-{C}*{d}) = {limit:.4g}; need n >= {n_min}"
        )
    family = BumpFamily(d, delta, seed=seed, C=C)
    eta, c = _one_bit_extremes(family, n, "tv", n_pairs, seed)
    try:
        inst = AssouadInstance(K=family.K, eta=eta, c=c)
    except ValueError as exc:
        raise ConstructionError(f"bump instance at n = {n}: {exc}; decrease c5") from exc
    return family, inst, delta


def minimax_lb_report(d, n_grid, seeds=(0,), caps=True, bumps=True, c1=2.0, c5=0.25, tolerance=0.05):
    """Numeric Assouad lower bounds across ``n_grid`` and their fitted exponents.

    Returns a dict with per-n rows and, for each family, the fitted slope of
    log bound against log n, the target exponent (-2/(d+1) for caps in
    squared Hellinger, -2/(d+4) for bumps in total variation) and a pass flag.
    """
    out = {"d": d, "n_grid": [int(n) for n in n_grid]}
    specs = []
    if caps and d >= 2:
        specs.append(("hellinger_lb", -2.0 / (d + 1), lambda n, s: build_cap_instance(d, n, s, c1)[1]))
    if bumps:
        specs.append(("tv_lb", -2.0 / (d + 4), lambda n, s: build_bump_instance(d, n, s, c5)[1]))
    for name, target, build in specs:
        rows = []
        for n in n_grid:
            for k, s in enumerate(seeds):
                inst = build(n, s)
                rows.append((int(n), k, float(assouad_bound(inst)), int(s), inst.K, inst.eta, inst.c))
        slope, intercept, stderr = fit_line([r[:4] for r in rows])
        out[name] = {
            "rows": [
                {"n": r[0], "seed": r[3], "bound": r[2], "K": r[4], "eta": r[5], "c": r[6]} for r in rows
            ],
            "slope": slope,
            "intercept": intercept,
            "stderr": stderr,
            "target": target,
            "pass": bool(abs(slope - target) <= tolerance),
        }
    return out
