"""Computational geometry on balls, caps, hulls and packings.

Exact formulas are used wherever they exist (ball and cap volumes, hull
volumes for d <= 3, planar cap unions); Monte-Carlo oracles take over in
higher dimension and always take an explicit seed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.spatial import ConvexHull
from scipy.special import gammaln

from ._validation import as_unit_vector, check_dimension, check_points, rng_for
from .exceptions import (
    DomainError,
    FlatHullError,
    InfeasiblePackingError,
    InvalidDimensionError,
    OracleError,
)

__all__ = [
    "ball_volume",
    "sphere_area",
    "cap_volume",
    "cap_height_for_count",
    "Cap",
    "ConvexBody",
    "convex_hull",
    "sample_ball",
    "sample_sphere",
    "sample_cap",
    "IntervalFamily",
    "PlanarCapFamily",
    "MonteCarloCapFamily",
    "greedy_disjointify",
    "disjointify_guarantees",
    "CapPacking",
    "cap_packing",
    "AntipodalPacking",
    "antipodal_ball_packing",
]


# ---------------------------------------------------------------------------
# balls and caps
# ---------------------------------------------------------------------------


def ball_volume(d, r=1.0):
    """Volume of the radius-``r`` Euclidean ball in R^d (log-gamma form)."""
    d = check_dimension(d)
    if r < 0:
        raise DomainError(f"radius must be non-negative, got {r}")
    if r == 0:
        return 0.0
    return float(np.exp(0.5 * d * np.log(np.pi) + d * np.log(r) - gammaln(0.5 * d + 1)))


def sphere_area(d):
    """Surface area of the unit sphere, vol(dB_d) = d vol(B_d)."""
    return d * ball_volume(d)


def _unit_ball_volume_or_one(d):
    # vol(B_0) = 1 by convention so that d = 1 caps are intervals.
    return 1.0 if d == 0 else ball_volume(d)


def cap_volume(d, t, method="exact"):
    """Volume of the cap {x in B_d : <x0, x> >= t}.

    ``method="exact"`` integrates the slice volumes vol(B_{d-1})(1-s^2)^{(d-1)/2}
    over s in [t, 1]; ``method="asymptotic"`` returns the leading-order
    approximation vol(B_{d-1}) (1-t^2)^{(d+1)/2} / (t (d-1)).
    """
    d = check_dimension(d)
    if not 0.0 < t < 1.0:
        raise DomainError(f"cap threshold t must lie in (0, 1), got {t}")
    if method == "exact":
        a = 0.5 * (d - 1)
        value, _ = integrate.quad(
            lambda s: (1.0 - s * s) ** a, t, 1.0, epsabs=0.0, epsrel=1e-13, limit=200
        )
        return _unit_ball_volume_or_one(d - 1) * value
    if method == "asymptotic":
        if d < 2:
            raise InvalidDimensionError("asymptotic cap volume needs d >= 2")
        return ball_volume(d - 1) * (1.0 - t * t) ** (0.5 * (d + 1)) / (t * (d - 1))
    raise ValueError(f"unknown method {method!r}")


def cap_height_for_count(d, N):
    """Threshold t_{d,N} at which N caps have total 'area' matching the sphere.

    t = sqrt(1 - (vol(dB_d) / (N vol(B_{d-1})))^{2/(d-1)}); raises when the
    expression leaves (0, 1), which happens for too few caps.
    """
    d = check_dimension(d, minimum=2)
    ratio = sphere_area(d) / (N * ball_volume(d - 1))
    inner = 1.0 - ratio ** (2.0 / (d - 1))
    if not 0.0 < inner < 1.0:
        raise InfeasiblePackingError(
            f"N={N} caps cannot realise t_(d,N) in (0,1) for d={d}"
        )
    return float(np.sqrt(inner))


@dataclass(frozen=True)
class Cap:
    """The cap {x in B_d : <center, x> >= t} of the unit ball."""

    center: np.ndarray
    t: float

    def __post_init__(self):
        center = as_unit_vector(self.center)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not 0.0 < self.t < 1.0:
            raise DomainError(f"cap threshold t must lie in (0, 1), got {self.t}")

    @property
    def dimension(self):
        return self.center.shape[0]

    def volume(self, method="exact"):
        return cap_volume(self.dimension, self.t, method=method)

    def contains(self, points):
        points = np.atleast_2d(points)
        inside_ball = np.einsum("ij,ij->i", points, points) <= 1.0 + 1e-15
        return inside_ball & (points @ self.center >= self.t)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_sphere(d, n, rng):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sample_ball(d, n, rng, radius=1.0, center=None):
    u = sample_sphere(d, n, rng)
    r = radius * rng.random(n) ** (1.0 / d)
    out = u * r[:, None]
    if center is not None:
        out += np.asarray(center, dtype=float)
    return out


def _orthonormal_complement(v):
    d = v.shape[0]
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(d)]))
    return q[:, 1:d]


def sample_cap(center, t, n, rng):
    """Uniform points in the cap {x in B_d : <center, x> >= t}."""
    center = np.asarray(center, dtype=float)
    d = center.shape[0]
    if d == 1:
        s = t + (1.0 - t) * rng.random(n)
        return (s * center[0])[:, None]
    a = 0.5 * (d - 1)
    ceiling = (1.0 - t * t) ** a
    heights = np.empty(0)
    while heights.size < n:
        s = t + (1.0 - t) * rng.random(2 * (n - heights.size) + 16)
        keep = rng.random(s.size) * ceiling <= (1.0 - s * s) ** a
        heights = np.concatenate([heights, s[keep]])
    heights = heights[:n]
    basis = _orthonormal_complement(center)
    radial = np.sqrt(1.0 - heights**2) * rng.random(n) ** (1.0 / (d - 1))
    tangent = sample_sphere(d - 1, n, rng) * radial[:, None]
    return heights[:, None] * center[None, :] + tangent @ basis.T


# ---------------------------------------------------------------------------
# convex bodies
# ---------------------------------------------------------------------------


def _affine_rank(points):
    centered = points - points.mean(axis=0)
    if not np.any(centered):
        return 0
    s = np.linalg.svd(centered, compute_uv=False)
    return int(np.sum(s > s[0] * 1e-10))


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Vertex-represented convex polytope.

    ``vertices`` are the extreme points (counter-clockwise in 2-D).  Facet
    inequalities ``normals @ x + offsets <= 0`` back membership for d >= 3.
    """

    vertices: np.ndarray
    cached_volume: float | None = None
    normals: np.ndarray | None = field(default=None, repr=False)
    offsets: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float, ndmin=2)
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)

    @property
    def dimension(self):
        return self.vertices.shape[1]

    @property
    def volume(self):
        if self.cached_volume is not None:
            return self.cached_volume
        raise NotImplementedError(
            "exact volume is only available for d <= 3; use mc_volume()"
        )

    def contains(self, points, atol=1e-12):
        """Closed membership test."""
        points = check_points(points, dim=self.dimension)
        if self.dimension == 1:
            lo, hi = self.vertices[0, 0], self.vertices[-1, 0]
            x = points[:, 0]
            return (x >= lo - atol) & (x <= hi + atol)
        if self.dimension == 2:
            return _polygon_contains(self.vertices, points, atol)
        return np.all(points @ self.normals.T + self.offsets <= atol, axis=1)

    def mc_volume(self, budget=100_000, seed=0):
        """Monte-Carlo volume and its standard error (any dimension)."""
        rng = rng_for(seed)
        center = self.vertices.mean(axis=0)
        radius = np.max(np.linalg.norm(self.vertices - center, axis=1))
        pts = sample_ball(self.dimension, budget, rng, radius=radius, center=center)
        hit = self.contains(pts)
        box = ball_volume(self.dimension, radius)
        p = hit.mean()
        return box * p, box * np.sqrt(p * (1 - p) / budget)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "vertices": self.vertices.tolist(),
            "volume": self.cached_volume,
        }


def _polygon_contains(verts, points, atol):
    """Fan binary search: O(log k) per query for a CCW convex polygon."""
    v0 = verts[0]
    rest = verts[1:] - v0
    q = points - v0
    # cross(rest[i], q) >= 0 means q lies left of the ray v0 -> v_{i+1};
    # the sign flips exactly once along the fan.
    k = rest.shape[0]
    lo = np.zeros(len(q), dtype=int)
    hi = np.full(len(q), k - 1)
    # find the largest i with cross(rest[i], q) >= 0
    while np.any(lo < hi):
        mid = (lo + hi + 1) // 2
        r = rest[mid]
        cr = r[:, 0] * q[:, 1] - r[:, 1] * q[:, 0]
        left = cr >= -atol
        lo = np.where(left & (lo < hi), mid, lo)
        hi = np.where(~left & (lo < hi), mid - 1, hi)
    i = np.clip(lo, 0, k - 2)
    a, b = rest[i], rest[i + 1]
    c0 = a[:, 0] * q[:, 1] - a[:, 1] * q[:, 0]
    c1 = b[:, 0] * q[:, 1] - b[:, 1] * q[:, 0]
    e = b - a
    w = q - a
    c2 = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
    return (c0 >= -atol) & (c1 <= atol) & (c2 >= -atol)


def convex_hull(points):
    """Convex hull of a point cloud as a :class:`ConvexBody`.

    Volumes are exact for d <= 3 (interval length, shoelace, tetrahedral
    decomposition).  Affinely degenerate input raises :class:`FlatHullError`.
    """
    points = check_points(points)
    n, d = points.shape
    rank = _affine_rank(points)
    if rank < d or n < d + 1:
        raise FlatHullError(rank, d)
    if d == 1:
        lo, hi = points[:, 0].min(), points[:, 0].max()
        return ConvexBody(np.array([[lo], [hi]]), cached_volume=float(hi - lo))
    hull = ConvexHull(points)
    normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
    if d == 2:
        verts = points[hull.vertices]  # counter-clockwise for 2-D input
        x, y = verts[:, 0], verts[:, 1]
        area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        return ConvexBody(verts, float(area), normals, offsets)
    verts = points[np.sort(hull.vertices)]
    volume = None
    if d == 3:
        apex = verts.mean(axis=0)
        tri = points[hull.simplices] - apex
        volume = float(np.abs(np.linalg.det(tri)).sum() / 6.0)
    return ConvexBody(verts, volume, normals, offsets)


# ---------------------------------------------------------------------------
# set families for the greedy disjointification
# ---------------------------------------------------------------------------


class IntervalFamily:
    """Closed intervals on the line with exact length arithmetic."""

    def __init__(self, intervals):
        iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
        if np.any(iv[:, 1] < iv[:, 0]):
            raise ValueError("intervals must satisfy a <= b")
        self.intervals = iv

    def __len__(self):
        return len(self.intervals)

    def volume(self, i):
        a, b = self.intervals[i]
        return b - a

    @staticmethod
    def _union_length(iv):
        if len(iv) == 0:
            return 0.0
        iv = iv[np.argsort(iv[:, 0])]
        total, (cur_a, cur_b) = 0.0, iv[0]
        for a, b in iv[1:]:
            if a > cur_b:
                total += cur_b - cur_a
                cur_a, cur_b = a, b
            else:
                cur_b = max(cur_b, b)
        return total + cur_b - cur_a

    def residual(self, i, others):
        a, b = self.intervals[i]
        others = [j for j in others if j != i]
        if not others:
            return b - a
        clipped = np.clip(self.intervals[others], a, b)
        return (b - a) - self._union_length(clipped)

    def union_volume(self, indices=None):
        idx = range(len(self)) if indices is None else list(indices)
        return self._union_length(self.intervals[list(idx)])


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class PlanarCapFamily:
    """Caps of the unit disk with quadrature-exact area arithmetic.

    Along the ray at angle phi a cap centred at angle a covers the radii
    [t / cos(phi - a), 1] whenever |phi - a| < theta = arccos t.  All cap
    intervals end at 1, so a union of caps is [min rho, 1] on each ray and
    areas reduce to one-dimensional integrals of (1 - rho^2)/2.  Between
    consecutive breakpoints (arc endpoints and bisectors) the active cap is
    fixed and the integrand is analytic, so Gauss-Legendre is exact to
    rounding.
    """

    def __init__(self, centers, t):
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.centers = centers
        self.angles = np.arctan2(centers[:, 1], centers[:, 0])
        self.t = float(t)
        self.theta = float(np.arccos(t))

    def __len__(self):
        return len(self.angles)

    def volume(self, i=None):
        return float(self.theta - self.t * np.sqrt(1.0 - self.t**2))

    def rho(self, phi, indices):
        """Inner radius of the union of the caps in ``indices`` along each ray."""
        phi = np.asarray(phi, dtype=float)
        out = np.ones_like(phi)
        if len(indices) == 0:
            return out
        delta = np.abs(_wrap(phi[:, None] - self.angles[np.asarray(indices)][None, :]))
        cover = delta < self.theta
        r = np.where(cover, self.t / np.cos(np.where(cover, delta, 0.0)), 1.0)
        return np.minimum(out, r.min(axis=1))

    def _breakpoints(self, indices, lo, hi):
        a = self.angles[np.asarray(indices, dtype=int)] if len(indices) else np.empty(0)
        pts = [a - self.theta, a + self.theta]
        if a.size > 1:
            order = np.sort(a)
            nxt = np.roll(order, -1)
            gap = _wrap(nxt - order) % (2 * np.pi)
            mid = order + 0.5 * gap
            pts += [mid, mid + np.pi]
        pts = np.concatenate(pts) if pts else np.empty(0)
        # express every breakpoint inside [lo, hi)
        shifted = lo + np.mod(pts - lo, 2 * np.pi)
        inner = shifted[(shifted > lo) & (shifted < hi)]
        return np.unique(np.concatenate([[lo], inner, [hi]]))

    def integrate(self, func, indices, lo=-np.pi, hi=np.pi):
        """Integrate ``func(phi)`` over [lo, hi] with breakpoints of ``indices``."""
        br = self._breakpoints(indices, lo, hi)
        a, b = br[:-1], br[1:]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = func(nodes.ravel()).reshape(nodes.shape)
        return float(np.sum(vals @ _GL_WEIGHTS * half))

    def residual(self, i, others):
        others = [j for j in others if j != i]
        ai = self.angles[i]
        near = [j for j in others if abs(_wrap(self.angles[j] - ai)) < 2 * self.theta]

        def integrand(phi):
            ri = self.rho(phi, [i])
            ro = self.rho(phi, near)
            return 0.5 * np.maximum(ro**2 - ri**2, 0.0)

        return self.integrate(integrand, [i] + near, ai - self.theta, ai + self.theta)

    def union_volume(self, indices=None):
        idx = list(range(len(self))) if indices is None else list(indices)
        return self.integrate(lambda phi: 0.5 * (1.0 - self.rho(phi, idx) ** 2), idx)


class MonteCarloCapFamily:
    """Caps of B_d (any d) with Monte-Carlo residual volumes.

    Each cap owns a seeded stream of uniform points, regenerated on demand so
    repeated queries use common random numbers and memory stays O(budget).
    """

    def __init__(self, centers, t, budget=100_000, seed=0):
        self.centers = np.asarray(centers, dtype=float)
        self.t = float(t)
        self.budget = int(budget)
        self.seed = seed
        self._volume = cap_volume(self.centers.shape[1], self.t)
        self._cos2 = np.cos(2 * np.arccos(self.t))

    def __len__(self):
        return len(self.centers)

    def volume(self, i=None):
        return self._volume

    def _points(self, i):
        rng = rng_for(self.seed, 7919, i)
        return sample_cap(self.centers[i], self.t, self.budget, rng)

    def _neighbours(self, i, others):
        others = np.asarray([j for j in others if j != i], dtype=int)
        if others.size == 0:
            return others
        dots = self.centers[others] @ self.centers[i]
        return others[dots > self._cos2]

    def residual(self, i, others):
        near = self._neighbours(i, others)
        if near.size == 0:
            return self._volume
        pts = self._points(i)
        covered = np.any(pts @ self.centers[near].T >= self.t, axis=1)
        return self._volume * (1.0 - covered.mean())

    def union_volume(self, indices=None):
        idx = list(range(len(self))) if indices is None else list(indices)
        # vol(U) = sum_i vol(C_i minus the union of earlier caps)
        return float(sum(self.residual(i, idx[:k]) for k, i in enumerate(idx)))


def greedy_disjointify(sets, v=None, c=None, rtol=1e-9):
    """Thin a family of equal-volume sets so every survivor keeps volume vc/2.

    Sets are visited in index order; set ``i`` is dropped when its volume
    outside the union of all other currently kept sets is below ``v*c/2``.
    The survivors number at least ``N c / 2`` where ``c`` is the union
    fraction vol(union)/(N v).

    Parameters
    ----------
    sets : object
        Exposes ``len(sets)``, ``volume(i)``, ``residual(i, others)`` and,
        when ``c`` is not given, ``union_volume()``.
    v : float, optional
        Common volume; read from ``sets.volume(0)`` when omitted.
    c : float, optional
        Union fraction; computed from ``sets.union_volume()`` when omitted.

    Returns
    -------
    kept : list of int
    """
    N = len(sets)
    if N == 0:
        return []
    vols = np.array([sets.volume(i) for i in range(N)], dtype=float)
    if v is None:
        v = float(vols[0])
    if np.any(np.abs(vols - v) > rtol * max(v, 1e-300)):
        raise OracleError("sets do not share a common volume")
    if c is None:
        c = sets.union_volume() / (N * v)
    threshold = 0.5 * v * c
    slack = 1e-9 * v
    kept = list(range(N))
    for i in range(N):
        others = [j for j in kept if j != i]
        r = sets.residual(i, others)
        if r < -slack or r > v + slack:
            raise OracleError(f"residual {r} of set {i} outside [0, v={v}]")
        if r < threshold:
            kept.remove(i)
    return kept


def disjointify_guarantees(sets, kept, v, c, tol=1e-12):
    """Check both greedy guarantees; returns (size_ok, residuals_ok, residuals)."""
    N = len(sets)
    res = np.array([sets.residual(i, kept) for i in kept])
    size_ok = len(kept) >= N * c / 2 - tol
    residual_ok = bool(np.all(res >= v * c / 2 - tol * max(v, 1.0)))
    return size_ok, residual_ok, res


# ---------------------------------------------------------------------------
# cap packing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CapPacking:
    """Caps C(x_i, t) on B_d that keep a constant fraction of their volume.

    ``union_fraction`` is the measured c = vol(union of all N drawn caps)/(N v);
    the greedy step guarantees each kept cap a residual of at least
    ``union_fraction/2 * per_cap_volume``.
    """

    dimension: int
    n_requested: int
    t: float
    centers: np.ndarray
    per_cap_volume: float
    union_fraction: float
    residual_volumes: np.ndarray
    meets_size_condition: bool = True
    method: str = "exact"

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float, ndmin=2)
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        res = np.array(self.residual_volumes, dtype=float)
        res.setflags(write=False)
        object.__setattr__(self, "residual_volumes", res)
        if len(centers) < 1:
            raise InfeasiblePackingError("a packing keeps at least one cap")
        norms = np.linalg.norm(centers, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("cap centers must be unit vectors")

    @property
    def k_kept(self):
        return len(self.centers)

    @property
    def c3(self):
        return self.union_fraction

    def caps(self):
        return [Cap(x, self.t) for x in self.centers]

    def set_family(self, budget=100_000, seed=0):
        if self.dimension == 2:
            return PlanarCapFamily(self.centers, self.t)
        return MonteCarloCapFamily(self.centers, self.t, budget=budget, seed=seed)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "n_requested": self.n_requested,
            "t": self.t,
            "centers": self.centers.tolist(),
            "per_cap_volume": self.per_cap_volume,
            "union_fraction": self.union_fraction,
            "residual_volumes": self.residual_volumes.tolist(),
            "meets_size_condition": self.meets_size_condition,
            "method": self.method,
        }


def cap_packing(d, N, seed=0, mc_budget=100_000):
    """Random cap packing of B_d thinned by :func:`greedy_disjointify`.

    N uniform sphere points receive caps of threshold ``cap_height_for_count``;
    the greedy pass removes caps that overlap too much.  The condition
    N >= 10^d is recorded, not enforced.
    """
    d = check_dimension(d, minimum=2)
    if N < 2:
        raise InfeasiblePackingError("a cap packing needs N >= 2")
    t = cap_height_for_count(d, N)
    rng = rng_for(seed, 101)
    centers = sample_sphere(d, N, rng)
    if d == 2:
        family, method = PlanarCapFamily(centers, t), "exact"
    else:
        family, method = MonteCarloCapFamily(centers, t, mc_budget, seed), "mc"
    v = cap_volume(d, t)
    c = family.union_volume() / (N * v)
    kept = greedy_disjointify(family, v=v, c=c)
    residuals = np.array([family.residual(i, kept) for i in kept])
    return CapPacking(
        dimension=d,
        n_requested=int(N),
        t=t,
        centers=centers[kept],
        per_cap_volume=v,
        union_fraction=float(c),
        residual_volumes=residuals,
        meets_size_condition=N >= 10**d,
        method=method,
    )


# ---------------------------------------------------------------------------
# antipodal ball packing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AntipodalPacking:
    """Disjoint radius-``delta`` balls at x_i and -x_i inside B_d(radius)."""

    delta: float
    radius: float
    centers: np.ndarray
    direction: np.ndarray

    @property
    def dimension(self):
        return self.centers.shape[1]

    @property
    def k(self):
        return len(self.centers)

    @property
    def pairs(self):
        return [(x, -x) for x in self.centers]

    def all_centers(self):
        return np.vstack([self.centers, -self.centers])

    @property
    def packing_constant(self):
        """Empirical c with K = (c/2)^d vol(B_d(radius))/vol(B_d(delta))."""
        ratio = (self.radius / self.delta) ** self.dimension
        return 2.0 * (self.k / ratio) ** (1.0 / self.dimension)

    def to_dict(self):
        return {
            "delta": self.delta,
            "radius": self.radius,
            "centers": self.centers.tolist(),
            "direction": self.direction.tolist(),
        }


def antipodal_ball_packing(d, delta, seed=0, C=1.0, radius=None):
    """Antipodal pairs of disjoint delta-balls inside B_d(sqrt(2d)).

    Candidates come from a randomly shifted cubic lattice of spacing 2*delta
    restricted to centres c with ||c|| <= R - delta and <c, u> >= delta for a
    random direction u; the kept half is mirrored through the origin.
    """
    d = check_dimension(d)
    if not 0.0 < delta < np.exp(-C * d):
        raise DomainError(f"delta must lie in (0, exp(-{C}*{d})), got {delta}")
    R = np.sqrt(2.0 * d) if radius is None else float(radius)
    if 2 * delta > R:
        raise InfeasiblePackingError("balls of radius delta do not fit")
    rng = rng_for(seed, 202)
    u = sample_sphere(d, 1, rng)[0]
    step = 2.0 * delta * (1.0 + 1e-9)
    offset = rng.random(d) * step
    m = int(np.ceil(R / step)) + 1
    axis = np.arange(-m, m + 1) * step
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid + offset
    ok = (np.linalg.norm(grid, axis=1) <= R - delta) & (grid @ u >= delta * (1 + 1e-12))
    centers = grid[ok]
    if len(centers) == 0:
        raise InfeasiblePackingError(f"no ball of radius {delta} could be placed")
    # order by distance to the origin for a canonical, seed-determined layout
    centers = centers[np.lexsort((centers[:, 0], np.linalg.norm(centers, axis=1)))]
    return AntipodalPacking(float(delta), float(R), centers, u)
