"""Evaluable, sampleable densities and numerical statistical distances.

Besides Gaussians and uniform laws this module builds the two hypercube
families used for minimax lower bounds: uniform laws on a ball with some
caps shaved off, and Gaussians carrying small log-quadratic bumps.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.spatial import cKDTree
from scipy.special import gammaln, ive

from ._validation import check_dimension, check_points, rng_for
from .exceptions import (
    DomainError,
    EnvelopeError,
    InvalidDimensionError,
    InvalidFamilyError,
)
from .geometry import (
    PlanarCapFamily,
    antipodal_ball_packing,
    ball_volume,
    sample_ball,
    sphere_area,
)

__all__ = [
    "Density",
    "Gaussian",
    "UniformInterval",
    "UniformBall",
    "UniformBody",
    "AffineDensity",
    "CapFamilyDensity",
    "BumpFamilyDensity",
    "bump_profile",
    "make_bump_family",
    "make_cap_family",
    "NoiseSpec",
    "TailEnvelope",
    "tail_envelope",
    "Estimate",
    "hellinger_sq",
    "total_variation",
    "verify_log_concave",
    "sample",
]

_TAIL = 1e-12


class Density(ABC):
    """A probability density on R^d.

    Subclasses implement ``logpdf`` and ``_draw``; ``support_radius`` is a
    radius R with P(||X|| > R) <= 1e-12.
    """

    d: int
    support_radius: float

    @property
    @abstractmethod
    def is_log_concave(self):
        """Whether the density is log-concave by construction."""

    @abstractmethod
    def logpdf(self, x):
        """Log-density at each row of ``x`` (``-inf`` off the support)."""

    @abstractmethod
    def _draw(self, n, rng):
        """Return ``n`` samples and the number of proposals used."""

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def _points(self, x):
        return check_points(x, dim=self.d)

    def sample(self, n, seed=0, return_acceptance=False):
        """Draw ``n`` points; deterministic in ``(n, seed)``."""
        if n < 1:
            raise ValueError("n must be at least 1")
        pts, proposals = self._draw(int(n), rng_for(seed))
        if return_acceptance:
            return pts, n / proposals
        return pts

    def breakpoints(self):
        """Locations (d = 1) where the density is not smooth."""
        return np.empty(0)

    def cdf(self, x):
        """Distribution function for d = 1 by piecewise quadrature."""
        if self.d != 1:
            raise InvalidDimensionError("cdf is defined for d = 1 only")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = -self.support_radius
        knots = np.unique(np.concatenate([[lo], self.breakpoints()]))
        out = np.empty_like(x)
        for k, xi in enumerate(x):
            if xi <= lo:
                out[k] = 0.0
                continue
            pts = np.concatenate([knots[knots < xi], [xi]])
            out[k] = sum(
                integrate.quad(lambda s: self.pdf(np.array([s]))[0], a, b, epsabs=1e-13)[0]
                for a, b in zip(pts[:-1], pts[1:])
            )
        return np.clip(out, 0.0, 1.0)


def _rejection(proposal, log_accept, n, rng, batch=None):
    """Rejection sampler; ``log_accept(x)`` must be <= 0."""
    batch = batch or max(2 * n, 1024)
    out, drawn, kept = [], 0, 0
    while kept < n:
        x = proposal(batch, rng)
        drawn += batch
        ok = np.log(rng.random(batch)) <= log_accept(x)
        out.append(x[ok])
        kept += int(ok.sum())
        if drawn >= 1_000_000 and kept / drawn < 1e-6:
            raise EnvelopeError(f"acceptance rate {kept / drawn:.2e} below 1e-6")
    # proposals are charged pro rata to the n points returned
    return np.concatenate(out)[:n], drawn * n / kept


# ---------------------------------------------------------------------------
# elementary densities
# ---------------------------------------------------------------------------


class Gaussian(Density):
    """Multivariate normal N(mean, cov)."""

    def __init__(self, mean=None, cov=None, d=None):
        if mean is None:
            d = check_dimension(1 if d is None else d)
            mean = np.zeros(d)
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.d = self.mean.shape[0]
        cov = np.eye(self.d) if cov is None else np.atleast_2d(np.asarray(cov, float))
        self.cov = cov
        self._chol = np.linalg.cholesky(cov)
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        scale = np.sqrt(np.max(np.linalg.eigvalsh(cov)))
        self.support_radius = float(
            np.linalg.norm(self.mean) + scale * stats.chi(self.d).isf(_TAIL)
        )

    @property
    def is_log_concave(self):
        return True

    def logpdf(self, x):
        x = self._points(x)
        z = np.linalg.solve(self._chol, (x - self.mean).T)
        return -0.5 * (np.sum(z * z, axis=0) + self.d * np.log(2 * np.pi) + self._logdet)

    def _draw(self, n, rng):
        return self.mean + rng.standard_normal((n, self.d)) @ self._chol.T, n

    def breakpoints(self):
        return self.mean.copy() if self.d == 1 else np.empty(0)

    def cdf(self, x):
        if self.d != 1:
            raise InvalidDimensionError("cdf is defined for d = 1 only")
        return stats.norm.cdf(x, loc=self.mean[0], scale=np.sqrt(self.cov[0, 0]))

    def to_dict(self):
        return {"kind": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


class UniformInterval(Density):
    """Uniform law on [a, b]."""

    d = 1

    def __init__(self, a=0.0, b=1.0):
        if not b > a:
            raise DomainError("need a < b")
        self.a, self.b = float(a), float(b)
        self.support_radius = max(abs(self.a), abs(self.b))

    @property
    def is_log_concave(self):
        return True

    def logpdf(self, x):
        x = self._points(x)[:, 0]
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, -np.log(self.b - self.a), -np.inf)

    def _draw(self, n, rng):
        return (self.a + (self.b - self.a) * rng.random(n))[:, None], n

    def breakpoints(self):
        return np.array([self.a, self.b])

    def cdf(self, x):
        return np.clip((np.asarray(x, float) - self.a) / (self.b - self.a), 0.0, 1.0)


class UniformBall(Density):
    """Uniform law on the ball B_d(center, radius)."""

    def __init__(self, d, radius=1.0, center=None):
        self.d = check_dimension(d)
        self.radius = float(radius)
        self.center = np.zeros(self.d) if center is None else np.asarray(center, float)
        self.volume = ball_volume(self.d, self.radius)
        self.support_radius = float(np.linalg.norm(self.center) + self.radius)

    @property
    def is_log_concave(self):
        return True

    def logpdf(self, x):
        x = self._points(x)
        inside = np.linalg.norm(x - self.center, axis=1) <= self.radius
        return np.where(inside, -np.log(self.volume), -np.inf)

    def _draw(self, n, rng):
        return sample_ball(self.d, n, rng, self.radius, self.center), n

    def breakpoints(self):
        if self.d != 1:
            return np.empty(0)
        return self.center[0] + np.array([-self.radius, self.radius])


class UniformBody(Density):
    """Uniform law on a :class:`~shapelab.geometry.ConvexBody`."""

    def __init__(self, body, mc_budget=1_000_000, seed=0):
        self.body = body
        self.d = body.dimension
        try:
            self.volume = body.volume
        except NotImplementedError:
            self.volume = body.mc_volume(mc_budget, seed)[0]
        verts = body.vertices
        self._center = verts.mean(axis=0)
        self._radius = float(np.max(np.linalg.norm(verts - self._center, axis=1)))
        self.support_radius = float(np.max(np.linalg.norm(verts, axis=1)))

    @property
    def is_log_concave(self):
        return True

    def logpdf(self, x):
        x = self._points(x)
        return np.where(self.body.contains(x), -np.log(self.volume), -np.inf)

    def _draw(self, n, rng):
        return _rejection(
            lambda m, r: sample_ball(self.d, m, r, self._radius, self._center),
            lambda x: np.where(self.body.contains(x), 0.0, -np.inf),
            n,
            rng,
        )

    def breakpoints(self):
        return self.body.vertices[:, 0] if self.d == 1 else np.empty(0)


class AffineDensity(Density):
    """Law of ``A X + b`` for X drawn from ``base``."""

    def __init__(self, base, A, b=None):
        self.base = base
        self.d = base.d
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.zeros(self.d) if b is None else np.asarray(b, dtype=float)
        sign, logdet = np.linalg.slogdet(self.A)
        if sign == 0:
            raise DomainError("affine map must be invertible")
        self._logdet = logdet
        self._Ainv = np.linalg.inv(self.A)
        self.support_radius = float(
            np.linalg.norm(self.A, 2) * base.support_radius + np.linalg.norm(self.b)
        )

    @property
    def is_log_concave(self):
        return self.base.is_log_concave

    def logpdf(self, x):
        x = self._points(x)
        return self.base.logpdf((x - self.b) @ self._Ainv.T) - self._logdet

    def _draw(self, n, rng):
        pts, proposals = self.base._draw(n, rng)
        return pts @ self.A.T + self.b, proposals

    def breakpoints(self):
        bp = self.base.breakpoints()
        return self.A[0, 0] * bp + self.b[0] if self.d == 1 else bp


# ---------------------------------------------------------------------------
# cap family
# ---------------------------------------------------------------------------


class _RayProfile:
    """Exact cap arithmetic for d <= 2 along rays from the origin.

    On every ray a union of caps of threshold t occupies [rho, 1] (radius
    measured from the origin), so differences of unions are radius
    intervals.  ``measure`` integrates the length in r^{d-1} dr.
    """

    def __init__(self, centers, t):
        self.d = centers.shape[1]
        self.t = t
        if self.d == 2:
            self.family = PlanarCapFamily(centers, t)
        else:
            self.sign = np.sign(centers[:, 0])

    def rho(self, where, idx):
        idx = list(idx)
        if self.d == 2:
            return self.family.rho(where, idx)
        out = np.ones_like(where)
        for i in idx:
            out = np.where(self.sign[i] == where, np.minimum(out, self.t), out)
        return out

    def measure(self, func, idx):
        """Integrate ``func(rho_lookup)`` over rays; ``func`` returns r-measure."""
        if self.d == 2:
            return self.family.integrate(lambda phi: func(lambda ix: self.rho(phi, ix)), idx)
        dirs = np.array([-1.0, 1.0])
        return float(np.sum(func(lambda ix: self.rho(dirs, ix))))

    def length(self, lo, hi):
        """Measure of the radius interval [lo, hi) per unit of direction."""
        if self.d == 2:
            return 0.5 * (np.maximum(hi, lo) ** 2 - lo**2)
        return np.maximum(hi - lo, 0.0)


class CapFamilyDensity(Density):
    """Uniform law on B_d with the deselected caps removed.

    The support is B_d minus (D \\ S) where D is the union of caps with
    ``alpha_i = 0`` and S the union of caps with ``alpha_i = 1``.  Volumes
    are exact for d <= 2 and Monte-Carlo for d >= 3.
    """

    def __init__(self, centers, t, alpha, mc_budget=1_000_000, seed=0):
        centers = np.array(centers, dtype=float, ndmin=2)
        self.d = centers.shape[1]
        self.centers = centers
        self.t = float(t)
        self.alpha = np.asarray(alpha, dtype=int).ravel()
        if self.alpha.shape[0] != len(centers):
            raise InvalidFamilyError(
                f"alpha has length {self.alpha.shape[0]}, expected {len(centers)}"
            )
        if not np.all((self.alpha == 0) | (self.alpha == 1)):
            raise InvalidFamilyError("alpha must be a 0/1 vector")
        self.support_radius = 1.0
        self.mc_budget = int(mc_budget)
        self.seed = seed
        self.selected = np.flatnonzero(self.alpha == 1)
        self.deselected = np.flatnonzero(self.alpha == 0)
        self.removed_volume, self.removed_stderr = self._removed_volume()
        self.normalizer = ball_volume(self.d) - self.removed_volume
        if self.normalizer <= 0:
            raise InvalidFamilyError("cap family has empty support")

    @property
    def ball_fraction_removed(self):
        """C_alpha = removed volume / vol(B_d)."""
        return self.removed_volume / ball_volume(self.d)

    def _removed_volume(self):
        if self.d <= 2:
            prof = _RayProfile(self.centers, self.t)
            sel, des = self.selected, self.deselected

            def removed(rho):
                return prof.length(rho(des), rho(sel))

            return prof.measure(removed, np.arange(len(self.centers))), 0.0
        pts = sample_ball(self.d, self.mc_budget, rng_for(self.seed, 31))
        inside = self._removed_mask(pts)
        vol = ball_volume(self.d)
        p = inside.mean()
        return vol * p, vol * np.sqrt(p * (1 - p) / self.mc_budget)

    def _in_union(self, x, idx):
        if len(idx) == 0:
            return np.zeros(len(x), dtype=bool)
        return np.any(x @ self.centers[idx].T >= self.t, axis=1)

    def _removed_mask(self, x):
        return self._in_union(x, self.deselected) & ~self._in_union(x, self.selected)

    def contains(self, x):
        x = self._points(x)
        in_ball = np.einsum("ij,ij->i", x, x) <= 1.0
        return in_ball & ~self._removed_mask(x)

    @property
    def is_log_concave(self):
        # B \ D is convex; overlap of a removed and a kept cap breaks convexity
        if len(self.selected) == 0 or len(self.deselected) == 0:
            return True
        cos2 = np.cos(2 * np.arccos(self.t))
        dots = self.centers[self.deselected] @ self.centers[self.selected].T
        return bool(np.all(dots <= cos2))

    def logpdf(self, x):
        return np.where(self.contains(x), -np.log(self.normalizer), -np.inf)

    def _draw(self, n, rng):
        return _rejection(
            lambda m, r: sample_ball(self.d, m, r),
            lambda x: np.where(self._removed_mask(x), -np.inf, 0.0),
            n,
            rng,
        )

    def breakpoints(self):
        if self.d != 1:
            return np.empty(0)
        return np.array([-1.0, -self.t, self.t, 1.0])

    def cdf(self, x):
        if self.d != 1:
            raise InvalidDimensionError("cdf is defined for d = 1 only")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        knots = np.array([-1.0, -self.t, self.t, 1.0])
        mid = 0.5 * (knots[:-1] + knots[1:])
        dens = self.pdf(mid[:, None])
        cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(knots))])
        return np.clip(np.interp(x, knots, cum), 0.0, 1.0)

    def with_alpha(self, alpha):
        return CapFamilyDensity(self.centers, self.t, alpha, self.mc_budget, self.seed)

    def to_dict(self):
        return {
            "kind": "caps",
            "dimension": self.d,
            "t": self.t,
            "centers": self.centers.tolist(),
            "alpha": self.alpha.tolist(),
            "normalizer": self.normalizer,
        }


def make_cap_family(packing, alpha, mc_budget=1_000_000, seed=0):
    """Cap-family density on the caps kept by a :class:`CapPacking`."""
    alpha = np.asarray(alpha).ravel()
    if alpha.shape[0] != packing.k_kept:
        raise InvalidFamilyError(
            f"alpha has length {alpha.shape[0]}, packing keeps {packing.k_kept} caps"
        )
    return CapFamilyDensity(packing.centers, packing.t, alpha, mc_budget, seed)


# ---------------------------------------------------------------------------
# bump family
# ---------------------------------------------------------------------------


def bump_profile(r, delta):
    """g(r) = (delta - r)^2 / 4 on r <= delta, zero beyond."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= delta, 0.25 * (delta - np.minimum(r, delta)) ** 2, 0.0)


def _radial_gaussian_weight(r, y_norm, d):
    """Angular integral of gamma over the sphere of radius r about y.

    Returns w(r) with  int_{B(y, delta)} gamma(x) F(|x-y|) dx = int_0^delta F(r) w(r) dr.
    The angular average of exp(-r |y| cos psi) is
    Gamma(d/2) (2/z)^{d/2-1} I_{d/2-1}(z), z = r |y|.
    """
    r = np.asarray(r, dtype=float)
    z = r * y_norm
    nu = 0.5 * d - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_avg = gammaln(0.5 * d) + nu * np.log(2.0 / z) + np.log(ive(nu, z))
    log_avg = np.where(z < 1e-12, 0.0, log_avg)
    log_w = (
        np.log(sphere_area(d))
        + (d - 1) * np.log(np.maximum(r, 1e-300))
        - 0.5 * d * np.log(2 * np.pi)
        - 0.5 * (y_norm - r) ** 2
        + log_avg
    )
    return np.exp(log_w)


_RADIAL_NODES, _RADIAL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _ball_integral(y_norm, delta, d, func, lo=0.0, hi=None):
    """int_{B(y, delta)} gamma(x) func(|x - y|) dx for every |y| in ``y_norm``.

    Integrates over radii in [lo, hi] (default [0, delta]).  The radial
    integrand is smooth there as long as ``func`` is, so a fixed 48-point
    Gauss-Legendre rule is accurate to rounding and vectorises over centres.
    """
    hi = delta if hi is None else hi
    norms = np.atleast_1d(np.asarray(y_norm, dtype=float))
    r = lo + 0.5 * (hi - lo) * (_RADIAL_NODES + 1.0)
    w = 0.5 * (hi - lo) * _RADIAL_WEIGHTS
    W = _radial_gaussian_weight(r[None, :], norms[:, None], d)
    out = (W * func(r)[None, :]) @ w
    return out if np.ndim(y_norm) else float(out[0])


def _min_gap(points):
    """Smallest distance between two rows (inf for fewer than two)."""
    if len(points) < 2:
        return np.inf
    dist, _ = cKDTree(points).query(points, k=2)
    return float(dist[:, 1].min())


class BumpFamilyDensity(Density):
    """Standard Gaussian tilted by log-quadratic bumps at +-x_i.

    log f(x) = -log C + log gamma(x) + sum_i g(|x - y_i|), with
    y_i = x_i when ``alpha_i = 1`` and y_i = -x_i otherwise.
    """

    def __init__(self, centers, delta, alpha):
        centers = np.array(centers, dtype=float, ndmin=2)
        self.d = centers.shape[1]
        self.centers = centers
        self.delta = float(delta)
        self.alpha = np.asarray(alpha, dtype=int).ravel()
        if self.alpha.shape[0] != len(centers):
            raise InvalidFamilyError(
                f"alpha has length {self.alpha.shape[0]}, expected {len(centers)}"
            )
        if not np.all((self.alpha == 0) | (self.alpha == 1)):
            raise InvalidFamilyError("alpha must be a 0/1 vector")
        self.active = np.where(self.alpha[:, None] == 1, centers, -centers)
        norms = np.linalg.norm(self.active, axis=1)
        self.normalizer = 1.0 + float(
            _ball_integral(norms, self.delta, self.d, lambda r: np.expm1(bump_profile(r, self.delta))).sum()
        )
        self._tree = None
        self.support_radius = float(
            stats.chi(self.d).isf(_TAIL * np.exp(-0.25 * self.delta**2))
        )

    @property
    def balls_disjoint(self):
        return bool(_min_gap(self.active) >= 2 * self.delta)

    @property
    def is_log_concave(self):
        return self.balls_disjoint

    def log_bump(self, x):
        x = self._points(x)
        out = np.zeros(len(x))
        if self._tree is None:
            self._tree = cKDTree(self.active)
        near = self._tree.sparse_distance_matrix(cKDTree(x), self.delta, output_type="ndarray")
        np.add.at(out, near["j"], bump_profile(near["v"], self.delta))
        return out

    def logpdf(self, x):
        x = self._points(x)
        log_gamma = -0.5 * np.sum(x * x, axis=1) - 0.5 * self.d * np.log(2 * np.pi)
        return log_gamma + self.log_bump(x) - np.log(self.normalizer)

    def _draw(self, n, rng):
        cap = 0.25 * self.delta**2
        return _rejection(
            lambda m, r: r.standard_normal((m, self.d)),
            lambda x: self.log_bump(x) - cap,
            n,
            rng,
        )

    def breakpoints(self):
        if self.d != 1:
            return np.empty(0)
        y = self.active[:, 0]
        return np.sort(np.concatenate([y - self.delta, y, y + self.delta]))

    def with_alpha(self, alpha):
        return BumpFamilyDensity(self.centers, self.delta, alpha)

    def to_dict(self):
        return {
            "kind": "bumps",
            "dimension": self.d,
            "delta": self.delta,
            "centers": self.centers.tolist(),
            "alpha": self.alpha.tolist(),
            "normalizer": self.normalizer,
        }


def make_bump_family(d, delta, K_requested=None, alpha=None, seed=0, C=1.0):
    """Bump family on an antipodal packing of delta-balls in B_d(sqrt(2d)).

    ``K_requested`` truncates the packing (``None`` keeps every pair) and
    ``alpha`` defaults to all ones.
    """
    packing = antipodal_ball_packing(d, delta, seed=seed, C=C)
    K = packing.k if K_requested is None else min(int(K_requested), packing.k)
    centers = packing.centers[:K]
    alpha = np.ones(K, dtype=int) if alpha is None else alpha
    return BumpFamilyDensity(centers, delta, alpha)


# ---------------------------------------------------------------------------
# noise and tail envelopes
# ---------------------------------------------------------------------------


class NoiseSpec:
    """Regression noise law with a bounded absolute moment of order 2 + eps.

    Parameters
    ----------
    distribution : scipy.stats frozen distribution
        Law of the noise; must be symmetric enough for E[xi] = 0 to matter
        only through its absolute moments.
    moment_order : float
        q = 2 + eps with eps > 0.
    moment_bound : float
        L with E|xi|^q <= L.
    """

    def __init__(self, distribution=None, moment_order=3.0, moment_bound=None):
        self.distribution = stats.norm() if distribution is None else distribution
        if moment_order <= 2:
            raise DomainError("moment order must exceed 2")
        self.moment_order = float(moment_order)
        q = self.moment_order
        self.moment = float(
            integrate.quad(lambda t: q * t ** (q - 1) * self._two_sided_sf(t), 0, np.inf)[0]
        )
        self.moment_bound = self.moment if moment_bound is None else float(moment_bound)
        if self.moment > self.moment_bound * (1 + 1e-9):
            raise DomainError(
                f"E|xi|^{q} = {self.moment:.4g} exceeds the bound {self.moment_bound:.4g}"
            )
        self.tail_integral = float(
            integrate.quad(lambda t: np.sqrt(self._two_sided_sf(t)), 0, np.inf)[0]
        )

    def _two_sided_sf(self, t):
        return self.distribution.sf(t) + self.distribution.cdf(-t)

    @property
    def epsilon(self):
        return self.moment_order - 2.0

    def tail_integral_bound(self):
        """Markov bound on C_xi: 1 + 2 sqrt(L) / eps."""
        return 1.0 + 2.0 * np.sqrt(self.moment_bound) / self.epsilon

    def sample(self, n, seed=0):
        return self.distribution.rvs(size=n, random_state=rng_for(seed))


@dataclass(frozen=True)
class TailEnvelope:
    """Envelope f(x) <= exp(-c_A ||x|| + C_B)."""

    d: int
    c_A: float
    C_B: float

    def __call__(self, x):
        x = check_points(x, dim=self.d)
        return np.exp(-self.c_A * np.linalg.norm(x, axis=1) + self.C_B)

    def M(self, r):
        """Bound on sup_{||x|| >= r} f(x) * d * vol(B_d)."""
        return np.exp(-self.c_A * np.asarray(r, float) + self.C_B) * self.d * ball_volume(self.d)


def tail_envelope(density):
    """Exponential tail envelope for the densities defined in this module."""
    d = density.d
    half_log_2pi = 0.5 * d * np.log(2 * np.pi)
    if isinstance(density, BumpFamilyDensity):
        # -|x|^2/2 <= -|x| + 1/2 and the bump factor is at most exp(delta^2/4)
        return TailEnvelope(d, 1.0, 0.5 - half_log_2pi + 0.25 * density.delta**2)
    if isinstance(density, Gaussian):
        if not (np.allclose(density.cov, np.eye(d)) and not np.any(density.mean)):
            raise NotImplementedError("envelope implemented for N(0, I) only")
        return TailEnvelope(d, 1.0, 0.5 - half_log_2pi)
    if isinstance(density, CapFamilyDensity):
        return TailEnvelope(d, 1.0, 1.0 - np.log(density.normalizer))
    if isinstance(density, UniformBall):
        R = density.support_radius
        return TailEnvelope(d, 1.0, R - np.log(density.volume))
    if isinstance(density, AffineDensity):
        base = tail_envelope(density.base)
        op = np.linalg.norm(density.A, 2)
        c_A = base.c_A / op
        return TailEnvelope(
            d, c_A, base.C_B + c_A * np.linalg.norm(density.b) - density._logdet
        )
    raise NotImplementedError(f"no tail envelope for {type(density).__name__}")


# ---------------------------------------------------------------------------
# statistical distances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    """A numerical value with a standard error (0 for quadrature)."""

    value: float
    stderr: float = 0.0
    partial: bool = False

    def __float__(self):
        return float(self.value)


def _check_pair(p, q):
    if p.d != q.d:
        raise InvalidDimensionError(f"densities live in R^{p.d} and R^{q.d}")


def _bump_pair(p, q, kind):
    """Exact distances for two bump densities sharing delta and disjoint balls."""
    if p.delta != q.delta:
        return None
    delta, d = p.delta, p.d
    ys = np.unique(np.round(np.vstack([p.active, q.active]), 14), axis=0)
    if _min_gap(ys) < 2 * delta:
        return None
    in_p = _membership(ys, p.active)
    in_q = _membership(ys, q.active)
    norms = np.linalg.norm(ys, axis=1)
    Cp, Cq = p.normalizer, q.normalizer
    total = 0.0
    for a in (0, 1):
        for b in (0, 1):
            rows = (in_p == a) & (in_q == b)
            if not rows.any():
                continue
            if kind == "hellinger":
                def f(r, a=a, b=b):
                    g = bump_profile(r, delta)
                    return (np.exp(0.5 * a * g) / np.sqrt(Cp) - np.exp(0.5 * b * g) / np.sqrt(Cq)) ** 2
            else:
                def f(r, a=a, b=b):
                    g = bump_profile(r, delta)
                    return np.abs(np.exp(a * g) / Cp - np.exp(b * g) / Cq)
            # split where exp((a - b) g) = Cp / Cq so each piece is smooth
            cuts = [0.0, delta]
            if a != b:
                level = np.log(Cp / Cq) * (1 if a else -1)
                if 0 < level < 0.25 * delta**2:
                    cuts.insert(1, delta - 2 * np.sqrt(level))
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                total += float(_ball_integral(norms[rows], delta, d, f, lo, hi).sum())
    outside = 1.0 - float(_ball_integral(norms, delta, d, np.ones_like).sum())
    if kind == "hellinger":
        total += outside * (1 / np.sqrt(Cp) - 1 / np.sqrt(Cq)) ** 2
    else:
        total += outside * abs(1 / Cp - 1 / Cq)
    return 0.5 * total


def _membership(rows, table):
    """1 where a row of ``rows`` is (to 1e-12) a row of ``table``."""
    dist, _ = cKDTree(table).query(rows, k=1)
    return (dist < 1e-12).astype(int)


def _cap_pair(p, q, kind):
    """Exact distances for two cap densities on the same caps (d <= 2)."""
    if p.d > 2 or p.t != q.t or p.centers.shape != q.centers.shape:
        return None
    if not np.array_equal(p.centers, q.centers):
        return None
    prof = _RayProfile(p.centers, p.t)

    def union_removed(rho):
        a1, b1 = rho(p.deselected), rho(p.selected)
        a2, b2 = rho(q.deselected), rho(q.selected)
        l1 = prof.length(a1, b1)
        l2 = prof.length(a2, b2)
        lo, hi = np.maximum(a1, a2), np.minimum(b1, b2)
        overlap = np.where((b1 > a1) & (b2 > a2), prof.length(lo, hi), 0.0)
        return l1 + l2 - overlap

    inter = ball_volume(p.d) - prof.measure(union_removed, np.arange(len(p.centers)))
    A, B = p.normalizer, q.normalizer
    if kind == "hellinger":
        return max(1.0 - inter / np.sqrt(A * B), 0.0)
    return 0.5 * ((A - inter) / A + (B - inter) / B + inter * abs(1 / A - 1 / B))


def _quad_1d(p, q, kind):
    L = max(p.support_radius, q.support_radius)
    knots = np.unique(np.clip(np.concatenate([[-L, L], p.breakpoints(), q.breakpoints()]), -L, L))

    if kind == "hellinger":
        def f(s):
            x = np.array([[s]])
            return (np.sqrt(p.pdf(x)[0]) - np.sqrt(q.pdf(x)[0])) ** 2
    else:
        def f(s):
            x = np.array([[s]])
            return abs(p.pdf(x)[0] - q.pdf(x)[0])

    total = sum(
        integrate.quad(f, a, b, epsabs=1e-10, epsrel=1e-10, limit=200)[0]
        for a, b in zip(knots[:-1], knots[1:])
    )
    return 0.5 * total


def _polar_grid_2d(p, q, kind, tol=1e-6, max_level=9):
    """Tensor Gauss-Legendre in polar coordinates, refined until stable."""
    L = max(p.support_radius, q.support_radius)

    def value(m):
        r_nodes, r_w = np.polynomial.legendre.leggauss(m)
        r = 0.5 * L * (r_nodes + 1)
        wr = 0.5 * L * r_w * r
        phi = np.linspace(0, 2 * np.pi, 2 * m, endpoint=False)
        wphi = 2 * np.pi / (2 * m)
        R, P = np.meshgrid(r, phi, indexing="ij")
        x = np.column_stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()])
        a, b = p.pdf(x), q.pdf(x)
        g = (np.sqrt(a) - np.sqrt(b)) ** 2 if kind == "hellinger" else np.abs(a - b)
        return 0.5 * float(wr @ g.reshape(R.shape).sum(axis=1) * wphi)

    prev = value(32)
    for level in range(6, max_level + 1):
        cur = value(2**level)
        if abs(cur - prev) <= tol:
            return cur, False
        prev = cur
    return prev, True


def _monte_carlo(p, q, kind, budget, seed):
    rng = rng_for(seed, 77)
    half = budget // 2
    x = np.vstack([p.sample(half, seed=rng), q.sample(budget - half, seed=rng)])
    a, b = p.pdf(x), q.pdf(x)
    m = 0.5 * (a + b)
    g = (np.sqrt(a) - np.sqrt(b)) ** 2 if kind == "hellinger" else np.abs(a - b)
    w = 0.5 * g / m
    return float(w.mean()), float(w.std(ddof=1) / np.sqrt(budget))


def _distance(p, q, kind, method, budget, seed):
    _check_pair(p, q)
    if p is q:
        return Estimate(0.0)
    if method == "mc":
        v, se = _monte_carlo(p, q, kind, budget, seed)
        return Estimate(v, se)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    exact = None
    if isinstance(p, BumpFamilyDensity) and isinstance(q, BumpFamilyDensity):
        exact = _bump_pair(p, q, kind)
    elif isinstance(p, CapFamilyDensity) and isinstance(q, CapFamilyDensity):
        exact = _cap_pair(p, q, kind)
    if exact is not None:
        return Estimate(float(exact))
    if p.d == 1:
        return Estimate(_quad_1d(p, q, kind))
    if p.d == 2:
        v, partial = _polar_grid_2d(p, q, kind)
        return Estimate(v, 0.0, partial)
    v, se = _monte_carlo(p, q, kind, budget, seed)
    return Estimate(v, se)


def hellinger_sq(p, q, method="quadrature", budget=1_000_000, seed=0):
    """Squared Hellinger distance h^2 = (1/2) int (sqrt p - sqrt q)^2.

    Bump and cap families use exact radial/ray quadrature; other pairs use
    adaptive 1-D quadrature (d = 1), a refined polar grid (d = 2) or
    importance sampling from (p + q)/2 (d >= 3 or ``method="mc"``).
    """
    return _distance(p, q, "hellinger", method, budget, seed)


def total_variation(p, q, method="quadrature", budget=1_000_000, seed=0):
    """Total variation (1/2) int |p - q|.

    Multiply by 2 to compare with statements written for int |p - q|.
    """
    return _distance(p, q, "tv", method, budget, seed)


def verify_log_concave(density, n_lines=100, n_points=200, seed=0, segments=None):
    """Largest positive second difference of log f along random segments.

    Segments join pairs of points drawn from ``density`` unless explicit
    ``segments`` (pairs of endpoints) are given.  Second differences that
    touch a point outside the support are skipped.
    """
    if segments is None:
        pts = density.sample(2 * n_lines, seed=seed)
        segments = list(zip(pts[:n_lines], pts[n_lines:]))
    s = np.linspace(0.0, 1.0, n_points)
    worst = 0.0
    for a, b in segments:
        a, b = np.atleast_1d(a).astype(float), np.atleast_1d(b).astype(float)
        line = a[None, :] + s[:, None] * (b - a)[None, :]
        lv = density.logpdf(line)
        second = lv[:-2] - 2 * lv[1:-1] + lv[2:]
        ok = np.isfinite(lv[:-2]) & np.isfinite(lv[1:-1]) & np.isfinite(lv[2:])
        if np.any(ok):
            worst = max(worst, float(np.max(second[ok])))
    return {"max_violation": max(worst, 0.0), "n_lines": len(segments), "n_points": n_points}


def sample(density, n, seed=0):
    """Functional alias for ``density.sample(n, seed)``."""
    return density.sample(n, seed=seed)
