"""Decision-dependent distribution maps.

A distribution map sends model parameters theta in R^d to a distribution over
instances z in R^m. Instances are plain float vectors; structured (x, y)
instances carry their feature/label split on the loss that interprets them,
not on the map. All maps are immutable after construction and sample through
an explicit seed, so they are safe to share across threads.

The workhorse is the location-scale family

    z  =  (S0 + S(theta)) z0  +  mu0  +  M theta,

with z0 drawn from a fixed base distribution and both S(.) and theta -> M theta
linear. S(.) is stored as d matrix slices (S(theta) = sum_k theta_k S_k) so
linearity is structural rather than a runtime assumption.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError

Array = np.ndarray

_COV_ESTIMATE_DRAWS = 100_000
_COV_ESTIMATE_SEED = 0x5EED_C0D

__all__ = [
    "Domain",
    "BaseDistribution",
    "DistributionMap",
    "LocationScaleMap",
    "GaussianScaleMap",
    "BernoulliLinearMap",
    "CountingMap",
    "point_mass_map",
    "gaussian_location_map",
    "sensitivity_bound",
    "wasserstein_upper_bound",
    "scale_form_matrix",
]


def as_theta(theta, d: int | None = None) -> Array:
    """Validate a parameter vector: 1-d, finite, optionally of length d."""
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.ndim != 1:
        raise ConfigurationError(f"theta must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("theta has non-finite entries")
    if d is not None and arr.shape[0] != d:
        raise ConfigurationError(f"theta has dimension {arr.shape[0]}, expected {d}")
    return arr


class Domain:
    """Feasible set: closed L2 ball of radius R, optionally cut to theta >= 0."""

    def __init__(self, radius: float, nonnegative: bool = False):
        radius = float(radius)
        if not radius > 0:
            raise ConfigurationError(f"domain radius must be positive, got {radius}")
        self.radius = radius
        self.nonnegative = nonnegative

    def project(self, theta) -> Array:
        theta = np.asarray(theta, dtype=float)
        if self.nonnegative:
            theta = np.maximum(theta, 0.0)
        sq = float(theta @ theta)
        if sq > self.radius * self.radius:
            theta = theta * (self.radius / np.sqrt(sq))
        return theta

    def contains(self, theta, slack: float = 1e-9) -> bool:
        theta = np.asarray(theta, dtype=float)
        if self.nonnegative and np.any(theta < -slack):
            return False
        return float(np.linalg.norm(theta)) <= self.radius + slack

    def __repr__(self):
        tail = ", nonnegative=True" if self.nonnegative else ""
        return f"Domain(radius={self.radius}{tail})"


def _check_psd(mat: Array, what: str, tol: float = 1e-10) -> Array:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DomainError(f"{what} must be a square matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-8):
        raise DomainError(f"{what} must be symmetric")
    eigvals = np.linalg.eigvalsh(mat)
    if eigvals.min() < -tol * max(1.0, eigvals.max(initial=1.0)):
        raise DomainError(f"{what} is not positive semidefinite (min eigenvalue {eigvals.min():.3e})")
    return mat


def _psd_factor(cov: Array) -> Array:
    """Square root L with L L^T = cov, valid for singular PSD matrices."""
    eigvals, eigvecs = np.linalg.eigh(cov)
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


class BaseDistribution:
    """Fixed base distribution for z0 (zero-mean by convention for clean moment tests).

    Kinds: gaussian(mean, cov), empirical(points), degenerate(point), and
    custom(m, sampler) for scenario-specific generative bases. The covariance
    is analytic where the kind allows it and otherwise estimated once from a
    fixed internal stream; `covariance_source` records which one applies.
    """

    def __init__(self, kind: str, m: int, *, mean=None, cov=None, points=None,
                 point=None, sampler=None, subgaussian_param=None):
        self.kind = kind
        self.m = int(m)
        self._mean = None if mean is None else np.asarray(mean, dtype=float)
        self._cov = None if cov is None else np.asarray(cov, dtype=float)
        self._points = points
        self._point = point
        self._sampler = sampler
        self.subgaussian_param = subgaussian_param
        self._factor = _psd_factor(self._cov) if kind == "gaussian" else None
        self._estimated = False

    @classmethod
    def gaussian(cls, mean, cov, subgaussian_param=None) -> "BaseDistribution":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = _check_psd(np.atleast_2d(np.asarray(cov, dtype=float)), "gaussian covariance")
        if cov.shape[0] != mean.shape[0]:
            raise ConfigurationError("gaussian mean and covariance dimensions differ")
        return cls("gaussian", mean.shape[0], mean=mean, cov=cov,
                   subgaussian_param=subgaussian_param)

    @classmethod
    def empirical(cls, points) -> "BaseDistribution":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] == 0:
            raise ConfigurationError("empirical base distribution needs at least one point")
        mean = points.mean(axis=0)
        cov = np.cov(points, rowvar=False, ddof=0).reshape(points.shape[1], points.shape[1])
        return cls("empirical", points.shape[1], mean=mean, cov=cov, points=points)

    @classmethod
    def degenerate(cls, point) -> "BaseDistribution":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        m = point.shape[0]
        return cls("degenerate", m, mean=point, cov=np.zeros((m, m)), point=point)

    @classmethod
    def custom(cls, m: int, sampler: Callable[[int, np.random.Generator], Array],
               mean=None, cov=None, subgaussian_param=None) -> "BaseDistribution":
        return cls("custom", m, mean=mean, cov=cov, sampler=sampler,
                   subgaussian_param=subgaussian_param)

    def draw(self, n: int, rng: np.random.Generator) -> Array:
        if self.kind == "gaussian":
            return rng.standard_normal((n, self.m)) @ self._factor.T + self._mean
        if self.kind == "empirical":
            idx = rng.integers(0, self._points.shape[0], size=n)
            return self._points[idx]
        if self.kind == "degenerate":
            return np.tile(self._point, (n, 1))
        out = np.asarray(self._sampler(n, rng), dtype=float)
        if out.shape != (n, self.m):
            raise ConfigurationError(
                f"custom sampler returned shape {out.shape}, expected {(n, self.m)}")
        return out

    def _estimate_moments(self):
        rng = np.random.default_rng(_COV_ESTIMATE_SEED)
        draws = self.draw(_COV_ESTIMATE_DRAWS, rng)
        if self._mean is None:
            self._mean = draws.mean(axis=0)
        if self._cov is None:
            self._cov = np.cov(draws, rowvar=False, ddof=1).reshape(self.m, self.m)
        self._estimated = True

    def mean_vector(self) -> Array:
        if self._mean is None:
            self._estimate_moments()
        return self._mean

    def covariance(self) -> Array:
        if self._cov is None:
            self._estimate_moments()
        return _check_psd(self._cov, "base covariance")

    @property
    def covariance_source(self) -> str:
        if self.kind == "custom" and (self._estimated or self._cov is None):
            return "estimated"
        return "analytic"


class DistributionMap:
    """Interface: theta in R^d -> sampler over instances in R^m."""

    d: int
    m: int

    def draw(self, theta: Array, n: int, rng: np.random.Generator) -> Array:
        """n draws from D(theta) using an externally managed generator."""
        raise NotImplementedError

    def draw_each(self, thetas: Array, rng: np.random.Generator) -> Array:
        """One draw per row of thetas; overridden where it vectorizes."""
        return np.vstack([self.draw(thetas[i], 1, rng) for i in range(thetas.shape[0])])

    def sample(self, theta, n: int, seed: int) -> Array:
        """n i.i.d. draws from D(theta), deterministic given seed; shape (n, m)."""
        if n < 1:
            raise ConfigurationError(f"sample size must be >= 1, got {n}")
        theta = as_theta(theta, self.d)
        return self.draw(theta, int(n), np.random.default_rng(seed))


class LocationScaleMap(DistributionMap):
    """z = (S0 + S(theta)) z0 + mu0 + M theta with linear S(.) and M."""

    def __init__(self, *, d: int, base: BaseDistribution, location=None,
                 scale_slices=None, base_scale=None, base_offset=None):
        self.d = int(d)
        self.base = base
        self.m = base.m
        if location is None:
            location = np.zeros((self.m, self.d))
        self.location = np.asarray(location, dtype=float)
        if self.location.shape != (self.m, self.d):
            raise ConfigurationError(
                f"location matrix has shape {self.location.shape}, expected {(self.m, self.d)}")
        if scale_slices is not None:
            scale_slices = np.asarray(scale_slices, dtype=float)
            if scale_slices.shape != (self.d, self.m, self.m):
                raise ConfigurationError(
                    f"scale slices have shape {scale_slices.shape}, "
                    f"expected {(self.d, self.m, self.m)}")
            if not scale_slices.any():
                scale_slices = None
        self.scale_slices = scale_slices
        if base_scale is None:
            base_scale = np.eye(self.m)
        self.base_scale = np.asarray(base_scale, dtype=float)
        if self.base_scale.shape != (self.m, self.m):
            raise ConfigurationError("base_scale must be m x m")
        if base_offset is None:
            base_offset = np.zeros(self.m)
        self.base_offset = np.asarray(base_offset, dtype=float)
        for arr, name in ((self.location, "location"), (self.base_scale, "base_scale"),
                          (self.base_offset, "base_offset")):
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} has non-finite entries")
        self._identity_base_scale = np.array_equal(self.base_scale, np.eye(self.m))

    @property
    def has_scale(self) -> bool:
        return self.scale_slices is not None

    def scale_at(self, theta: Array) -> Array:
        """S0 + S(theta)."""
        if self.scale_slices is None:
            return self.base_scale
        return self.base_scale + np.tensordot(theta, self.scale_slices, axes=(0, 0))

    def transform(self, z0: Array, theta: Array) -> Array:
        """Apply the location-scale transform to base draws (rows of z0)."""
        shift = self.base_offset + self.location @ theta
        if self.scale_slices is None and self._identity_base_scale:
            return z0 + shift
        return z0 @ self.scale_at(theta).T + shift

    def draw(self, theta, n, rng):
        return self.transform(self.base.draw(n, rng), theta)

    def draw_each(self, thetas, rng):
        thetas = np.asarray(thetas, dtype=float)
        n = thetas.shape[0]
        z0 = self.base.draw(n, rng)
        shift = self.base_offset + thetas @ self.location.T
        if self.scale_slices is None:
            if self._identity_base_scale:
                return z0 + shift
            return z0 @ self.base_scale.T + shift
        scaled = z0 @ self.base_scale.T
        scaled += np.einsum("nk,kab,nb->na", thetas, self.scale_slices, z0)
        return scaled + shift

    def mean_at(self, theta: Array) -> Array:
        """Mean of D(theta); equals mu0 + M theta for a zero-mean base."""
        theta = as_theta(theta, self.d)
        return self.scale_at(theta) @ self.base.mean_vector() + self.base_offset \
            + self.location @ theta


class GaussianScaleMap(LocationScaleMap):
    """D(theta) = Normal(mean, (eps * theta)^2) in one dimension (d = m = 1)."""

    def __init__(self, mean: float, eps: float):
        if not eps > 0:
            raise ConfigurationError(f"eps must be positive, got {eps}")
        self.scale_mean = float(mean)
        self.eps = float(eps)
        super().__init__(
            d=1,
            base=BaseDistribution.gaussian([0.0], [[1.0]], subgaussian_param=1.0),
            location=np.zeros((1, 1)),
            scale_slices=np.array([[[self.eps]]]),
            base_scale=np.zeros((1, 1)),
            base_offset=np.array([self.scale_mean]),
        )


class BernoulliLinearMap(DistributionMap):
    """Binary outcome with success probability a + w^T theta, linear in theta.

    The probability range is validated eagerly over the whole ball: a linear
    function on a ball is extremal at theta = +/- R w / ||w||.
    """

    def __init__(self, intercept: float, weights, domain: Domain):
        self.intercept = float(intercept)
        self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
        self.domain = domain
        self.d = self.weights.shape[0]
        self.m = 1
        reach = domain.radius * float(np.linalg.norm(self.weights))
        lo, hi = self.intercept - reach, self.intercept + reach
        if lo < -1e-12 or hi > 1 + 1e-12:
            raise DomainError(
                f"success probability spans [{lo:.4f}, {hi:.4f}] over the domain, "
                "outside [0, 1]")

    def success_probability(self, theta) -> float:
        theta = as_theta(theta, self.d)
        p = self.intercept + float(self.weights @ theta)
        if p < -1e-12 or p > 1 + 1e-12:
            raise DomainError(f"success probability {p:.6f} outside [0, 1] at this theta")
        return min(max(p, 0.0), 1.0)

    def draw(self, theta, n, rng):
        p = self.success_probability(theta)
        return (rng.random((n, 1)) < p).astype(float)

    def draw_each(self, thetas, rng):
        probs = np.array([self.success_probability(t) for t in np.asarray(thetas, dtype=float)])
        return (rng.random((len(probs), 1)) < probs[:, None]).astype(float)


class CountingMap(DistributionMap):
    """Wrapper that counts every sampled instance; used for budget audits.

    Not thread-safe: each algorithm run is sequential by construction, so a
    per-run wrapper sees a single thread.
    """

    def __init__(self, inner: DistributionMap):
        self.inner = inner
        self.d = inner.d
        self.m = inner.m
        self.count = 0

    def draw(self, theta, n, rng):
        self.count += int(n)
        return self.inner.draw(theta, n, rng)

    def draw_each(self, thetas, rng):
        self.count += int(np.asarray(thetas).shape[0])
        return self.inner.draw_each(thetas, rng)


def point_mass_map(location) -> LocationScaleMap:
    """D(theta) = point mass at (location @ theta)."""
    location = np.atleast_2d(np.asarray(location, dtype=float))
    m, d = location.shape
    return LocationScaleMap(
        d=d,
        base=BaseDistribution.degenerate(np.zeros(m)),
        location=location,
        base_scale=np.zeros((m, m)),
    )


def gaussian_location_map(location, noise_cov=None, offset=None) -> LocationScaleMap:
    """Pure location family z = z0 + mu0 + M theta with Gaussian base noise."""
    location = np.atleast_2d(np.asarray(location, dtype=float))
    m, d = location.shape
    if noise_cov is None:
        noise_cov = np.eye(m)
    base = BaseDistribution.gaussian(np.zeros(m), noise_cov)
    return LocationScaleMap(d=d, base=base, location=location, base_offset=offset)


def scale_form_matrix(map: LocationScaleMap) -> Array:
    """d x d PSD matrix F with theta^T F theta = ||cov(z0)^{1/2} S(theta)^T||_F^2.

    Reduces the extremal Frobenius norms over the unit sphere to an exact
    eigenvalue problem: F_kl = Tr(S_k cov(z0) S_l^T).
    """
    if map.scale_slices is None:
        return np.zeros((map.d, map.d))
    cov = map.base.covariance()
    return np.einsum("kab,bc,lac->kl", map.scale_slices, cov, map.scale_slices)


def _location_singular_values(map: LocationScaleMap) -> Array:
    if not map.location.any():
        return np.zeros(min(map.m, map.d))
    return np.linalg.svd(map.location, compute_uv=False)


def sigma_extremes(map: LocationScaleMap) -> dict:
    """Extremal values over the unit sphere of ||M theta|| and ||cov^{1/2} S(theta)^T||_F."""
    svals = _location_singular_values(map)
    sigma_max_mu = float(svals[0]) if svals.size else 0.0
    sigma_min_mu = float(svals[-1]) if (svals.size and map.m >= map.d) else 0.0
    form = scale_form_matrix(map)
    eigvals = np.clip(np.linalg.eigvalsh(form), 0.0, None)
    return {
        "sigma_max_mu": sigma_max_mu,
        "sigma_min_mu": sigma_min_mu,
        "sigma_max_scale": float(np.sqrt(eigvals[-1])),
        "sigma_min_scale": float(np.sqrt(eigvals[0])),
    }


def sensitivity_bound(map: LocationScaleMap) -> float:
    """Upper bound on the Wasserstein-Lipschitz sensitivity of a location-scale map.

    Returns sqrt(sigma_max(M)^2 + sigma_max(S)^2); any two parameter vectors
    satisfy W1(D(theta), D(theta')) <= bound * ||theta - theta'||.
    """
    ext = sigma_extremes(map)
    return float(np.sqrt(ext["sigma_max_mu"] ** 2 + ext["sigma_max_scale"] ** 2))


def wasserstein_upper_bound(map: LocationScaleMap, theta, theta_prime, n: int,
                            seed: int) -> float:
    """Monte-Carlo coupling bound E||S(theta - theta') z0 + M (theta - theta')||.

    Exact (no sampling) when the map has no scale component or the arguments
    coincide; upper-bounds W1(D(theta), D(theta')).
    """
    if n < 1:
        raise ConfigurationError(f"need n >= 1 base draws, got {n}")
    theta = as_theta(theta, map.d)
    theta_prime = as_theta(theta_prime, map.d)
    delta = theta - theta_prime
    if not delta.any():
        return 0.0
    shift = map.location @ delta
    if map.scale_slices is None:
        return float(np.linalg.norm(shift))
    scale_delta = np.tensordot(delta, map.scale_slices, axes=(0, 0))
    z0 = map.base.draw(int(n), np.random.default_rng(seed))
    return float(np.linalg.norm(z0 @ scale_delta.T + shift, axis=1).mean())
