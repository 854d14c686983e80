import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from perfpred.errors import ConfigurationError, DomainError
from perfpred.maps import (BaseDistribution, BernoulliLinearMap, CountingMap,
                           Domain, GaussianScaleMap, LocationScaleMap,
                           gaussian_location_map, point_mass_map,
                           sensitivity_bound, wasserstein_upper_bound)


def random_location_scale_map(rng, d=3, m=2):
    location = rng.standard_normal((m, d))
    slices = 0.3 * rng.standard_normal((d, m, m))
    cov = rng.standard_normal((m, m))
    cov = cov @ cov.T + 0.5 * np.eye(m)
    base = BaseDistribution.gaussian(np.zeros(m), cov)
    return LocationScaleMap(d=d, base=base, location=location, scale_slices=slices)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_point_mass_samples_are_exact():
    map = point_mass_map(0.5 * np.eye(2))
    Z = map.sample([1.0, 0.0], 7, seed=3)
    assert Z.shape == (7, 2)
    assert_array_equal(Z, np.tile([0.5, 0.0], (7, 1)))


def test_gaussian_scale_moments_match():
    map = GaussianScaleMap(mean=1.0, eps=1.0)
    Z = map.sample([2.0], 100_000, seed=11)
    assert abs(Z.mean() - 1.0) < 0.05
    assert abs(Z.var(ddof=1) - 4.0) < 0.2


def test_bernoulli_mean_matches_success_probability():
    map = BernoulliLinearMap(0.5, [0.1], Domain(4.0))
    Z = map.sample([1.0], 100_000, seed=5)
    assert set(np.unique(Z)) <= {0.0, 1.0}
    assert abs(Z.mean() - 0.6) < 0.01


def test_bernoulli_probability_validated_over_whole_ball():
    with pytest.raises(DomainError):
        BernoulliLinearMap(0.5, [0.2], Domain(10.0))


def test_bernoulli_runtime_probability_guard():
    map = BernoulliLinearMap(0.5, [0.1], Domain(4.0))
    with pytest.raises(DomainError):
        map.success_probability([50.0])


def test_sample_is_deterministic_given_seed():
    map = random_location_scale_map(np.random.default_rng(0))
    theta = np.array([0.3, -0.7, 1.1])
    assert_array_equal(map.sample(theta, 50, seed=42), map.sample(theta, 50, seed=42))
    assert not np.array_equal(map.sample(theta, 50, seed=42), map.sample(theta, 50, seed=43))


def test_sample_validates_arguments():
    map = point_mass_map(np.eye(2))
    with pytest.raises(ConfigurationError):
        map.sample([1.0, 0.0], 0, seed=1)
    with pytest.raises(ConfigurationError):
        map.sample([1.0, 0.0, 2.0], 5, seed=1)
    with pytest.raises(ConfigurationError):
        map.sample([np.nan, 0.0], 5, seed=1)


def test_location_scale_sampling_identity_moment_match():
    # draws must equal (S0 + S(theta)) z0 + mu0 + M theta in distribution
    rng = np.random.default_rng(1)
    map = random_location_scale_map(rng)
    theta = np.array([0.5, -0.2, 0.9])
    n = 200_000
    Z = map.sample(theta, n, seed=7)
    expected_mean = map.mean_at(theta)
    A = map.scale_at(theta)
    expected_cov = A @ map.base.covariance() @ A.T
    tol = 4.0 * np.sqrt(np.diag(expected_cov) / n)
    assert np.all(np.abs(Z.mean(axis=0) - expected_mean) < tol)
    assert_allclose(np.cov(Z, rowvar=False), expected_cov, atol=0.05)


def test_location_and_scale_maps_are_exactly_linear():
    map = random_location_scale_map(np.random.default_rng(2))
    theta, theta_prime = np.array([1.0, 2.0, -1.0]), np.array([-0.5, 0.3, 0.8])
    alpha = 0.3
    mix = alpha * theta + (1 - alpha) * theta_prime
    assert_allclose(map.location @ mix,
                    alpha * map.location @ theta + (1 - alpha) * map.location @ theta_prime,
                    rtol=1e-12)
    assert_allclose(map.scale_at(mix) - map.base_scale,
                    alpha * (map.scale_at(theta) - map.base_scale)
                    + (1 - alpha) * (map.scale_at(theta_prime) - map.base_scale),
                    rtol=1e-12, atol=1e-12)


def test_bernoulli_interpolation_equals_mixture_exactly():
    # success probability is linear in theta, so the interpolated distribution
    # IS the mixture of the endpoint distributions
    domain = Domain(2.0)
    map = BernoulliLinearMap(0.4, [0.05, -0.08], domain)
    rng = np.random.default_rng(3)
    for _ in range(25):
        theta = domain.project(rng.uniform(-2, 2, size=2))
        theta_prime = domain.project(rng.uniform(-2, 2, size=2))
        alpha = rng.uniform(0.1, 0.9)
        p_mix = map.success_probability(alpha * theta + (1 - alpha) * theta_prime)
        p_blend = (alpha * map.success_probability(theta)
                   + (1 - alpha) * map.success_probability(theta_prime))
        assert_allclose(p_mix, p_blend, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# sensitivity and Wasserstein bounds
# ---------------------------------------------------------------------------

def test_sensitivity_bound_scaled_identity_location():
    map = point_mass_map(0.7 * np.eye(3))
    assert_allclose(sensitivity_bound(map), 0.7, rtol=1e-12)


def test_sensitivity_bound_gaussian_scale():
    assert_allclose(sensitivity_bound(GaussianScaleMap(0.0, 1.0)), 1.0, rtol=1e-12)


def test_sensitivity_bound_diagonal_location_takes_largest():
    map = gaussian_location_map(np.diag([1.0, 2.0]))
    assert_allclose(sensitivity_bound(map), 2.0, rtol=1e-12)


def test_wasserstein_bound_zero_for_equal_arguments():
    map = random_location_scale_map(np.random.default_rng(4))
    theta = np.array([0.1, 0.2, 0.3])
    assert wasserstein_upper_bound(map, theta, theta, 100, seed=0) == 0.0


def test_wasserstein_bound_pure_location_is_deterministic():
    map = gaussian_location_map(0.5 * np.eye(2))
    value = wasserstein_upper_bound(map, [1.0, 0.0], [0.0, 0.0], 1, seed=0)
    assert_allclose(value, 0.5, rtol=1e-12)


def test_wasserstein_bound_scale_family_half_normal_mean():
    # |z0| for standard normal z0 has mean sqrt(2/pi)
    map = GaussianScaleMap(0.0, 1.0)
    value = wasserstein_upper_bound(map, [1.0], [0.0], 100_000, seed=9)
    assert abs(value - np.sqrt(2.0 / np.pi)) < 0.01


def test_wasserstein_bound_requires_draws():
    map = GaussianScaleMap(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        wasserstein_upper_bound(map, [1.0], [0.0], 0, seed=0)


def test_sensitivity_bound_dominates_wasserstein_probes():
    rng = np.random.default_rng(5)
    map = random_location_scale_map(rng)
    bound = sensitivity_bound(map)
    domain = Domain(2.0)
    for k in range(100):
        theta = domain.project(rng.uniform(-2, 2, size=3))
        theta_prime = domain.project(rng.uniform(-2, 2, size=3))
        w = wasserstein_upper_bound(map, theta, theta_prime, 4000, seed=100 + k)
        gap = np.linalg.norm(theta - theta_prime)
        assert w <= bound * gap + 0.05 * max(gap, 1.0)


# ---------------------------------------------------------------------------
# base distributions, domain, counting wrapper
# ---------------------------------------------------------------------------

def test_base_distribution_validation():
    with pytest.raises(ConfigurationError):
        BaseDistribution.empirical(np.zeros((0, 2)))
    with pytest.raises(DomainError):
        BaseDistribution.gaussian([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])  # indefinite


def test_empirical_base_draws_from_points():
    points = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, -1.0]])
    base = BaseDistribution.empirical(points)
    draws = base.draw(1000, np.random.default_rng(0))
    assert all(tuple(row) in {tuple(p) for p in points} for row in draws)


def test_custom_base_estimates_moments_when_not_given():
    base = BaseDistribution.custom(1, lambda n, rng: rng.standard_normal((n, 1)))
    assert base.covariance_source == "estimated"
    assert_allclose(base.covariance()[0, 0], 1.0, atol=0.02)
    gaussian = BaseDistribution.gaussian([0.0], [[1.0]])
    assert gaussian.covariance_source == "analytic"


def test_domain_projection():
    domain = Domain(2.0)
    assert_allclose(domain.project([3.0, 4.0]), [1.2, 1.6])
    assert_array_equal(domain.project([0.5, 0.5]), [0.5, 0.5])
    ray = Domain(2.0, nonnegative=True)
    assert_allclose(ray.project([-1.0, 4.0]), [0.0, 2.0])
    assert domain.contains([2.0, 0.0]) and not domain.contains([2.1, 0.0])


def test_counting_map_counts_every_draw():
    counter = CountingMap(point_mass_map(np.eye(2)))
    counter.sample([1.0, 0.0], 10, seed=0)
    counter.sample([0.0, 1.0], 5, seed=1)
    counter.draw_each(np.zeros((4, 2)), np.random.default_rng(0))
    assert counter.count == 19
