import numpy as np
import pytest
from numpy.testing import assert_allclose

from perfpred.errors import ConfigurationError, DomainError, UnsupportedScenarioError
from perfpred.losses import squared_distance_loss, squared_loss
from perfpred.maps import (BaseDistribution, Domain, GaussianScaleMap,
                           LocationScaleMap, gaussian_location_map, point_mass_map)
from perfpred.risk import (certify_general, certify_location_scale,
                           closed_form_optimum, closed_form_reference,
                           curvature_probes, empirical_lambda, estimate_dpr,
                           estimate_pr)
from perfpred.scenarios import (gaussian_scale_scenario, quadratic_scenario,
                                strategic_classification_scenario)


# ---------------------------------------------------------------------------
# PR / DPR estimation
# ---------------------------------------------------------------------------

def test_pr_quadratic_point_mass_is_exact():
    # PR(theta) = (gamma/2 - eps*beta) ||theta||^2; point mass => zero MC error
    scenario = quadratic_scenario(gamma=2.0, beta=1.0, eps=0.5)
    est = estimate_pr(scenario.map, scenario.loss, [1.0, 0.0], 100, seed=0)
    assert est.std_error == 0.0
    assert_allclose(est.mean, 0.5, rtol=1e-12)


def test_pr_gaussian_location_matches_analytic_value():
    # z ~ N(eps*theta, 1), loss 0.5 (z - theta)^2:
    # E 0.5 (z - theta)^2 = 0.5 ((eps*theta - theta)^2 + Var z) = 0.5 (9 + 1) = 5
    map = gaussian_location_map(np.array([[2.0]]))
    loss = squared_distance_loss(1)
    est = estimate_pr(map, loss, [3.0], 100_000, seed=1)
    assert abs(est.mean - 5.0) < 5.0 * est.std_error
    assert est.std_error < 0.05


def test_pr_zero_for_perfectly_fit_deterministic_data():
    # static x = 1, label y = theta: residual vanishes at the deployed theta
    map = LocationScaleMap(d=1, base=BaseDistribution.degenerate([1.0, 0.0]),
                           location=np.array([[0.0], [1.0]]))
    loss = squared_loss(1)
    est = estimate_pr(map, loss, [0.7], 50, seed=2)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_pr_rejects_zero_draws():
    scenario = quadratic_scenario()
    with pytest.raises(ConfigurationError):
        estimate_pr(scenario.map, scenario.loss, [1.0, 0.0], 0, seed=0)


def test_dpr_equals_pr_when_arguments_match():
    map = GaussianScaleMap(1.0, 1.0)
    loss = squared_distance_loss(1)
    pr = estimate_pr(map, loss, [0.8], 5000, seed=3)
    dpr = estimate_dpr(map, loss, [0.8], [0.8], 5000, seed=3)
    assert pr == dpr  # seed-matched: identical draws, identical estimate


def test_dpr_quadratic_zero_at_zero_evaluation_point():
    scenario = quadratic_scenario(gamma=2.0, beta=1.0, eps=0.5)
    est = estimate_dpr(scenario.map, scenario.loss, [1.0, 0.0], [0.0, 0.0], 100, seed=4)
    assert est.mean == 0.0


def test_dpr_gaussian_location_second_moment():
    # deploy 2, evaluate 0: E 0.5 z^2 with z ~ N(2, 1) is 0.5 (4 + 1) = 2.5
    map = gaussian_location_map(np.array([[1.0]]))
    loss = squared_distance_loss(1)
    est = estimate_dpr(map, loss, [2.0], [0.0], 100_000, seed=5)
    assert abs(est.mean - 2.5) < 5.0 * est.std_error


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def test_certify_general_formula_and_verdicts():
    cert = certify_general(2.0, 1.0, 0.5)
    assert cert.lam == 1.0 and cert.verdict == "strongly_convex"
    cert = certify_general(2.0, 1.0, 1.0)  # the sharp threshold eps = gamma/(2 beta)
    assert cert.lam == 0.0 and cert.verdict == "convex"
    cert = certify_general(2.0, 1.0, 2.0)
    assert cert.lam == -2.0 and cert.verdict == "inconclusive"


def test_certify_general_rejects_negative_inputs():
    with pytest.raises(DomainError):
        certify_general(-1.0, 1.0, 0.5)


@pytest.mark.parametrize("eps", [0.25, 1.0, 3.0])
def test_certify_location_scale_gaussian_scale_family(eps):
    # gamma = beta = gamma_z = 1 with scale floor eps: lambda = (eps - 1)^2 >= 0
    cert = certify_location_scale(1.0, 1.0, 1.0, eps, 0.0, eps)
    assert_allclose(cert.lam, (eps - 1.0) ** 2, rtol=1e-12)
    assert cert.verdict in ("convex", "strongly_convex")


@pytest.mark.parametrize("eps", [0.25, 1.0, 3.0])
def test_certify_location_scale_location_floor_variant(eps):
    cert = certify_location_scale(1.0, 1.0, 1.0, eps, eps, 0.0)
    assert_allclose(cert.lam, (eps - 1.0) ** 2, rtol=1e-12)


def test_certify_location_scale_first_branch_can_win():
    # strong convexity in z beats a large sensitivity: gamma - beta^2/gamma_z = 1
    cert = certify_location_scale(2.0, 1.0, 1.0, 5.0, 0.0, 0.0)
    assert_allclose(cert.lam, 1.0, rtol=1e-12)
    assert cert.verdict == "strongly_convex"


def test_certify_location_scale_skips_first_branch_without_gamma_z():
    cert = certify_location_scale(2.0, 1.0, 0.0, 0.5, 0.0, 0.0)
    assert_allclose(cert.lam, 1.0, rtol=1e-12)


# ---------------------------------------------------------------------------
# empirical curvature probes
# ---------------------------------------------------------------------------

def test_empirical_lambda_exact_on_strongly_convex_quadratic():
    scenario = quadratic_scenario(gamma=2.0, beta=1.0, eps=0.5)
    lam = empirical_lambda(scenario.map, scenario.loss, scenario.domain,
                           n_per_eval=4, n_directions=25, seed=0)
    assert_allclose(lam, 1.0, rtol=1e-9)


def test_empirical_lambda_exact_on_concave_quadratic():
    # PR = (0.5 - 2) ||theta||^2 = -1.5 ||theta||^2, curvature -3
    scenario = quadratic_scenario(gamma=1.0, beta=1.0, eps=2.0)
    lam = empirical_lambda(scenario.map, scenario.loss, scenario.domain,
                           n_per_eval=4, n_directions=25, seed=0)
    assert_allclose(lam, -3.0, rtol=1e-9)


def test_threshold_sharpness_sign_flip():
    # sign of the chord curvature flips exactly at eps = gamma/(2 beta)
    gamma, beta = 2.0, 1.0
    threshold = gamma / (2.0 * beta)
    for factor in (0.25, 0.5, 0.75, 1.25, 1.5):
        eps = factor * threshold
        scenario = quadratic_scenario(gamma=gamma, beta=beta, eps=eps)
        lam = empirical_lambda(scenario.map, scenario.loss, scenario.domain,
                               n_per_eval=4, n_directions=10, seed=1)
        assert np.sign(lam) == np.sign(gamma - 2.0 * eps * beta)


def test_empirical_lambda_gaussian_scale_matches_exact_curvature():
    # PR(theta) = 0.5 (eps^2 theta^2 + (mu - theta)^2) has curvature 1 + eps^2
    scenario = gaussian_scale_scenario(mu=1.0, eps=1.0)
    probes = curvature_probes(scenario.map, scenario.loss, scenario.domain,
                              n_per_eval=40_000, n_directions=30, seed=2,
                              min_separation=scenario.domain.radius)
    lam = min(p.lambda_hat for p in probes)
    tol = 6.0 * max(p.max_std_error for p in probes) * 4.0 \
        / min(p.segment_length for p in probes) ** 2
    assert abs(lam - 2.0) <= tol
    assert lam >= scenario.certificate().lam - tol


def test_empirical_lambda_resamples_degenerate_segments():
    scenario = quadratic_scenario()
    probes = curvature_probes(scenario.map, scenario.loss, scenario.domain,
                              n_per_eval=2, n_directions=50, seed=3)
    assert all(p.segment_length >= 1e-8 for p in probes)


# ---------------------------------------------------------------------------
# closed-form references
# ---------------------------------------------------------------------------

def test_closed_form_quadratic_boundary_optimum():
    # above the threshold the risk is concave: optimum on the boundary with
    # value (gamma/2 - eps*beta) R^2
    scenario = quadratic_scenario(gamma=2.0, beta=1.0, eps=1.5, radius=10.0)
    theta_po = closed_form_optimum(scenario)
    assert_allclose(np.linalg.norm(theta_po), 10.0)
    assert_allclose(scenario.references.pr_min, -50.0)
    assert_allclose(closed_form_reference(scenario, theta_po), -50.0)


def test_closed_form_gaussian_scale_optimum():
    scenario = gaussian_scale_scenario(mu=1.0, eps=1.0)
    assert_allclose(closed_form_optimum(scenario), [0.5])


def test_closed_form_unavailable_raises():
    scenario = strategic_classification_scenario(d=3, eps=0.1, seed=0)
    with pytest.raises(UnsupportedScenarioError):
        closed_form_reference(scenario, np.zeros(3))
    with pytest.raises(UnsupportedScenarioError):
        closed_form_optimum(scenario)


def test_suboptimality_is_nonnegative_at_probed_points():
    rng = np.random.default_rng(6)
    for scenario in (quadratic_scenario(eps=0.5), gaussian_scale_scenario()):
        d = scenario.map.d
        for k in range(10):
            theta = scenario.domain.project(rng.uniform(-1, 1, size=d))
            est = estimate_pr(scenario.map, scenario.loss, theta, 20_000, seed=7 + k)
            assert est.mean - scenario.references.pr_min >= -5.0 * est.std_error
