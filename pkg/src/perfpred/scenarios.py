"""Pre-built benchmark scenarios: a map, a loss, declared constants, and
closed-form reference quantities where they exist.

Constants that come from averaging over the data distribution (the effective
gamma/beta for data-dependent losses) live on the scenario, not the loss; the
metadata records how each was chosen so certificates are auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UnsupportedScenarioError
from .maps import (BaseDistribution, Domain, DistributionMap, GaussianScaleMap,
                   LocationScaleMap, point_mass_map, sigma_extremes)
from .losses import (LossConstants, LossSpec, quadratic_example_loss,
                     regularized_logistic_loss, squared_distance_loss, squared_loss)
from .risk import ConvexityCertificate, certify_general, certify_location_scale, estimate_pr
from .seeding import derive_seed, rng_from

Array = np.ndarray

__all__ = [
    "ScenarioConstants",
    "ScenarioReferences",
    "Scenario",
    "StrategicClassificationMap",
    "quadratic_scenario",
    "election_linreg_scenario",
    "gaussian_scale_scenario",
    "exponential_scale_scenario",
    "strategic_classification_scenario",
    "SCENARIO_BUILDERS",
    "make_scenario",
    "scenario_descriptions",
]


@dataclass(frozen=True)
class ScenarioConstants:
    gamma: float | None = None
    beta: float | None = None
    gamma_z: float | None = None
    eps: float | None = None


@dataclass(frozen=True)
class ScenarioReferences:
    theta_po: Array | None = None
    theta_ps: Array | None = None
    pr: Callable[[Array], float] | None = None
    pr_min: float | None = None


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    map: DistributionMap
    loss: LossSpec
    domain: Domain
    constants: ScenarioConstants
    references: ScenarioReferences | None = None
    metric: str = "suboptimality"   # "suboptimality" | "accuracy" | "pr"
    algorithm_defaults: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def certificate(self) -> ConvexityCertificate:
        """Convexity certificate from the declared constants; uses the
        location-scale rule when the map exposes that structure."""
        cs = self.constants
        if None in (cs.gamma, cs.beta, cs.eps):
            raise ConfigurationError(
                f"scenario {self.scenario_id!r} does not declare gamma/beta/eps")
        if isinstance(self.map, LocationScaleMap) and cs.gamma_z is not None:
            ext = sigma_extremes(self.map)
            return certify_location_scale(
                cs.gamma, cs.beta, cs.gamma_z, cs.eps,
                ext["sigma_min_mu"], ext["sigma_min_scale"])
        return certify_general(cs.gamma, cs.beta, cs.eps)

    def evaluate_metric(self, theta, n: int, seed: int) -> float:
        """Benchmark metric at theta: suboptimality gap (MC risk minus the
        closed-form optimum value), classification accuracy, or raw MC risk."""
        theta = np.asarray(theta, dtype=float)
        if self.metric == "accuracy":
            Z = self.map.sample(theta, n, seed)
            split = self.loss.split
            predictions = Z[:, :split] @ theta > 0
            return float(np.mean(predictions == (Z[:, split] > 0.5)))
        estimate = estimate_pr(self.map, self.loss, theta, n, seed)
        if self.metric == "pr":
            return estimate.mean
        refs = self.references
        if refs is None or refs.pr_min is None:
            raise UnsupportedScenarioError(
                f"scenario {self.scenario_id!r} lacks a closed-form optimum value; "
                "use the 'pr' metric")
        return estimate.mean - refs.pr_min


# ---------------------------------------------------------------------------
# Sharp-threshold quadratic construction (point-mass map, linear-in-z loss)
# ---------------------------------------------------------------------------

def quadratic_scenario(gamma: float = 2.0, beta: float = 1.0, eps: float = 0.5,
                       radius: float = 10.0, d: int = 2) -> Scenario:
    """Point mass at eps*theta with loss -beta theta^T z + (gamma/2)||theta||^2.

    PR(theta) = (gamma/2 - eps*beta) ||theta||^2 exactly: strongly convex below
    eps = gamma/(2 beta), strictly concave above it, with the origin the unique
    stable point for eps != gamma/beta.
    """
    if min(gamma, beta, eps, radius) <= 0:
        raise ConfigurationError("gamma, beta, eps, radius must all be positive")
    map = point_mass_map(eps * np.eye(d))
    loss = quadratic_example_loss(beta, gamma, d)
    domain = Domain(radius)
    coeff = 0.5 * gamma - eps * beta

    def pr(theta):
        theta = np.asarray(theta, dtype=float)
        return coeff * float(theta @ theta)

    if coeff >= 0:
        theta_po = np.zeros(d)
        pr_min = 0.0
    else:
        theta_po = radius * np.eye(d)[0]  # one representative boundary optimum
        pr_min = coeff * radius ** 2
    metadata = {"pr_coefficient": coeff}
    theta_ps = None
    if not math.isclose(eps, gamma / beta):
        theta_ps = np.zeros(d)
    else:
        metadata["flags"] = ["nonunique_stable_point"]

    return Scenario(
        scenario_id="quadratic",
        map=map, loss=loss, domain=domain,
        constants=ScenarioConstants(gamma=gamma, beta=beta, gamma_z=0.0, eps=eps),
        references=ScenarioReferences(theta_po=theta_po, theta_ps=theta_ps,
                                      pr=pr, pr_min=pr_min),
        metric="suboptimality",
        algorithm_defaults={
            "dfo": {"c0": 1.0, "batch": 20, "delta": 1.0},
            "rrm": {"n_per_iter": 1000},
        },
        metadata=metadata,
    )


# ---------------------------------------------------------------------------
# Performative linear regression (election vote-margin model)
# ---------------------------------------------------------------------------

def election_linreg_scenario(d: int = 20, eps: float = 0.01, seed: int = 0,
                             radius: float = 10.0, sigma_y: float = 0.1,
                             sigma_x_norm: float = 0.01) -> Scenario:
    """Performative labels: x ~ N(0, S_x), y = b^T x + mu^T theta + noise.

    S_x is a random symmetric PD matrix with operator norm sigma_x_norm, b is
    standard Gaussian, mu is uniform on the radius-eps sphere; the squared
    loss makes everything closed form:

        PR(theta)  = 0.5 [ (b-theta)^T S_x (b-theta) + (mu^T theta)^2 + sigma_y^2 ]
        theta_PO   = (S_x + mu mu^T)^{-1} S_x b,   theta_PS = b.
    """
    if d < 1:
        raise ConfigurationError(f"d must be >= 1, got {d}")
    rng = rng_from(seed, "election-linreg")
    A = rng.standard_normal((d, d))
    sigma_x = A @ A.T
    sigma_x *= sigma_x_norm / np.linalg.eigvalsh(sigma_x)[-1]
    b = rng.standard_normal(d)
    mu_dir = rng.standard_normal(d)
    mu = eps * mu_dir / np.linalg.norm(mu_dir)

    # joint Gaussian base over (x, y) at theta = 0
    cov = np.zeros((d + 1, d + 1))
    cov[:d, :d] = sigma_x
    cov[:d, d] = sigma_x @ b
    cov[d, :d] = sigma_x @ b
    cov[d, d] = float(b @ sigma_x @ b) + sigma_y ** 2
    location = np.zeros((d + 1, d))
    location[d] = mu
    map = LocationScaleMap(d=d, base=BaseDistribution.gaussian(np.zeros(d + 1), cov),
                           location=location)

    gamma_eff = float(np.linalg.eigvalsh(sigma_x)[0])
    beta_eff = float(np.sqrt(np.trace(sigma_x)))
    loss = squared_loss(d, gamma=gamma_eff, beta=beta_eff)

    theta_po = np.linalg.solve(sigma_x + np.outer(mu, mu), sigma_x @ b)

    def pr(theta):
        theta = np.asarray(theta, dtype=float)
        diff = b - theta
        return 0.5 * (float(diff @ sigma_x @ diff) + float(mu @ theta) ** 2
                      + sigma_y ** 2)

    return Scenario(
        scenario_id="election_linreg",
        map=map, loss=loss, domain=Domain(radius),
        constants=ScenarioConstants(gamma=gamma_eff, beta=beta_eff, gamma_z=1.0, eps=eps),
        references=ScenarioReferences(theta_po=theta_po, theta_ps=b.copy(),
                                      pr=pr, pr_min=pr(theta_po)),
        metric="suboptimality",
        algorithm_defaults={
            "dfo": {"c0": 0.01, "batch": 20, "delta": 5.0, "theta0": np.ones(d)},
            "greedy_sgd": {"schedule": {"kind": "inv_sqrt", "c": 1.0},
                           "theta0": np.ones(d)},
            "lazy_sgd": {"c": 1.0, "k0": 1.0, "theta0": np.ones(d)},
            "rrm": {"n_per_iter": 1000},
        },
        metadata={
            "seed": seed,
            "sigma_y": sigma_y,
            "sigma_x_norm": sigma_x_norm,
            "effective_gamma": "lambda_min(S_x)",
            "effective_beta": "sqrt(trace(S_x)), a bound on E||x||",
            "theta0": "all ones",
            "notes": "dfo perturbation radius reduced below the published value "
                     "so perturbed deployments stay inside the domain",
        },
    )


# ---------------------------------------------------------------------------
# One-dimensional scale families
# ---------------------------------------------------------------------------

def gaussian_scale_scenario(mu: float = 1.0, eps: float = 1.0,
                            radius: float = 2.0) -> Scenario:
    """D(theta) = N(mu, eps^2 theta^2) with the squared distance loss.

    The stable point mu ignores eps entirely while the optimum shrinks to
    mu / (1 + eps^2); PR(theta) = 0.5 (eps^2 theta^2 + (mu - theta)^2) is
    (1 + eps^2)-strongly convex for every eps.
    """
    map = GaussianScaleMap(mu, eps)
    loss = squared_distance_loss(1)
    if radius < max(abs(mu), abs(mu) / (1 + eps ** 2)):
        raise ConfigurationError("radius must cover the stable point and the optimum")

    def pr(theta):
        t = float(np.asarray(theta, dtype=float).reshape(()))
        return 0.5 * (eps ** 2 * t ** 2 + (mu - t) ** 2)

    theta_po = np.array([mu / (1.0 + eps ** 2)])
    return Scenario(
        scenario_id="gaussian_scale",
        map=map, loss=loss, domain=Domain(radius),
        constants=ScenarioConstants(gamma=1.0, beta=1.0, gamma_z=1.0, eps=eps),
        references=ScenarioReferences(theta_po=theta_po, theta_ps=np.array([mu]),
                                      pr=pr, pr_min=pr(theta_po)),
        metric="suboptimality",
        algorithm_defaults={
            "dfo": {"c0": 0.1, "batch": 20, "delta": 0.5},
            "rrm": {"n_per_iter": 1000},
        },
        metadata={"mu": mu, "eps": eps},
    )


def exponential_scale_scenario(x_scale: float = 1.0, radius: float = 5.0) -> Scenario:
    """Self-fulfilling prophecy: y | x ~ theta * x * Exp(1) with squared residual
    loss (y - theta x)^2 on the nonnegative ray.

    Every theta is performatively stable, yet PR(theta) = theta^2 E[x^2] has
    its unique optimum at 0. The default x ~ Exp(mean 1) gives E x = 1,
    E x^2 = 2. The residual is left unsquashed (no 1/2) so the risk matches
    theta^2 E[x^2] exactly.
    """
    if not x_scale > 0:
        raise ConfigurationError(f"x_scale must be positive, got {x_scale}")
    s = float(x_scale)
    ex2 = 2.0 * s * s

    def sampler(n, rng):
        x = rng.exponential(scale=s, size=n)
        e = rng.exponential(scale=1.0, size=n)
        return np.column_stack([x, x * e])

    # moments of (x, x*E): cov = [[s^2, s^2], [s^2, 3 s^2]]
    base = BaseDistribution.custom(
        2, sampler,
        mean=np.array([s, s]),
        cov=np.array([[s * s, s * s], [s * s, 3.0 * s * s]]),
    )
    slices = np.array([[[0.0, 0.0], [0.0, 1.0]]])
    map = LocationScaleMap(d=1, base=base, scale_slices=slices,
                           base_scale=np.array([[1.0, 0.0], [0.0, 0.0]]))

    def batch_value(Z, theta):
        r = Z[:, 1] - theta[0] * Z[:, 0]
        return r * r

    def batch_grad_theta(Z, theta):
        r = Z[:, 1] - theta[0] * Z[:, 0]
        return (-2.0 * r * Z[:, 0])[:, None]

    def batch_grad_z(Z, theta):
        r = Z[:, 1] - theta[0] * Z[:, 0]
        return np.column_stack([-2.0 * r * theta[0], 2.0 * r])

    loss = LossSpec(
        name="squared_residual_unscaled",
        d=1, m=2, split=1,
        batch_value=batch_value,
        batch_grad_theta=batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(gamma_z=2.0),
        z_probe_coords=(1,),
        theta_quadratic=True,
        params={"scale": 2.0},
    )

    def pr(theta):
        t = float(np.asarray(theta, dtype=float).reshape(()))
        return ex2 * t * t

    return Scenario(
        scenario_id="exponential_scale",
        map=map, loss=loss, domain=Domain(radius, nonnegative=True),
        constants=ScenarioConstants(gamma=2.0 * ex2, beta=2.0 * s, gamma_z=2.0,
                                    eps=float(np.sqrt(3.0) * s)),
        references=ScenarioReferences(theta_po=np.array([0.0]), theta_ps=None,
                                      pr=pr, pr_min=0.0),
        metric="suboptimality",
        algorithm_defaults={"rrm": {"n_per_iter": 1000}},
        metadata={
            "x_scale": s,
            "every_theta_stable": True,
            "effective_gamma": "2 E[x^2] (averaged over static x)",
            "effective_beta": "2 E[x]",
            "declared_eps": "sqrt(Var(x E)) = sqrt(3) * x_scale",
            "base_mean_nonzero": True,
        },
    )


# ---------------------------------------------------------------------------
# Strategic classification simulator (synthetic population)
# ---------------------------------------------------------------------------

class StrategicClassificationMap(LocationScaleMap):
    """Agents shift their strategic features by eps * B * theta before being
    observed: z = (x + eps * B theta, y), a pure location family over a
    synthetic logistic population (x ~ N(0, I), y ~ Bernoulli(sigmoid(x.b*)))."""

    def __init__(self, d: int, eps: float, strategic: Array, beta_star: Array):
        self.eps = float(eps)
        self.strategic = np.asarray(strategic, dtype=bool)
        self.beta_star = np.asarray(beta_star, dtype=float)
        n_features = int(d)

        def sampler(n, rng):
            x = rng.standard_normal((n, n_features))
            p = 1.0 / (1.0 + np.exp(-(x @ self.beta_star)))
            y = (rng.random(n) < p).astype(float)
            return np.column_stack([x, y])

        base = BaseDistribution.custom(n_features + 1, sampler)
        location = np.zeros((n_features + 1, n_features))
        location[:n_features, :] = self.eps * np.diag(self.strategic.astype(float))
        super().__init__(d=n_features, base=base, location=location)


def strategic_classification_scenario(d: int = 11, eps: float = 1e-4,
                                      reg: float = 0.002, seed: int = 0,
                                      radius: float = 10.0) -> Scenario:
    """Credit-scoring style strategic classification at desk scale.

    The population is synthetic (Gaussian features, logistic labels) rather
    than the published credit data, so accuracy values are comparable only
    qualitatively. B marks the first ceil(d/2) features as strategic. The
    effective smoothness bound is 1 + 0.25 * radius * sqrt(d) (sigmoid slope
    1/4 times typical feature and parameter scales).
    """
    if d < 1:
        raise ConfigurationError(f"d must be >= 1, got {d}")
    rng = rng_from(seed, "strategic-classification")
    beta_star = rng.standard_normal(d)
    strategic = np.zeros(d, dtype=bool)
    strategic[: (d + 1) // 2] = True
    map = StrategicClassificationMap(d, eps, strategic, beta_star)
    beta_eff = 1.0 + 0.25 * radius * float(np.sqrt(d))
    loss = regularized_logistic_loss(d, reg, beta=beta_eff)
    return Scenario(
        scenario_id="strategic_classification",
        map=map, loss=loss, domain=Domain(radius),
        constants=ScenarioConstants(gamma=reg, beta=beta_eff, gamma_z=0.0, eps=eps),
        references=None,
        metric="accuracy",
        algorithm_defaults={
            "dfo": {"c0": 1.0, "batch": 100, "delta": 1.0, "theta0": np.zeros(d)},
            "greedy_sgd": {"schedule": {"kind": "inv_sqrt", "c": 1.0},
                           "theta0": np.zeros(d)},
            "lazy_sgd": {"c": 1.0, "k0": 1.0, "theta0": np.zeros(d)},
            "rrm": {"n_per_iter": 1000},
        },
        metadata={
            "seed": seed,
            "strategic_features": int(strategic.sum()),
            "label_model": "Bernoulli(sigmoid(x . beta_star)), beta_star ~ N(0, I)",
            "deviation": "synthetic population stands in for the credit dataset",
            "effective_beta": "1 + 0.25 * radius * sqrt(d)",
            "theta0": "zeros",
        },
    )


SCENARIO_BUILDERS = {
    "quadratic": quadratic_scenario,
    "election_linreg": election_linreg_scenario,
    "gaussian_scale": gaussian_scale_scenario,
    "exponential_scale": exponential_scale_scenario,
    "strategic_classification": strategic_classification_scenario,
}


def make_scenario(scenario_id: str, **params) -> Scenario:
    try:
        builder = SCENARIO_BUILDERS[scenario_id]
    except KeyError:
        raise UnsupportedScenarioError(
            f"unknown scenario {scenario_id!r}; known: {sorted(SCENARIO_BUILDERS)}")
    return builder(**params)


def scenario_descriptions() -> dict[str, str]:
    return {name: (builder.__doc__ or "").strip().splitlines()[0]
            for name, builder in SCENARIO_BUILDERS.items()}
