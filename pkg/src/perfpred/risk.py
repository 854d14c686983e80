"""Performative risk evaluation and convexity certificates.

PR(theta) is the expected loss on the distribution theta itself induces;
DPR(theta, theta') decouples the sampling and evaluation arguments. Both are
estimated by Monte Carlo with reported standard errors. Certificates state a
lambda such that PR(theta) - (lambda/2)||theta||^2 is convex; a negative
lambda only fails to certify, it never certifies non-convexity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, UnsupportedScenarioError
from .maps import Domain, DistributionMap, as_theta
from .losses import LossSpec
from .seeding import derive_seed

Array = np.ndarray

__all__ = [
    "RiskEstimate",
    "ConvexityCertificate",
    "estimate_pr",
    "estimate_dpr",
    "certify_general",
    "certify_location_scale",
    "ChordProbe",
    "curvature_probes",
    "empirical_lambda",
    "closed_form_reference",
    "closed_form_optimum",
]


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    std_error: float
    n: int
    seed: int


def estimate_dpr(map: DistributionMap, loss: LossSpec, theta_deploy, theta_eval,
                 n: int, seed: int) -> RiskEstimate:
    """Decoupled performative risk: deploy theta_deploy, evaluate theta_eval."""
    if n < 1:
        raise ConfigurationError(f"need n >= 1 evaluation draws, got {n}")
    theta_deploy = as_theta(theta_deploy, map.d)
    theta_eval = as_theta(theta_eval, map.d)
    Z = map.sample(theta_deploy, n, seed)
    vals = np.asarray(loss.batch_value(Z, theta_eval), dtype=float)
    se = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return RiskEstimate(mean=float(vals.mean()), std_error=se, n=int(n), seed=int(seed))


def estimate_pr(map: DistributionMap, loss: LossSpec, theta, n: int, seed: int) -> RiskEstimate:
    """Performative risk PR(theta); seed-matched with estimate_dpr(theta, theta)."""
    return estimate_dpr(map, loss, theta, theta, n, seed)


@dataclass(frozen=True)
class ConvexityCertificate:
    lam: float
    rule: str  # "general" | "location_scale"
    inputs: dict

    @property
    def verdict(self) -> str:
        if self.lam > 0:
            return "strongly_convex"
        if self.lam == 0:
            return "convex"
        return "inconclusive"

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "rule": self.rule, "verdict": self.verdict,
                "inputs": dict(self.inputs)}


def certify_general(gamma: float, beta: float, eps: float) -> ConvexityCertificate:
    """lambda = gamma - 2 * eps * beta under smoothness, strong convexity,
    sensitivity, and mixture dominance (asserted by the caller)."""
    for name, v in (("gamma", gamma), ("beta", beta), ("eps", eps)):
        if v < 0:
            raise DomainError(f"{name} must be nonnegative, got {v}")
    lam = gamma - 2.0 * eps * beta
    return ConvexityCertificate(lam=float(lam), rule="general",
                                inputs={"gamma": gamma, "beta": beta, "eps": eps})


def certify_location_scale(gamma: float, beta: float, gamma_z: float, eps: float,
                           sigma_min_mu: float, sigma_min_scale: float) -> ConvexityCertificate:
    """Location-scale certificate:

    lambda = max{ gamma - beta^2/gamma_z  (when gamma_z > 0),
                  gamma - 2*eps*beta + gamma_z*(sigma_min_mu^2 + sigma_min_scale^2) }.
    """
    inputs = {"gamma": gamma, "beta": beta, "gamma_z": gamma_z, "eps": eps,
              "sigma_min_mu": sigma_min_mu, "sigma_min_scale": sigma_min_scale}
    for name, v in inputs.items():
        if v < 0:
            raise DomainError(f"{name} must be nonnegative, got {v}")
    candidates = [gamma - 2.0 * eps * beta + gamma_z * (sigma_min_mu ** 2 + sigma_min_scale ** 2)]
    if gamma_z > 0:
        candidates.append(gamma - beta ** 2 / gamma_z)
    return ConvexityCertificate(lam=float(max(candidates)), rule="location_scale",
                                inputs=inputs)


@dataclass(frozen=True)
class ChordProbe:
    """One second-difference curvature probe along a random chord."""
    lambda_hat: float
    segment_length: float
    max_std_error: float


def _uniform_in_domain(domain: Domain, d: int, rng: np.random.Generator) -> Array:
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    point = domain.radius * rng.random() ** (1.0 / d) * direction
    if domain.nonnegative:
        point = np.abs(point)
    return point


def curvature_probes(map: DistributionMap, loss: LossSpec, domain: Domain,
                     n_per_eval: int, n_directions: int, seed: int,
                     min_separation: float = 1e-8) -> list[ChordProbe]:
    """Second differences of PR along random chords of the domain.

    Each chord (a, b) yields 4*(PR(a) + PR(b) - 2*PR(mid)) / ||a - b||^2, the
    exact curvature for quadratic PR. Degenerate chords are resampled.
    """
    rng = np.random.default_rng(derive_seed(seed, "chords"))
    probes = []
    for k in range(n_directions):
        for _ in range(1000):
            a = _uniform_in_domain(domain, map.d, rng)
            b = _uniform_in_domain(domain, map.d, rng)
            gap = float(np.linalg.norm(a - b))
            if gap >= max(min_separation, 1e-8):
                break
        else:
            raise ConfigurationError("could not sample a non-degenerate chord")
        mid = 0.5 * (a + b)
        est_a = estimate_pr(map, loss, a, n_per_eval, derive_seed(seed, "pr", k, 0))
        est_b = estimate_pr(map, loss, b, n_per_eval, derive_seed(seed, "pr", k, 1))
        est_m = estimate_pr(map, loss, mid, n_per_eval, derive_seed(seed, "pr", k, 2))
        lam_hat = 4.0 * (est_a.mean + est_b.mean - 2.0 * est_m.mean) / gap ** 2
        probes.append(ChordProbe(
            lambda_hat=float(lam_hat),
            segment_length=gap,
            max_std_error=max(est_a.std_error, est_b.std_error, est_m.std_error),
        ))
    return probes


def empirical_lambda(map: DistributionMap, loss: LossSpec, domain: Domain,
                     n_per_eval: int, n_directions: int, seed: int,
                     min_separation: float = 1e-8) -> float:
    """Minimum chord curvature of PR over random segments: an empirical
    counterpart to the certificate lambda (one-dimensional restrictions)."""
    probes = curvature_probes(map, loss, domain, n_per_eval, n_directions, seed,
                              min_separation=min_separation)
    return min(p.lambda_hat for p in probes)


def closed_form_reference(scenario, theta) -> float:
    """Exact PR(theta) for scenarios with an analytic risk."""
    refs = scenario.references
    if refs is None or refs.pr is None:
        raise UnsupportedScenarioError(
            f"scenario {scenario.scenario_id!r} has no closed-form risk")
    return float(refs.pr(np.asarray(theta, dtype=float)))


def closed_form_optimum(scenario) -> Array:
    """Exact performative optimum for scenarios that declare one."""
    refs = scenario.references
    if refs is None or refs.theta_po is None:
        raise UnsupportedScenarioError(
            f"scenario {scenario.scenario_id!r} has no closed-form optimum")
    return np.asarray(refs.theta_po, dtype=float)
