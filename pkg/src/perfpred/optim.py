"""Optimization procedures compared in the benchmark.

Four deployment algorithms (two_stage, dfo, greedy_sgd, lazy_sgd) plus
repeated risk minimization, each returning a RunRecord whose trace is keyed
by cumulative samples consumed. Every recorded iterate is feasible, and a run
is fully determined by (algorithm, cfg, seed): each run owns a single derived
generator stream, so identical inputs reproduce identical traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .maps import Domain, DistributionMap, GaussianScaleMap, LocationScaleMap, as_theta
from .losses import LossSpec
from .seeding import derive_seed

Array = np.ndarray

__all__ = [
    "TracePoint",
    "RunRecord",
    "TwoStageEstimate",
    "GDConfig",
    "GDResult",
    "projected_gd",
    "make_schedule",
    "minimize_quadratic_objective",
    "two_stage",
    "fit_location_model",
    "sphere_gradient_estimate",
    "dfo",
    "greedy_sgd",
    "lazy_sgd",
    "rrm",
]


@dataclass(frozen=True)
class TracePoint:
    samples: int
    theta: Array
    pr_estimate: float | None = None


@dataclass
class RunRecord:
    """Per-deployment trace of one algorithm run."""

    algorithm: str
    hyperparameters: dict
    seed: int
    trace: list[TracePoint]
    final_theta: Array
    flags: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def samples_used(self) -> int:
        return self.trace[-1].samples if self.trace else 0

    def theta_at(self, budget: int) -> Array:
        """Latest iterate available after at most `budget` samples."""
        best = None
        for point in self.trace:
            if point.samples <= budget:
                best = point.theta
            else:
                break
        if best is None:
            raise ConfigurationError(
                f"no iterate recorded within a budget of {budget} samples")
        return best


def _project(domain: Domain | None, theta: Array) -> Array:
    return theta if domain is None else domain.project(theta)


# ---------------------------------------------------------------------------
# Projected gradient descent with backtracking (inner solver)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GDConfig:
    tol: float = 1e-10          # stop when per-step improvement drops below this
    max_iter: int = 100_000
    armijo: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    keep_history: bool = False


@dataclass
class GDResult:
    theta: Array
    value: float
    iterations: int
    converged: bool
    history: list[Array] = field(default_factory=list)


def projected_gd(value_fn: Callable[[Array], float], grad_fn: Callable[[Array], Array],
                 x0, domain: Domain | None, cfg: GDConfig | None = None) -> GDResult:
    """Minimize a smooth objective over the domain by projected gradient descent
    with an Armijo backtracking line search."""
    cfg = cfg or GDConfig()
    x = _project(domain, np.asarray(x0, dtype=float))
    fx = float(value_fn(x))
    step = cfg.initial_step
    history = [x.copy()] if cfg.keep_history else []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g = np.asarray(grad_fn(x), dtype=float)
        s = step
        while True:
            cand = _project(domain, x - s * g)
            fc = float(value_fn(cand))
            decrease = float(g @ (cand - x))
            if fc <= fx + cfg.armijo * decrease or s < 1e-20:
                break
            s *= cfg.shrink
        if s < 1e-20:
            converged = True  # no descent direction left at float precision
            break
        improvement = fx - fc
        x, fx = cand, fc
        if cfg.keep_history:
            history.append(x.copy())
        step = min(s / cfg.shrink, 1e6)
        if improvement < cfg.tol:
            converged = True
            break
    return GDResult(theta=x, value=fx, iterations=it, converged=converged,
                    history=history)


# ---------------------------------------------------------------------------
# Step-size schedules
# ---------------------------------------------------------------------------

def make_schedule(spec: dict | None, default_kind: str = "inv_sqrt",
                  default_c: float = 1.0) -> Callable[[int], float]:
    """Build eta_t from a schedule spec: {"kind": ..., "c": ..., "t0": ...}.

    Kinds: inv_sqrt (c/sqrt(t)), inv_t (c/t), offset_inv_t (c/(t0+t)),
    constant (c). t counts from 1.
    """
    spec = dict(spec or {})
    kind = spec.pop("kind", default_kind)
    c = float(spec.pop("c", default_c))
    t0 = float(spec.pop("t0", 1.0))
    if spec:
        raise ConfigurationError(f"unknown schedule keys: {sorted(spec)}")
    if kind == "inv_sqrt":
        return lambda t: c / np.sqrt(t)
    if kind == "inv_t":
        return lambda t: c / t
    if kind == "offset_inv_t":
        return lambda t: c / (t0 + t)
    if kind == "constant":
        return lambda t: c
    raise ConfigurationError(f"unknown schedule kind {kind!r}")


# ---------------------------------------------------------------------------
# Two-stage plug-in procedure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoStageEstimate:
    """Stage-one model of the distribution map."""

    mu_hat: Array            # (m, d) estimated location matrix
    intercept: Array         # (m,) estimated offset
    base_samples: Array      # (n, m) draws used by the plug-in objective
    ols_residual_norm: float  # ||X^T (Z - X W)||_F, normal-equation residual
    design_rank: int
    scale_hat: float | None = None  # 1-d scale slope when the scale branch ran


def fit_location_model(map: DistributionMap, domain: Domain, n: int,
                       rng: np.random.Generator):
    """Experiment design: deploy n standard-Gaussian parameters, observe one
    instance each, and fit the location matrix by OLS with an intercept column
    (the intercept absorbs the base offset)."""
    if n <= map.d:
        raise ConfigurationError(
            f"stage-one size n={n} must exceed the parameter dimension d={map.d}")
    thetas = rng.standard_normal((n, map.d))
    norms = np.linalg.norm(thetas, axis=1)
    over = norms > domain.radius
    if over.any():  # keep deployments feasible; OLS uses the deployed values
        thetas[over] *= (domain.radius / norms[over])[:, None]
    Z = map.draw_each(thetas, rng)
    X = np.hstack([thetas, np.ones((n, 1))])
    W, _, rank, _ = np.linalg.lstsq(X, Z, rcond=None)
    mu_hat = W[:map.d].T
    intercept = W[map.d]
    resid = float(np.linalg.norm(X.T @ (Z - X @ W)))
    return thetas, Z, mu_hat, intercept, resid, int(rank)


def _solve_psd_model_on_ball(eigvals: Array, eigvecs: Array, b: Array,
                             domain: Domain | None) -> Array:
    """Minimize 0.5 theta^T H theta + b^T theta over the ball, H = Q L Q^T PSD.

    Interior solutions come from the minimum-norm normal-equation solve on the
    non-degenerate eigendirections; when that candidate is infeasible, or the
    linear term pushes along a flat direction, the standard trust-region root
    find on the radial multiplier places the solution on the boundary.
    """
    scale = max(eigvals[-1], 1.0)
    b_rot = eigvecs.T @ b

    def model_value(theta):
        w = eigvecs.T @ theta
        return float(0.5 * w @ (eigvals * w) + b_rot @ w)

    safe = eigvals > 1e-12 * scale
    interior_rot = np.zeros_like(b_rot)
    interior_rot[safe] = -b_rot[safe] / eigvals[safe]
    interior = eigvecs @ interior_rot
    flat_pull = np.linalg.norm(b_rot[~safe]) > 1e-10 * max(1.0, np.linalg.norm(b_rot))
    if domain is None:
        return interior
    candidates = []
    if not flat_pull and np.linalg.norm(interior) <= domain.radius:
        candidates.append(interior)
    if np.linalg.norm(b) > 1e-14 * scale:
        def radial_norm(nu):
            return float(np.linalg.norm(b_rot / (eigvals + nu)))

        lo, hi = 0.0, max(1e-8, np.linalg.norm(b) / domain.radius)
        while radial_norm(hi) > domain.radius:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if radial_norm(mid) > domain.radius:
                lo = mid
            else:
                hi = mid
        candidates.append(eigvecs @ (-b_rot / (eigvals + hi)))
    if not candidates:
        candidates.append(domain.project(interior))
    return min(candidates, key=model_value)


def minimize_quadratic_objective(value_fn: Callable[[Array], float],
                                 grad_fn: Callable[[Array], Array], x0: Array,
                                 domain: Domain | None, passes: int = 3,
                                 secant_step: float = 1e-3) -> GDResult | None:
    """Ball-constrained Newton solve for (nearly) quadratic objectives.

    Each pass recovers the local quadratic model from d + 1 gradient
    evaluations (secants of step `secant_step` around the current point),
    solves the model exactly over the ball, and keeps the best point by true
    objective value. Exactly quadratic objectives finish in one pass; plug-in
    objectives whose instances carry a small estimated shift converge in two
    or three. Returns None when the model is not convex up to a small
    contamination tolerance (the caller falls back to descent).
    """
    x = np.asarray(x0, dtype=float) if domain is None else domain.project(x0)
    best, best_value = x, float(value_fn(x))
    evals = 1
    for attempt in range(passes):
        g = np.asarray(grad_fn(x), dtype=float)
        d = x.shape[0]
        H = np.empty((d, d))
        for i in range(d):
            probe = x.copy()
            probe[i] += secant_step
            H[:, i] = (np.asarray(grad_fn(probe), dtype=float) - g) / secant_step
        H = 0.5 * (H + H.T)
        evals += d + 1
        eigvals, eigvecs = np.linalg.eigh(H)
        scale = max(eigvals[-1], 1.0)
        if eigvals[0] < -1e-5 * scale:
            if attempt == 0:
                return None  # not convex: let the caller run descent instead
            break
        candidate = _solve_psd_model_on_ball(np.clip(eigvals, 0.0, None), eigvecs,
                                             g - H @ x, domain)
        value = float(value_fn(candidate))
        evals += 1
        improved = value < best_value - 1e-9 * max(1.0, abs(best_value))
        if value < best_value:
            best, best_value = candidate, value
        if not improved or np.linalg.norm(candidate - x) <= 1e-9 * (1.0 + np.linalg.norm(x)):
            break
        x = candidate
    return GDResult(theta=best, value=best_value, iterations=evals, converged=True)


def _minimize_plugin(loss: LossSpec, simulate: Callable[[Array], Array],
                     jacobian: Callable[[Array], Array], domain: Domain,
                     x0: Array, cfg: GDConfig) -> GDResult:
    """Minimize theta -> mean loss(simulate(theta); theta). jacobian(theta)
    returns d simulate / d theta, shape (n, m, d) or (m, d) when constant."""

    def value(theta):
        return float(np.mean(loss.batch_value(simulate(theta), theta)))

    def grad(theta):
        Zs = simulate(theta)
        g_theta = loss.batch_grad_theta(Zs, theta).mean(axis=0)
        g_z = loss.batch_grad_z(Zs, theta)
        J = jacobian(theta)
        if J.ndim == 2:
            return g_theta + J.T @ g_z.mean(axis=0)
        return g_theta + np.einsum("nmd,nm->d", J, g_z) / Zs.shape[0]

    # Losses quadratic in theta make the plug-in objective quadratic up to the
    # small estimated shift entering through z: the trust-region Newton solve
    # handles those orders of magnitude faster than descent on the often very
    # ill-conditioned proxy; descent stays the general-purpose path.
    if loss.theta_quadratic and not (domain is not None and domain.nonnegative):
        result = minimize_quadratic_objective(value, grad, x0, domain)
        if result is not None:
            return result
    return projected_gd(value, grad, x0, domain, cfg)


def _is_pure_scale_1d(map: DistributionMap) -> bool:
    return (isinstance(map, LocationScaleMap) and map.has_scale
            and map.d == 1 and map.m == 1 and not map.location.any())


def two_stage(map: DistributionMap, loss: LossSpec, domain: Domain, n: int,
              seed: int, solver_cfg: GDConfig | None = None) -> RunRecord:
    """Model the distribution map, then minimize the plug-in risk offline.

    Location branch: stage one deploys n Gaussian parameters and fits the
    location matrix by OLS, then deploys the zero parameter n times for base
    samples; stage two minimizes (1/n) sum_j loss(z_j + mu_hat theta; theta)
    over the domain by projected gradient descent. The 1-d pure-scale branch
    (certainty-equivalence analogue) regresses squared residuals on theta^2 to
    recover the scale slope, recovers base draws at a unit reference
    deployment, and minimizes the simulated risk the same way.

    Consumes exactly 2n samples.
    """
    cfg = solver_cfg or GDConfig()
    rng = np.random.default_rng(derive_seed(seed, "two-stage"))
    flags: list[str] = []

    thetas, Z, mu_hat, intercept, resid, rank = fit_location_model(map, domain, n, rng)
    if rank < map.d + 1:
        flags.append("rank_deficient_design")

    if _is_pure_scale_1d(map):
        residuals = Z[:, 0] - (thetas[:, 0] * mu_hat[0, 0] + intercept[0])
        t2 = thetas[:, 0] ** 2
        denom = float(t2 @ t2)
        slope = float(t2 @ residuals ** 2) / denom if denom > 0 else 0.0
        scale_hat = float(np.sqrt(max(slope, 0.0)))
        theta_ref = domain.project(np.ones(1))
        Z_ref = map.draw(theta_ref, n, rng)
        denom_ref = scale_hat * theta_ref[0]
        if abs(denom_ref) < 1e-12:
            flags.append("degenerate_scale_estimate")
            base_hat = np.zeros(n)
        else:
            base_hat = (Z_ref[:, 0] - intercept[0] - mu_hat[0, 0] * theta_ref[0]) / denom_ref
        base_samples = Z_ref

        def simulate(theta):
            return (intercept[0] + mu_hat[0, 0] * theta[0]
                    + scale_hat * theta[0] * base_hat)[:, None]

        def jacobian(theta):
            return (mu_hat[0, 0] + scale_hat * base_hat)[:, None, None]

        estimate = TwoStageEstimate(mu_hat=mu_hat, intercept=intercept,
                                    base_samples=base_samples,
                                    ols_residual_norm=resid, design_rank=rank,
                                    scale_hat=scale_hat)
    else:
        base_samples = map.draw(np.zeros(map.d), n, rng)

        def simulate(theta):
            return base_samples + (mu_hat @ theta)[None, :]

        def jacobian(theta):
            return mu_hat

        estimate = TwoStageEstimate(mu_hat=mu_hat, intercept=intercept,
                                    base_samples=base_samples,
                                    ols_residual_norm=resid, design_rank=rank)

    result = _minimize_plugin(loss, simulate, jacobian, domain,
                              np.zeros(map.d), cfg)
    if not result.converged:
        flags.append("stage2_not_converged")

    record = RunRecord(
        algorithm="two_stage",
        hyperparameters={"n_per_stage": int(n), "tol": cfg.tol},
        seed=int(seed),
        trace=[TracePoint(samples=2 * int(n), theta=result.theta)],
        final_theta=result.theta,
        flags=flags,
        extras={"estimate": estimate, "stage2": result},
    )
    return record


# ---------------------------------------------------------------------------
# Derivative-free optimization (sphere-perturbed single-point estimator)
# ---------------------------------------------------------------------------

def sphere_gradient_estimate(map: DistributionMap, loss: LossSpec, theta: Array,
                             delta: float, batch: int,
                             rng: np.random.Generator) -> tuple[Array, float]:
    """One draw of the smoothed-gradient estimator (d/delta) * PR_hat(theta + delta*u) * u,
    with u uniform on the unit sphere and PR_hat a batch Monte-Carlo estimate."""
    u = rng.standard_normal(map.d)
    u /= np.linalg.norm(u)
    probe = theta + delta * u
    Z = map.draw(probe, batch, rng)
    pr_hat = float(np.mean(loss.batch_value(Z, probe)))
    return (map.d / delta) * pr_hat * u, pr_hat


def dfo(map: DistributionMap, loss: LossSpec, domain: Domain, total_samples: int,
        seed: int, cfg: dict | None = None) -> RunRecord:
    """Gradient-free descent using the sphere-smoothed estimator
    (d/delta) * PR_hat(theta + delta*u) * u with u uniform on the unit sphere.

    Iterates live in the radius (R - delta) ball so every perturbed deployment
    stays feasible; the boundary interaction is otherwise unspecified.
    """
    cfg = dict(cfg or {})
    c0 = float(cfg.pop("c0", 0.01))
    batch = int(cfg.pop("batch", 20))
    delta = float(cfg.pop("delta", 1.0))
    theta0 = cfg.pop("theta0", None)
    record_every = int(cfg.pop("record_every", 1))
    if cfg:
        raise ConfigurationError(f"unknown dfo config keys: {sorted(cfg)}")
    if not delta > 0:
        raise ConfigurationError(f"delta must be positive, got {delta}")
    if delta >= domain.radius:
        raise ConfigurationError(
            f"delta={delta} must be smaller than the domain radius {domain.radius}")
    if domain.nonnegative:
        raise ConfigurationError("dfo requires a plain ball domain")
    if batch < 1:
        raise ConfigurationError(f"batch must be >= 1, got {batch}")

    inner = Domain(domain.radius - delta)
    theta = inner.project(np.ones(map.d) if theta0 is None else as_theta(theta0, map.d))
    rng = np.random.default_rng(derive_seed(seed, "dfo"))
    trace = [TracePoint(samples=0, theta=theta.copy())]
    samples = 0
    t = 0
    while samples + batch <= total_samples:
        t += 1
        grad_est, pr_hat = sphere_gradient_estimate(map, loss, theta, delta, batch, rng)
        theta = inner.project(theta - (c0 / t) * grad_est)
        samples += batch
        if t % record_every == 0:
            trace.append(TracePoint(samples=samples, theta=theta.copy(),
                                    pr_estimate=pr_hat))
    if trace[-1].samples != samples:
        trace.append(TracePoint(samples=samples, theta=theta.copy()))
    return RunRecord(
        algorithm="dfo",
        hyperparameters={"c0": c0, "batch": batch, "delta": delta,
                         "record_every": record_every},
        seed=int(seed), trace=trace, final_theta=theta,
    )


# ---------------------------------------------------------------------------
# Greedy / lazy stochastic gradient descent (stable-point seekers)
# ---------------------------------------------------------------------------

def greedy_sgd(map: DistributionMap, loss: LossSpec, domain: Domain | None,
               total_samples: int, seed: int, cfg: dict | None = None) -> RunRecord:
    """Deploy every step: draw one instance at the current parameters and take
    a projected stochastic gradient step. Converges toward performatively
    stable points, not optima."""
    cfg = dict(cfg or {})
    schedule_spec = cfg.pop("schedule", None)
    schedule = make_schedule(schedule_spec, "inv_sqrt", 1.0)
    theta0 = cfg.pop("theta0", None)
    record_every = int(cfg.pop("record_every", 1))
    if cfg:
        raise ConfigurationError(f"unknown greedy_sgd config keys: {sorted(cfg)}")

    theta = np.ones(map.d) if theta0 is None else as_theta(theta0, map.d)
    theta = _project(domain, theta)
    rng = np.random.default_rng(derive_seed(seed, "greedy"))
    trace = [TracePoint(samples=0, theta=theta.copy())]
    for t in range(1, total_samples + 1):
        z = map.draw(theta, 1, rng)
        g = loss.batch_grad_theta(z, theta)[0]
        theta = _project(domain, theta - schedule(t) * g)
        if t % record_every == 0:
            trace.append(TracePoint(samples=t, theta=theta.copy()))
    if trace[-1].samples != total_samples:
        trace.append(TracePoint(samples=total_samples, theta=theta.copy()))
    return RunRecord(
        algorithm="greedy_sgd",
        hyperparameters={"schedule": dict(schedule_spec or {"kind": "inv_sqrt", "c": 1.0}),
                         "record_every": record_every},
        seed=int(seed), trace=trace, final_theta=theta,
    )


def lazy_sgd(map: DistributionMap, loss: LossSpec, domain: Domain | None,
             total_samples: int, seed: int, cfg: dict | None = None) -> RunRecord:
    """Deploy rarely: the k-th deployment collects k^2 samples, then one SGD
    pass over that batch in random order with step c/(t0 + t) on the global
    step counter."""
    cfg = dict(cfg or {})
    c = float(cfg.pop("c", 1.0))
    k0 = float(cfg.pop("k0", 1.0))
    theta0 = cfg.pop("theta0", None)
    if cfg:
        raise ConfigurationError(f"unknown lazy_sgd config keys: {sorted(cfg)}")

    theta = np.ones(map.d) if theta0 is None else as_theta(theta0, map.d)
    theta = _project(domain, theta)
    rng = np.random.default_rng(derive_seed(seed, "lazy"))
    trace = [TracePoint(samples=0, theta=theta.copy())]
    samples = 0
    global_t = 0
    k = 0
    while True:
        k += 1
        batch = k * k
        if samples + batch > total_samples:
            break
        Z = map.draw(theta, batch, rng)
        for idx in rng.permutation(batch):
            global_t += 1
            g = loss.batch_grad_theta(Z[idx:idx + 1], theta)[0]
            theta = _project(domain, theta - (c / (k0 + global_t)) * g)
        samples += batch
        trace.append(TracePoint(samples=samples, theta=theta.copy()))
    return RunRecord(
        algorithm="lazy_sgd",
        hyperparameters={"c": c, "k0": k0, "deployments": k - 1},
        seed=int(seed), trace=trace, final_theta=theta,
    )


# ---------------------------------------------------------------------------
# Repeated risk minimization
# ---------------------------------------------------------------------------

def rrm(map: DistributionMap, loss: LossSpec, domain: Domain | None,
        iterations: int, n_per_iter: int, seed: int,
        solver_cfg: GDConfig | None = None, theta0=None) -> RunRecord:
    """Full retraining: each round draws a fresh batch at the current
    parameters and minimizes the empirical risk on it. Converges to
    performatively stable points when it converges at all."""
    if iterations < 1 or n_per_iter < 1:
        raise ConfigurationError("iterations and n_per_iter must be >= 1")
    cfg = solver_cfg or GDConfig()
    rng = np.random.default_rng(derive_seed(seed, "rrm"))
    theta = np.ones(map.d) if theta0 is None else as_theta(theta0, map.d)
    theta = _project(domain, theta)
    flags: list[str] = []
    trace = [TracePoint(samples=0, theta=theta.copy())]
    samples = 0
    for _ in range(iterations):
        Z = map.draw(theta, n_per_iter, rng)

        def value(th):
            return float(np.mean(loss.batch_value(Z, th)))

        def grad(th):
            return loss.batch_grad_theta(Z, th).mean(axis=0)

        # the batch is fixed, so a theta-quadratic loss gives an exactly
        # quadratic empirical risk: solve it directly when the domain allows
        solved = None
        if loss.theta_quadratic and not (domain is not None and domain.nonnegative):
            solved = minimize_quadratic_objective(value, grad, theta, domain)
        if solved is not None:
            theta = solved.theta
        else:
            result = projected_gd(value, grad, theta, domain, cfg)
            if not result.converged:
                flags.append("inner_solver_not_converged")
            theta = result.theta
        samples += n_per_iter
        trace.append(TracePoint(samples=samples, theta=theta.copy()))
    return RunRecord(
        algorithm="rrm",
        hyperparameters={"iterations": int(iterations), "n_per_iter": int(n_per_iter)},
        seed=int(seed), trace=trace, final_theta=theta, flags=flags,
    )
