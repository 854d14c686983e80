"""Loss functions with analytic gradients in theta and z and declared regularity constants.

A LossSpec bundles the loss value, both gradients, vectorized batch forms,
and the constants used by convexity certificates: gamma (strong convexity in
theta), beta (Lipschitz constant of grad_theta in z), gamma_z (strong
convexity in z), plus plain Lipschitz constants. Constants are None when
unknown. Constants that depend on the data distribution (e.g. gamma for the
squared loss) are supplied by the scenario that owns the data, never inferred
here; `z_probe_coords` records which instance coordinates a declared beta or
gamma_z applies to (None = all of z).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError
from .maps import _check_psd

Array = np.ndarray

__all__ = [
    "LossConstants",
    "LossSpec",
    "squared_loss",
    "squared_distance_loss",
    "quadratic_example_loss",
    "regularized_logistic_loss",
    "absolute_loss",
    "regularized_loss",
]


@dataclass(frozen=True)
class LossConstants:
    gamma: float | None = None        # strong convexity in theta
    beta: float | None = None         # Lipschitz constant of grad_theta in z
    gamma_z: float | None = None      # strong convexity in z
    lipschitz_theta: float | None = None
    lipschitz_z: float | None = None


@dataclass(frozen=True)
class LossSpec:
    """Loss value/gradients plus declared regularity constants.

    Batch forms take Z of shape (n, m) and return per-row results; the scalar
    forms take a single instance vector. `split` marks the feature/label
    boundary for structured instances ((x, y) with x = z[:split]).
    """

    name: str
    d: int | None
    m: int | None
    batch_value: Callable[[Array, Array], Array]
    batch_grad_theta: Callable[[Array, Array], Array]
    batch_grad_z: Callable[[Array, Array], Array]
    constants: LossConstants = field(default_factory=LossConstants)
    split: int | None = None
    z_probe_coords: tuple[int, ...] | None = None
    theta_quadratic: bool = False  # value is a quadratic polynomial in theta
    params: dict = field(default_factory=dict)

    def value(self, z, theta) -> float:
        return float(self.batch_value(np.atleast_2d(np.asarray(z, float)), np.asarray(theta, float))[0])

    def grad_theta(self, z, theta) -> Array:
        return self.batch_grad_theta(np.atleast_2d(np.asarray(z, float)), np.asarray(theta, float))[0]

    def grad_z(self, z, theta) -> Array:
        return self.batch_grad_z(np.atleast_2d(np.asarray(z, float)), np.asarray(theta, float))[0]


def _split_xy(Z: Array, d: int):
    if Z.ndim != 2 or Z.shape[1] != d + 1:
        raise ConfigurationError(
            f"instances must carry a (features, label) split of width {d + 1}, "
            f"got shape {Z.shape}")
    return Z[:, :d], Z[:, d]


def squared_loss(d: int, gamma: float | None = None, beta: float | None = None) -> LossSpec:
    """Half squared residual on split instances: 0.5 * (y - theta^T x)^2.

    gamma (= lambda_min of the second moment of x) and beta (a bound on ||x||)
    depend on the feature distribution and are declared by the scenario.
    The exact gamma_z = 1 applies to the label coordinate.
    """

    def batch_value(Z, theta):
        X, y = _split_xy(Z, d)
        r = y - X @ theta
        return 0.5 * r * r

    def batch_grad_theta(Z, theta):
        X, y = _split_xy(Z, d)
        r = y - X @ theta
        return -r[:, None] * X

    def batch_grad_z(Z, theta):
        X, y = _split_xy(Z, d)
        r = y - X @ theta
        out = np.empty_like(Z)
        np.multiply(r[:, None], -theta[None, :], out=out[:, :d])
        out[:, d] = r
        return out

    return LossSpec(
        name="squared",
        d=d, m=d + 1, split=d,
        batch_value=batch_value,
        batch_grad_theta=batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(gamma=gamma, beta=beta, gamma_z=1.0),
        z_probe_coords=(d,),
        theta_quadratic=True,
        params={"d": d},
    )


def squared_distance_loss(d: int, scale: float = 1.0) -> LossSpec:
    """(scale/2) * ||z - theta||^2 for unsplit instances with m = d."""
    if not scale > 0:
        raise ConfigurationError(f"scale must be positive, got {scale}")

    def batch_value(Z, theta):
        diff = Z - theta[None, :]
        return 0.5 * scale * np.einsum("ij,ij->i", diff, diff)

    def batch_grad_theta(Z, theta):
        return scale * (theta[None, :] - Z)

    def batch_grad_z(Z, theta):
        return scale * (Z - theta[None, :])

    return LossSpec(
        name="squared_distance",
        d=d, m=d, split=None,
        batch_value=batch_value,
        batch_grad_theta=batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(gamma=scale, beta=scale, gamma_z=scale),
        theta_quadratic=True,
        params={"d": d, "scale": scale},
    )


def quadratic_example_loss(beta: float, gamma: float, d: int | None = None) -> LossSpec:
    """-beta * theta^T z + (gamma/2) * ||theta||^2, linear in z.

    The sharp-threshold construction: gamma and beta are exact, and the loss
    is only affine in z, so gamma_z = 0.
    """
    if not beta > 0 or not gamma > 0:
        raise ConfigurationError(f"beta and gamma must be positive, got ({beta}, {gamma})")

    def batch_value(Z, theta):
        return -beta * (Z @ theta) + 0.5 * gamma * float(theta @ theta)

    def batch_grad_theta(Z, theta):
        return -beta * Z + gamma * theta[None, :]

    def batch_grad_z(Z, theta):
        return np.tile(-beta * theta, (Z.shape[0], 1))

    return LossSpec(
        name="quadratic_example",
        d=d, m=d, split=None,
        batch_value=batch_value,
        batch_grad_theta=batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(gamma=gamma, beta=beta, gamma_z=0.0),
        theta_quadratic=True,
        params={"beta": beta, "gamma": gamma},
    )


def _check_labels(y: Array, tol: float = 0.25):
    # Plug-in objectives evaluate the loss on simulated instances whose label
    # coordinate carries a small estimated shift, and finite-difference probes
    # nudge labels too, so binary labels are enforced only up to `tol`.
    ok = (np.abs(y) <= tol) | (np.abs(y - 1.0) <= tol)
    if not np.all(ok):
        bad = y[~ok][0]
        raise DomainError(f"labels must be in {{0, 1}}, got {bad!r}")


def regularized_logistic_loss(d: int, reg: float, beta: float | None = None) -> LossSpec:
    """log(1 + exp(x^T theta)) - y * x^T theta + (reg/2) * ||theta||^2.

    The ridge term makes the loss exactly reg-strongly convex in theta.
    Smoothness of grad_theta in x depends on the feature scale, so beta is a
    scenario-declared bound. Labels are validated to {0, 1} within a small
    tolerance (finite-difference probes nudge them).
    """
    if not reg >= 0:
        raise ConfigurationError(f"regularization must be nonnegative, got {reg}")

    def batch_value(Z, theta):
        X, y = _split_xy(Z, d)
        _check_labels(y)
        s = X @ theta
        return np.logaddexp(0.0, s) - y * s + 0.5 * reg * float(theta @ theta)

    def batch_grad_theta(Z, theta):
        X, y = _split_xy(Z, d)
        _check_labels(y)
        s = X @ theta
        sig = 1.0 / (1.0 + np.exp(-s))
        return (sig - y)[:, None] * X + reg * theta[None, :]

    def batch_grad_z(Z, theta):
        X, y = _split_xy(Z, d)
        _check_labels(y)
        s = X @ theta
        sig = 1.0 / (1.0 + np.exp(-s))
        return np.hstack([(sig - y)[:, None] * theta[None, :], -s[:, None]])

    return LossSpec(
        name="regularized_logistic",
        d=d, m=d + 1, split=d,
        batch_value=batch_value,
        batch_grad_theta=batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(gamma=reg, beta=beta, gamma_z=0.0),
        z_probe_coords=tuple(range(d)),
        params={"d": d, "reg": reg},
    )


def absolute_loss(d: int) -> LossSpec:
    """|y - theta^T x| with the subgradient at the kink fixed to 0.

    Any element of [-1, 1] * x is a valid subgradient there; 0 keeps SGD
    stable. Neither strong convexity constant is positive.
    """

    def batch_value(Z, theta):
        X, y = _split_xy(Z, d)
        return np.abs(y - X @ theta)

    def batch_grad_theta(Z, theta):
        X, y = _split_xy(Z, d)
        s = np.sign(y - X @ theta)
        return -s[:, None] * X

    def batch_grad_z(Z, theta):
        X, y = _split_xy(Z, d)
        s = np.sign(y - X @ theta)
        return np.hstack([-s[:, None] * theta[None, :], s[:, None]])

    return LossSpec(
        name="absolute",
        d=d, m=d + 1, split=d,
        batch_value=batch_value,
        batch_grad_theta=batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(gamma=0.0, gamma_z=0.0),
        z_probe_coords=(d,),
        params={"d": d},
    )


def regularized_loss(base: LossSpec, z_star, Q) -> LossSpec:
    """base + (z - z*)^T Q (z - z*): a distribution-steering penalty.

    The penalty is independent of theta, so grad_theta is reused from the base
    unchanged (fixed points of retraining cannot move), while gamma_z grows by
    2 * lambda_min(Q).
    """
    z_star = np.atleast_1d(np.asarray(z_star, dtype=float))
    Q = _check_psd(np.atleast_2d(np.asarray(Q, dtype=float)), "penalty matrix Q")
    if base.m is not None and z_star.shape[0] != base.m:
        raise ConfigurationError(
            f"z_star has dimension {z_star.shape[0]}, expected {base.m}")
    lam_min = float(np.linalg.eigvalsh(Q)[0])

    def batch_value(Z, theta):
        W = Z - z_star[None, :]
        return base.batch_value(Z, theta) + np.einsum("ij,jk,ik->i", W, Q, W)

    def batch_grad_z(Z, theta):
        W = Z - z_star[None, :]
        return base.batch_grad_z(Z, theta) + 2.0 * W @ Q

    cs = base.constants
    return LossSpec(
        name=f"{base.name}+penalty",
        d=base.d, m=base.m, split=base.split,
        batch_value=batch_value,
        batch_grad_theta=base.batch_grad_theta,
        batch_grad_z=batch_grad_z,
        constants=LossConstants(
            gamma=cs.gamma,
            beta=cs.beta,
            gamma_z=None if cs.gamma_z is None else cs.gamma_z + 2.0 * lam_min,
            lipschitz_theta=cs.lipschitz_theta,
            lipschitz_z=None,
        ),
        z_probe_coords=base.z_probe_coords,
        theta_quadratic=base.theta_quadratic,
        params={"base": base.name, "lambda_min_Q": lam_min},
    )
