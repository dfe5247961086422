"""Smoothness/strong-convexity constants and the error-perturbed GD bound."""

from dataclasses import dataclass

import numpy as np

from airfl.errors import InvalidConvexityParams


@dataclass(frozen=True)
class ConvexityParams:
    rho: float  # smoothness (largest Hessian eigenvalue)
    mu: float  # strong convexity (smallest Hessian eigenvalue)

    def __post_init__(self):
        if not (0 < self.mu < self.rho and np.isfinite(self.rho)):
            raise InvalidConvexityParams(f"need 0 < mu < rho, got mu={self.mu}, rho={self.rho}")

    @property
    def lambda_conv(self):
        return 1.0 - self.mu / self.rho

    @classmethod
    def from_features(cls, features, reg):
        """Extreme eigenvalues of (1/K) X^T X + reg I, the least-squares Hessian."""
        x = np.atleast_2d(np.asarray(features, dtype=float))
        hess = x.T @ x / x.shape[0] + reg * np.eye(x.shape[1])
        eig = np.linalg.eigvalsh(hess)
        return cls(rho=float(eig[-1]), mu=float(eig[0]))


def convergence_bound(initial_gap, error_sq, params):
    """gap₀·λ^T + Σ_{t=1}^{T} λ^{T−t} ‖e^t‖² / (2ρ), with T = len(error_sq)."""
    err = np.asarray(error_sq, dtype=float).reshape(-1)
    if np.any(err < 0) or initial_gap < 0:
        raise ValueError("gap and squared errors must be nonnegative")
    lam = params.lambda_conv
    t_total = err.size
    weights = lam ** (t_total - np.arange(1, t_total + 1))
    return float(initial_gap * lam**t_total + weights @ err / (2.0 * params.rho))


def bound_trajectory(initial_gap, error_sq, params):
    """Bound after each round, i.e. ``convergence_bound`` on every prefix."""
    lam = params.lambda_conv
    out, cur = [], float(initial_gap)
    for e in np.asarray(error_sq, dtype=float).reshape(-1):
        cur = lam * cur + e / (2.0 * params.rho)
        out.append(cur)
    return np.array(out)


def least_squares_optimum(features, targets, reg):
    """Minimizer of ½ mean‖W u − t‖² + ½ reg ‖W‖², shape (C, F)."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    t = np.asarray(targets, dtype=float)
    t = t[:, None] if t.ndim == 1 else t
    k = x.shape[0]
    hess = x.T @ x / k + reg * np.eye(x.shape[1])
    return np.linalg.solve(hess, x.T @ t / k).T
