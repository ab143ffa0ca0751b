"""Federated convex testbeds with known minimizers.

All evaluators accept ``w`` with arbitrary leading batch axes and the vector
on the last axis.  ``agent_grads(w)`` returns shape ``(..., N, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final gradient norm {residual:.3e})")
        self.residual = residual


class FederatedProblem:
    """Base class: ``f(w) = mean_n f_n(w)``.

    Subclasses set ``num_agents``, ``dim``, ``gamma`` (strong convexity),
    ``lam`` (smoothness) and ``w_star``, and implement ``agent_losses``,
    ``agent_grads`` and ``hessian``.
    """

    kind = "abstract"
    num_agents: int
    dim: int
    gamma: float
    lam: float
    w_star: np.ndarray

    def agent_losses(self, w) -> np.ndarray:
        raise NotImplementedError

    def agent_grads(self, w) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, w) -> np.ndarray:
        raise NotImplementedError

    def loss(self, w):
        return self.agent_losses(w).mean(axis=-1)

    def grad(self, w):
        return self.agent_grads(w).mean(axis=-2)

    def gradient_bound(self, radius: float) -> float:
        """Upper bound on ``max_n ||grad f_n(w)||`` over the ball ``||w - w*|| <= radius``."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"type": self.kind, "agents": self.num_agents, "dim": self.dim,
                "gamma": self.gamma, "lambda": self.lam}


@dataclass
class QuadraticProblem(FederatedProblem):
    """``f_n(w) = 0.5 * ||w - c_n||**2``; identity Hessian, ``w* = mean(c_n)``."""

    centers: np.ndarray
    kind = "quadratic"

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.num_agents, self.dim = self.centers.shape
        self.gamma = 1.0
        self.lam = 1.0
        self.w_star = self.centers.mean(axis=0)

    def agent_losses(self, w):
        diff = np.asarray(w, dtype=float)[..., None, :] - self.centers
        return 0.5 * np.sum(diff * diff, axis=-1)

    def agent_grads(self, w):
        return np.asarray(w, dtype=float)[..., None, :] - self.centers

    def hessian(self, w=None):
        return np.eye(self.dim)

    def gradient_bound(self, radius: float) -> float:
        # sup over the ball of ||w - c_n|| is attained on the far side of the ball.
        return float(np.max(np.linalg.norm(self.w_star - self.centers, axis=1)) + radius)


def make_quadratic(N: int, d: int, centers=None, seed: int = 0, center_scale: float = 1.0) -> QuadraticProblem:
    if N < 1 or d < 1:
        raise ValueError("N and d must be >= 1")
    if centers is None:
        centers = center_scale * np.random.default_rng(seed).standard_normal((N, d))
    centers = np.asarray(centers, dtype=float)
    if centers.shape != (N, d):
        raise ValueError(f"centers must have shape {(N, d)}, got {centers.shape}")
    return QuadraticProblem(centers)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LogisticProblem(FederatedProblem):
    """L2-regularised logistic regression, labels in {-1, +1}.

    ``features`` has shape ``(N, m, d)`` and ``labels`` ``(N, m)``.
    ``w_star`` is filled by ``oracle_minimize`` at construction.
    """

    features: np.ndarray
    labels: np.ndarray
    l2_reg: float
    oracle_tol: float = 1e-12
    oracle_residual: float = field(init=False, default=np.nan)
    kind = "logistic"

    def __post_init__(self):
        if not self.l2_reg > 0:
            raise ValueError("l2_reg must be > 0 for strong convexity")
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 3 or self.labels.shape != self.features.shape[:2]:
            raise ValueError("features must be (N, m, d) and labels (N, m)")
        if not np.all(np.abs(self.labels) == 1.0):
            raise ValueError("labels must be -1 or +1")
        self.num_agents, self.samples_per_agent, self.dim = self.features.shape
        self.gamma = float(self.l2_reg)
        flat = self.features.reshape(-1, self.dim)
        top = np.linalg.eigvalsh(flat.T @ flat / flat.shape[0])[-1] if flat.size else 0.0
        # the logistic curvature s(1-s) never exceeds 1/4
        self.lam = float(self.l2_reg + 0.25 * max(top, 0.0))
        self.w_star = oracle_minimize(self, self.oracle_tol)
        self.oracle_residual = float(np.linalg.norm(self.grad(self.w_star)))

    def _margins(self, w):
        w = np.asarray(w, dtype=float)
        # (..., N, m)
        return self.labels * np.einsum("nmd,...d->...nm", self.features, w)

    def agent_losses(self, w):
        w = np.asarray(w, dtype=float)
        z = self._margins(w)
        data = np.logaddexp(0.0, -z).mean(axis=-1)
        return data + 0.5 * self.l2_reg * np.sum(w * w, axis=-1)[..., None]

    def agent_grads(self, w):
        w = np.asarray(w, dtype=float)
        z = self._margins(w)
        coef = -self.labels * _sigmoid(-z) / self.samples_per_agent
        data = np.einsum("...nm,nmd->...nd", coef, self.features)
        return data + self.l2_reg * w[..., None, :]

    def hessian(self, w):
        w = np.asarray(w, dtype=float)
        s = _sigmoid(self._margins(w))
        curv = (s * (1.0 - s)).reshape(-1)
        flat = self.features.reshape(-1, self.dim)
        return (flat.T * curv) @ flat / flat.shape[0] + self.l2_reg * np.eye(self.dim)

    def gradient_bound(self, radius: float) -> float:
        feat = np.linalg.norm(self.features, axis=-1).mean(axis=-1).max()
        return float(feat + self.l2_reg * (np.linalg.norm(self.w_star) + radius))

    def describe(self) -> dict:
        out = super().describe()
        out.update(l2_reg=self.l2_reg, samples_per_agent=self.samples_per_agent,
                   oracle_residual=self.oracle_residual)
        return out


def make_logistic(N: int, d: int, samples_per_agent: int, l2_reg: float, seed: int = 0,
                  separation: float = 1.0, feature_scale: float = 1.0) -> LogisticProblem:
    """Two Gaussian class clusters at ``+-separation/sqrt(d)`` per coordinate."""
    if N < 1 or d < 1 or samples_per_agent < 1:
        raise ValueError("N, d and samples_per_agent must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice([-1.0, 1.0], size=(N, samples_per_agent))
    mean = separation / np.sqrt(d) * np.ones(d)
    x = rng.standard_normal((N, samples_per_agent, d)) + labels[..., None] * mean
    return LogisticProblem(feature_scale * x, labels, l2_reg)


def oracle_minimize(problem: FederatedProblem, tol: float = 1e-10, max_iter: int = 1_000_000,
                    w0=None) -> np.ndarray:
    """Noiseless full-gradient descent with step ``1/lam`` until ``||grad f|| < tol``.

    Starts from the origin unless ``w0`` is given; never reads ``w_star``.
    """
    w = np.zeros(problem.dim) if w0 is None else np.array(w0, dtype=float)
    step = 1.0 / problem.lam
    for _ in range(max_iter):
        g = problem.grad(w)
        res = float(np.linalg.norm(g))
        if res < tol:
            return w
        w = w - step * g
    raise ConvergenceError(f"oracle did not reach tol={tol:g} in {max_iter} iterations",
                           float(np.linalg.norm(problem.grad(w))))
