"""Rate fits and closed-form bounds for comparison with simulated trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from otagd.alpha_core import alpha_norm_pow, check_alpha
from otagd.channel import ChannelModel
from otagd.objectives import FederatedProblem
from otagd.stable import StableParams, as_generator, draw_stable


class ApplicabilityError(ValueError):
    """Step-size constant too small for the convergence bound to apply."""


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    fit_window: tuple[int, int]
    r_squared: float


def default_window(rounds: int) -> tuple[int, int]:
    """Last two decades of the run, ``[K/100, K]``."""
    return max(1, rounds // 100), rounds


def fit_rate(stats_or_errors, k_min: int | None = None, k_max: int | None = None,
             column: str = "mean_alpha_err") -> RateFit:
    """Least-squares line through ``(log k, log err[k])`` for ``k_min <= k <= k_max``.

    Accepts a ``TrajectoryStats`` (using ``column``) or a 1-D array indexed by
    round.
    """
    if hasattr(stats_or_errors, column):
        errors = np.asarray(getattr(stats_or_errors, column), dtype=float)
    else:
        errors = np.asarray(stats_or_errors, dtype=float)
    K = errors.size - 1
    if k_min is None or k_max is None:
        dmin, dmax = default_window(K)
        k_min = dmin if k_min is None else k_min
        k_max = dmax if k_max is None else k_max
    if not (1 <= k_min < k_max <= K):
        raise ValueError(f"window [{k_min}, {k_max}] must satisfy 1 <= k_min < k_max <= {K}")
    ks = np.arange(k_min, k_max + 1)
    y = errors[ks]
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("errors in the fit window must be finite and positive")
    x = np.log(ks)
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if np.ptp(ly) == 0.0 else max(0.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot)
    return RateFit(float(slope), float(intercept), (int(k_min), int(k_max)), r2)


@dataclass(frozen=True)
class BoundConstants:
    C: float
    G: float
    sigma: float
    mu: float
    L: float
    theta: float
    d: int
    N: int
    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.C < 0 or self.G < 0 or self.sigma < 0:
            raise ValueError("C, G and sigma must be nonnegative")
        if self.mu <= 0 or self.L <= 0 or self.theta <= 0:
            raise ValueError("mu, L and theta must be positive")
        if self.d < 1 or self.N < 1:
            raise ValueError("d and N must be >= 1")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")

    def fading_term(self, momentum: bool = False) -> float:
        a = self.alpha
        t = self.sigma ** a * self.G ** a * self.d ** (1.0 - 1.0 / a) / self.N ** (a / 2.0)
        if momentum:
            t /= (1.0 - self.beta ** 2) ** (a / 2.0)
        return t


def theorem1_bound(c: BoundConstants, k: int) -> float:
    """Bound on E||w_k - w*||_a^a for plain GD with step theta/k."""
    a = c.alpha
    denom = c.mu * c.theta * c.L - a + 1.0
    if denom <= 0:
        raise ApplicabilityError(f"need theta > (alpha-1)/(mu*L) = {(a - 1) / (c.mu * c.L):.6g}, got {c.theta}")
    return 4.0 * c.theta ** a * (c.C + c.fading_term()) / denom * k ** (-(a - 1.0))


def theorem2_bound(c: BoundConstants, k: int) -> float:
    """Momentum counterpart; at beta = 0 the interference term is 4C rather than C."""
    a, b = c.alpha, c.beta
    denom = c.mu * c.theta * c.L / (1.0 - b) - a + 1.0
    if denom <= 0:
        raise ApplicabilityError(
            f"need theta > (alpha-1)(1-beta)/(mu*L) = {(a - 1) * (1 - b) / (c.mu * c.L):.6g}, got {c.theta}")
    noise = 4.0 * c.C / (1.0 - b ** a) + c.fading_term(momentum=True)
    return 4.0 * c.theta ** a * noise / denom * k ** (-(a - 1.0))


def corollary_rate(rho: float, alpha: float) -> float:
    """Predicted log-log exponent ``-rho * (alpha - 1)``."""
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")
    check_alpha(alpha)
    return -rho * (alpha - 1.0)


def generalization_bound(B: float, alpha: float, lam: float, dataset_size: int, p: float) -> float:
    """``B * sqrt((2 alpha log(lam^2 |D|) + log(1/p)) / |D|)``, holding with probability >= 1 - p."""
    if not (B > 0 and lam > 0):
        raise ValueError("B and lambda must be positive")
    if dataset_size < 1:
        raise ValueError("dataset_size must be >= 1")
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    inner = lam * lam * dataset_size
    if inner <= 1.0:
        raise ValueError("need lambda^2 * |D| > 1 so the logarithm is positive")
    n = float(dataset_size)
    return B * math.sqrt(2.0 * alpha * math.log(inner) / n + math.log(1.0 / p) / n)


@dataclass(frozen=True)
class CalibratedC:
    value: float
    quantile: float
    samples: int
    kept: int
    untruncated_mean: float


def calibrate_C(params: StableParams, d: int, samples: int = 100_000, rng=0,
                quantile: float = 0.999) -> CalibratedC:
    """Truncated sample mean of ``||xi||_a^a`` for a d-dimensional interference vector.

    The alpha-th absolute moment of an alpha-stable law is infinite, so the
    raw sample mean grows with the sample size.  Draws above the ``quantile``
    empirical quantile are discarded before averaging.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0.0 < quantile <= 1.0:
        raise ValueError("quantile must lie in (0, 1]")
    xi = draw_stable(params, as_generator(rng), (samples, d))
    norms = alpha_norm_pow(xi, params.alpha)
    cut = np.quantile(norms, quantile)
    kept = norms[norms <= cut]
    return CalibratedC(float(kept.mean()), quantile, samples, int(kept.size), float(norms.mean()))


def one_step_moment(problem: FederatedProblem, channel: ChannelModel, w, eta: float,
                    draws: int = 100_000, rng=0) -> float:
    """Monte Carlo mean of ``||w_next - w*||_a^a`` over fresh fading and interference."""
    gen = as_generator(rng)
    w = np.asarray(w, dtype=float)
    alpha = channel.interference.alpha if channel.interference is not None else 2.0
    grads = problem.agent_grads(w)
    h = channel.draw_fading(gen, (draws, channel.num_agents))
    xi = channel.draw_interference(gen, (draws, problem.dim))
    g = h @ grads / channel.num_agents + xi
    w_next = w - eta * g
    return float(np.mean(alpha_norm_pow(w_next - problem.w_star, alpha)))


def one_step_bound(problem: FederatedProblem, channel: ChannelModel, w, eta: float,
                   C: float, L: float = 1.0) -> float:
    """Right side of the one-round recursion used in the GD convergence proof.

    ``(1 - eta mu L) ||w - w*||_a^a + 4 (C + sigma^a G^a d^(1-1/a) / N^(a/2)) eta^a``
    with ``G`` the largest local gradient norm at ``w``.
    """
    if channel.interference is None:
        raise ValueError("the recursion bound needs an interference model")
    a = channel.interference.alpha
    w = np.asarray(w, dtype=float)
    G = float(np.max(np.linalg.norm(problem.agent_grads(w), axis=-1)))
    d, N = problem.dim, channel.num_agents
    fading = channel.sigma ** a * G ** a * d ** (1.0 - 1.0 / a) / N ** (a / 2.0)
    contraction = (1.0 - eta * channel.mu * L) * alpha_norm_pow(w - problem.w_star, a)
    return float(contraction + 4.0 * (C + fading) * eta ** a)
