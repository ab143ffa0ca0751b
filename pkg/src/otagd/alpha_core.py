"""Signed powers and alpha-norms.

Second moments of the aggregated gradient do not exist under alpha-stable
interference, so every error quantity in this package is measured with the
alpha-th power of the alpha-norm, ``sum_i |w_i|**alpha``.  The helpers here
operate on plain numpy arrays; the last axis is the vector axis so that
batches of vectors (trials, samples) broadcast naturally.
"""

from __future__ import annotations

import numpy as np

ALPHA_MIN = 1.0
ALPHA_MAX = 2.0


def check_alpha(alpha: float) -> float:
    """Validate a tail index in the half-open interval (1, 2]."""
    alpha = float(alpha)
    if not np.isfinite(alpha) or not (ALPHA_MIN < alpha <= ALPHA_MAX):
        raise ValueError(f"alpha must lie in (1, 2], got {alpha!r}")
    return alpha


def _as_vec(w, name: str = "w") -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] < 1:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def signed_power(w, alpha: float) -> np.ndarray:
    """Entrywise ``sign(w_i) * |w_i|**alpha`` with ``sign(0) = 0``."""
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError(f"exponent must be finite and >= 0, got {alpha!r}")
    w = _as_vec(w)
    return np.sign(w) * np.abs(w) ** alpha


def alpha_norm_pow(w, alpha: float) -> np.ndarray | float:
    """``||w||_alpha ** alpha``, reduced over the last axis."""
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha!r}")
    w = _as_vec(w)
    out = np.sum(np.abs(w) ** alpha, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def lemma1_gap(w, v, alpha: float) -> float:
    """Slack in the alpha-norm Taylor-type inequality.

    Returns ``||w||^a + a <w^<a-1>, v> + 4 ||v||^a - ||w + v||^a`` (all norms
    raised to the power a = alpha), which is nonnegative for 1 <= alpha <= 2.
    """
    if not (1.0 <= alpha <= 2.0):
        raise ValueError(f"alpha must lie in [1, 2], got {alpha!r}")
    w = _as_vec(w, "w")
    v = _as_vec(v, "v")
    if w.shape != v.shape:
        raise ValueError(f"dimension mismatch: {w.shape} vs {v.shape}")
    rhs = (
        alpha_norm_pow(w, alpha)
        + alpha * np.sum(signed_power(w, alpha - 1.0) * v, axis=-1)
        + 4.0 * alpha_norm_pow(v, alpha)
    )
    return rhs - alpha_norm_pow(w + v, alpha)


def alpha_pd_form(Q, v, alpha: float) -> np.ndarray:
    """``<v, Q v^<alpha-1>>`` for one vector or a batch of row vectors."""
    Q = np.asarray(Q, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sum(v * (signed_power(v, alpha - 1.0) @ Q.T), axis=-1)


def is_alpha_pd(Q, alpha: float, samples: int, rng=None, max_radius: float = 10.0) -> bool:
    """Monte Carlo certificate of alpha-positive definiteness.

    Draws ``samples`` vectors with uniformly random directions, rescaled to an
    alpha-norm in (1, max_radius], and reports whether the form
    ``<v, Q v^<alpha-1>>`` is positive for all of them.  A ``True`` result is
    probabilistic evidence, not a proof.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"Q must be square, got shape {Q.shape}")
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(0 if rng is None else rng)
    d = Q.shape[0]
    dirs = rng.standard_normal((samples, d))
    norms = alpha_norm_pow(dirs, alpha) ** (1.0 / alpha)
    dirs /= norms[:, None]
    radius = rng.uniform(1.0, max_radius, samples)
    radius[radius <= 1.0] = np.nextafter(1.0, 2.0)
    v = dirs * radius[:, None]
    return bool(np.all(alpha_pd_form(Q, v, alpha) > 0.0))
