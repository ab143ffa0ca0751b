"""Symmetric alpha-stable interference.

Draws use the Chambers-Mallows-Stuck transform of a uniform angle and a unit
exponential, which is exact for every alpha in (1, 2].  The characteristic
function of a draw with scale ``delta`` is ``exp(-delta**alpha * |w|**alpha)``,
so alpha = 2 gives a Gaussian with standard deviation ``delta * sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from otagd.alpha_core import check_alpha


@dataclass(frozen=True)
class StableParams:
    alpha: float
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be > 0, got {self.delta!r}")
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    ``(seed, stream_id, path)`` maps to a Philox generator through numpy's
    SeedSequence, so the same address yields the same draws on any platform
    and in any process.  ``substream`` derives child lanes without consuming
    the parent.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"stream coordinates must be 64-bit unsigned, got {v!r}")

    def substream(self, *lanes: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(x) for x in lanes))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngStream``, a Generator, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def stable_transform(alpha: float, angle, expo) -> np.ndarray:
    """Map U(-pi/2, pi/2) angles and Exp(1) variates to standard S(alpha, 1) draws."""
    angle = np.asarray(angle, dtype=float)
    expo = np.asarray(expo, dtype=float)
    if alpha == 2.0:
        # Closed form of the alpha -> 2 limit; a Box-Muller draw with variance 2.
        return 2.0 * np.sin(angle) * np.sqrt(expo)
    return (
        np.sin(alpha * angle)
        / np.cos(angle) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * angle) / expo) ** ((1.0 - alpha) / alpha)
    )


def draw_stable(params: StableParams, gen: np.random.Generator, size) -> np.ndarray:
    """Array of i.i.d. draws; angles are consumed before exponentials."""
    angle = gen.uniform(-np.pi / 2, np.pi / 2, size)
    expo = gen.standard_exponential(size)
    return params.delta * stable_transform(params.alpha, angle, expo)


def sample_stable(params: StableParams, rng) -> float:
    return float(draw_stable(params, as_generator(rng), 1)[0])


def sample_stable_vec(params: StableParams, d: int, rng) -> np.ndarray:
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return draw_stable(params, as_generator(rng), d)


def empirical_char_fn(samples, omega: float) -> complex:
    """Sample mean of ``exp(1j * omega * x)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    re = np.mean(np.cos(omega * x))
    im = np.mean(np.sin(omega * x))
    return complex(re, im)


def char_fn(params: StableParams, omega) -> np.ndarray | float:
    return np.exp(-(params.delta ** params.alpha) * np.abs(omega) ** params.alpha)


def tail_exceedance(samples, threshold: float) -> float:
    """Fraction of samples with ``|x| > threshold``."""
    if not threshold > 0:
        raise ValueError(f"threshold must be > 0, got {threshold!r}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        return 0.0
    return float(np.count_nonzero(np.abs(x) > threshold)) / x.size


def tail_slope(samples, thresholds) -> float:
    """Least-squares slope of log exceedance against log threshold."""
    t = np.asarray(thresholds, dtype=float)
    p = np.array([tail_exceedance(samples, x) for x in t])
    if np.any(p <= 0):
        raise ValueError("some thresholds are never exceeded; slope undefined")
    return float(np.polyfit(np.log(t), np.log(p), 1)[0])
