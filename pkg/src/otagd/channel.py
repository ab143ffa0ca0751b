"""Analog uplink: modulation onto orthonormal waveforms, fading, interference.

Each agent maps its gradient onto ``d`` orthonormal discrete waveforms of
length ``T``.  The server sees the fading-weighted superposition plus
interference, runs a bank of matched filters and normalises by ``1/N``:

    g = (1/N) * sum_n h_n * grad_n + xi

Interference is specified at the matched-filter output, i.e. ``xi`` is what
survives projection and normalisation.  Transmit power is taken as 1 because
agents pre-invert their large-scale path loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from otagd.stable import StableParams, as_generator, draw_stable

FADING_KINDS = ("rayleigh", "gaussian")
MODES = ("direct", "waveform")


@dataclass(frozen=True)
class ChannelModel:
    """Fading and interference statistics for one uplink.

    ``fading="rayleigh"`` fixes the spread from the mean,
    ``sigma**2 = (4/pi - 1) * mu**2``; ``fading_std`` must then be left
    unset.  ``fading="gaussian"`` draws ``N(mu, sigma**2)`` and redraws any
    negative gain, which is a negligible truncation when ``mu >> sigma``.
    ``interference=None`` switches the interference off.
    """

    num_agents: int
    fading_mean: float = 1.0
    fading: str = "rayleigh"
    fading_std: float | None = None
    interference: StableParams | None = None
    waveform_samples: int = 0

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        if not self.fading_mean > 0:
            raise ValueError("fading_mean must be > 0")
        if self.fading not in FADING_KINDS:
            raise ValueError(f"fading must be one of {FADING_KINDS}, got {self.fading!r}")
        if self.fading == "rayleigh" and self.fading_std is not None:
            raise ValueError("Rayleigh fading fixes its spread from the mean; leave fading_std unset")
        if self.fading == "gaussian":
            if self.fading_std is None or not self.fading_std >= 0:
                raise ValueError("gaussian fading needs fading_std >= 0")
        if self.waveform_samples < 0:
            raise ValueError("waveform_samples must be >= 0")

    @property
    def mu(self) -> float:
        return self.fading_mean

    @property
    def sigma(self) -> float:
        if self.fading == "rayleigh":
            return self.fading_mean * math.sqrt(4.0 / math.pi - 1.0)
        return float(self.fading_std)

    def draw_fading(self, gen: np.random.Generator, size) -> np.ndarray:
        if self.fading == "rayleigh":
            return gen.rayleigh(self.fading_mean / math.sqrt(math.pi / 2.0), size)
        h = gen.normal(self.fading_mean, self.fading_std, size)
        bad = h < 0
        while np.any(bad):
            h[bad] = gen.normal(self.fading_mean, self.fading_std, int(bad.sum()))
            bad = h < 0
        return h

    def draw_interference(self, gen: np.random.Generator, size) -> np.ndarray:
        if self.interference is None:
            return np.zeros(size)
        return draw_stable(self.interference, gen, size)


@dataclass(frozen=True)
class WaveformBasis:
    """``d x T`` matrix whose rows are orthonormal sampled waveforms."""

    rows: np.ndarray

    @property
    def dim(self) -> int:
        return self.rows.shape[0]

    @property
    def samples(self) -> int:
        return self.rows.shape[1]

    def gram(self) -> np.ndarray:
        return self.rows @ self.rows.T


def make_basis(d: int, T: int, seed: int = 0, canonical: bool = False) -> WaveformBasis:
    """Orthonormal waveforms from the QR factor of a seeded Gaussian matrix.

    ``canonical=True`` returns unit impulses instead.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if T < d:
        raise ValueError(f"need T >= d, got T={T}, d={d}")
    if canonical:
        return WaveformBasis(np.eye(d, T))
    a = np.random.default_rng(seed).standard_normal((T, T))
    q, r = np.linalg.qr(a)
    # Fix the sign ambiguity of QR so the basis depends on the seed only.
    q = q * np.sign(np.diag(r))
    return WaveformBasis(np.ascontiguousarray(q.T[:d]))


def modulate(gradient, basis: WaveformBasis) -> np.ndarray:
    """Sampled signal ``sum_i gradient_i * s_i``; leading axes broadcast."""
    g = np.asarray(gradient, dtype=float)
    if g.shape[-1] != basis.dim:
        raise ValueError(f"gradient has {g.shape[-1]} entries, basis has {basis.dim} waveforms")
    return g @ basis.rows


def demodulate(signal, basis: WaveformBasis) -> np.ndarray:
    """Matched-filter outputs ``<signal, s_i>``."""
    y = np.asarray(signal, dtype=float)
    if y.shape[-1] != basis.samples:
        raise ValueError(f"signal has {y.shape[-1]} samples, basis expects {basis.samples}")
    return y @ basis.rows.T


def combine_direct(gradients, fading, interference) -> np.ndarray:
    """Aggregate ``(..., N, d)`` gradients with ``(..., N)`` gains."""
    gradients = np.asarray(gradients, dtype=float)
    n = gradients.shape[-2]
    weighted = np.asarray(fading)[..., :, None] * gradients
    return weighted.sum(axis=-2) / n + interference


def combine_waveform(gradients, fading, interference, basis: WaveformBasis) -> np.ndarray:
    """Same aggregate as ``combine_direct`` but through signal space."""
    gradients = np.asarray(gradients, dtype=float)
    n = gradients.shape[-2]
    tx = modulate(gradients, basis)
    received = (np.asarray(fading)[..., :, None] * tx).sum(axis=-2)
    received = received + n * modulate(interference, basis)
    return demodulate(received, basis) / n


def ota_aggregate(gradients, model: ChannelModel, rng, mode: str = "direct",
                  basis: WaveformBasis | None = None) -> np.ndarray:
    """One noisy over-the-air aggregate of ``N`` local gradients.

    Fading gains are drawn from lane 0 of ``rng`` and interference from
    lane 1 when ``rng`` is an ``RngStream``, so both modes and any number of
    agents see the same interference draw.
    """
    gradients = np.asarray(gradients, dtype=float)
    if gradients.ndim != 2:
        raise ValueError("gradients must be an (N, d) array")
    n, d = gradients.shape
    if n != model.num_agents:
        raise ValueError(f"expected {model.num_agents} gradients, got {n}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    gen_h, gen_xi = _lane_generators(rng)
    h = model.draw_fading(gen_h, n)
    xi = model.draw_interference(gen_xi, d)
    if mode == "direct":
        return combine_direct(gradients, h, xi)
    if basis is None:
        basis = make_basis(d, max(model.waveform_samples, d))
    if basis.dim != d:
        raise ValueError(f"basis has {basis.dim} waveforms, gradients have {d} entries")
    return combine_waveform(gradients, h, xi, basis)


def _lane_generators(rng):
    if hasattr(rng, "substream"):
        return rng.substream(0).generator(), rng.substream(1).generator()
    gen = as_generator(rng)
    return gen, gen
