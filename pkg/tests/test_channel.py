import math

import numpy as np
import pytest

from otagd.channel import (
    ChannelModel,
    WaveformBasis,
    combine_direct,
    combine_waveform,
    demodulate,
    make_basis,
    modulate,
    ota_aggregate,
)
from otagd.stable import RngStream, StableParams, char_fn, empirical_char_fn


class TestBasis:
    def test_square_is_orthogonal(self):
        b = make_basis(2, 2)
        np.testing.assert_allclose(b.gram(), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(b.rows.T @ b.rows, np.eye(2), atol=1e-12)

    def test_rectangular_gram(self):
        g = make_basis(3, 8).gram()
        np.testing.assert_allclose(np.diag(g), 1.0, atol=1e-12)
        np.testing.assert_allclose(g - np.diag(np.diag(g)), 0.0, atol=1e-12)

    @pytest.mark.parametrize("d,T", [(1, 1), (5, 16), (10, 64), (40, 40)])
    def test_gram_identity(self, d, T):
        np.testing.assert_allclose(make_basis(d, T, seed=3).gram(), np.eye(d), atol=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            make_basis(4, 3)

    def test_seeded(self):
        assert make_basis(3, 8, seed=1).rows.tobytes() == make_basis(3, 8, seed=1).rows.tobytes()
        assert not np.allclose(make_basis(3, 8, seed=1).rows, make_basis(3, 8, seed=2).rows)


class TestModulation:
    def test_zero_gradient(self):
        b = make_basis(3, 8)
        assert not np.any(modulate(np.zeros(3), b))

    def test_unit_coefficient(self):
        b = make_basis(4, 4, canonical=True)
        np.testing.assert_array_equal(modulate(np.eye(4)[0], b), b.rows[0])

    def test_identity_basis(self):
        b = WaveformBasis(np.eye(2))
        np.testing.assert_array_equal(modulate([1.0, 2.0], b), [1.0, 2.0])

    def test_dimension_mismatch(self):
        b = make_basis(3, 8)
        with pytest.raises(ValueError):
            modulate(np.ones(4), b)
        with pytest.raises(ValueError):
            demodulate(np.ones(7), b)

    def test_round_trip(self, rng):
        b = make_basis(5, 16, seed=7)
        for _ in range(100):
            g = rng.standard_normal(5) * 10 ** rng.uniform(-3, 3)
            back = demodulate(modulate(g, b), b)
            assert np.linalg.norm(back - g) / np.linalg.norm(g) < 1e-12

    def test_zero_signal(self):
        assert not np.any(demodulate(np.zeros(16), make_basis(5, 16)))

    def test_superposition(self, rng):
        b = make_basis(5, 16, seed=2)
        g1, g2 = rng.standard_normal((2, 5))
        out = demodulate(modulate(g1, b) + modulate(g2, b), b)
        np.testing.assert_allclose(out, g1 + g2, rtol=1e-12, atol=1e-14)


class TestModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelModel(0)
        with pytest.raises(ValueError):
            ChannelModel(2, fading_mean=0.0)
        with pytest.raises(ValueError):
            ChannelModel(2, fading="gaussian")
        with pytest.raises(ValueError):
            ChannelModel(2, fading="gaussian", fading_std=-1.0)
        with pytest.raises(ValueError):
            ChannelModel(2, fading_std=0.3)
        with pytest.raises(ValueError):
            ChannelModel(2, fading="nakagami")

    def test_rayleigh_sigma(self):
        assert ChannelModel(3, fading_mean=2.0).sigma == pytest.approx(2.0 * math.sqrt(4 / math.pi - 1))

    def test_rayleigh_moments(self):
        m = ChannelModel(1, fading_mean=1.0)
        h = m.draw_fading(RngStream(0).generator(), 1_000_000)
        assert h.min() >= 0
        assert h.mean() == pytest.approx(m.mu, abs=0.01)
        assert h.var() == pytest.approx(m.sigma ** 2, abs=0.02)

    def test_gaussian_moments(self):
        m = ChannelModel(1, fading_mean=1.0, fading="gaussian", fading_std=0.2)
        h = m.draw_fading(RngStream(0).generator(), 1_000_000)
        assert h.min() >= 0
        assert h.mean() == pytest.approx(1.0, abs=0.01)
        assert h.var() == pytest.approx(0.04, abs=0.02)


class TestAggregate:
    def test_arithmetic_mean(self):
        out = combine_direct([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0], np.zeros(2))
        np.testing.assert_array_equal(out, [2.0, 3.0])
        b = make_basis(2, 6, seed=4)
        out = combine_waveform([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0], np.zeros(2), b)
        np.testing.assert_allclose(out, [2.0, 3.0], atol=1e-12)

    def test_degenerate_channel(self, rng):
        model = ChannelModel(4, fading_mean=1.5, fading="gaussian", fading_std=0.0)
        g = rng.standard_normal((4, 3))
        out = ota_aggregate(g, model, RngStream(1))
        np.testing.assert_allclose(out, 1.5 * g.mean(axis=0), rtol=1e-15)

    def test_wrong_agent_count(self):
        with pytest.raises(ValueError):
            ota_aggregate(np.zeros((3, 2)), ChannelModel(4), RngStream(0))

    def test_wrong_mode(self):
        with pytest.raises(ValueError):
            ota_aggregate(np.zeros((4, 2)), ChannelModel(4), RngStream(0), mode="digital")

    def test_basis_mismatch(self):
        with pytest.raises(ValueError):
            ota_aggregate(np.zeros((4, 2)), ChannelModel(4), RngStream(0), "waveform", make_basis(3, 8))

    def test_mode_equivalence(self, rng):
        # Heavy-tailed xi can be enormous, so agreement is measured relative to max(1, |g|).
        worst = 0.0
        for i in range(1000):
            n, d = rng.integers(1, 20), rng.integers(1, 12)
            model = ChannelModel(n, interference=StableParams(rng.uniform(1.05, 2.0), rng.uniform(0.1, 3)),
                                 waveform_samples=d + int(rng.integers(0, 20)))
            g = rng.standard_normal((n, d)) * 10 ** rng.uniform(-2, 2)
            s = RngStream(99, i)
            a = ota_aggregate(g, model, s, "direct")
            b = ota_aggregate(g, model, s, "waveform")
            worst = max(worst, np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))
        assert worst < 1e-10

    def test_unbiased_signal(self, rng):
        n, d, trials = 10, 4, 100_000
        model = ChannelModel(n, fading_mean=1.0)
        g = rng.standard_normal((n, d))
        gen = RngStream(5).generator()
        h = model.draw_fading(gen, (trials, n))
        out = combine_direct(np.broadcast_to(g, (trials, n, d)), h, 0.0)
        G = np.linalg.norm(g, axis=1).max()
        tol = 5 * model.sigma * G / math.sqrt(n * trials)
        assert np.all(np.abs(out.mean(axis=0) - model.mu * g.mean(axis=0)) < tol)

    def test_zero_gradients_give_interference(self):
        p = StableParams(1.5, 1.0)
        model = ChannelModel(100, interference=p)
        gen = RngStream(6).generator()
        zeros = np.zeros((100, 10))
        out = np.concatenate([ota_aggregate(zeros, model, gen) for _ in range(10_000)])
        for w in (0.5, 1.0, 2.0):
            assert abs(empirical_char_fn(out, w) - char_fn(p, w)) < 0.01

    def test_common_interference_across_agent_counts(self):
        p = StableParams(1.5, 1.0)
        s = RngStream(3, 7)
        a = ota_aggregate(np.zeros((5, 3)), ChannelModel(5, interference=p), s)
        b = ota_aggregate(np.zeros((50, 3)), ChannelModel(50, interference=p), s)
        np.testing.assert_array_equal(a, b)
