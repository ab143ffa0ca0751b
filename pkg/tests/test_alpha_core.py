import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from otagd.alpha_core import alpha_norm_pow, check_alpha, is_alpha_pd, lemma1_gap, signed_power

vectors = arrays(np.float64, st.integers(1, 8), elements=st.floats(-10, 10))
alphas = st.floats(1.0, 2.0)
# powers of entries below ~1e-30 underflow to 0 at some exponents
moderate = arrays(np.float64, st.integers(1, 8),
                  elements=st.floats(-10, 10).filter(lambda x: x == 0 or abs(x) > 1e-30))


class TestSignedPower:
    def test_integer_power(self):
        np.testing.assert_array_equal(signed_power([-2, 3], 2), [-4, 9])

    def test_identity(self):
        np.testing.assert_array_equal(signed_power([-5, 0, 7], 1), [-5, 0, 7])

    def test_three_halves(self):
        np.testing.assert_array_equal(signed_power([-4, 0, 1], 1.5), [-8, 0, 1])

    def test_zero_stays_zero(self):
        assert signed_power([0.0], 0.3)[0] == 0.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            signed_power([1.0, np.inf], 1.5)
        with pytest.raises(ValueError):
            signed_power([1.0, np.nan], 1.5)

    @given(vectors, st.floats(0, 3))
    def test_odd(self, w, a):
        np.testing.assert_array_equal(signed_power(-w, a), -signed_power(w, a))

    @given(moderate, st.floats(0.5, 2), st.floats(0.5, 2))
    def test_composition(self, w, a, b):
        np.testing.assert_allclose(signed_power(signed_power(w, a), b), signed_power(w, a * b),
                                   rtol=1e-12, atol=1e-300)


class TestAlphaNorm:
    def test_units(self):
        assert alpha_norm_pow([1, 1], 1.5) == 2.0

    def test_zero(self):
        assert alpha_norm_pow([0, 0, 0], 1.7) == 0.0

    def test_by_hand(self):
        # 2**1.5 + 3**1.5 written out from square roots
        expected = 2 * math.sqrt(2) + 3 * math.sqrt(3)
        assert alpha_norm_pow([-2, 3], 1.5) == pytest.approx(expected, rel=1e-15)
        assert expected == pytest.approx(8.0245795474, abs=1e-9)

    def test_rejects_small_alpha(self):
        with pytest.raises(ValueError):
            alpha_norm_pow([1.0], 0.5)

    @given(vectors)
    def test_euclidean_at_two(self, w):
        assert alpha_norm_pow(w, 2.0) == np.sum(w * w)

    @given(vectors, alphas)
    def test_pairing_identity(self, w, a):
        lhs = float(np.dot(signed_power(w, a - 1.0), w))
        rhs = alpha_norm_pow(w, a)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)

    def test_batch(self):
        out = alpha_norm_pow(np.array([[1.0, -1.0], [2.0, 0.0]]), 2.0)
        np.testing.assert_array_equal(out, [2.0, 4.0])


class TestNormInequality:
    def test_by_hand(self):
        # lhs = 2, rhs = 1 + 0 + 4
        assert lemma1_gap([1, 0], [0, 1], 2.0) == pytest.approx(3.0)

    @given(vectors, alphas)
    def test_zero_increment(self, w, a):
        assert lemma1_gap(w, np.zeros_like(w), a) == pytest.approx(0.0, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lemma1_gap([1, 2], [1, 2, 3], 1.5)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            lemma1_gap([1.0], [1.0], 2.5)

    def test_fuzz(self, rng):
        n, d = 100_000, 4
        w = rng.uniform(-10, 10, (n, d))
        v = rng.uniform(-10, 10, (n, d))
        a = rng.uniform(1, 2, n)
        gaps = np.array([lemma1_gap(w[i], v[i], a[i]) for i in range(0, n, 1000)])
        assert gaps.min() >= -1e-12
        # vectorised pass over every triple, one alpha per batch row
        rhs = (np.sum(np.abs(w) ** a[:, None], 1)
               + a * np.sum(np.sign(w) * np.abs(w) ** (a[:, None] - 1) * v, 1)
               + 4 * np.sum(np.abs(v) ** a[:, None], 1))
        lhs = np.sum(np.abs(w + v) ** a[:, None], 1)
        assert np.min(rhs - lhs) >= -1e-12 * np.max(lhs)


class TestAlphaPD:
    def test_identity(self):
        assert is_alpha_pd(np.eye(3), 1.5, 10_000)

    def test_negative_identity(self):
        assert not is_alpha_pd(-np.eye(3), 1.5, 10_000)

    def test_diagonal(self):
        Q = np.diag([2.0, 0.5])
        assert is_alpha_pd(Q, 1.3, 100_000)
        # independent check: the form on a fine grid of unit-alpha-norm directions
        t = np.linspace(0, 2 * np.pi, 20_001)
        v = np.stack([np.cos(t), np.sin(t)], 1)
        v /= (np.sum(np.abs(v) ** 1.3, 1) ** (1 / 1.3))[:, None]
        form = 2.0 * np.abs(v[:, 0]) ** 1.3 + 0.5 * np.abs(v[:, 1]) ** 1.3
        assert form.min() > 0

    def test_indefinite(self):
        assert not is_alpha_pd(np.diag([1.0, -1.0]), 1.5, 1000)

    def test_asymmetric(self):
        with pytest.raises(ValueError):
            is_alpha_pd(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.5, 10)


@pytest.mark.parametrize("bad", [0.8, 1.0, 2.01, float("nan")])
def test_check_alpha_rejects(bad):
    with pytest.raises(ValueError):
        check_alpha(bad)


def test_check_alpha_admits_two():
    assert check_alpha(2) == 2.0
