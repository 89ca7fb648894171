import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from onebit_mimo import (
    DegenerateCovarianceError,
    InvalidCovarianceError,
    arcsine_cov_quantized,
    cross_cov_quantized_unquantized,
    linearized_cov_quantized,
    quantize,
)
from onebit_mimo.quantization import QUANT_DISTORTION

from oracles import quantized_moments, random_psd

finite = st.floats(-1e6, 1e6, allow_nan=False)
complex_vectors = arrays(np.complex128, st.integers(1, 16),
                         elements=st.builds(complex, finite, finite))


def test_quantize_examples():
    np.testing.assert_array_equal(quantize([0.3 - 2.0j]), [1 - 1j])
    np.testing.assert_array_equal(quantize([-0.0001 + 5j]), [-1 + 1j])


def test_quantize_zero_ties_go_positive():
    np.testing.assert_array_equal(quantize([0j, -0.0 - 0.0j, complex(0, -1)]),
                                  [1 + 1j, 1 + 1j, 1 - 1j])


@given(complex_vectors)
def test_quantize_alphabet_and_idempotence(x):
    q = quantize(x)
    np.testing.assert_array_equal(np.abs(q.real), 1.0)
    np.testing.assert_array_equal(np.abs(q.imag), 1.0)
    assert np.sum(q.real**2 + q.imag**2) == 2 * x.size
    np.testing.assert_array_equal(quantize(q), q)


class TestCrossCovariance:
    def test_unit_scalar_matches_half_normal_mean(self):
        # 2 E|x_R| with x_R ~ N(0, 1/2) is 2 * sqrt(1/2) * sqrt(2/pi)
        analytic = 2 * np.sqrt(0.5) * np.sqrt(2 / np.pi)
        out = cross_cov_quantized_unquantized(np.array([[1.0]]))
        assert out[0, 0] == pytest.approx(analytic, rel=1e-15)
        assert out[0, 0] == pytest.approx(1.12838, abs=1e-5)

    def test_unit_scalar_sampling(self):
        rng = np.random.default_rng(11)
        stats = quantized_moments(np.array([[1.0 + 0j]]), 1_000_000, rng)
        mean, se_r, se_i = stats["qx"]
        assert abs(mean[0, 0].real - 2 / np.sqrt(np.pi)) <= 3 * se_r[0, 0]
        assert abs(mean[0, 0].imag) <= 3 * se_i[0, 0]

    def test_identity(self):
        np.testing.assert_allclose(cross_cov_quantized_unquantized(np.eye(3)),
                                   2 / np.sqrt(np.pi) * np.eye(3), rtol=1e-15)

    def test_diagonal_scaling(self):
        C = np.diag([4.0, 9.0])
        expected = np.sqrt(4 / np.pi) * np.diag([2.0, 3.0])
        np.testing.assert_allclose(cross_cov_quantized_unquantized(C), expected, rtol=1e-15)
        stats = quantized_moments(C.astype(complex), 1_000_000, np.random.default_rng(12))
        mean, se_r, _ = stats["qx"]
        assert np.all(np.abs(mean.real - expected) <= 3 * se_r + 1e-12)

    @pytest.mark.parametrize("bad", [np.diag([1.0, 0.0]), np.diag([1.0, -2.0])])
    def test_degenerate(self, bad):
        with pytest.raises(DegenerateCovarianceError):
            cross_cov_quantized_unquantized(bad)


class TestArcsineLaw:
    def test_identity(self):
        np.testing.assert_array_equal(arcsine_cov_quantized(np.eye(4)), 2 * np.eye(4))

    def test_half_correlation(self):
        C = np.array([[1.0, 0.5], [0.5, 1.0]])
        out = arcsine_cov_quantized(C)
        assert out[0, 1].real == pytest.approx(2 / 3, rel=1e-14)
        assert out[0, 1].imag == 0
        stats = quantized_moments(C.astype(complex), 1_000_000, np.random.default_rng(13))
        mean, se_r, se_i = stats["qq"]
        assert abs(mean[0, 1].real - 2 / 3) <= 3 * se_r[0, 1]
        assert abs(mean[0, 1].imag) <= 3 * se_i[0, 1]

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_diagonal_is_two(self, seed, n):
        C = random_psd(np.random.default_rng(seed), n)
        np.testing.assert_array_equal(np.diag(arcsine_cov_quantized(C)), 2.0)
        np.testing.assert_array_equal(np.diag(linearized_cov_quantized(C)), 2.0)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1),
           arrays(np.float64, 4, elements=st.floats(1e-3, 1e3)))
    def test_invariant_to_diagonal_rescaling(self, seed, lam):
        C = random_psd(np.random.default_rng(seed), 4)
        L = np.diag(lam)
        np.testing.assert_allclose(arcsine_cov_quantized(L @ C @ L),
                                   arcsine_cov_quantized(C), atol=1e-12)
        np.testing.assert_allclose(linearized_cov_quantized(L @ C @ L),
                                   linearized_cov_quantized(C), atol=1e-12)

    def test_clamps_rounding_overshoot(self):
        C = np.array([[1.0, 1.0 + 5e-10], [1.0 + 5e-10, 1.0]])
        out = arcsine_cov_quantized(C)
        assert out[0, 1].real == pytest.approx(2.0)

    def test_rejects_invalid_correlation(self):
        C = np.array([[1.0, 1.1], [1.1, 1.0]])
        with pytest.raises(InvalidCovarianceError):
            arcsine_cov_quantized(C)
        with pytest.raises(InvalidCovarianceError):
            linearized_cov_quantized(C)
        with pytest.raises(InvalidCovarianceError):
            arcsine_cov_quantized(np.array([[1.0, 1.1j], [-1.1j, 1.0]]))

    def test_degenerate(self):
        with pytest.raises(DegenerateCovarianceError):
            arcsine_cov_quantized(np.zeros((2, 2)))


class TestLinearized:
    def test_identity_exact(self):
        np.testing.assert_allclose(linearized_cov_quantized(np.eye(3)), 2 * np.eye(3), atol=1e-15)

    def test_small_correlation_gap(self):
        C = np.array([[1.0, 0.1], [0.1, 1.0]])
        lin = linearized_cov_quantized(C)[0, 1].real
        exact = arcsine_cov_quantized(C)[0, 1].real
        assert lin == pytest.approx(4 / np.pi * 0.1, rel=1e-14)
        assert exact == pytest.approx(4 / np.pi * np.arcsin(0.1), rel=1e-14)
        assert abs(lin - exact) / exact < 2e-3

    def test_symbol_variance_cancels(self):
        rng = np.random.default_rng(3)
        P = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        PPh = P @ P.conj().T
        k2 = 1 / np.sqrt(np.real(np.diag(PPh)))
        expected = 4 / np.pi * (k2[:, None] * PPh * k2 + QUANT_DISTORTION * np.eye(5))
        np.testing.assert_allclose(linearized_cov_quantized(2.0 * PPh), expected, atol=1e-14)
        np.testing.assert_allclose(linearized_cov_quantized(PPh), expected, atol=1e-14)


@pytest.mark.slow
def test_sampling_oracle_random_covariance():
    rng = np.random.default_rng(14)
    C = random_psd(rng, 4)
    stats = quantized_moments(C, 1_000_000, rng)
    mean, se_r, se_i = stats["qq"]
    exact = arcsine_cov_quantized(C)
    iu = np.triu_indices(4, 1)
    assert np.all(np.abs(mean.real - exact.real)[iu] <= 3 * se_r[iu])
    assert np.all(np.abs(mean.imag - exact.imag)[iu] <= 3 * se_i[iu])
