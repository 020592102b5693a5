import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifl.core import (
    RngStream,
    gaussian_logpdf,
    sample_gaussian,
    symmetrize_psd,
)


class TestSymmetrizePsd:
    def test_identity_already_spd(self):
        out = symmetrize_psd(np.eye(2), 1e-9)
        np.testing.assert_array_equal(out, np.eye(2))

    def test_symmetrization_formula(self):
        out = symmetrize_psd(np.array([[1.0, 2.0], [0.0, 1.0]]), 0.0)
        np.testing.assert_allclose(out, np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_jitter_applied_when_indefinite(self):
        # eigenvalues (0, -1e-6): adding 1e-6 I gives diag(1e-6, 0)
        m = np.array([[0.0, 0.0], [0.0, -1e-6]])
        out = symmetrize_psd(m, 1e-6)
        np.testing.assert_allclose(out, np.diag([1e-6, 0.0]), atol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            symmetrize_psd(np.zeros((2, 3)), 0.0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            symmetrize_psd(np.array([[np.nan, 0.0], [0.0, 1.0]]), 0.0)

    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_idempotent_on_own_output(self, entries):
        m = np.array(entries).reshape(2, 2)
        once = symmetrize_psd(m, 1e-9)
        twice = symmetrize_psd(once, 1e-9)
        np.testing.assert_allclose(twice, once, rtol=0, atol=1e-15)


class TestGaussianLogpdf:
    def test_standard_normal_at_mode(self):
        val = gaussian_logpdf(np.zeros(1), np.zeros(1), np.eye(1))
        assert val == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)

    def test_unit_deviation(self):
        val = gaussian_logpdf(np.ones(1), np.zeros(1), np.eye(1))
        assert val == pytest.approx(-0.5 * np.log(2 * np.pi) - 0.5, abs=1e-12)

    def test_two_dim_closed_form(self):
        val = gaussian_logpdf(np.ones(2), np.zeros(2), 2.0 * np.eye(2))
        expected = -np.log(2 * np.pi) - np.log(2.0) - 0.5
        assert val == pytest.approx(expected, abs=1e-12)

    def test_singular_covariance_raises(self):
        with pytest.raises(np.linalg.LinAlgError):
            gaussian_logpdf(np.zeros(2), np.zeros(2), np.zeros((2, 2)))

    def test_density_integrates_to_one(self):
        # trapezoid over 20 sigma with 1e4 points
        sigma = 1.7
        xs = np.linspace(-10 * sigma, 10 * sigma, 10_000)
        vals = np.exp([gaussian_logpdf(np.array([x]), np.zeros(1),
                                       np.array([[sigma ** 2]])) for x in xs])
        integral = np.trapezoid(vals, xs)
        assert 0.999 <= integral <= 1.001


class TestSampleGaussian:
    def test_zero_covariance_returns_mean(self):
        rng = RngStream(7)
        mean = np.array([2.0, -3.0])
        out = sample_gaussian(rng, mean, np.zeros((2, 2)))
        np.testing.assert_array_equal(out, mean)

    def test_identical_seed_identical_draws(self):
        a = sample_gaussian(RngStream(123), np.zeros(2), np.eye(2))
        b = sample_gaussian(RngStream(123), np.zeros(2), np.eye(2))
        np.testing.assert_array_equal(a, b)

    def test_sequence_reproducible(self):
        r1, r2 = RngStream(9), RngStream(9)
        for _ in range(5):
            np.testing.assert_array_equal(
                sample_gaussian(r1, np.zeros(3), np.eye(3)),
                sample_gaussian(r2, np.zeros(3), np.eye(3)))

    def test_sample_variance(self):
        rng = RngStream(2024)
        draws = np.array([sample_gaussian(rng, np.zeros(1), np.eye(1))[0]
                          for _ in range(100_000)])
        assert 0.97 <= draws.var() <= 1.03

    def test_rank_deficient_covariance(self):
        # gain-column covariance: samples lie along the gain direction
        gain = np.array([1.0, -2.0])
        cov = np.outer(gain, gain)
        rng = RngStream(5)
        for _ in range(10):
            s = sample_gaussian(rng, np.zeros(2), cov)
            assert abs(s[0] * gain[1] - s[1] * gain[0]) < 1e-10
