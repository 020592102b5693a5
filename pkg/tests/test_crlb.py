import numpy as np
import pytest

from conftest import kf_filter
from ifl.crlb import (
    FisherState,
    bound_diagonal,
    bound_trace,
    rcrlb_inverse_step,
    rcrlb_step,
)


class TestForwardRecursion:
    def test_scalar_hand_value(self):
        out = rcrlb_step(FisherState([[1.0]]), [[1.0]], [[1.0]],
                         [[1.0]], [[1.0]])
        # 1 + 1 - 1 * (1 + 1)^-1 * 1 = 1.5
        assert out.J[0, 0] == pytest.approx(1.5, abs=1e-12)
        assert out.k == 1

    def test_inverse_information_equals_kf_covariance(self, random_linear_2d):
        d = random_linear_2d
        cov0 = 0.8 * np.eye(2)
        _, covs = kf_filter(d["A"], d["C"], d["Q"], d["R"], np.zeros(2),
                            cov0, d["ys"][:50])
        fisher = FisherState(np.linalg.inv(cov0))
        for k in range(50):
            fisher = rcrlb_step(fisher, d["A"], d["C"], d["Q"], d["R"])
            np.testing.assert_allclose(np.linalg.inv(fisher.J), covs[k],
                                       atol=1e-10)

    def test_no_measurement_matches_woodbury_identity(self):
        rng = np.random.default_rng(0)
        J = np.eye(2) + 0.5 * np.ones((2, 2))
        F = np.array([[0.9, 0.2], [0.0, 0.7]])
        Q = np.diag([0.3, 0.6])
        out = rcrlb_step(FisherState(J), F, np.zeros((1, 2)), Q, [[1.0]])
        direct = np.linalg.inv(Q + F @ np.linalg.inv(J) @ F.T)
        np.testing.assert_allclose(out.J, direct, atol=1e-10)

    def test_rank_deficient_process_noise_regularized(self):
        gain = np.array([1.0, -2.0])
        Q = np.outer(gain, gain)  # rank 1
        out = rcrlb_step(FisherState(np.eye(2)), np.eye(2),
                         np.eye(2)[:1], Q, [[1.0]])
        assert np.all(np.isfinite(out.J))

    def test_information_dominates_measurement_term(self, random_linear_2d):
        # J' - H^T R^-1 H must stay PSD (the subtracted term <= Q^-1)
        d = random_linear_2d
        fisher = FisherState(np.eye(2))
        meas = d["C"].T @ np.linalg.inv(d["R"]) @ d["C"]
        for _ in range(30):
            fisher = rcrlb_step(fisher, d["A"], d["C"], d["Q"], d["R"])
            assert np.linalg.eigvalsh(fisher.J - meas).min() >= -1e-9


class TestInverseRecursion:
    def test_linear_chain_matches_kf_covariance(self, random_linear_2d):
        # the inverse chain is itself a linear-Gaussian chain here
        d = random_linear_2d
        F_trans = np.array([[0.8, 0.05], [-0.1, 0.85]])
        Q_bar = 0.2 * np.eye(2)
        cov0 = np.eye(2)
        # KF covariance oracle with dynamics (F_trans, Q_bar), obs (G, Seps)
        cov = cov0.copy()
        fisher = FisherState(np.linalg.inv(cov0))
        for _ in range(50):
            fisher = rcrlb_inverse_step(fisher, F_trans, d["G"], Q_bar,
                                        d["Sigma_eps"])
            cov = F_trans @ cov @ F_trans.T + Q_bar
            S = d["G"] @ cov @ d["G"].T + d["Sigma_eps"]
            K = cov @ d["G"].T @ np.linalg.inv(S)
            cov = cov - K @ d["G"] @ cov
            np.testing.assert_allclose(np.linalg.inv(fisher.J), cov,
                                       atol=1e-10)

    def test_uninformative_action_noise(self):
        F_trans = 0.9 * np.eye(2)
        Q_bar = 0.3 * np.eye(2)
        G = np.array([[1.0, 0.5]])
        J0 = FisherState(np.eye(2))
        noisy = rcrlb_inverse_step(J0, F_trans, G, Q_bar, [[1e12]])
        blind = rcrlb_inverse_step(J0, F_trans, np.zeros((1, 2)), Q_bar,
                                   [[1.0]])
        np.testing.assert_allclose(noisy.J, blind.J, atol=1e-8)

    def test_zero_action_jacobian(self):
        F_trans = 0.9 * np.eye(2)
        Q_bar = 0.3 * np.eye(2)
        J0 = FisherState(np.eye(2))
        out = rcrlb_inverse_step(J0, F_trans, np.zeros((1, 2)), Q_bar,
                                 [[1.0]])
        direct = np.linalg.inv(Q_bar + F_trans @ np.linalg.inv(np.eye(2))
                               @ F_trans.T)
        np.testing.assert_allclose(out.J, direct, atol=1e-10)


def test_bound_extraction():
    fisher = FisherState(np.diag([4.0, 0.25]))
    np.testing.assert_allclose(bound_diagonal(fisher), [0.25, 4.0])
    assert bound_trace(fisher) == pytest.approx(4.25)
