"""Shared fixtures: linear test models and independently coded Kalman
filter oracles (plain matrix algebra, no package internals)."""

import numpy as np
import pytest

from ifl.models import SystemModel


def linear_model(A, C, G, Q, R, Sigma_eps, with_hessians=True):
    """SystemModel wrapping constant matrices, analytic derivatives."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n, p, n_a = A.shape[0], C.shape[0], G.shape[0]
    kwargs = {}
    if with_hessians:
        kwargs = dict(f_hess=lambda x: np.zeros((n, n, n)),
                      h_hess=lambda x: np.zeros((p, n, n)),
                      g_hess=lambda x: np.zeros((n_a, n, n)))
    return SystemModel(
        n=n, p=p, n_a=n_a,
        f=lambda x: A @ x, h=lambda x: C @ x, g=lambda x: G @ x,
        Q=np.atleast_2d(np.asarray(Q, dtype=float)),
        R=np.atleast_2d(np.asarray(R, dtype=float)),
        Sigma_eps=np.atleast_2d(np.asarray(Sigma_eps, dtype=float)),
        f_jac=lambda x: A, h_jac=lambda x: C, g_jac=lambda x: G,
        name="linear-test", **kwargs)


def quadratic_scalar_model(Q=1.0, R=1.0, Sigma_eps=1.0):
    """Scalar f(x) = x^2, h(x) = x^2, g(x) = x^2 with exact derivatives."""
    sq = lambda x: np.array([x[0] ** 2])
    jac = lambda x: np.array([[2.0 * x[0]]])
    hess = lambda x: np.array([[[2.0]]])
    return SystemModel(
        n=1, p=1, n_a=1, f=sq, h=sq, g=sq,
        Q=np.array([[Q]]), R=np.array([[R]]), Sigma_eps=np.array([[Sigma_eps]]),
        f_jac=jac, h_jac=jac, g_jac=jac,
        f_hess=hess, h_hess=hess, g_hess=hess,
        name="quadratic-test")


def kf_filter(A, C, Q, R, mean, cov, ys):
    """Plain two-step Kalman filter; returns (means, covs) after each update."""
    means, covs = [], []
    for y in ys:
        mean = A @ mean
        cov = A @ cov @ A.T + Q
        S = C @ cov @ C.T + R
        K = cov @ C.T @ np.linalg.inv(S)
        mean = mean + K @ (y - C @ mean)
        cov = cov - K @ C @ cov
        means.append(mean.copy())
        covs.append(cov.copy())
    return np.array(means), np.array(covs)


def kf_one_step(A, C, Q, R, mean, cov, ys):
    """Prediction-form Kalman filter: state k+1 from observation k."""
    means, covs = [], []
    for y in ys:
        S = C @ cov @ C.T + R
        K = A @ cov @ C.T @ np.linalg.inv(S)
        mean = A @ mean + K @ (y - C @ mean)
        cov = A @ cov @ A.T + Q - K @ S @ K.T
        means.append(mean.copy())
        covs.append(cov.copy())
    return np.array(means), np.array(covs)


def inverse_kf(A, C, G, Q, R, Sigma_eps, inv_mean, inv_cov, rep_cov,
               xs_next, actions):
    """Linear inverse Kalman filter oracle.

    Advances the forward gain recursion on a private covariance copy, builds
    the gain-coupled transition, and updates against each observed action.
    """
    means = []
    for x_next, a in zip(xs_next, actions):
        rep_pred = A @ rep_cov @ A.T + Q
        S = C @ rep_pred @ C.T + R
        K = rep_pred @ C.T @ np.linalg.inv(S)
        rep_cov = rep_pred - K @ C @ rep_pred
        F_trans = (np.eye(A.shape[0]) - K @ C) @ A
        inv_mean = F_trans @ inv_mean + K @ C @ x_next
        inv_cov = F_trans @ inv_cov @ F_trans.T + K @ R @ K.T
        Sb = G @ inv_cov @ G.T + Sigma_eps
        Kb = inv_cov @ G.T @ np.linalg.inv(Sb)
        inv_mean = inv_mean + Kb @ (a - G @ inv_mean)
        inv_cov = inv_cov - Kb @ G @ inv_cov
        means.append(inv_mean.copy())
    return np.array(means)


def inverse_kf_one_step(A, C, G, Q, R, Sigma_eps, inv_mean, inv_cov, rep_cov,
                        xs, actions):
    """Prediction-form linear inverse Kalman filter oracle."""
    means = []
    for x_k, a in zip(xs, actions):
        S_rep = C @ rep_cov @ C.T + R
        K = A @ rep_cov @ C.T @ np.linalg.inv(S_rep)
        rep_cov = A @ rep_cov @ A.T + Q - K @ S_rep @ K.T
        F_trans = A - K @ C
        drive = K @ C @ x_k
        Sb = G @ inv_cov @ G.T + Sigma_eps
        Kb = (F_trans @ inv_cov @ G.T) @ np.linalg.inv(Sb)
        inv_mean = F_trans @ inv_mean + drive + Kb @ (a - G @ inv_mean)
        inv_cov = (F_trans @ inv_cov @ F_trans.T + K @ R @ K.T
                   - Kb @ Sb @ Kb.T)
        means.append(inv_mean.copy())
    return np.array(means)


@pytest.fixture
def random_linear_2d():
    """A stable random 2-D linear-Gaussian model plus simulated data."""
    rng = np.random.default_rng(42)
    A = np.array([[0.9, 0.1], [-0.05, 0.8]])
    C = np.array([[1.0, 0.3], [0.0, 1.0]])
    G = np.array([[0.7, -0.2], [0.4, 1.1]])
    Q = 0.3 * np.eye(2)
    R = 0.5 * np.eye(2)
    Sigma_eps = 0.4 * np.eye(2)
    model = linear_model(A, C, G, Q, R, Sigma_eps)
    xs = [rng.normal(size=2)]
    ys = []
    for _ in range(100):
        xs.append(A @ xs[-1] + rng.multivariate_normal(np.zeros(2), Q))
        ys.append(C @ xs[-1] + rng.multivariate_normal(np.zeros(2), R))
    return dict(model=model, A=A, C=C, G=G, Q=Q, R=R, Sigma_eps=Sigma_eps,
                xs=np.array(xs), ys=np.array(ys), rng=rng)
