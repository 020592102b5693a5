"""Tracker-side filters: EKF, second-order EKF (two-step and one-step
prediction forms), Gaussian-sum EKF, and the dithered EKF.

All steps are pure functions from (belief, observation) to a new belief,
with the intermediate quantities exposed through StepRecord.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import gaussian_logpdf, posterior_hygiene, spd_solve, symmetrize
from .models import SystemModel, jacobian

Array = np.ndarray

WEIGHT_FLOOR = 1e-12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass
class GaussianBelief:
    """Mean/covariance pair: the universal single-Gaussian filter state."""

    mean: Array
    cov: Array

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))


@dataclass
class StepRecord:
    """One filter step: prediction, innovation covariance, gain, posterior.

    ``M`` is the prediction/observation cross term of the one-step
    second-order form; None for the other filters.
    """

    predicted: GaussianBelief
    S: Array
    K: Array
    updated: GaussianBelief
    M: Optional[Array] = None


def _trace_mean_correction(hessians: Array, cov: Array) -> Array:
    """0.5 * [Tr(hess_i @ cov)]_i, the second-order mean correction."""
    return 0.5 * np.einsum("ijk,kj->i", hessians, cov)


def _trace_cov_correction(hess_a: Array, hess_b: Array, cov: Array) -> Array:
    """0.5 * [Tr(hess_a_i cov hess_b_j cov)]_ij, the double-sum term."""
    a_cov = hess_a @ cov
    b_cov = hess_b @ cov
    return 0.5 * np.einsum("iab,jba->ij", a_cov, b_cov)


def _kalman_update(pred: GaussianBelief, H: Array, S: Array, innovation: Array):
    """Shared gain/update algebra: K = P H^T S^-1 applied to an innovation."""
    PHt = pred.cov @ H.T
    K = spd_solve(S, PHt.T).T
    mean = pred.mean + K @ innovation
    cov = posterior_hygiene(pred.cov - K @ PHt.T)
    return K, GaussianBelief(mean, cov)


def ekf_step(model: SystemModel, belief: GaussianBelief, y: Array) -> StepRecord:
    """Standard EKF predict/update against observation y."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    F = model.F(belief.mean)
    pred_mean = np.atleast_1d(np.asarray(model.f(belief.mean), dtype=float))
    pred_cov = symmetrize(F @ belief.cov @ F.T + model.Q)
    pred = GaussianBelief(pred_mean, pred_cov)
    H = model.H(pred_mean)
    S = symmetrize(H @ pred_cov @ H.T + model.R)
    innovation = y - np.atleast_1d(np.asarray(model.h(pred_mean), dtype=float))
    K, updated = _kalman_update(pred, H, S, innovation)
    return StepRecord(pred, S, K, updated)


def soekf_step(model: SystemModel, belief: GaussianBelief, y: Array) -> StepRecord:
    """Second-order EKF, two-step (predict then update) form.

    Adds Hessian trace corrections to the state/observation predictions and
    the double-sum terms to the prediction and innovation covariances.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    F = model.F(belief.mean)
    f_hess = model.f_hessians(belief.mean)
    pred_mean = (np.atleast_1d(np.asarray(model.f(belief.mean), dtype=float))
                 + _trace_mean_correction(f_hess, belief.cov))
    pred_cov = symmetrize(F @ belief.cov @ F.T + model.Q
                          + _trace_cov_correction(f_hess, f_hess, belief.cov))
    pred = GaussianBelief(pred_mean, pred_cov)

    H = model.H(pred_mean)
    h_hess = model.h_hessians(pred_mean)
    y_pred = (np.atleast_1d(np.asarray(model.h(pred_mean), dtype=float))
              + _trace_mean_correction(h_hess, pred_cov))
    S = symmetrize(H @ pred_cov @ H.T + model.R
                   + _trace_cov_correction(h_hess, h_hess, pred_cov))
    K, updated = _kalman_update(pred, H, S, y - y_pred)
    return StepRecord(pred, S, K, updated)


def soekf_one_step(model: SystemModel, belief: GaussianBelief, y: Array) -> StepRecord:
    """Second-order EKF in one-step prediction form.

    The observation Jacobian/Hessians are evaluated at the current estimate
    (not the prediction); the gain carries the cross term M between the
    transition and observation curvatures.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, cov = belief.mean, belief.cov
    F = model.F(x)
    H = model.H(x)
    f_hess = model.f_hessians(x)
    h_hess = model.h_hessians(x)

    x_tilde = (np.atleast_1d(np.asarray(model.f(x), dtype=float))
               + _trace_mean_correction(f_hess, cov))
    cov_tilde = symmetrize(F @ cov @ F.T + model.Q
                           + _trace_cov_correction(f_hess, f_hess, cov))
    S = symmetrize(H @ cov @ H.T + model.R
                   + _trace_cov_correction(h_hess, h_hess, cov))
    M = _trace_cov_correction(f_hess, h_hess, cov)
    K = spd_solve(S, (F @ cov @ H.T + M).T).T
    y_pred = (np.atleast_1d(np.asarray(model.h(x), dtype=float))
              + _trace_mean_correction(h_hess, cov))
    mean = x_tilde + K @ (y - y_pred)
    cov_new = posterior_hygiene(cov_tilde - K @ S @ K.T)
    return StepRecord(GaussianBelief(x_tilde, cov_tilde), S, K,
                      GaussianBelief(mean, cov_new), M=M)


# ---------------------------------------------------------------------------
# Gaussian-sum EKF
# ---------------------------------------------------------------------------


@dataclass
class GsBelief:
    """Weighted Gaussian mixture posterior: one EKF per component."""

    weights: Array
    means: Array
    covs: Array
    underflow: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covs = np.asarray(self.covs, dtype=float)
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")

    @property
    def l(self) -> int:
        return self.weights.shape[0]


def gsekf_step(model: SystemModel, belief: GsBelief, y: Array) -> GsBelief:
    """Per-component EKF step plus likelihood reweighting (in log space)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if model.has_batch_hooks:
        new_means, new_covs, loglik = _gs_bank_batched(model, belief, y)
    else:
        new_means, new_covs, loglik = [], [], []
        for i in range(belief.l):
            comp = GaussianBelief(belief.means[i], belief.covs[i])
            rec = ekf_step(model, comp, y)
            new_means.append(rec.updated.mean)
            new_covs.append(rec.updated.cov)
            resid = y - np.atleast_1d(np.asarray(model.h(rec.predicted.mean),
                                                 dtype=float))
            try:
                loglik.append(np.log(max(belief.weights[i], WEIGHT_FLOOR))
                              + gaussian_logpdf(resid, np.zeros_like(resid),
                                                rec.S))
            except np.linalg.LinAlgError:
                loglik.append(-np.inf)
        loglik = np.asarray(loglik)
    top = loglik.max()
    underflow = not np.isfinite(top)
    if underflow:
        weights = np.full(belief.l, 1.0 / belief.l)
    else:
        weights = np.exp(loglik - top)
        weights /= weights.sum()
        weights = np.maximum(weights, WEIGHT_FLOOR)
        weights /= weights.sum()
    return GsBelief(weights, np.array(new_means), np.array(new_covs),
                    underflow=underflow)


def _gs_bank_batched(model: SystemModel, belief: GsBelief, y: Array):
    """Stacked EKF bank update for models with batch hooks."""
    sym = lambda m: 0.5 * (m + np.swapaxes(m, 1, 2))
    F = np.asarray(model.f_jac_batch(belief.means), dtype=float)
    pred_means = np.asarray(model.f_batch(belief.means), dtype=float)
    pred_covs = sym(np.einsum("iab,ibc,idc->iad", F, belief.covs, F) + model.Q)
    H = np.asarray(model.h_jac_batch(pred_means), dtype=float)
    S = sym(np.einsum("iab,ibc,idc->iad", H, pred_covs, H) + model.R)
    resid = y - np.asarray(model.h_batch(pred_means), dtype=float)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return _gs_bank_batched_fallback(model, belief, y)
    PHt = np.einsum("iab,icb->iac", pred_covs, H)
    K = np.swapaxes(np.linalg.solve(S, np.swapaxes(PHt, 1, 2)), 1, 2)
    new_means = pred_means + np.einsum("iab,ib->ia", K, resid)
    raw = pred_covs - np.einsum("iab,icb->iac", K, PHt)
    sym_covs = sym(raw)
    dim = sym_covs.shape[1]
    jit = 1e-12 * np.maximum(np.trace(sym_covs, axis1=1, axis2=2), 0.0) / dim
    try:
        np.linalg.cholesky(sym_covs + (jit + 1e-300)[:, None, None]
                           * np.eye(dim))
        new_covs = sym_covs
    except np.linalg.LinAlgError:
        new_covs = np.array([posterior_hygiene(m) for m in sym_covs])
    dev = np.linalg.solve(chol, resid[:, :, None])
    logdets = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    quad = np.einsum("ipo,ipo->i", dev, dev)
    loglik = (np.log(np.maximum(belief.weights, WEIGHT_FLOOR))
              - 0.5 * model.p * np.log(2.0 * np.pi) - 0.5 * logdets
              - 0.5 * quad)
    return list(new_means), list(new_covs), loglik


def _gs_bank_batched_fallback(model: SystemModel, belief: GsBelief, y: Array):
    new_means, new_covs, loglik = [], [], []
    for i in range(belief.l):
        rec = ekf_step(model, GaussianBelief(belief.means[i], belief.covs[i]), y)
        new_means.append(rec.updated.mean)
        new_covs.append(rec.updated.cov)
        resid = y - np.atleast_1d(np.asarray(model.h(rec.predicted.mean),
                                             dtype=float))
        try:
            loglik.append(np.log(max(belief.weights[i], WEIGHT_FLOOR))
                          + gaussian_logpdf(resid, np.zeros_like(resid), rec.S))
        except np.linalg.LinAlgError:
            loglik.append(-np.inf)
    return new_means, new_covs, np.asarray(loglik)


def gsekf_point_estimate(belief: GsBelief) -> GaussianBelief:
    """Moment-matched single Gaussian of the mixture."""
    mean = belief.weights @ belief.means
    cov = np.zeros((belief.means.shape[1],) * 2)
    for i in range(belief.l):
        dev = mean - belief.means[i]
        cov += belief.weights[i] * (belief.covs[i] + np.outer(dev, dev))
    return GaussianBelief(mean, cov)


# ---------------------------------------------------------------------------
# Dithered EKF
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DitherSchedule:
    """Exponentially decaying dither width, active during the transient only."""

    d0: float
    tau: float
    transient_steps: int
    pdf: str = "uniform"

    def __post_init__(self):
        if self.d0 <= 0 or self.tau <= 0:
            raise ValueError("d0 and tau must be positive")
        if self.pdf != "uniform":
            raise ValueError("only the uniform dither pdf is supported")

    def width(self, k: int) -> float:
        return self.d0 * np.exp(-k / self.tau)


def dithered_observation(h: Callable, schedule: DitherSchedule, k: int) -> Callable:
    """Smoothed observation map: average of h over a uniform dither.

    During the transient the dither (width d0*exp(-k/tau)) is added to every
    state coordinate and integrated out with 16-node Gauss-Legendre
    quadrature per output component. From ``transient_steps`` on, h is
    returned unchanged.
    """
    if k < 0:
        raise ValueError("step index must be nonnegative")
    if k >= schedule.transient_steps:
        return h
    d = schedule.width(k)

    def h_star(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.stack([np.atleast_1d(np.asarray(h(x + d * t), dtype=float))
                         for t in _GL_NODES])
        return 0.5 * _GL_WEIGHTS @ vals

    return h_star


def _effective_observation(model: SystemModel, schedule: DitherSchedule, k: int):
    """(h, jacobian) pair in effect at step k: dithered during the transient."""
    if k >= schedule.transient_steps:
        return model.h, (lambda x: model.H(x))
    if model.dither_family is not None:
        h_star, h_star_jac = model.dither_family(schedule.width(k))
        return h_star, h_star_jac
    h_star = dithered_observation(model.h, schedule, k)
    return h_star, (lambda x: jacobian(h_star, x))


def dekf_step(model: SystemModel, schedule: DitherSchedule, k: int,
              belief: GaussianBelief, y: Array) -> StepRecord:
    """EKF step with the observation function dithered during the transient."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    h_eff, h_eff_jac = _effective_observation(model, schedule, k)
    F = model.F(belief.mean)
    pred_mean = np.atleast_1d(np.asarray(model.f(belief.mean), dtype=float))
    pred_cov = symmetrize(F @ belief.cov @ F.T + model.Q)
    pred = GaussianBelief(pred_mean, pred_cov)
    H = np.atleast_2d(np.asarray(h_eff_jac(pred_mean), dtype=float))
    S = symmetrize(H @ pred_cov @ H.T + model.R)
    innovation = y - np.atleast_1d(np.asarray(h_eff(pred_mean), dtype=float))
    K, updated = _kalman_update(pred, H, S, innovation)
    return StepRecord(pred, S, K, updated)
