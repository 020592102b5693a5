"""Defender-side filters that estimate the adversary's estimate.

Each inverse filter pairs with a forward filter: I-EKF, I-SOEKF (two-step and
one-step prediction forms), I-GS-EKF over the augmented means-plus-weights
state, and I-DEKF (two labelling variants).

The defender never sees the adversary's observations. It therefore maintains
a *replica* of the forward filter's covariance/gain recursion, substituting
its own latest estimate wherever the forward filter's estimate would appear.
Each step function takes the replica, advances it, and returns the updated
copy alongside the new inverse belief.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import gaussian_logpdf, posterior_hygiene, spd_solve, symmetrize
from .forward import (
    DitherSchedule,
    GaussianBelief,
    WEIGHT_FLOOR,
    _effective_observation,
    _trace_cov_correction,
    _trace_mean_correction,
)
from .models import SystemModel

Array = np.ndarray

# The inverse belief has exactly the Gaussian mean/covariance structure of a
# forward belief; the alias keeps signatures self-describing.
InverseBelief = GaussianBelief


@dataclass
class EkfReplica:
    """Defender's private copy of a single-Gaussian forward covariance."""

    cov: Array


@dataclass
class GsReplica:
    """Defender's private copies of the forward mixture's component covariances."""

    covs: Array


def _vec(x) -> Array:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _update_against_action(model: SystemModel, pred_mean: Array, pred_cov: Array,
                           a: Array) -> tuple[InverseBelief, Array, Array]:
    """Shared I-EKF-style update of a predicted inverse belief against a."""
    G = model.G(pred_mean)
    S_bar = symmetrize(G @ pred_cov @ G.T + model.Sigma_eps)
    PGt = pred_cov @ G.T
    K_bar = spd_solve(S_bar, PGt.T).T
    a_pred = _vec(model.g(pred_mean))
    mean = pred_mean + K_bar @ (a - a_pred)
    cov = posterior_hygiene(pred_cov - K_bar @ PGt.T)
    return InverseBelief(mean, cov), S_bar, K_bar


# ---------------------------------------------------------------------------
# I-EKF
# ---------------------------------------------------------------------------


def _advance_ekf_replica(model: SystemModel, cov: Array, est: Array):
    """One forward-EKF gain recursion step driven by the defender's estimate.

    Mirrors ekf_step's operations exactly so that, in a noiseless chain with
    exact initialization, the replica reproduces the forward filter's gains
    to rounding.
    """
    F = model.F(est)
    pred_mean = _vec(model.f(est))
    pred_cov = symmetrize(F @ cov @ F.T + model.Q)
    H = model.H(pred_mean)
    S = symmetrize(H @ pred_cov @ H.T + model.R)
    PHt = pred_cov @ H.T
    K = spd_solve(S, PHt.T).T
    new_cov = posterior_hygiene(pred_cov - K @ PHt.T)
    return K, H, F, pred_mean, new_cov, S


def iekf_step(model: SystemModel, inv: InverseBelief, replica: EkfReplica,
              x_next: Array, a_next: Array) -> tuple[InverseBelief, EkfReplica]:
    """Inverse EKF step given the true next state and the observed action."""
    x_next, a_next = _vec(x_next), _vec(a_next)
    K, H, F, f_est, rep_cov, _ = _advance_ekf_replica(model, replica.cov, inv.mean)
    pred_mean = f_est - K @ _vec(model.h(f_est)) + K @ _vec(model.h(x_next))
    Fx = F - K @ (H @ F)
    pred_cov = symmetrize(Fx @ inv.cov @ Fx.T + K @ model.R @ K.T)
    updated, _, _ = _update_against_action(model, pred_mean, pred_cov, a_next)
    return updated, EkfReplica(rep_cov)


# ---------------------------------------------------------------------------
# I-SOEKF (two-step form)
# ---------------------------------------------------------------------------


def _advance_soekf_replica(model: SystemModel, cov: Array, est: Array):
    """One forward second-order recursion step driven by the defender's estimate.

    Returns the gain plus every quantity the inverse transition needs: the
    trace-corrected prediction, the prediction covariance and the observation
    curvature evaluated at the prediction.
    """
    F = model.F(est)
    f_hess = model.f_hessians(est)
    pred_mean = _vec(model.f(est)) + _trace_mean_correction(f_hess, cov)
    pred_cov = symmetrize(F @ cov @ F.T + model.Q
                          + _trace_cov_correction(f_hess, f_hess, cov))
    H = model.H(pred_mean)
    h_hess = model.h_hessians(pred_mean)
    S = symmetrize(H @ pred_cov @ H.T + model.R
                   + _trace_cov_correction(h_hess, h_hess, pred_cov))
    PHt = pred_cov @ H.T
    K = spd_solve(S, PHt.T).T
    new_cov = posterior_hygiene(pred_cov - K @ PHt.T)
    return K, H, F, f_hess, h_hess, pred_mean, pred_cov, new_cov


def isoekf_step(model: SystemModel, inv: InverseBelief, replica: EkfReplica,
                x_next: Array, a_next: Array) -> tuple[InverseBelief, EkfReplica]:
    """Inverse second-order EKF (two-step form).

    The transition composes the trace-corrected maps of the forward filter;
    its Jacobian and Hessians treat the trace corrections as constants
    (third-order derivatives are neglected throughout).
    """
    x_next, a_next = _vec(x_next), _vec(a_next)
    (K, H, F, f_hess, h_hess,
     f_corr, pred_cov_rep, rep_cov) = _advance_soekf_replica(model, replica.cov,
                                                             inv.mean)
    # Transition value: corrected f, minus gain times corrected h at it,
    # plus the gain applied to the true next observation mean.
    h_corr = _vec(model.h(f_corr)) + _trace_mean_correction(h_hess, pred_cov_rep)
    fbar_val = f_corr - K @ h_corr + K @ _vec(model.h(x_next))

    # Composed curvature of x -> h(f(x)), then the transition curvature.
    hf_hess = (np.einsum("ab,jbc,cd->jad", F.T, h_hess, F)
               + np.einsum("jm,mab->jab", H, f_hess))
    fbar_hess = f_hess - np.einsum("ij,jab->iab", K, hf_hess)
    Fbar = F - K @ (H @ F)

    pred_mean = fbar_val + _trace_mean_correction(fbar_hess, inv.cov)
    pred_cov = symmetrize(
        Fbar @ inv.cov @ Fbar.T + K @ model.R @ K.T
        + _trace_cov_correction(fbar_hess, fbar_hess, inv.cov))

    G = model.G(pred_mean)
    g_hess = model.g_hessians(pred_mean)
    a_pred = _vec(model.g(pred_mean)) + _trace_mean_correction(g_hess, pred_cov)
    S_bar = symmetrize(G @ pred_cov @ G.T + model.Sigma_eps
                       + _trace_cov_correction(g_hess, g_hess, pred_cov))
    PGt = pred_cov @ G.T
    K_bar = spd_solve(S_bar, PGt.T).T
    mean = pred_mean + K_bar @ (a_next - a_pred)
    cov = posterior_hygiene(pred_cov - K_bar @ PGt.T)
    return InverseBelief(mean, cov), EkfReplica(rep_cov)


# ---------------------------------------------------------------------------
# I-SOEKF (one-step prediction form)
# ---------------------------------------------------------------------------


def _advance_one_step_replica(model: SystemModel, cov: Array, est: Array):
    """Forward one-step second-order recursion driven by the defender's estimate."""
    F = model.F(est)
    H = model.H(est)
    f_hess = model.f_hessians(est)
    h_hess = model.h_hessians(est)
    cov_tilde = symmetrize(F @ cov @ F.T + model.Q
                           + _trace_cov_correction(f_hess, f_hess, cov))
    S = symmetrize(H @ cov @ H.T + model.R
                   + _trace_cov_correction(h_hess, h_hess, cov))
    M = _trace_cov_correction(f_hess, h_hess, cov)
    K = spd_solve(S, (F @ cov @ H.T + M).T).T
    new_cov = posterior_hygiene(cov_tilde - K @ S @ K.T)
    return K, H, F, f_hess, h_hess, new_cov


def isoekf_one_step(model: SystemModel, inv: InverseBelief, replica: EkfReplica,
                    x_k: Array, a_k: Array) -> tuple[InverseBelief, EkfReplica]:
    """One-step-prediction inverse SOEKF: consumes (x_k, a_k), emits k+1."""
    x_k, a_k = _vec(x_k), _vec(a_k)
    rep_cov_pre = replica.cov
    K, H, F, f_hess, h_hess, rep_cov = _advance_one_step_replica(
        model, rep_cov_pre, inv.mean)

    # Transition value at the inverse estimate with replica quantities fixed.
    fbar_val = (_vec(model.f(inv.mean)) - K @ _vec(model.h(inv.mean))
                + _trace_mean_correction(f_hess, rep_cov_pre)
                - K @ _trace_mean_correction(h_hess, rep_cov_pre)
                + K @ _vec(model.h(x_k)))
    fbar_hess = f_hess - np.einsum("ij,jab->iab", K, h_hess)
    Fbar = F - K @ H

    pred_mean = fbar_val + _trace_mean_correction(fbar_hess, inv.cov)
    pred_cov = symmetrize(
        Fbar @ inv.cov @ Fbar.T + K @ model.R @ K.T
        + _trace_cov_correction(fbar_hess, fbar_hess, inv.cov))

    G = model.G(inv.mean)
    g_hess = model.g_hessians(inv.mean)
    S_bar = symmetrize(G @ inv.cov @ G.T + model.Sigma_eps
                       + _trace_cov_correction(g_hess, g_hess, inv.cov))
    M_bar = _trace_cov_correction(fbar_hess, g_hess, inv.cov)
    K_bar = spd_solve(S_bar, (Fbar @ inv.cov @ G.T + M_bar).T).T
    a_pred = _vec(model.g(inv.mean)) + _trace_mean_correction(g_hess, inv.cov)
    mean = pred_mean + K_bar @ (a_k - a_pred)
    cov = posterior_hygiene(pred_cov - K_bar @ S_bar @ K_bar.T)
    return InverseBelief(mean, cov), EkfReplica(rep_cov)


def one_step_transition(model: SystemModel, K: Array, rep_cov: Array,
                        est: Array, x_k: Array) -> Array:
    """Value of the one-step inverse transition map at ``est`` (noise-free).

    Exposed separately so the printed Jacobian identity F - K H can be checked
    against finite differences of the actual map.
    """
    est, x_k = _vec(est), _vec(x_k)
    f_hess = model.f_hessians(est)
    h_hess = model.h_hessians(est)
    return (_vec(model.f(est)) - K @ _vec(model.h(est))
            + _trace_mean_correction(f_hess, rep_cov)
            - K @ _trace_mean_correction(h_hess, rep_cov)
            + K @ _vec(model.h(x_k)))


# ---------------------------------------------------------------------------
# I-GS-EKF
# ---------------------------------------------------------------------------


@dataclass
class AugmentedGsState:
    """Inverse mixture over the stacked forward means (and weights, if l > 1).

    The augmented coordinate layout is [mean_1, ..., mean_l, c_1, ..., c_l];
    with a single forward component the weight coordinate is dropped and the
    augmented state is the forward mean itself.
    """

    weights: Array
    means: Array
    covs: Array
    l: int
    n: int
    underflow: bool = False

    def __post_init__(self):
        self.weights = _vec(self.weights)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covs = np.asarray(self.covs, dtype=float)

    @property
    def l_bar(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.n if self.l == 1 else self.l * (self.n + 1)


def _split_aug(z: Array, l: int, n: int) -> tuple[Array, Array]:
    """Augmented vector -> (means (l, n), weights (l,))."""
    if l == 1:
        return z.reshape(1, n), np.ones(1)
    return z[: l * n].reshape(l, n), z[l * n:]


def _join_aug(means: Array, weights: Array, l: int) -> Array:
    if l == 1:
        return means.reshape(-1)
    return np.concatenate([means.reshape(-1), weights])


def _sanitize_embedded_weights(z: Array, l: int, n: int) -> Array:
    """Clamp embedded forward weights to [0, 1] and renormalize."""
    if l == 1:
        return z
    out = z.copy()
    w = np.clip(out[l * n:], 0.0, 1.0)
    total = w.sum()
    w = np.full(l, 1.0 / l) if total <= 0.0 else w / total
    out[l * n:] = w
    return out


def _advance_gs_replica(model: SystemModel, covs: Array, mean_estimates: Array):
    """Forward GS-EKF covariance/gain bank driven by the defender's estimates."""
    if model.has_batch_hooks:
        F = np.asarray(model.f_jac_batch(mean_estimates), dtype=float)
        pred_means = np.asarray(model.f_batch(mean_estimates), dtype=float)
        pred_covs = _symmetrize_stack(
            np.einsum("iab,ibc,idc->iad", F, covs, F) + model.Q)
        H = np.asarray(model.h_jac_batch(pred_means), dtype=float)
        S = _symmetrize_stack(
            np.einsum("iab,ibc,idc->iad", H, pred_covs, H) + model.R)
        PHt = np.einsum("iab,icb->iac", pred_covs, H)
        K = np.swapaxes(np.linalg.solve(S, np.swapaxes(PHt, 1, 2)), 1, 2)
        new_covs = _hygiene_stack(pred_covs
                                  - np.einsum("iab,icb->iac", K, PHt))
        return list(K), list(S), new_covs
    Ks, Ss, new_covs = [], [], []
    for i in range(covs.shape[0]):
        K, H, F, pred_mean, new_cov, S = _advance_ekf_replica(
            model, covs[i], mean_estimates[i])
        Ks.append(K)
        Ss.append(S)
        new_covs.append(new_cov)
    return Ks, Ss, np.array(new_covs)


def _symmetrize_stack(mats: Array) -> Array:
    return 0.5 * (mats + np.swapaxes(mats, 1, 2))


def _hygiene_stack(mats: Array) -> Array:
    """posterior_hygiene over a stack, with a batched fast path."""
    sym = _symmetrize_stack(mats)
    dim = sym.shape[1]
    jit = 1e-12 * np.maximum(np.trace(sym, axis1=1, axis2=2), 0.0) / dim
    try:
        np.linalg.cholesky(sym + (jit + 1e-300)[:, None, None] * np.eye(dim))
        return sym
    except np.linalg.LinAlgError:
        return np.array([posterior_hygiene(m) for m in sym])


_LOG_2PI = np.log(2.0 * np.pi)


def _prepare_gs_params(Ks, Ss):
    """Stack the replica gains and factorize the innovation covariances once.

    A singular member (noiseless chain) marks the whole bank degenerate: the
    weight transition then carries no reweighting information.
    """
    K_stack = np.stack([np.atleast_2d(k) for k in Ks]).astype(float)
    S_stack = np.stack([np.atleast_2d(s) for s in Ss]).astype(float)
    try:
        chol = np.linalg.cholesky(S_stack)
        logdets = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)),
                               axis=1)
    except np.linalg.LinAlgError:
        chol, logdets = None, None
    return K_stack, chol, logdets


def _gs_step_core(model: SystemModel, K_stack, chol, logdets, z: Array,
                  x_next: Array, l: int, n: int, want_jacobians: bool):
    """Augmented transition value (noise-free) and, optionally, its
    Jacobians w.r.t. the augmented state and the observation noise."""
    p = model.p
    means, weights = _split_aug(z, l, n)
    h_next = _vec(model.h(x_next))
    if model.has_batch_hooks:
        f_stack = np.asarray(model.f_batch(means), dtype=float)
        res = h_next - np.asarray(model.h_batch(f_stack), dtype=float)
        if want_jacobians:
            Fs = np.asarray(model.f_jac_batch(means), dtype=float)
            Bs = np.einsum("ipq,iqr->ipr",
                           np.asarray(model.h_jac_batch(f_stack), dtype=float),
                           Fs)
    else:
        f_stack = np.empty((l, n))
        res = np.empty((l, p))
        Fs = np.empty((l, n, n)) if want_jacobians else None
        Bs = np.empty((l, p, n)) if want_jacobians else None
        for i in range(l):
            f_i = _vec(model.f(means[i]))
            f_stack[i] = f_i
            res[i] = h_next - _vec(model.h(f_i))
            if want_jacobians:
                F_i = model.F(means[i])
                Fs[i] = F_i
                Bs[i] = model.H(f_i) @ F_i
    new_means = f_stack + np.einsum("ipq,iq->ip", K_stack, res)

    if l == 1:
        new_weights = np.ones(1)
        gamma_t = whiten = None
        cprime = new_weights
    else:
        if chol is None:
            gamma_t = np.ones(l)
            whiten = np.zeros((l, p))
        else:
            dev = np.linalg.solve(chol, res[:, :, None])
            quad = np.einsum("ipo,ipo->i", dev, dev)
            logs = -0.5 * p * _LOG_2PI - 0.5 * logdets - 0.5 * quad
            gamma_t = np.exp(logs - logs.max())
            whiten = np.linalg.solve(np.swapaxes(chol, 1, 2), dev)[:, :, 0]
        terms = np.maximum(weights, WEIGHT_FLOOR) * gamma_t
        denom = terms.sum()
        cprime = terms / denom
        new_weights = cprime
    new_z = _join_aug(new_means, new_weights, l)
    if not want_jacobians:
        return new_z, res, gamma_t, whiten, cprime

    D = n if l == 1 else l * (n + 1)
    Fz = np.zeros((D, D))
    Vz = np.zeros((D, p))
    for i in range(l):
        Fz[i * n:(i + 1) * n, i * n:(i + 1) * n] = Fs[i] - K_stack[i] @ Bs[i]
        Vz[i * n:(i + 1) * n, :] = K_stack[i]
    if l > 1:
        base = l * n
        terms = np.maximum(weights, WEIGHT_FLOOR) * gamma_t
        denom = terms.sum()
        # rows of d(log-likelihood_i)/d(mean_i): whitened residual against
        # the local observation-through-transition slope
        grad = np.einsum("ip,ipn->in", whiten, Bs)
        weighted = (terms[:, None] * grad) / denom
        rows = -cprime[:, None, None] * weighted[None, :, :]
        rows[np.arange(l), np.arange(l), :] += weighted
        Fz[base:, :base] = rows.reshape(l, l * n)
        Fz[base:, base:] = (np.diag(gamma_t) - np.outer(cprime, gamma_t)) / denom
        mix = cprime @ whiten
        Vz[base:, :] = cprime[:, None] * (mix[None, :] - whiten)
    return new_z, Fz, Vz


def _gs_transition(model: SystemModel, Ks, Ss, z: Array, x_next: Array,
                   l: int, n: int):
    """Augmented transition at z (noise-free): (new_z, residuals,
    scaled likelihoods, whitened residuals, new weights)."""
    K_stack, chol, logdets = _prepare_gs_params(Ks, Ss)
    return _gs_step_core(model, K_stack, chol, logdets, z, x_next, l, n,
                         want_jacobians=False)


def _gs_transition_jacobians(model: SystemModel, Ks, Ss, z: Array,
                             x_next: Array, l: int, n: int):
    """Analytic Jacobians of the augmented transition w.r.t. z and the noise."""
    K_stack, chol, logdets = _prepare_gs_params(Ks, Ss)
    return _gs_step_core(model, K_stack, chol, logdets, z, x_next, l, n,
                         want_jacobians=True)


def _aug_action(model: SystemModel, z: Array, l: int, n: int) -> Array:
    """Action map over the augmented state: g of the weighted mean.

    Evaluated on the raw coordinates; embedded-weight hygiene is applied to
    state vectors between steps, not inside this map.
    """
    means, weights = _split_aug(z, l, n)
    return _vec(model.g(weights @ means))


def _aug_action_jacobian(model: SystemModel, z: Array, l: int, n: int) -> Array:
    """Chain rule on g(sum_i c_i mean_i): [c_i G | G mean_i]."""
    means, weights = _split_aug(z, l, n)
    point = weights @ means
    G = model.G(point)
    if l == 1:
        return G
    D = l * (n + 1)
    out = np.zeros((model.n_a, D))
    for i in range(l):
        out[:, i * n:(i + 1) * n] = weights[i] * G
        out[:, l * n + i] = G @ means[i]
    return out


def igsekf_step(model: SystemModel, state: AugmentedGsState, replica: GsReplica,
                x_next: Array, a_next: Array) -> tuple[AugmentedGsState, GsReplica]:
    """Inverse Gaussian-sum EKF step over the augmented state."""
    x_next, a_next = _vec(x_next), _vec(a_next)
    l, n = state.l, state.n

    # Replica gains/innovations from the defender's current estimates of the
    # forward component means (moment-matched across the inverse mixture).
    z_hat = state.weights @ state.means
    est_means, _ = _split_aug(_sanitize_embedded_weights(z_hat, l, n), l, n)
    Ks, Ss, rep_covs = _advance_gs_replica(model, replica.covs, est_means)
    K_stack, chol, logdets = _prepare_gs_params(Ks, Ss)

    new_means, new_covs, loglik = [], [], []
    for j in range(state.l_bar):
        z_j = _sanitize_embedded_weights(state.means[j], l, n)
        z_pred, Fz, Vz = _gs_step_core(model, K_stack, chol, logdets, z_j,
                                       x_next, l, n, want_jacobians=True)
        cov_pred = symmetrize(Fz @ state.covs[j] @ Fz.T
                              + Vz @ model.R @ Vz.T)
        Gz = _aug_action_jacobian(model, z_pred, l, n)
        S_bar = symmetrize(Gz @ cov_pred @ Gz.T + model.Sigma_eps)
        resid = a_next - _aug_action(model, z_pred, l, n)
        PGt = cov_pred @ Gz.T
        K_bar = spd_solve(S_bar, PGt.T).T
        z_new = _sanitize_embedded_weights(z_pred + K_bar @ resid, l, n)
        new_means.append(z_new)
        new_covs.append(posterior_hygiene(cov_pred - K_bar @ PGt.T))
        try:
            loglik.append(np.log(max(state.weights[j], WEIGHT_FLOOR))
                          + gaussian_logpdf(resid, np.zeros_like(resid), S_bar))
        except np.linalg.LinAlgError:
            loglik.append(-np.inf)

    loglik = np.asarray(loglik)
    top = loglik.max()
    underflow = not np.isfinite(top)
    if underflow:
        weights = np.full(state.l_bar, 1.0 / state.l_bar)
    else:
        weights = np.exp(loglik - top)
        weights /= weights.sum()
        weights = np.maximum(weights, WEIGHT_FLOOR)
        weights /= weights.sum()
    new_state = AugmentedGsState(weights, np.array(new_means), np.array(new_covs),
                                 l=l, n=n, underflow=underflow)
    return new_state, GsReplica(rep_covs)


def igsekf_point_estimate(state: AugmentedGsState) -> Array:
    """Defender's point estimate of the forward estimate: sum_i c_i mean_i."""
    z_hat = _sanitize_embedded_weights(state.weights @ state.means,
                                       state.l, state.n)
    means, weights = _split_aug(z_hat, state.l, state.n)
    return weights @ means


# ---------------------------------------------------------------------------
# I-DEKF
# ---------------------------------------------------------------------------

IDEKF_WITH_DITHER = "with_dither"
IDEKF_WITHOUT_DITHER = "without_dither"


def _advance_dekf_replica(model: SystemModel, schedule: DitherSchedule, k: int,
                          cov: Array, est: Array):
    """Forward dithered-EKF gain recursion driven by the defender's estimate."""
    h_eff, h_eff_jac = _effective_observation(model, schedule, k)
    F = model.F(est)
    pred_mean = _vec(model.f(est))
    pred_cov = symmetrize(F @ cov @ F.T + model.Q)
    H = np.atleast_2d(np.asarray(h_eff_jac(pred_mean), dtype=float))
    S = symmetrize(H @ pred_cov @ H.T + model.R)
    PHt = pred_cov @ H.T
    K = spd_solve(S, PHt.T).T
    new_cov = posterior_hygiene(pred_cov - K @ PHt.T)
    return K, F, pred_mean, new_cov, h_eff, h_eff_jac


def idekf_step(model: SystemModel, schedule: DitherSchedule, k: int, variant: str,
               inv: InverseBelief, replica: EkfReplica,
               x_next: Array, a_next: Array) -> tuple[InverseBelief, EkfReplica]:
    """Inverse dithered EKF.

    The replica always runs the dithered recursion (that is the adversary's
    actual filter). ``with_dither`` also uses the smoothed observation inside
    the inverse state transition's predicted-observation term during the
    transient; ``without_dither`` keeps the plain observation there. In the
    experiment figures the without/with variants are labelled 1 and 2.
    """
    if variant not in (IDEKF_WITH_DITHER, IDEKF_WITHOUT_DITHER):
        raise ValueError(f"unknown I-DEKF variant {variant!r}")
    x_next, a_next = _vec(x_next), _vec(a_next)
    K, F, f_est, rep_cov, h_eff, h_eff_jac = _advance_dekf_replica(
        model, schedule, k, replica.cov, inv.mean)
    if variant == IDEKF_WITH_DITHER:
        h_trans, h_trans_jac = h_eff, h_eff_jac
    else:
        h_trans, h_trans_jac = model.h, (lambda x: model.H(x))
    pred_mean = (f_est - K @ _vec(h_trans(f_est))
                 + K @ _vec(model.h(x_next)))
    Ht = np.atleast_2d(np.asarray(h_trans_jac(f_est), dtype=float))
    Fx = F - K @ (Ht @ F)
    pred_cov = symmetrize(Fx @ inv.cov @ Fx.T + K @ model.R @ K.T)
    updated, _, _ = _update_against_action(model, pred_mean, pred_cov, a_next)
    return updated, EkfReplica(rep_cov)
