"""Recursive Cramer-Rao lower bound for additive-Gaussian filtering chains.

Propagates the Fisher information matrix J along a trajectory; diag(J^-1)
lower-bounds the per-component mean-squared error of any estimator. The same
recursion serves the forward chain (true-state Jacobians) and the inverse
chain (inverse-transition Jacobians along the forward-estimate trajectory).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import default_jitter, spd_solve, symmetrize_psd

Array = np.ndarray

Q_REGULARIZATION = 1e-8


@dataclass
class FisherState:
    """Information matrix at step k."""

    J: Array
    k: int = 0

    def __post_init__(self):
        self.J = np.atleast_2d(np.asarray(self.J, dtype=float))


def _inverse_of(mat: Array, reg: float) -> Array:
    """PD inverse with the documented ridge for rank-deficient noise."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    eye = np.eye(mat.shape[0])
    try:
        return spd_solve(mat, eye)
    except np.linalg.LinAlgError:
        return spd_solve(mat + reg * eye, eye)


def rcrlb_step(fisher: FisherState, F: Array, H: Array, Q: Array, R: Array,
               q_reg: float = Q_REGULARIZATION) -> FisherState:
    """One information recursion step.

    J' = Q^-1 + H^T R^-1 H - Q^-1 F (J + F^T Q^-1 F)^-1 F^T Q^-1,
    with F, H evaluated at the true state of the chain being bounded.
    Rank-deficient Q (scalar noise through a gain column) is ridged.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    Qi = _inverse_of(Q, q_reg)
    Ri = _inverse_of(R, q_reg)
    inner = fisher.J + F.T @ Qi @ F
    QiF = Qi @ F
    try:
        middle = spd_solve(symmetrize_psd(inner, default_jitter(inner)), QiF.T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"singular inner information solve at step {fisher.k}"
        ) from exc
    J_new = Qi + H.T @ Ri @ H - QiF @ middle
    # The information subtraction cancels at the scale of the ridged noise
    # inverse, so indefiniteness here is structural: always lift.
    return FisherState(symmetrize_psd(J_new, default_jitter(J_new)),
                       fisher.k + 1)


def rcrlb_inverse_step(fisher: FisherState, F_trans: Array, G: Array,
                       Q_bar: Array, Sigma_eps: Array,
                       q_reg: float = Q_REGULARIZATION) -> FisherState:
    """Information recursion for the inverse chain.

    The dynamics Jacobian is the inverse state transition's (gain-coupled)
    Jacobian and the observation Jacobian is the action map's, both evaluated
    along the true forward-estimate trajectory.
    """
    return rcrlb_step(fisher, F_trans, G, Q_bar, Sigma_eps, q_reg=q_reg)


def bound_diagonal(fisher: FisherState) -> Array:
    """Per-component MSE lower bounds: diag(J^-1).

    Near-zero information directions are clipped at relative 1e-14 so the
    reported bound stays finite instead of failing on a borderline solve.
    """
    sym = 0.5 * (fisher.J + fisher.J.T)
    vals, vecs = np.linalg.eigh(sym)
    floor = max(vals.max(), 0.0) * 1e-14 + 1e-300
    inv = (vecs / np.maximum(vals, floor)) @ vecs.T
    return np.diag(inv).copy()


def bound_trace(fisher: FisherState) -> float:
    """Total MSE lower bound: trace(J^-1)."""
    return float(bound_diagonal(fisher).sum())
