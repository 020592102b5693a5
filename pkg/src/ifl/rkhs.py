"""Model-free filtering: kernel state-space approximation with an
approximate online EM learner wrapped around an augmented-state EKF.

The state transition and observation maps are represented as coefficient
matrices acting on a kernel feature vector over a growing dictionary. Each
step performs: EKF predict/update on the stacked [current; previous] state,
first-order moment computation (E-step), recursive least-squares style
coefficient and noise updates (M-step), then a dictionary update by sliding
window or approximate-linear-dependency admission.

The same machinery serves as a forward filter on tracker observations or as
an inverse filter on observed adversary actions; only the observation stream
changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import posterior_hygiene, spd_solve, symmetrize, symmetrize_psd

Array = np.ndarray


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel exp(-|x - x'|^2 / width); width is the squared scale."""

    width: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValueError("only the gaussian kernel family is supported")
        if self.width <= 0:
            raise ValueError("kernel width must be positive")


@dataclass
class Dictionary:
    """Kernel centers plus the admission policy that grew them."""

    atoms: Array
    policy: str = "sliding_window"
    window: int = 2
    nu: float = 0.1

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]


def kernel_vector(spec: KernelSpec, dictionary: Dictionary, x: Array) -> Array:
    """Feature vector of kernel evaluations against every dictionary atom."""
    if dictionary.size < 1:
        raise ValueError("dictionary must hold at least one atom")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diffs = dictionary.atoms - x
    return np.exp(-np.sum(diffs * diffs, axis=1) / spec.width)


def kernel_jacobian(spec: KernelSpec, dictionary: Dictionary, x: Array) -> Array:
    """Jacobian of the feature vector: row l is -(2/width) k_l (x - atom_l)^T."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phi = kernel_vector(spec, dictionary, x)
    return -(2.0 / spec.width) * phi[:, None] * (x - dictionary.atoms)


def ald_admit(spec: KernelSpec, dictionary: Dictionary, x: Array,
              nu: float) -> tuple[bool, Dictionary]:
    """Approximate-linear-dependency test: admit x iff its projection
    residual onto the span of existing atoms exceeds nu.

    The criterion delta = k(x,x) - k^T K^-1 k is the standard kernel
    least-squares novelty measure (imported practice, not specific to this
    package); the Gram solve is ridged at 1e-10 when singular.
    """
    if nu <= 0:
        raise ValueError("ald threshold nu must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    kv = kernel_vector(spec, dictionary, x)
    atoms = dictionary.atoms
    diffs = atoms[:, None, :] - atoms[None, :, :]
    gram = np.exp(-np.sum(diffs * diffs, axis=2) / spec.width)
    try:
        coeff = spd_solve(gram, kv)
    except np.linalg.LinAlgError:
        coeff = spd_solve(gram + 1e-10 * np.eye(dictionary.size), kv)
    delta = 1.0 - float(kv @ coeff)
    if delta > nu:
        new = replace(dictionary, atoms=np.vstack([atoms, x]))
        return True, new
    return False, dictionary


def sliding_window_admit(dictionary: Dictionary, x: Array, window: int) -> Dictionary:
    """Append x; evict the oldest atom once the window is full."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    atoms = np.vstack([dictionary.atoms, x])
    if atoms.shape[0] > window:
        atoms = atoms[1:]
    return replace(dictionary, atoms=atoms)


@dataclass
class RkhsState:
    """Full filter state: augmented belief, learned parameters, EM sums.

    Serialized field order (see ``snapshot``): k, z, cov_z, A, B, Q, R,
    S_xphi, S_phi1, S_yphi, S_phi, atoms, policy, window, nu.
    """

    z: Array
    cov_z: Array
    A: Array
    B: Array
    Q: Array
    R: Array
    S_xphi: Array
    S_phi1: Array
    S_yphi: Array
    S_phi: Array
    k: int
    dictionary: Dictionary

    @property
    def n(self) -> int:
        return self.z.shape[0] // 2

    @property
    def estimate(self) -> Array:
        """Current filtered estimate: the leading block of the stacked state."""
        return self.z[: self.n]


def rkhs_init(x0: Array, cov0: Array, Q0: Array, R0: Array,
              policy: str = "sliding_window", window: int = 2,
              nu: float = 0.1, p: Optional[int] = None) -> RkhsState:
    """Initial state: stacked [x0; x0], block-diagonal covariance, a
    single-atom dictionary at x0, all-ones coefficients, zeroed sums."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    cov0 = np.atleast_2d(np.asarray(cov0, dtype=float))
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    R0 = np.atleast_2d(np.asarray(R0, dtype=float))
    n = x0.shape[0]
    if p is None:
        p = R0.shape[0]
    z = np.concatenate([x0, x0])
    cov_z = np.zeros((2 * n, 2 * n))
    cov_z[:n, :n] = cov0
    cov_z[n:, n:] = cov0
    dictionary = Dictionary(atoms=x0[None, :], policy=policy, window=window, nu=nu)
    return RkhsState(
        z=z, cov_z=cov_z,
        A=np.ones((n, 1)), B=np.ones((p, 1)),
        Q=Q0, R=R0,
        S_xphi=np.zeros((n, 1)), S_phi1=np.zeros((1, 1)),
        S_yphi=np.zeros((p, 1)), S_phi=np.zeros((1, 1)),
        k=0, dictionary=dictionary,
    )


def _ridged_solve_right(num: Array, mat: Array) -> Array:
    """num @ mat^-1 with the documented ridge when mat is not PD."""
    try:
        return spd_solve(mat, num.T).T
    except np.linalg.LinAlgError:
        lam = 1e-6 * max(float(np.trace(mat)), 1e-30) / mat.shape[0]
        return spd_solve(mat + lam * np.eye(mat.shape[0]), num.T).T


def rkhs_step(state: RkhsState, spec: KernelSpec, y: Array,
              known_h: Optional[Callable] = None,
              known_h_jac: Optional[Callable] = None,
              known_R: Optional[Array] = None) -> RkhsState:
    """One full recursion: predict, update, E-step, M-step, dictionary.

    When ``known_h`` is given the observation map is treated as known: the
    measurement update uses it (with ``known_R``) and the observation-side
    coefficients and noise stay frozen. Otherwise the observation map is the
    learned kernel expansion.

    Note: substituting the printed closed forms for the observation moments
    into the measurement-noise recursion makes that recursion stationary, so
    the learned R never moves from its initialization; it is retained for
    shape fidelity.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = state.n
    dictionary = state.dictionary

    # Prediction over the stacked state [x_k; x_{k-1}].
    x_prev = state.z[:n]
    phi_prev = kernel_vector(spec, dictionary, x_prev)
    z_pred = np.concatenate([state.A @ phi_prev, x_prev])
    F = np.zeros((2 * n, 2 * n))
    F[:n, :n] = state.A @ kernel_jacobian(spec, dictionary, x_prev)
    F[n:, :n] = np.eye(n)
    Q_aug = np.zeros((2 * n, 2 * n))
    Q_aug[:n, :n] = state.Q
    cov_pred = symmetrize(F @ state.cov_z @ F.T + Q_aug)

    # Measurement update.
    x_pred = z_pred[:n]
    if known_h is not None:
        y_pred = np.atleast_1d(np.asarray(known_h(x_pred), dtype=float))
        H_x = np.atleast_2d(np.asarray(known_h_jac(x_pred), dtype=float))
        R_use = np.atleast_2d(np.asarray(known_R, dtype=float))
    else:
        phi_pred = kernel_vector(spec, dictionary, x_pred)
        y_pred = state.B @ phi_pred
        H_x = state.B @ kernel_jacobian(spec, dictionary, x_pred)
        R_use = state.R
    H = np.hstack([H_x, np.zeros((H_x.shape[0], n))])
    S = symmetrize(H @ cov_pred @ H.T + R_use)
    PHt = cov_pred @ H.T
    K = spd_solve(S, PHt.T).T
    z_new = z_pred + K @ (y - y_pred)
    cov_new = posterior_hygiene(cov_pred - K @ PHt.T)

    # E-step moments from the updated blocks (filtered and one-step smoothed).
    x_f = z_new[:n]
    x_s = z_new[n:]
    c_ff = cov_new[:n, :n]
    c_fs = cov_new[:n, n:]
    c_ss = cov_new[n:, n:]
    phi_s = kernel_vector(spec, dictionary, x_s)
    jac_s = kernel_jacobian(spec, dictionary, x_s)
    phi_f = kernel_vector(spec, dictionary, x_f)
    jac_f = kernel_jacobian(spec, dictionary, x_f)
    e_xphi = np.outer(x_f, phi_s) + c_fs @ jac_s.T
    e_phi1 = np.outer(phi_s, phi_s) + jac_s @ c_ss @ jac_s.T
    e_phi = np.outer(phi_f, phi_f) + jac_f @ c_ff @ jac_f.T
    e_xx = c_ff + np.outer(x_f, x_f)

    # M-step: transition side.
    k = state.k + 1
    S_xphi = state.S_xphi + e_xphi
    S_phi1 = state.S_phi1 + e_phi1
    A_new = _ridged_solve_right(S_xphi, S_phi1)
    q_bracket = (e_xx - A_new @ e_xphi.T - e_xphi @ A_new.T
                 + A_new @ e_phi1 @ A_new.T)
    Q_new = (1.0 - 1.0 / k) * state.Q + (1.0 / k) * q_bracket
    Q_new = symmetrize_psd(Q_new, 1e-12 * max(np.trace(Q_new), 0.0) / n + 1e-300)

    # M-step: observation side (skipped entirely for a known observation map).
    if known_h is None:
        e_yphi = np.outer(y, phi_f)
        S_yphi = state.S_yphi + e_yphi
        S_phi = state.S_phi + e_phi
        B_new = _ridged_solve_right(S_yphi, S_phi)
        e_yy = B_new @ e_phi @ B_new.T + state.R
        e_yphi_sub = B_new @ e_phi
        r_bracket = (e_yy - B_new @ e_yphi_sub.T - e_yphi_sub @ B_new.T
                     + B_new @ e_phi @ B_new.T)
        R_new = (1.0 - 1.0 / k) * state.R + (1.0 / k) * r_bracket
        p = R_new.shape[0]
        R_new = symmetrize_psd(R_new, 1e-12 * max(np.trace(R_new), 0.0) / p + 1e-300)
    else:
        S_yphi, S_phi, B_new, R_new = state.S_yphi, state.S_phi, state.B, state.R

    # Dictionary update with the new filtered estimate.
    old_size = dictionary.size
    if dictionary.policy == "sliding_window":
        new_dict = sliding_window_admit(dictionary, x_f, dictionary.window)
        evicted = old_size + 1 - new_dict.size
    elif dictionary.policy == "ald":
        _, new_dict = ald_admit(spec, dictionary, x_f, dictionary.nu)
        evicted = 0
    else:
        raise ValueError(f"unknown dictionary policy {dictionary.policy!r}")

    if evicted:
        # Drop the evicted atom's coefficient column and sum rows/columns.
        A_new = A_new[:, evicted:]
        B_new = B_new[:, evicted:]
        S_xphi = S_xphi[:, evicted:]
        S_yphi = S_yphi[:, evicted:]
        S_phi1 = S_phi1[evicted:, evicted:]
        S_phi = S_phi[evicted:, evicted:]
    grown = new_dict.size - (old_size - evicted)
    if grown:
        def pad_cols(m, value):
            return np.hstack([m, np.full((m.shape[0], grown), value)])

        def pad_square(m):
            size = m.shape[0]
            out = np.zeros((size + grown, size + grown))
            out[:size, :size] = m
            return out

        A_new = pad_cols(A_new, 1.0)
        B_new = pad_cols(B_new, 1.0)
        S_xphi = pad_cols(S_xphi, 0.0)
        S_yphi = pad_cols(S_yphi, 0.0)
        S_phi1 = pad_square(S_phi1)
        S_phi = pad_square(S_phi)

    return RkhsState(
        z=z_new, cov_z=cov_new, A=A_new, B=B_new, Q=Q_new, R=R_new,
        S_xphi=S_xphi, S_phi1=S_phi1, S_yphi=S_yphi, S_phi=S_phi,
        k=k, dictionary=new_dict,
    )


def rkhs_inverse_wrap(state: RkhsState, spec: KernelSpec, a: Array) -> RkhsState:
    """Inverse-filter use: identical recursion driven by observed actions."""
    return rkhs_step(state, spec, a)


SNAPSHOT_FIELDS = ("k", "z", "cov_z", "A", "B", "Q", "R",
                   "S_xphi", "S_phi1", "S_yphi", "S_phi",
                   "atoms", "policy", "window", "nu")


def snapshot(state: RkhsState) -> dict:
    """JSON-ready snapshot with a fixed field order (SNAPSHOT_FIELDS)."""
    out = {"k": state.k}
    for name in ("z", "cov_z", "A", "B", "Q", "R",
                 "S_xphi", "S_phi1", "S_yphi", "S_phi"):
        out[name] = getattr(state, name).tolist()
    out["atoms"] = state.dictionary.atoms.tolist()
    out["policy"] = state.dictionary.policy
    out["window"] = state.dictionary.window
    out["nu"] = state.dictionary.nu
    return out


def restore(data: dict) -> RkhsState:
    """Rebuild an RkhsState from a snapshot dict."""
    dictionary = Dictionary(atoms=np.asarray(data["atoms"], dtype=float),
                            policy=data["policy"], window=int(data["window"]),
                            nu=float(data["nu"]))
    arrays = {name: np.asarray(data[name], dtype=float)
              for name in ("z", "cov_z", "A", "B", "Q", "R",
                           "S_xphi", "S_phi1", "S_yphi", "S_phi")}
    return RkhsState(k=int(data["k"]), dictionary=dictionary, **arrays)
