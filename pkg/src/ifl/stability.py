"""Stochastic-stability sufficiency checks for the one-step second-order
filter and its inverse.

The checks evaluate, from user-supplied (or trace-estimated) system bounds,
the derived constants of the exponential-boundedness argument and report a
verdict per condition: the inverse-Jacobian-norm inequality, the
process-noise floor, and the noise-level consistency equation (treated as a
satisfiability question over the admissible error radius).

The cubic-remainder coefficients bound Taylor tails that have no computable
closed form; they are inputs, with defaults sized for the built-in models
(linear transitions and sinusoidal observations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class SoekfBounds:
    """System bounds feeding the forward-filter stability check.

    Curvature bounds are eigenvalue bounds on the per-component Hessians of
    the transition (f_curv_*) and observation (h_curv_*) maps; cov_* bound
    the filter covariance spectrum; noise_max is the shared upper eigenvalue
    bound on both noise covariances; rem_* are cubic-remainder coefficients
    and validity radii of the second-order Taylor expansions.
    """

    f_jac_max: float
    h_jac_max: float
    cov_min: float
    cov_max: float
    q_min: float
    r_min: float
    f_curv_max: float
    h_curv_max: float
    noise_max: float
    f_inv_max: float
    f_curv_min: float = 0.0
    h_curv_min: float = 0.0
    rem_f_coeff: float = 1e-9
    rem_f_radius: float = 1.0
    rem_h_coeff: float = 1.0 / 3.0
    rem_h_radius: float = 1.0
    n: int = 1
    p: int = 1

    def validate(self) -> list[str]:
        problems = []
        for name in ("f_jac_max", "h_jac_max", "cov_min", "cov_max", "q_min",
                     "r_min", "noise_max", "f_inv_max",
                     "rem_f_coeff", "rem_f_radius", "rem_h_coeff",
                     "rem_h_radius"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.cov_min > self.cov_max:
            problems.append("cov_min exceeds cov_max")
        if self.q_min > self.noise_max:
            problems.append("q_min exceeds noise_max")
        if self.r_min > self.noise_max:
            problems.append("r_min exceeds noise_max")
        return problems


@dataclass(frozen=True)
class InverseBoundsExt:
    """Additional bounds for the inverse-filter check: action-map Jacobian
    and curvature, inverse covariance spectrum, action-noise spectrum, and
    the cubic remainder of the action map's expansion."""

    g_jac_max: float
    inv_cov_min: float
    inv_cov_max: float
    eps_min: float
    inv_noise_max: float
    g_curv_max: float
    g_curv_min: float = 0.0
    rem_g_coeff: float = 1.0
    rem_g_radius: float = 1.0
    n_a: int = 1


@dataclass
class StabilityReport:
    """Per-condition verdicts plus every derived constant, serializable."""

    conditions: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    satisfied: bool = False
    forward_ok: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "conditions": dict(self.conditions),
            "constants": dict(self.constants),
            "notes": list(self.notes),
            "satisfied": self.satisfied,
            "forward_ok": self.forward_ok,
        }

    def to_text(self) -> str:
        lines = ["stability report", "----------------"]
        for name, verdict in self.conditions.items():
            lines.append(f"{name:<24} {'PASS' if verdict else 'FAIL'}")
        lines.append("")
        for name, value in self.constants.items():
            lines.append(f"{name:<24} {value:.12g}")
        if self.forward_ok is not None:
            lines.append("")
            lines.append(f"forward precondition     "
                         f"{'met' if self.forward_ok else 'UNMET'}")
        for note in self.notes:
            lines.append(f"note: {note}")
        lines.append("")
        lines.append(f"overall: {'SATISFIED' if self.satisfied else 'NOT SATISFIED'}")
        return "\n".join(lines)


def curvature_bound_constants(b: SoekfBounds) -> dict:
    """Caps on the curvature double-sum terms and the cross-term norm.

    The double-sum over transition curvatures is bounded by
    a^2 s^2 n^2 I, the observation one by b^2 s^2 n p I, and the
    prediction/observation cross term by 0.5 a b s^2 n sqrt(n p).
    """
    a, h_curv, s = b.f_curv_max, b.h_curv_max, b.cov_max
    return {
        "f_double_sum_cap": a * a * s * s * b.n * b.n,
        "h_double_sum_cap": h_curv * h_curv * s * s * b.n * b.p,
        "cross_term_norm": 0.5 * a * h_curv * s * s * b.n * math.sqrt(b.n * b.p),
    }


def check_forward_stability(b: SoekfBounds) -> StabilityReport:
    """Evaluate the forward-filter exponential-boundedness conditions."""
    report = StabilityReport()
    problems = b.validate()
    if problems:
        report.notes.extend(problems)
        report.conditions = {"jacobian_inverse": False,
                             "process_noise_floor": False,
                             "noise_level": False}
        return report

    n, p = b.n, b.p
    beta = curvature_bound_constants(b)["cross_term_norm"]
    fsh = b.f_jac_max * b.cov_max * b.h_jac_max
    gain_cap = (fsh + beta) / b.r_min
    closed_loop = b.f_jac_max + b.h_jac_max * gain_cap

    # Condition on the transition Jacobian's inverse norm.
    denom = (b.h_jac_max * b.f_curv_max * b.h_curv_max
             * b.cov_max ** 2 * n * math.sqrt(n * p))
    if denom > 0:
        jac_inv_ok = b.f_inv_max < 2.0 * b.r_min / denom
        inv_threshold = 2.0 * b.r_min / denom
    else:
        jac_inv_ok = True
        inv_threshold = math.inf
        report.notes.append("curvature product is zero; "
                            "inverse-norm condition vacuous")

    # Process-noise floor.
    c = (2.0 * fsh * gain_cap
         + (2.0 * b.cov_max * b.h_jac_max ** 2 + b.noise_max
            + 0.5 * b.h_curv_max ** 2 * b.cov_max ** 2 * n * p) * gain_cap ** 2)
    noise_floor_ok = b.q_min > c

    # Contraction rate (meaningful only past the noise floor).
    alpha = 1.0 - 1.0 / (1.0 + (b.q_min - c) / (b.cov_max * closed_loop ** 2))
    if noise_floor_ok and not (0.0 < alpha < 1.0):
        report.notes.append("contraction rate fell outside (0, 1)")

    # Remainder and noise constants.
    kappa_prime = b.rem_f_coeff + b.rem_h_coeff * gain_cap
    eps_prime = min(b.rem_f_radius, b.rem_h_radius)
    kappa_nonl = (kappa_prime / b.cov_min) * (2.0 * closed_loop
                                              + kappa_prime * eps_prime ** 2)
    kappa_noise = (n / b.cov_min
                   + (b.f_jac_max ** 2 * b.h_jac_max ** 2 * b.cov_max ** 2 * p)
                   / (b.cov_min * b.r_min ** 2))
    kappa_q = 0.5 * (b.f_curv_max * n + b.h_curv_max * p * gain_cap)
    c_q = 0.5 * (b.f_curv_max * b.cov_max * n ** 2
                 + b.h_curv_max * b.cov_max * n * p * gain_cap)
    inner = 2.0 * closed_loop + 2.0 * kappa_prime * eps_prime ** 2 + kappa_q * eps_prime
    kappa_sec = (kappa_q / b.cov_min) * inner
    c_sec = (c_q ** 2 / b.cov_min
             + kappa_q * c_q * eps_prime ** 2 / b.cov_min
             + (c_q * eps_prime / b.cov_min) * inner)

    # Admissible error radius and the noise-level consistency equation;
    # both presuppose a valid contraction rate.
    if noise_floor_ok and 0.0 < alpha < 1.0:
        eps = min(eps_prime,
                  alpha / (2.0 * b.cov_max * (kappa_nonl * eps_prime + kappa_sec)))
        eps_tilde = math.sqrt((2.0 * b.cov_max / alpha)
                              * (kappa_noise * b.noise_max + c_sec))
        noise_level_ok = 0.0 < eps_tilde < eps
    else:
        eps = 0.0
        eps_tilde = math.inf
        noise_level_ok = False
        report.notes.append("no valid contraction rate; "
                            "noise-level equation unsatisfiable")

    report.conditions = {
        "jacobian_inverse": bool(jac_inv_ok),
        "process_noise_floor": bool(noise_floor_ok),
        "noise_level": bool(noise_level_ok),
    }
    report.constants = {
        "beta": beta,
        "gain_cap": gain_cap,
        "closed_loop_cap": closed_loop,
        "inv_norm_threshold": inv_threshold,
        "c": c,
        "alpha": alpha,
        "kappa_prime": kappa_prime,
        "eps_prime": eps_prime,
        "kappa_nonl": kappa_nonl,
        "kappa_noise": kappa_noise,
        "kappa_q": kappa_q,
        "c_q": c_q,
        "kappa_sec": kappa_sec,
        "c_sec": c_sec,
        "eps": eps,
        "eps_tilde": eps_tilde,
    }
    report.satisfied = all(report.conditions.values())
    return report


def check_inverse_stability(b: SoekfBounds, ext: InverseBoundsExt,
                   full_column_rank: bool = True) -> StabilityReport:
    """Evaluate the inverse-filter conditions.

    Derives curvature bounds for the inverse transition (forward curvature
    corrected by the gain-weighted observation curvature), then reruns the
    forward check under the inverse-dynamics substitutions: action map for
    observation map, inverse covariance spectrum for the filter spectrum,
    action-noise spectrum for the measurement-noise spectrum.
    """
    forward = check_forward_stability(b)
    beta = forward.constants.get("beta", 0.0)
    gain_cap = forward.constants.get("gain_cap", 0.0)
    sqrt_p = math.sqrt(b.p)
    d_min = b.f_curv_min - b.h_curv_max * sqrt_p * gain_cap
    d_max = b.f_curv_max + abs(b.h_curv_min) * sqrt_p * gain_cap
    kappa_prime_fwd = forward.constants.get("kappa_prime", 0.0)
    eps_prime_fwd = forward.constants.get("eps_prime", 0.0)

    b_inv = replace(
        b,
        h_jac_max=ext.g_jac_max,
        cov_min=ext.inv_cov_min,
        cov_max=ext.inv_cov_max,
        r_min=ext.eps_min,
        noise_max=ext.inv_noise_max,
        f_curv_min=d_min,
        f_curv_max=d_max,
        h_curv_min=ext.g_curv_min,
        h_curv_max=ext.g_curv_max,
        rem_f_coeff=max(kappa_prime_fwd, 1e-300),
        rem_f_radius=max(eps_prime_fwd, 1e-300),
        rem_h_coeff=ext.rem_g_coeff,
        rem_h_radius=ext.rem_g_radius,
        p=ext.n_a,
    )
    report = check_forward_stability(b_inv)
    report.constants["d_min"] = d_min
    report.constants["d_max"] = d_max
    report.forward_ok = forward.satisfied
    if not forward.satisfied:
        report.notes.append("forward precondition unmet: the forward filter "
                            "fails its own stability conditions")
        report.satisfied = False
    if not full_column_rank:
        report.notes.append("full-column-rank attestation not given for the "
                            "gain cross term")
        report.satisfied = False
    return report


def estimate_bounds_from_runs(model, filter_traces, inflation: float = 1.05,
                              rem_f_coeff: float = 1e-9,
                              rem_f_radius: float = 1.0,
                              rem_h_coeff: float = 1.0 / 3.0,
                              rem_h_radius: float = 1.0) -> SoekfBounds:
    """Empirical bounds from filter traces: sup/inf of Jacobian norms,
    covariance eigenvalues and Hessian eigenvalues, inflated by a safety
    factor. The cubic-remainder coefficients are not estimable from traces
    and are passed through.

    ``filter_traces`` is an iterable of runs, each an iterable of
    (mean, covariance) pairs.
    """
    if not filter_traces:
        raise ValueError("need at least one trace")
    f_norm = h_norm = finv_norm = 0.0
    cov_lo, cov_hi = math.inf, 0.0
    a_lo, a_hi = math.inf, -math.inf
    b_lo, b_hi = math.inf, -math.inf
    count = 0
    for run in filter_traces:
        for mean, cov in run:
            mean = np.atleast_1d(np.asarray(mean, dtype=float))
            cov = np.atleast_2d(np.asarray(cov, dtype=float))
            count += 1
            F = model.F(mean)
            H = model.H(mean)
            f_norm = max(f_norm, float(np.linalg.norm(F, 2)))
            h_norm = max(h_norm, float(np.linalg.norm(H, 2)))
            finv_norm = max(finv_norm, float(np.linalg.norm(np.linalg.inv(F), 2)))
            eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
            cov_lo = min(cov_lo, float(eigs.min()))
            cov_hi = max(cov_hi, float(eigs.max()))
            for hess in model.f_hessians(mean):
                he = np.linalg.eigvalsh(0.5 * (hess + hess.T))
                a_lo, a_hi = min(a_lo, float(he.min())), max(a_hi, float(he.max()))
            for hess in model.h_hessians(mean):
                he = np.linalg.eigvalsh(0.5 * (hess + hess.T))
                b_lo, b_hi = min(b_lo, float(he.min())), max(b_hi, float(he.max()))
    if count == 0:
        raise ValueError("traces are empty")
    q_eigs = np.linalg.eigvalsh(np.atleast_2d(model.Q))
    r_eigs = np.linalg.eigvalsh(np.atleast_2d(model.R))
    return SoekfBounds(
        f_jac_max=f_norm * inflation,
        h_jac_max=h_norm * inflation,
        cov_min=max(cov_lo / inflation, 1e-300),
        cov_max=cov_hi * inflation,
        q_min=float(q_eigs.min()),
        r_min=float(r_eigs.min()),
        f_curv_max=max(a_hi, 0.0) * inflation,
        h_curv_max=max(b_hi, 0.0) * inflation,
        f_curv_min=min(a_lo, 0.0) * inflation,
        h_curv_min=min(b_lo, 0.0) * inflation,
        noise_max=float(max(q_eigs.max(), r_eigs.max())),
        f_inv_max=finv_norm * inflation,
        rem_f_coeff=rem_f_coeff, rem_f_radius=rem_f_radius,
        rem_h_coeff=rem_h_coeff, rem_h_radius=rem_h_radius,
        n=model.n, p=model.p,
    )
