"""System models: evaluatable (f, h, g) triples with noises and derivatives.

A SystemModel bundles the state transition f, the tracker's observation h,
the action map g, their noise covariances, and (optionally) analytic
Jacobians/Hessians. Filters fall back to central finite differences when an
analytic derivative is absent.

Two concrete models ship with the package: an FM demodulator (2-state) and a
bearings-only coordinate estimation model (4-state).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import RngStream, sample_gaussian

Array = np.ndarray
VecFn = Callable[[Array], Array]


def jacobian(fn: VecFn, x: Array, analytic: Optional[Callable] = None) -> Array:
    """Jacobian of fn at x: analytic if supplied, else central differences.

    Step per coordinate: 1e-5 * (1 + |x_i|).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if analytic is not None:
        return np.atleast_2d(np.asarray(analytic(x), dtype=float))
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    if not np.all(np.isfinite(f0)):
        raise ValueError("function evaluation returned NaN/Inf in jacobian")
    n = x.shape[0]
    jac = np.empty((f0.shape[0], n))
    for i in range(n):
        step = 1e-5 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        fp = np.atleast_1d(np.asarray(fn(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(xm), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError("function evaluation returned NaN/Inf in jacobian")
        jac[:, i] = (fp - fm) / (2.0 * step)
    return jac


def hessian_component(fn: VecFn, i: int, x: Array,
                      analytic: Optional[Callable] = None) -> Array:
    """Hessian of output component i of fn at x (second-order central FD).

    Step per coordinate: 1e-4 * (1 + |x_i|).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if analytic is not None:
        return np.asarray(analytic(x), dtype=float)[i]
    n = x.shape[0]
    comp = lambda v: float(np.atleast_1d(np.asarray(fn(v), dtype=float))[i])
    steps = 1e-4 * (1.0 + np.abs(x))
    hess = np.empty((n, n))
    f0 = comp(x)
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = steps[j]
        hess[j, j] = (comp(x + ej) - 2.0 * f0 + comp(x - ej)) / steps[j] ** 2
        for k in range(j + 1, n):
            ek = np.zeros(n)
            ek[k] = steps[k]
            mixed = (comp(x + ej + ek) - comp(x + ej - ek)
                     - comp(x - ej + ek) + comp(x - ej - ek))
            hess[j, k] = hess[k, j] = mixed / (4.0 * steps[j] * steps[k])
    if not np.all(np.isfinite(hess)):
        raise ValueError("function evaluation returned NaN/Inf in hessian")
    return hess


@dataclass(frozen=True)
class SystemModel:
    """Immutable model triple (f, h, g) with noises and optional derivatives.

    Analytic Hessian hooks return the full stack: shape (m, n, n) for a map
    with m outputs. ``dither_family``, when present, maps a dither width d to
    a (h_star, h_star_jacobian) pair used by the dithered-observation filter
    in preference to generic quadrature.
    """

    n: int
    p: int
    n_a: int
    f: VecFn
    h: VecFn
    g: VecFn
    Q: Array
    R: Array
    Sigma_eps: Array
    f_jac: Optional[Callable] = None
    h_jac: Optional[Callable] = None
    g_jac: Optional[Callable] = None
    f_hess: Optional[Callable] = None
    h_hess: Optional[Callable] = None
    g_hess: Optional[Callable] = None
    dither_family: Optional[Callable[[float], tuple]] = None
    # Optional row-batched evaluation hooks ((m, n) inputs -> stacked
    # outputs); the mixture filters use them to avoid per-component calls.
    f_batch: Optional[Callable] = None
    h_batch: Optional[Callable] = None
    f_jac_batch: Optional[Callable] = None
    h_jac_batch: Optional[Callable] = None
    name: str = ""

    @property
    def has_batch_hooks(self) -> bool:
        return None not in (self.f_batch, self.h_batch,
                            self.f_jac_batch, self.h_jac_batch)

    def F(self, x: Array) -> Array:
        if self.f_jac is not None:
            return np.asarray(self.f_jac(x), dtype=float)
        return jacobian(self.f, x)

    def H(self, x: Array) -> Array:
        if self.h_jac is not None:
            return np.asarray(self.h_jac(x), dtype=float)
        return jacobian(self.h, x)

    def G(self, x: Array) -> Array:
        if self.g_jac is not None:
            return np.asarray(self.g_jac(x), dtype=float)
        return jacobian(self.g, x)

    def f_hessians(self, x: Array) -> Array:
        if self.f_hess is not None:
            return np.asarray(self.f_hess(x), dtype=float)
        return np.stack([hessian_component(self.f, i, x) for i in range(self.n)])

    def h_hessians(self, x: Array) -> Array:
        if self.h_hess is not None:
            return np.asarray(self.h_hess(x), dtype=float)
        return np.stack([hessian_component(self.h, i, x) for i in range(self.p)])

    def g_hessians(self, x: Array) -> Array:
        if self.g_hess is not None:
            return np.asarray(self.g_hess(x), dtype=float)
        return np.stack([hessian_component(self.g, i, x) for i in range(self.n_a)])


@dataclass
class Trajectory:
    """Simulated states x_0..x_N (rows) and observations y_1..y_N (rows)."""

    states: Array
    observations: Array
    horizon: int


@dataclass
class ActionSeries:
    """Actions a_k = g(estimate_k) + noise, aligned with the estimate list."""

    actions: Array


def simulate(model: SystemModel, x0: Array, horizon: int, rng: RngStream) -> Trajectory:
    """Roll the state forward: x' = f(x) + w, y = h(x') + v.

    Noise draw order is fixed per step as (w, then v) so that runs are
    reproducible across implementations of the same seed.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    states = [x.copy()]
    obs = []
    for k in range(horizon):
        w = sample_gaussian(rng, np.zeros(model.n), model.Q)
        x = np.atleast_1d(np.asarray(model.f(x), dtype=float)) + w
        if not np.all(np.isfinite(x)):
            raise RuntimeError(f"state diverged (non-finite) at step {k + 1}")
        v = sample_gaussian(rng, np.zeros(model.p), model.R)
        y = np.atleast_1d(np.asarray(model.h(x), dtype=float)) + v
        states.append(x.copy())
        obs.append(y)
    return Trajectory(np.array(states), np.array(obs), horizon)


def emit_actions(model: SystemModel, estimates, rng: RngStream) -> ActionSeries:
    """Actions taken on a sequence of tracker estimates, observed in noise."""
    acts = []
    for est in estimates:
        est = np.atleast_1d(np.asarray(est, dtype=float))
        if est.shape[0] != model.n:
            raise ValueError("estimate dimension does not match model state dim")
        eps = sample_gaussian(rng, np.zeros(model.n_a), model.Sigma_eps)
        acts.append(np.atleast_1d(np.asarray(model.g(est), dtype=float)) + eps)
    return ActionSeries(np.array(acts))


# ---------------------------------------------------------------------------
# FM demodulator model (2-state: modulating signal lambda, phase theta)
# ---------------------------------------------------------------------------

FM_T = 2.0 * np.pi / 16.0
FM_BETA = 100.0
FM_W_VAR = 0.01
FM_EPS_VAR = 5.0


def fm_demod_model(transition_form: str = "printed") -> SystemModel:
    """FM demodulator: linear phase dynamics, sinusoidal observation.

    transition_form selects the (2,1) entry of the transition matrix:
      * "printed":   -beta*exp(-T/beta) - 1  (as published; dimensionally odd)
      * "corrected":  beta*(exp(-T/beta) - 1)
    The printed form is the default; the alternative is opt-in and never
    substituted silently.
    """
    e = np.exp(-FM_T / FM_BETA)
    if transition_form == "printed":
        f21 = -FM_BETA * e - 1.0
    elif transition_form == "corrected":
        f21 = FM_BETA * (e - 1.0)
    else:
        raise ValueError(f"unknown transition_form {transition_form!r}")
    F = np.array([[e, 0.0], [f21, 1.0]])
    gain = np.array([1.0, -FM_BETA])
    Q = FM_W_VAR * np.outer(gain, gain)
    R = np.eye(2)
    Sigma_eps = np.array([[FM_EPS_VAR]])

    def f(x):
        return F @ x

    def h(x):
        return np.sqrt(2.0) * np.array([np.sin(x[1]), np.cos(x[1])])

    def g(x):
        return np.array([x[0] ** 2])

    def h_jac(x):
        c, s = np.cos(x[1]), np.sin(x[1])
        return np.sqrt(2.0) * np.array([[0.0, c], [0.0, -s]])

    def h_hess(x):
        c, s = np.cos(x[1]), np.sin(x[1])
        return np.sqrt(2.0) * np.array(
            [[[0.0, 0.0], [0.0, -s]], [[0.0, 0.0], [0.0, -c]]]
        )

    def g_jac(x):
        return np.array([[2.0 * x[0], 0.0]])

    def g_hess(x):
        return np.array([[[2.0, 0.0], [0.0, 0.0]]])

    def h_batch(X):
        out = np.empty((X.shape[0], 2))
        out[:, 0] = np.sin(X[:, 1])
        out[:, 1] = np.cos(X[:, 1])
        return np.sqrt(2.0) * out

    def h_jac_batch(X):
        out = np.zeros((X.shape[0], 2, 2))
        out[:, 0, 1] = np.sqrt(2.0) * np.cos(X[:, 1])
        out[:, 1, 1] = -np.sqrt(2.0) * np.sin(X[:, 1])
        return out

    zero_hess_f = np.zeros((2, 2, 2))
    return SystemModel(
        n=2, p=2, n_a=1, f=f, h=h, g=g, Q=Q, R=R, Sigma_eps=Sigma_eps,
        f_jac=lambda x: F, h_jac=h_jac, g_jac=g_jac,
        f_hess=lambda x: zero_hess_f, h_hess=h_hess, g_hess=g_hess,
        f_batch=lambda X: X @ F.T, h_batch=h_batch,
        f_jac_batch=lambda X: np.broadcast_to(F, (X.shape[0], 2, 2)),
        h_jac_batch=h_jac_batch,
        name="fm-demod",
    )


# ---------------------------------------------------------------------------
# Bearings-only model (4-state, normalized coordinates)
# ---------------------------------------------------------------------------

BEARING_DT = 20.0
BEARING_W_STD = 0.1
BEARING_V_STD = 2.0
BEARING_EPS_STD = 1.5
# Scenario constants not fixed by the experiment description; defaults chosen
# so the standard inverse-filter initialization [0, 0.002, 200, 2] equals the
# true initial state. Non-authoritative and overridable.
BEARING_SPEED = 200.0
BEARING_TARGET_Y = 1.0e5
BEARING_TARGET_X = 2.0e5


def _arctan_smoothed(s: Array, d: float) -> Array:
    """Mean of arctan(s + a) for a uniform on [-d, d] (antiderivative form)."""
    up, lo = s + d, s - d
    anti = lambda t: t * np.arctan(t) - 0.5 * np.log1p(t * t)
    return (anti(up) - anti(lo)) / (2.0 * d)


def bearing_model(speed: float = BEARING_SPEED,
                  target_y: float = BEARING_TARGET_Y,
                  target_x: float = BEARING_TARGET_X) -> SystemModel:
    """Stationary-target coordinate estimation from bearings.

    State (normalized): [sensor_x/Y, speed/Y, speed, X/Y]. The observation is
    arctan of the normalized offset; the action is the squared coordinate
    ratio estimate. ``speed``/``target_*`` only set the process-noise gain
    scale and the canonical initial state.
    """
    dt = BEARING_DT
    F = np.array([
        [1.0, dt, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    gain = np.array([0.0, dt / target_y, dt, 0.0])
    Q = BEARING_W_STD ** 2 * np.outer(gain, gain)
    R = np.array([[BEARING_V_STD ** 2]])
    Sigma_eps = np.array([[BEARING_EPS_STD ** 2]])

    def f(x):
        return F @ x

    def h(x):
        return np.array([np.arctan(x[3] - x[0])])

    def g(x):
        return np.array([x[3] ** 2])

    def h_jac(x):
        d = x[3] - x[0]
        w = 1.0 / (1.0 + d * d)
        return np.array([[-w, 0.0, 0.0, w]])

    def h_hess(x):
        d = x[3] - x[0]
        # second derivative of arctan(u) is -2u/(1+u^2)^2, u = x4 - x1
        u2 = -2.0 * d / (1.0 + d * d) ** 2
        hess = np.zeros((1, 4, 4))
        hess[0, 0, 0] = u2
        hess[0, 3, 3] = u2
        hess[0, 0, 3] = hess[0, 3, 0] = -u2
        return hess

    def g_jac(x):
        return np.array([[0.0, 0.0, 0.0, 2.0 * x[3]]])

    def g_hess(x):
        hess = np.zeros((1, 4, 4))
        hess[0, 3, 3] = 2.0
        return hess

    def dither_family(d: float):
        # The smoothing acts on the scalar bearing argument; broadcasting the
        # dither onto the whole state would cancel inside x4 - x1. Below a
        # width of 1e-7 the correction is under 1e-14 and the closed form
        # cancels catastrophically, so the plain observation is used.
        if d < 1e-7:
            return h, h_jac

        def h_star(x):
            return np.atleast_1d(_arctan_smoothed(x[3] - x[0], d))

        def h_star_jac(x):
            s = x[3] - x[0]
            slope = (np.arctan(s + d) - np.arctan(s - d)) / (2.0 * d)
            return np.array([[-slope, 0.0, 0.0, slope]])

        return h_star, h_star_jac

    zero_hess_f = np.zeros((4, 4, 4))
    return SystemModel(
        n=4, p=1, n_a=1, f=f, h=h, g=g, Q=Q, R=R, Sigma_eps=Sigma_eps,
        f_jac=lambda x: F, h_jac=h_jac, g_jac=g_jac,
        f_hess=lambda x: zero_hess_f, h_hess=h_hess, g_hess=g_hess,
        dither_family=dither_family,
        name="bearing",
    )


def bearing_initial_state(speed: float = BEARING_SPEED,
                          target_y: float = BEARING_TARGET_Y,
                          target_x: float = BEARING_TARGET_X) -> Array:
    """Canonical true initial state for the bearing scenario defaults."""
    return np.array([0.0, speed / target_y, speed, target_x / target_y])


MODEL_BUILDERS = {
    "fm-demod": fm_demod_model,
    "bearing": bearing_model,
}


def build_model(model_id: str, **kwargs) -> SystemModel:
    """Model selection by string id (harness configuration hook)."""
    try:
        builder = MODEL_BUILDERS[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; "
                         f"known: {sorted(MODEL_BUILDERS)}") from None
    return builder(**kwargs)
