"""Nonlinear Bayesian filtering and inverse ("estimate the estimate")
filtering, with a seeded Monte-Carlo experiment harness.

Forward filters: EKF, second-order EKF (two-step and one-step forms),
Gaussian-sum EKF, dithered EKF, and a kernel state-space filter with online
EM parameter learning. Each has an inverse counterpart that tracks the
forward filter's estimate from observed actions and known true states.
Benchmarks: recursive Cramer-Rao bounds and stability certificates for the
second-order forms.
"""

from .core import RngStream, gaussian_logpdf, sample_gaussian, symmetrize_psd
from .crlb import FisherState, bound_diagonal, rcrlb_inverse_step, rcrlb_step
from .forward import (
    DitherSchedule,
    GaussianBelief,
    GsBelief,
    StepRecord,
    dekf_step,
    dithered_observation,
    ekf_step,
    gsekf_point_estimate,
    gsekf_step,
    soekf_one_step,
    soekf_step,
)
from .inverse import (
    AugmentedGsState,
    EkfReplica,
    GsReplica,
    InverseBelief,
    idekf_step,
    iekf_step,
    igsekf_point_estimate,
    igsekf_step,
    isoekf_one_step,
    isoekf_step,
)
from .models import (
    ActionSeries,
    SystemModel,
    Trajectory,
    bearing_model,
    build_model,
    emit_actions,
    fm_demod_model,
    hessian_component,
    jacobian,
    simulate,
)
from .rkhs import (
    Dictionary,
    KernelSpec,
    RkhsState,
    ald_admit,
    kernel_jacobian,
    kernel_vector,
    rkhs_init,
    rkhs_inverse_wrap,
    rkhs_step,
    sliding_window_admit,
)
from .stability import (
    InverseBoundsExt,
    SoekfBounds,
    StabilityReport,
    check_forward_stability,
    check_inverse_stability,
    estimate_bounds_from_runs,
    curvature_bound_constants,
)

__version__ = "0.1.0"
