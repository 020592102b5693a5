"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL
line (run with ``pytest -s tests/test_acceptance.py`` to see them live).

Two ordering criteria (5c and 6) assert mixture-advantage claims that do not
materialize under the default FM transition constants: the default form's
large phase-coupling entry, combined with the large phase noise gain, drives
the phase coordinate with ~10 rad/step kicks that no linearization-based
filter can track, so every error curve is dominated by the same untrackable
diffusion and the mixture's representational edge vanishes into Monte-Carlo
noise (verified across seeds; see the companion checks). The same claims
reproduce decisively under the model's selectable "corrected" transition
form. Those two tests are therefore expected to fail red at the defaults;
the companion tests demonstrate the claims under the corrected form.
"""

import time

import numpy as np
import pytest

from conftest import (
    inverse_kf,
    kf_filter,
    kf_one_step,
    quadratic_scalar_model,
)
from ifl.config import ExperimentConfig
from ifl.forward import (
    DitherSchedule,
    GaussianBelief,
    GsBelief,
    dekf_step,
    dithered_observation,
    ekf_step,
    gsekf_step,
    soekf_one_step,
    soekf_step,
)
from ifl.harness import execute, experiment_series, run_experiment
from ifl.inverse import EkfReplica, iekf_step
from ifl.models import SystemModel
from ifl.stability import SoekfBounds, check_forward_stability, check_inverse_stability


def _report(name, ok, detail=""):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


# ---------------------------------------------------------------------------
# 1. Linear-collapse suite
# ---------------------------------------------------------------------------


def test_criterion_1_linear_collapse(random_linear_2d):
    start = time.time()
    d = random_linear_2d
    model, ys = d["model"], d["ys"]
    kf_means, _ = kf_filter(d["A"], d["C"], d["Q"], d["R"], np.zeros(2),
                            np.eye(2), ys)
    os_means, _ = kf_one_step(d["A"], d["C"], d["Q"], d["R"], np.zeros(2),
                              np.eye(2), ys)

    worst = {k: 0.0 for k in ("ekf", "soekf", "soekf_one", "gs", "dekf",
                              "iekf")}
    b_ekf = b_so = b_dekf = GaussianBelief(np.zeros(2), np.eye(2))
    b_one = GaussianBelief(np.zeros(2), np.eye(2))
    gs = GsBelief([1.0], [np.zeros(2)], [np.eye(2)])
    sched = DitherSchedule(d0=1.0, tau=10.0, transient_steps=100)
    for k, y in enumerate(ys):
        b_ekf = ekf_step(model, b_ekf, y).updated
        b_so = soekf_step(model, b_so, y).updated
        b_one = soekf_one_step(model, b_one, y).updated
        gs = gsekf_step(model, gs, y)
        b_dekf = dekf_step(model, sched, k, b_dekf, y).updated
        worst["ekf"] = max(worst["ekf"],
                           np.abs(b_ekf.mean - kf_means[k]).max())
        worst["soekf"] = max(worst["soekf"],
                             np.abs(b_so.mean - kf_means[k]).max())
        worst["soekf_one"] = max(worst["soekf_one"],
                                 np.abs(b_one.mean - os_means[k]).max())
        worst["gs"] = max(worst["gs"],
                          np.abs(gs.means[0] - b_ekf.mean).max())
        worst["dekf"] = max(worst["dekf"],
                            np.abs(b_dekf.mean - b_ekf.mean).max())

    # inverse filter against an independently coded linear inverse KF
    rng = np.random.default_rng(5)
    actions = rng.normal(size=(100, 2))
    inv = GaussianBelief(np.array([0.3, -0.2]), 2 * np.eye(2))
    rep = EkfReplica(np.eye(2))
    got = []
    for k in range(100):
        inv, rep = iekf_step(model, inv, rep, d["xs"][k + 1], actions[k])
        got.append(inv.mean)
    oracle = inverse_kf(d["A"], d["C"], d["G"], d["Q"], d["R"],
                        d["Sigma_eps"], np.array([0.3, -0.2]), 2 * np.eye(2),
                        np.eye(2), d["xs"][1:], actions)
    worst["iekf"] = np.abs(np.array(got) - oracle).max()

    elapsed = time.time() - start
    top = max(worst.values())
    ok = top <= 1e-10 and elapsed < 5.0
    assert _report("criterion 1 (linear collapse)", ok,
                   f"max dev {top:.2e}, {elapsed:.2f}s"), worst
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. RCRLB equals KF covariance on linear-Gaussian chains
# ---------------------------------------------------------------------------


def test_criterion_2_rcrlb_kf_identity(random_linear_2d):
    from ifl.crlb import FisherState, rcrlb_step

    d = random_linear_2d
    cov0 = 0.7 * np.eye(2)
    _, covs = kf_filter(d["A"], d["C"], d["Q"], d["R"], np.zeros(2), cov0,
                        d["ys"][:50])
    fisher = FisherState(np.linalg.inv(cov0))
    worst = 0.0
    for k in range(50):
        fisher = rcrlb_step(fisher, d["A"], d["C"], d["Q"], d["R"])
        worst = max(worst,
                    np.abs(np.linalg.inv(fisher.J) - covs[k]).max())
    assert _report("criterion 2 (bound/KF identity)", worst <= 1e-10,
                   f"max dev {worst:.2e}")


# ---------------------------------------------------------------------------
# 3. Second-order closed forms
# ---------------------------------------------------------------------------


def test_criterion_3_soekf_closed_forms():
    model = quadratic_scalar_model()
    m, var = 1.3, 0.8
    rec = soekf_step(model, GaussianBelief([m], [[var]]), [0.0])
    dev1 = abs(rec.predicted.mean[0] - (m * m + var))
    rec2 = soekf_one_step(model, GaussianBelief([0.4], [[1.0]]), [0.0])
    dev2 = abs(rec2.M[0, 0] - 2.0)
    ok = dev1 <= 1e-12 and dev2 <= 1e-12
    assert _report("criterion 3 (second-order closed forms)", ok,
                   f"pred dev {dev1:.2e}, cross-term dev {dev2:.2e}")


# ---------------------------------------------------------------------------
# 4. Dither closed form
# ---------------------------------------------------------------------------


def test_criterion_4_dither_closed_form():
    worst = 0.0
    for d0 in (0.1, 0.5):
        sched = DitherSchedule(d0=d0, tau=1e12, transient_steps=5)
        h_star = dithered_observation(lambda x: x ** 3, sched, 0)
        for x in np.linspace(-2.0, 2.0, 41):
            closed = x ** 3 + d0 * d0 * x
            worst = max(worst, abs(h_star(np.array([x]))[0] - closed))
    assert _report("criterion 4 (dither closed form)", worst <= 1e-8,
                   f"max dev {worst:.2e}")


# ---------------------------------------------------------------------------
# 5. FM experiment at scale
# ---------------------------------------------------------------------------


def test_criterion_5ab_fm_experiment():
    start = time.time()
    cfg = ExperimentConfig(experiment="fm-demod", runs=500, horizon=100,
                           seed=11)
    series = experiment_series(cfg, run_experiment(cfg))
    elapsed = time.time() - start
    v = series.values

    fractions = {}
    for fwd in ("fwd_ekf_amse", "fwd_soekf_amse", "fwd_gsekf_amse"):
        fractions[fwd] = np.mean(v[fwd] >= v["fwd_rcrlb"])
    fractions["inv_ekf_amse"] = np.mean(v["inv_ekf_amse"]
                                        >= v["inv_ekf_rcrlb"])
    fractions["inv_soekf_amse"] = np.mean(v["inv_soekf_amse"]
                                          >= v["inv_soekf_rcrlb"])
    part_a = all(f >= 0.95 for f in fractions.values())

    last_ekf = v["inv_ekf_amse"][-20:].mean()
    last_so = v["inv_soekf_amse"][-20:].mean()
    gap = abs(last_ekf - last_so) / min(last_ekf, last_so)
    part_b = gap <= 0.10

    ok = part_a and part_b and elapsed < 120.0
    assert _report("criterion 5a/5b (FM experiment)", ok,
                   f"bound fractions {min(fractions.values()):.2%}, "
                   f"steady gap {gap:.2%}, {elapsed:.0f}s"), (fractions, gap)
    assert elapsed < 120.0


def _mixture_advantage_wins(form, reps, runs):
    wins = 0
    for rep in range(reps):
        cfg = ExperimentConfig(experiment="fm-demod", runs=runs, horizon=100,
                               seed=100 + rep, filters=("gsekf",),
                               transition_form=form)
        v = experiment_series(cfg, run_experiment(cfg)).values
        if v["inv_gsekf_amse"][-50:].mean() < v["fwd_gsekf_amse"][-50:].mean():
            wins += 1
    return wins


def test_criterion_5c_mixture_advantage_default_form():
    # Expected red at the default transition form: both curves are dominated
    # by the untrackable phase diffusion and the mixture edge is Monte-Carlo
    # noise (module docstring; companion test shows the claim under the
    # corrected form). Repetitions run at 200 Monte-Carlo runs each.
    wins = _mixture_advantage_wins("printed", reps=10, runs=200)
    assert _report("criterion 5c (mixture advantage, default form)",
                   wins >= 8, f"{wins}/10 repetitions"), \
        f"inverse mixture beat the forward mixture in only {wins}/10 reps"


def test_companion_5c_mixture_advantage_corrected_form():
    wins = _mixture_advantage_wins("corrected", reps=5, runs=200)
    assert _report("companion 5c (corrected transition)", wins >= 4,
                   f"{wins}/5 repetitions")


# ---------------------------------------------------------------------------
# 6. Mismatch matrix
# ---------------------------------------------------------------------------

TABLE_PAIRS = [("ekf", "ekf"), ("soekf", "ekf"), ("soekf", "soekf"),
               ("ekf", "soekf"), ("gsekf", "ekf"), ("gsekf", "gsekf"),
               ("ekf", "gsekf")]


def test_criterion_6_all_pairings_run(tmp_path):
    for true_fwd, assumed in TABLE_PAIRS:
        cfg = ExperimentConfig(experiment="fm-demod", runs=2, horizon=10,
                               seed=1, out_dir=str(tmp_path), workers=1,
                               true_forward=true_fwd, assumed_forward=assumed)
        series = experiment_series(cfg, run_experiment(cfg))
        assert f"inv_{assumed}_true_{true_fwd}_amse" in series.values
    # the four kernel-filter pairings are the standard curves of rkhs-fm
    cfg = ExperimentConfig(experiment="rkhs-fm", runs=2, horizon=10, seed=1,
                           out_dir=str(tmp_path), workers=1)
    series = experiment_series(cfg, run_experiment(cfg))
    for label in ("inv_ekf1_amse", "inv_ekf2_amse", "inv_rkhs1_amse",
                  "inv_rkhs2_amse"):
        assert label in series.values
    _report("criterion 6 (all eight pairings executable)", True, "")


def _pair_series(runs, seed, form, assumed):
    cfg = ExperimentConfig(experiment="fm-demod", runs=runs, horizon=100,
                           seed=seed, transition_form=form,
                           true_forward="ekf", assumed_forward=assumed)
    return experiment_series(cfg, run_experiment(cfg)).values


def _sophisticated_inverse_wins(form, reps, runs):
    wins = 0
    for rep in range(reps):
        v1 = _pair_series(runs, 300 + rep, form, "ekf")
        v2 = _pair_series(runs, 300 + rep, form, "gsekf")
        if (v2["inv_gsekf_true_ekf_amse"][-1]
                < v1["inv_ekf_true_ekf_amse"][-1]):
            wins += 1
    return wins


def test_criterion_6_sophistication_ordering_default_form():
    # Expected red at the default transition form for the same reason as 5c.
    wins = _sophisticated_inverse_wins("printed", reps=10, runs=200)
    assert _report("criterion 6 (mixture inverse beats matched inverse, "
                   "default form)", wins >= 7, f"{wins}/10 repetitions"), \
        f"the mixture inverse won only {wins}/10 reps"


def test_companion_6_sophistication_ordering_corrected_form():
    wins = _sophisticated_inverse_wins("corrected", reps=5, runs=200)
    assert _report("companion 6 (corrected transition)", wins >= 4,
                   f"{wins}/5 repetitions")


# ---------------------------------------------------------------------------
# 7. Bearing experiment
# ---------------------------------------------------------------------------


def test_criterion_7_bearing_experiment():
    start = time.time()
    cfg = ExperimentConfig(experiment="bearing", runs=400, horizon=200,
                           seed=21)
    series = experiment_series(cfg, run_experiment(cfg))
    elapsed = time.time() - start
    v = series.values
    d1 = v["inv_dekf1_abserr"][-40:].mean()
    d2 = v["inv_dekf2_abserr"][-40:].mean()
    gap = abs(d1 - d2) / min(d1, d2)
    fwd_floor = min(v["fwd_ekf_abserr"][-40:].mean(),
                    v["fwd_dekf_abserr"][-40:].mean())
    inv_top = max(v["inv_ekf_abserr"][-40:].mean(), d1, d2)
    ok = gap <= 0.10 and inv_top < fwd_floor and elapsed < 120.0
    assert _report("criterion 7 (bearing experiment)", ok,
                   f"variant gap {gap:.2%}, inverse {inv_top:.4f} vs "
                   f"forward {fwd_floor:.4f}, {elapsed:.0f}s")
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 8. Kernel filter
# ---------------------------------------------------------------------------


def test_criterion_8a_online_matches_batch_oracle():
    from ifl.rkhs import KernelSpec, kernel_jacobian, kernel_vector, rkhs_init
    from ifl.rkhs import rkhs_step

    spec = KernelSpec(5.0)
    st = rkhs_init(np.array([0.4, -0.2]), np.eye(2), np.eye(2),
                   0.5 * np.eye(2))
    y = np.array([0.3, 0.8])
    new = rkhs_step(st, spec, y)
    d = st.dictionary
    x_f, x_s = new.z[:2], new.z[2:]
    phi_s = kernel_vector(spec, d, x_s)
    jac_s = kernel_jacobian(spec, d, x_s)
    e_xphi = np.outer(x_f, phi_s) + new.cov_z[:2, 2:] @ jac_s.T
    e_phi1 = (np.outer(phi_s, phi_s)
              + jac_s @ new.cov_z[2:, 2:] @ jac_s.T)
    batch = e_xphi @ np.linalg.inv(e_phi1)
    dev = np.abs(new.A[:, :1] - batch).max()
    assert _report("criterion 8a (online vs batch at k=1)", dev <= 1e-10,
                   f"max dev {dev:.2e}")


def test_criterion_8b_exact_moments_at_zero_covariance():
    from ifl.rkhs import Dictionary, KernelSpec, kernel_jacobian, kernel_vector

    spec = KernelSpec(2.0)
    d = Dictionary(atoms=[[0.1, 0.7], [-0.4, 0.2]])
    x = np.array([0.3, -0.5])
    phi = kernel_vector(spec, d, x)
    jac = kernel_jacobian(spec, d, x)
    zero = np.zeros((2, 2))
    e_phi = np.outer(phi, phi) + jac @ zero @ jac.T
    dev = np.abs(e_phi - np.outer(phi, phi)).max()
    assert _report("criterion 8b (exact moments at zero covariance)",
                   dev <= 1e-12, f"max dev {dev:.2e}")


def test_criterion_8c_inverse_kernel_beats_forward():
    wins = 0
    for rep in range(10):
        cfg = ExperimentConfig(experiment="rkhs-fm", runs=500, horizon=100,
                               seed=500 + rep, filters=("rkhs", "irkhs1"))
        v = experiment_series(cfg, run_experiment(cfg)).values
        if v["inv_rkhs1_amse"][-50:].mean() < v["fwd_rkhs_amse"][-50:].mean():
            wins += 1
    assert _report("criterion 8c (inverse kernel filter beats forward)",
                   wins >= 7, f"{wins}/10 repetitions")


# ---------------------------------------------------------------------------
# 9. Stability module
# ---------------------------------------------------------------------------


def _transcribed(b):
    import math
    beta = 0.5 * b.f_curv_max * b.h_curv_max * b.cov_max ** 2 * b.n \
        * math.sqrt(b.n * b.p)
    fsh = b.f_jac_max * b.cov_max * b.h_jac_max
    c = (2 * fsh * (fsh + beta) / b.r_min
         + (2 * b.cov_max * b.h_jac_max ** 2 + b.noise_max
            + 0.5 * b.h_curv_max ** 2 * b.cov_max ** 2 * b.n * b.p)
         * ((fsh + beta) / b.r_min) ** 2)
    alpha = 1.0 - 1.0 / (1.0 + (b.q_min - c)
                         / (b.cov_max * (b.f_jac_max
                                         + (b.f_jac_max * b.cov_max
                                            * b.h_jac_max ** 2
                                            + beta * b.h_jac_max)
                                         / b.r_min) ** 2))
    kappa_noise = (b.n / b.cov_min
                   + b.f_jac_max ** 2 * b.h_jac_max ** 2 * b.cov_max ** 2
                   * b.p / (b.cov_min * b.r_min ** 2))
    gain_cap = (fsh + beta) / b.r_min
    d_min = b.f_curv_min - b.h_curv_max * math.sqrt(b.p) * gain_cap
    d_max = b.f_curv_max + abs(b.h_curv_min) * math.sqrt(b.p) * gain_cap
    return beta, c, alpha, kappa_noise, d_min, d_max


CURVATURE_TINY_MODEL = SystemModel(
    n=1, p=1, n_a=1,
    f=lambda x: np.array([0.9 * x[0] + 0.0005 * x[0] ** 2]),
    h=lambda x: np.array([0.1 * x[0] + 0.0005 * x[0] ** 2]),
    g=lambda x: np.array([x[0]]),
    Q=np.array([[0.01]]), R=np.array([[0.04]]), Sigma_eps=np.array([[0.01]]),
    f_jac=lambda x: np.array([[0.9 + 0.001 * x[0]]]),
    h_jac=lambda x: np.array([[0.1 + 0.001 * x[0]]]),
    g_jac=lambda x: np.array([[1.0]]),
    f_hess=lambda x: np.array([[[0.001]]]),
    h_hess=lambda x: np.array([[[0.001]]]),
    g_hess=lambda x: np.array([[[0.0]]]),
    name="curvature-tiny")

CURVATURE_TINY_BOUNDS = SoekfBounds(
    f_jac_max=0.95, h_jac_max=0.11, cov_min=0.04, cov_max=0.06,
    q_min=0.01, r_min=0.04, f_curv_max=0.001, h_curv_max=0.001,
    noise_max=0.04, f_inv_max=1.2,
    rem_f_coeff=1e-9, rem_f_radius=3.0, rem_h_coeff=1e-9, rem_h_radius=3.0,
    n=1, p=1)


def test_criterion_9_stability_module():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        b = SoekfBounds(
            f_jac_max=rng.uniform(0.1, 2.0), h_jac_max=rng.uniform(0.01, 1.0),
            cov_min=rng.uniform(0.01, 0.5), cov_max=rng.uniform(0.5, 3.0),
            q_min=rng.uniform(0.01, 1.0), r_min=rng.uniform(0.01, 1.0),
            f_curv_max=rng.uniform(0.0, 1.0),
            h_curv_max=rng.uniform(0.0, 1.0),
            f_curv_min=rng.uniform(-1.0, 0.0),
            h_curv_min=rng.uniform(-1.0, 0.0),
            noise_max=rng.uniform(1.0, 3.0), f_inv_max=rng.uniform(0.5, 3.0),
            n=int(rng.integers(1, 4)), p=int(rng.integers(1, 4)))
        rpt = check_forward_stability(b)
        from ifl.stability import InverseBoundsExt
        ext = InverseBoundsExt(g_jac_max=0.5, inv_cov_min=0.1,
                               inv_cov_max=1.0, eps_min=0.5,
                               inv_noise_max=2.0, g_curv_max=0.1,
                               g_curv_min=-0.1, n_a=1)
        rpt2 = check_inverse_stability(b, ext)
        beta, c, alpha, kn, d_min, d_max = _transcribed(b)
        for got, want in ((rpt.constants["beta"], beta),
                          (rpt.constants["c"], c),
                          (rpt.constants["kappa_noise"], kn),
                          (rpt2.constants["d_min"], d_min),
                          (rpt2.constants["d_max"], d_max)):
            worst = max(worst, abs(got - want) / max(abs(want), 1e-30))
        if b.q_min > c:
            worst = max(worst, abs(rpt.constants["alpha"] - alpha)
                        / max(abs(alpha), 1e-30))
            assert 0.0 < rpt.constants["alpha"] < 1.0

    report = check_forward_stability(CURVATURE_TINY_BOUNDS)
    verdicts_ok = report.satisfied

    # Monte Carlo: error stays bounded well below 1000x its initial value
    rng2 = np.random.default_rng(91)
    worst_ratio = 0.0
    model = CURVATURE_TINY_MODEL
    for run in range(1000):
        x = np.array([rng2.normal(scale=0.2)])
        est = GaussianBelief([x[0] - 0.1], [[0.05]])
        sup = 0.0
        for _ in range(100):
            y = model.h(x) + np.array([rng2.normal(scale=0.2)])
            est = soekf_one_step(model, est, y).updated
            x = model.f(x) + np.array([rng2.normal(scale=0.1)])
            sup = max(sup, float((x[0] - est.mean[0]) ** 2))
        worst_ratio = max(worst_ratio, sup / 0.01)
    bounded = worst_ratio <= 1000.0

    ok = worst <= 1e-12 and verdicts_ok and bounded
    assert _report("criterion 9 (stability module)", ok,
                   f"transcription dev {worst:.2e}, verdicts "
                   f"{'pass' if verdicts_ok else 'FAIL'}, worst error ratio "
                   f"{worst_ratio:.1f}")


# ---------------------------------------------------------------------------
# 10. Determinism
# ---------------------------------------------------------------------------


def test_criterion_10_determinism(tmp_path):
    all_ok = True
    for experiment, horizon in (("fm-demod", 40), ("bearing", 40),
                                ("rkhs-fm", 30)):
        cfg1 = ExperimentConfig(experiment=experiment, runs=10,
                                horizon=horizon, seed=77,
                                out_dir=str(tmp_path / "a" / experiment))
        cfg2 = ExperimentConfig(experiment=experiment, runs=10,
                                horizon=horizon, seed=77,
                                out_dir=str(tmp_path / "b" / experiment))
        b1 = execute(cfg1)["csv"].read_bytes()
        b2 = execute(cfg2)["csv"].read_bytes()
        all_ok = all_ok and b1 == b2
    assert _report("criterion 10 (seeded determinism)", all_ok,
                   "byte-identical CSVs")
