"""Stochastic-stability certificates for the one-step second-order filter.

Evaluates the sufficiency conditions on a gently curved scalar system,
prints the full report, then sweeps the noise-level bound to show the
feasibility window of the noise-consistency condition.

Run:  python3 demos/stability_certificates.py
"""

from dataclasses import replace

from ifl.stability import InverseBoundsExt, SoekfBounds, check_forward_stability, check_inverse_stability

bounds = SoekfBounds(
    f_jac_max=0.95, h_jac_max=0.11, cov_min=0.04, cov_max=0.06,
    q_min=0.01, r_min=0.04, f_curv_max=0.001, h_curv_max=0.001,
    noise_max=0.04, f_inv_max=1.2,
    rem_f_coeff=1e-9, rem_f_radius=3.0, rem_h_coeff=1e-9, rem_h_radius=3.0,
    n=1, p=1)

report = check_forward_stability(bounds)
print(report.to_text())

print("\nnoise-level sweep (noise_max vs feasibility):")
print(f"{'noise_max':>10s} {'floor ok':>9s} {'level ok':>9s} {'alpha':>8s}")
for delta in (0.04, 0.08, 0.2, 0.5, 1.0):
    rpt = check_forward_stability(replace(bounds, noise_max=delta))
    print(f"{delta:10.2f} {str(rpt.conditions['process_noise_floor']):>9s} "
          f"{str(rpt.conditions['noise_level']):>9s} "
          f"{rpt.constants.get('alpha', float('nan')):8.4f}")

ext = InverseBoundsExt(g_jac_max=0.3, inv_cov_min=0.03, inv_cov_max=0.05,
                       eps_min=0.1, inv_noise_max=0.1, g_curv_max=0.001,
                       g_curv_min=-0.001, rem_g_coeff=1e-9, rem_g_radius=3.0,
                       n_a=1)
inverse_report = check_inverse_stability(bounds, ext)
print("\ninverse-filter certificate:")
print(inverse_report.to_text())
