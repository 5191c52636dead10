"""Acceptance suite: one PASS/FAIL line per criterion (shown in the terminal
summary, or inline with ``pytest -s``)."""

import filecmp
import time

import numpy as np
import pytest

from agmonlab.agmon import agmon_distance_fmm, lemma_lower_bound_check, meridian
from agmonlab.cli import main
from agmonlab.core_model import Problem1D
from agmonlab.nodal import count_sign_changes, nodal_scaling_fit, restrict_to_curve
from agmonlab.spectral import discretize_1d, kth_eigenvalue, radial_reduce, solve_near_energy
from agmonlab.verify import (CONTROL_FAILS, CONTROL_HOLDS, bracket, bracket_positivity_check,
                             carleman_weight_build, forward_agmon_fit, level_curve,
                             restriction_bound_check, reverse_agmon_check)

QUADRATIC_D2 = 1.07357


def test_c01_agmon_distance(airy, verdict):
    t = time.perf_counter()
    err_quad = abs(airy.dE.at(1.0) - 2.0 / 3.0)
    fmm = meridian(agmon_distance_fmm(airy.problem, n=(512, 512)))
    rel_fmm = abs(fmm.at(1.0) / (2.0 / 3.0) - 1.0)
    dt = time.perf_counter() - t
    ok = err_quad <= 1e-4 and rel_fmm <= 0.02 and dt < 10.0
    verdict("criterion 1 (Agmon distance oracle)", ok,
            f"|d_E(1) - 2/3| = {err_quad:.1e}, fast-marching rel. error {rel_fmm:.2%}, {dt:.2f} s")
    assert ok


def test_c02_lemma_saturation(airy, quadratic, verdict):
    a = lemma_lower_bound_check(airy.dE, airy.collar)
    q = lemma_lower_bound_check(quadratic.dE, quadratic.collar)
    sel = quadratic.collar.forbidden_collar & (quadratic.collar.y_n.values > 0)
    q_min = float(np.min(q.slack.values[sel]))
    a_dev = float(np.max(np.abs(a.slack.values[airy.collar.forbidden_collar])))
    ok = a_dev <= 1e-4 and q_min > 0
    verdict("criterion 2 (lemma saturation)", ok,
            f"Airy max |slack| {a_dev:.1e}; x^2 min slack off the caustic {q_min:.2e}")
    assert ok


def test_c03_eigensolver(verdict):
    def ground(h, per_h):
        p = Problem1D(lambda x: np.asarray(x, dtype=float) ** 2, -6.0, 6.0, 1.0).for_h(h, per_h)
        return kth_eigenvalue(discretize_1d(p, h), 0)

    e8 = ground(0.05, 8) - 0.05
    e16 = ground(0.05, 16) - 0.05
    ratio = e8 / e16
    ok = abs(e8) <= 1e-4 and 3.6 <= ratio <= 4.4
    verdict("criterion 3 (eigensolver oracle)", ok,
            f"error {e8:.2e} at dx = h/8, ratio {ratio:.3f} on halving dx")
    assert ok


def test_c04_forward_rate(quadratic, verdict):
    t = time.perf_counter()
    (rep,) = forward_agmon_fit(quadratic.family, quadratic.dE, [2.0])
    dt = time.perf_counter() - t
    ok = (abs(rep.rate - QUADRATIC_D2) <= 0.15 * QUADRATIC_D2
          and rep.rate >= rep.d_E - 0.05 and abs(rep.d_E - QUADRATIC_D2) < 1e-5 and dt < 60)
    verdict("criterion 4 (forward Agmon rate)", ok,
            f"rate {rep.rate:.5f} vs d_E(2) = {rep.d_E:.5f}, fit {dt:.2f} s")
    assert ok


def test_c05_bracket(airy, verdict):
    w0 = carleman_weight_build(airy.collar, 0.0)
    sel = airy.collar.forbidden_collar & (airy.collar.y_n.values > 0)
    y = airy.collar.y_n.values[sel]
    b0 = float(np.max(np.abs(bracket(w0, y, airy.collar.dV.values[sel], 0.0))))
    w = carleman_weight_build(airy.collar, 0.1)
    rep = bracket_positivity_check(w, airy.collar, xi=np.linspace(-2.0, 2.0, 41))
    ok = b0 <= 1e-10 and rep.min_value >= 1e-3 and w.tau == pytest.approx(1.0)
    verdict("criterion 5 (bracket borderline and positivity)", ok,
            f"unperturbed max |bracket| {b0:.1e}; perturbed min {rep.min_value:.4f} "
            f"at y_n = {rep.at_y:.3f}, xi = {rep.at_xi:g}")
    assert ok


def test_c06_control_fixed_mode(sphere_control, verdict):
    rep = sphere_control
    ok = rep.classification == CONTROL_HOLDS
    verdict("criterion 6a (fixed m = 1 is controlled)", ok,
            f"{rep.classification}, N = {rep.N:.4f}, gamma = {rep.gamma:.4f}")
    assert ok


def test_c06_control_exponent_bound(sphere_control, verdict):
    rep = sphere_control
    ok = abs(rep.N) <= 0.3
    verdict("criterion 6b (|N| <= 0.3 for fixed m = 1)", ok,
            f"N = {rep.N:.4f}; annulus masses {[round(p[1], 4) for p in rep.pairs]} "
            "still rising toward the WKB limit 0.2414")
    assert ok


def test_c06_control_counterexample(sphere_inverse_control, verdict):
    rep = sphere_inverse_control
    ok = rep.classification == CONTROL_FAILS and rep.gamma > 0
    verdict("criterion 6c (m = round(1/h) loses control)", ok,
            f"{rep.classification}, gamma = {rep.gamma:.4f}")
    assert ok


def test_c07_reverse_agmon(sphere, sphere_inverse, sphere_control, sphere_inverse_control,
                           tmp_path, verdict):
    good = reverse_agmon_check(sphere.family, sphere.dE, sphere.collar,
                               control=sphere_control.classification)
    bad = reverse_agmon_check(sphere_inverse.family, sphere_inverse.dE, sphere_inverse.collar,
                              control=sphere_inverse_control.classification)
    cli_code = main(["--experiment", "counterexample", "--out", str(tmp_path)])
    tail = max(good.beta[-3:])
    ok = (tail <= good.beta_cap and good.exit_code == 0 and bad.verdict == "FAIL"
          and bad.exit_code == 3 and cli_code == 0)
    verdict("criterion 7 (reverse Agmon)", ok,
            f"controlled max beta over 3 smallest h {tail:.4f} <= cap {good.beta_cap:.4f}; "
            f"counterexample beta {max(bad.beta[-3:]):.4f} -> {bad.verdict}, exit {bad.exit_code}")
    assert ok


def test_c08_restriction(airy, verdict):
    H = level_curve(airy.collar, airy.dE, 0.3)
    rep = restriction_bound_check(airy.family, H, 2.0, airy.collar, airy.dE)
    d = 0.10954
    ok = (abs(H.E_of_H - 0.3) < 1e-12 and abs(H.dE_H_max_over_Lambda - d) <= 1e-4
          and abs(H.dE_H_min - d) <= 1e-4 and abs(H.tau0 - 1.0) < 1e-9
          and rep.gamma_H <= d + 0.02 and rep.green_max <= 1e-3)
    verdict("criterion 8 (restriction bound)", ok,
            f"E(H) = {H.E_of_H:g}, d_E^H = d_E(H) = {H.dE_H_min:.6f}, tau0 = {H.tau0:.6f}, "
            f"gamma_H = {rep.gamma_H:.5f}, Green residual {rep.green_max:.1e}")
    assert ok


def test_c09_nodal(sphere, sphere_inverse, verdict):
    s_H = float(level_curve(sphere.collar, sphere.dE, 0.15).nodes[0, 0])
    red = radial_reduce(sphere.problem.for_h(0.05))
    counts = {}
    for m in range(1, 9):
        ep = solve_near_energy(red.operator(0.05, m), 0.0)
        counts[m] = count_sign_changes(restrict_to_curve(ep, s_H, theta=2 * np.pi * np.arange(256) / 256))
    fam = sphere_inverse.family
    inv = [count_sign_changes(restrict_to_curve(ep, s_H)) for ep in fam]
    fit = nodal_scaling_fit([e.h for e in fam], inv, [e.m for e in fam])
    ok = all(c == 2 * m for m, c in counts.items()) and abs(fit.slope - 2.0) <= 0.1
    verdict("criterion 9 (nodal scaling)", ok,
            f"separated counts {list(counts.values())}; m = round(1/h) slope {fit.slope:.4f}")
    assert ok


def test_c10_determinism(tmp_path, verdict):
    runs = [tmp_path / "a", tmp_path / "b", tmp_path / "p"]
    codes = [main(["--experiment", "full-suite", "--out", str(runs[0])]),
             main(["--experiment", "full-suite", "--out", str(runs[1])]),
             main(["--experiment", "full-suite", "--out", str(runs[2]), "--parallel", "4"])]
    names = sorted(p.name for p in runs[0].iterdir())
    same = all(sorted(p.name for p in r.iterdir()) == names for r in runs[1:])
    for r in runs[1:]:
        _, mismatch, errors = filecmp.cmpfiles(runs[0], r, names, shallow=False)
        same &= not mismatch and not errors
    ok = same and codes == [0, 0, 0]
    n_csv = sum(n.endswith(".csv") for n in names)
    verdict("criterion 10 (determinism)", ok,
            f"{n_csv} CSV artifacts byte-identical across 2 serial runs and --parallel 4; exits {codes}")
    assert ok
