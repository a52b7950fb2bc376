"""Acceptance criteria 1-11.

Each test prints one ``criterion k: PASS|FAIL`` line with the measured
values, then asserts.  Tolerances are the published acceptance tolerances.
"""

import numpy as np
import pytest

from gbmotion.cartesian import CartesianProblem, CartesianRegimeError, CartesianState
from gbmotion.closed import ClosedCurveProblem, ClosedState, circle, mcf_circle_radius
from gbmotion.harness import curves_distance, identity_sweep, load_config, run_quarterloop, run_star
from gbmotion.integrators import backward_euler_step
from gbmotion.motion import MotionCoefficients, normalize_coefficients
from gbmotion.quarterloop import x_overhang
from gbmotion.wellposedness import (
    PARABOLIC_VARIANTS,
    AngleConfig,
    closed_form_max_rel_err,
    determinant,
    symmetric_det_closed_form,
    tangential_independence_check,
)

M = 0.5
T_END = 0.02
LEVELS = (0.2, 0.1, 0.05)
RATE_WINDOW = (1.7, 2.2)


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def ladder():
    """Quarter-loop runs at m = 0.5, t = 0.02, dt = 0.01 ds^2 for both formulations."""
    runs = {}
    for form in ("pdae", "parabolic"):
        for ds in LEVELS:
            runs[form, ds] = run_quarterloop(load_config(None, formulation=form, m=M, ds=ds,
                                                         dt=0.01 * ds * ds, tEnd=T_END))
    return runs


def rates(ladder, form):
    e = [curves_distance(ladder[form, a].state.curves, ladder[form, b].state.curves)
         for a, b in zip(LEVELS, LEVELS[1:])]
    return float(np.log2(e[0][0] / e[1][0])), float(np.log2(e[0][1] / e[1][1])), e


def test_criterion_01_convergence_rates(ladder, capsys):
    lo, hi = RATE_WINDOW
    parts, ok = [], True
    for form in ("pdae", "parabolic"):
        r2, ri, e = rates(ladder, form)
        ok &= lo <= r2 <= hi and lo <= ri <= hi
        parts.append(f"{form}: L2 rate {r2:.3f}, Linf rate {ri:.3f} "
                     f"(errors {e[0][0]:.2e}/{e[1][0]:.2e}, {e[0][1]:.2e}/{e[1][1]:.2e})")
    report(capsys, 1, ok, "; ".join(parts) + f"; window [{lo}, {hi}]")
    assert ok


@pytest.fixture(scope="module")
def fine_reference():
    ds = 0.025
    return run_quarterloop(load_config(None, formulation="pdae", m=M, ds=ds, dt=0.01 * ds * ds,
                                       tEnd=T_END)).state


def test_criterion_02_pdae_not_less_accurate(fine_reference, capsys):
    err = {}
    for form in ("pdae", "parabolic"):
        st = run_quarterloop(load_config(None, formulation=form, m=M, ds=0.05, dt=0.01, tEnd=T_END)).state
        err[form] = curves_distance(st.curves, fine_reference.curves)[1]
    ok = err["pdae"] <= err["parabolic"]
    report(capsys, 2, ok, f"Linf at ds = 0.05, dt = 0.01 vs ds = 0.025 reference: "
                          f"pdae {err['pdae']:.4f}, parabolic {err['parabolic']:.4f}")
    assert ok


def test_criterion_03_star_area_and_rounding(capsys):
    res = run_star(load_config(None, initial="star", formulation="pdae", law="sd", N=(256,),
                               dt=1e-5, tEnd=0.01))
    dA = res.monitors["max_area_rel_change"]
    q = res.monitors["isoperimetric_ratio"]
    ok = dA <= 1e-3 and q >= 0.999
    report(capsys, 3, ok, f"N = 256, t = 0.01: max |dA|/A = {dA:.2e} (<= 1e-3), final 4 pi A / L^2 = {q:.6f} "
                          f"(>= 0.999), start {res.series[0][3]:.4f}")
    assert ok


def test_criterion_04_determinant_closed_forms(capsys):
    z = np.linspace(0.1, 10.0, 100) + 0.5j
    sym = AngleConfig(2 * np.pi / 3, 2 * np.pi / 3)
    errs = {
        "symmetric": max(abs(determinant("parabolic", sym, x) - symmetric_det_closed_form(x))
                         / abs(symmetric_det_closed_form(x)) for x in z),
        "parabolic 1.9/2.0": closed_form_max_rel_err("parabolic", AngleConfig(1.9, 2.0), z),
        "pdae generic 1.9/2.0": closed_form_max_rel_err("pdae", AngleConfig(1.9, 2.0), z),
        "pdae one right angle": closed_form_max_rel_err("pdae", AngleConfig(np.pi / 2, 2.0), z),
        "pdae two right angles": max(abs(determinant("pdae", AngleConfig(np.pi / 2, np.pi / 2), x) + 16 * x * x)
                                     / abs(16 * x * x) for x in z),
    }
    ok = max(errs.values()) <= 1e-8
    report(capsys, 4, ok, "max relative error on 100 z: "
           + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def test_criterion_05_tangential_independence(capsys):
    rng = np.random.default_rng(20240501)
    worst = 0.0
    for k in range(20):
        angles = AngleConfig(*rng.uniform(0.2, np.pi - 0.2, 2))
        z = complex(rng.uniform(0.1, 10.0), rng.uniform(-10.0, 10.0))
        P = rng.normal(size=10) + 1j * rng.normal(size=10)
        tail = rng.normal(size=2) + 1j * rng.normal(size=2)
        variant = PARABOLIC_VARIANTS[1 + k % 2]
        worst = max(worst, tangential_independence_check(angles, z, "curvature", variant, P, tail))
    ok = worst <= 1e-9
    report(capsys, 5, ok, f"max |dA11| + |dA12| over 20 samples = {worst:.1e} (<= 1e-9)")
    assert ok


def test_criterion_06_kappa_ss_identity(capsys):
    rep = identity_sweep((64, 128, 256))
    ok = abs(rep["slope"] - 2.0) <= 0.3
    report(capsys, 6, ok, f"ellipse 2 x 1, gaps {', '.join(f'{g:.2e}' for g in rep['gap'])}, "
                          f"slope {rep['slope']:.3f} (2.0 +- 0.3)")
    assert ok


def test_criterion_07_normalised_twin_run(capsys):
    coeffs = MotionCoefficients(A=2.0, B=1.0)
    R, T = normalize_coefficients(coeffs)
    N, dt, steps = 64, 1e-3, 100
    a, b = ClosedState(circle(N)), ClosedState(circle(N, R))
    pa = ClosedCurveProblem(N, "mcf", "parabolic", coeffs)
    pb = ClosedCurveProblem(N, "mcf", "parabolic")
    gap = 0.0
    for _ in range(steps):
        a, _ = backward_euler_step(pa, a, dt)
        b, _ = backward_euler_step(pb, b, T * dt)
        gap = max(gap, abs(a.mean_radius - b.mean_radius / R))
    bound = dt + (2 * np.pi / N) ** 2
    ok = gap <= bound
    report(capsys, 7, ok, f"A = 2 vs unit run mapped by R = {R:.4f}, T = {T:.4f}: max radius gap {gap:.1e} "
                          f"(<= dt + h^2 = {bound:.1e})")
    assert ok


def test_criterion_08_circle_oracles(capsys):
    R0, t = 1.0, 0.2
    prob = ClosedCurveProblem(128, "mcf", "pdae")
    s = ClosedState(circle(128, R0))
    for _ in range(200):
        s, _ = backward_euler_step(prob, s, 1e-3)
    exact = mcf_circle_radius(R0, t)
    rel = abs(s.mean_radius**2 - exact**2) / exact**2
    prob = ClosedCurveProblem(64, "sd", "pdae")
    c0 = circle(64)
    s = ClosedState(c0)
    for _ in range(1000):
        s, _ = backward_euler_step(prob, s, 1e-3)
    disp = float(np.abs(s.curve.interior - c0.interior).max())
    ok = rel <= 0.01 and disp <= 1e-4
    report(capsys, 8, ok, f"MCF R^2 at t = 0.2: rel err {rel:.1e} (<= 1%); SD circle 1000 steps: "
                          f"max displacement {disp:.1e} (<= 1e-4)")
    assert ok


def test_criterion_09_pdae_constraint(ladder, capsys):
    drift = max(ladder["pdae", ds].monitors["max_constraint_drift"] for ds in LEVELS)
    spread = max(ladder["pdae", ds].monitors["max_chord_spread"] for ds in LEVELS)
    ok = drift <= 1e-8 and spread <= 1e-6
    report(capsys, 9, ok, f"over every step of the criterion 1 runs: max drift {drift:.1e} (<= 1e-8), "
                          f"max chord spread {spread:.1e} (<= 1e-6)")
    assert ok


def test_criterion_10_cartesian_junction_height(ladder, capsys):
    gaps = []
    for ds in LEVELS:
        cart = run_quarterloop(load_config(None, formulation="cartesian", m=M, ds=ds, dt=0.01 * ds * ds,
                                           tEnd=T_END))
        gaps.append(abs(cart.monitors["junction"][1] - ladder["pdae", ds].monitors["junction"][1]))
    orders = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    ok = gaps[-1] <= 2e-3 and np.all(np.abs(orders - 2.0) <= 0.3)
    report(capsys, 10, ok, "junction height gap " + ", ".join(f"h={d}: {g:.1e}" for d, g in zip(LEVELS, gaps))
           + f"; orders {', '.join(f'{o:.2f}' for o in orders)}")
    assert ok


def test_criterion_11_overhang_regime(capsys):
    res = run_quarterloop(load_config(None, formulation="pdae", m=1.96, ds=0.1, dt=1e-4, tEnd=0.15))
    overhang = [x_overhang(c) for c in res.state.curves[1:]]
    st = CartesianState.initial(1.96, 0.1)
    try:
        backward_euler_step(CartesianProblem.for_state(st), st, 1e-4)
        refused = False
    except CartesianRegimeError:
        refused = True
    ok = any(overhang) and refused
    report(capsys, 11, ok, f"pdae m = 1.96 reached t = {res.state.t:.3f}, overhang on (left, right) "
                           f"surfaces = {overhang}; Cartesian regime error raised = {refused}")
    assert ok
