import numpy as np
import pytest

from gbmotion.closed import ClosedCurveProblem, ClosedState, circle, mcf_circle_radius, star
from gbmotion.curve import GridCurve
from gbmotion.harness import load_config, run_star
from gbmotion.integrators import backward_euler_step, fd_jacobian, forward_euler_step
from gbmotion.motion import MotionCoefficients, normalize_coefficients


def test_problem_validation():
    with pytest.raises(ValueError):
        ClosedCurveProblem(16, "willmore")
    with pytest.raises(ValueError):
        ClosedCurveProblem(16, "sd", "cartesian")
    with pytest.raises(ValueError):
        ClosedCurveProblem(4)
    with pytest.raises(ValueError):
        star(32, amplitude=1.2)
    with pytest.raises(ValueError):
        mcf_circle_radius(1.0, 0.6)


def test_star_is_equispaced_with_six_lobes():
    # equal arc length: chords differ by kappa^2 ds^2 / 24, up to 7e-3 in the valleys at N = 512
    c = star(512)
    seg = np.linalg.norm(np.diff(np.vstack([c.interior, c.interior[:1]]), axis=0), axis=1)
    assert (seg.max() - seg.min()) / seg.mean() < 1e-2
    r = np.linalg.norm(c.interior, axis=1)
    assert r.max() == pytest.approx(1.3, abs=1e-3)
    assert r.min() == pytest.approx(0.7, abs=1e-3)


@pytest.mark.parametrize("formulation", ["parabolic", "pdae"])
def test_mcf_circle_follows_radius_law(formulation):
    prob = ClosedCurveProblem(128, "mcf", formulation)
    s = ClosedState(circle(128))
    for _ in range(50):
        s, _ = backward_euler_step(prob, s, 1e-3)
    assert s.mean_radius == pytest.approx(mcf_circle_radius(1.0, 0.05), abs=2e-3)


def test_mcf_explicit_small_steps_follow_radius_law():
    prob = ClosedCurveProblem(32, "mcf", "parabolic")
    s = ClosedState(circle(32))
    for _ in range(200):
        s = forward_euler_step(prob, s, 5e-5)
    assert s.mean_radius == pytest.approx(mcf_circle_radius(1.0, 0.01), abs=1e-3)


def test_sd_circle_is_stationary_in_pdae_form():
    prob = ClosedCurveProblem(64, "sd", "pdae")
    s0 = ClosedState(circle(64))
    s = s0
    for _ in range(20):
        s, _ = backward_euler_step(prob, s, 1e-3)
    assert np.abs(s.curve.points - s0.curve.points).max() < 1e-10


def test_gauge_requires_bind():
    prob = ClosedCurveProblem(16, "sd", "pdae")
    x = prob.pack(ClosedState(circle(16)))
    with pytest.raises(RuntimeError):
        prob.step_residual(x, x, 1e-3)
    with pytest.raises(NotImplementedError):
        prob.rhs(ClosedState(circle(16)))


@pytest.mark.parametrize("law, formulation", [("mcf", "parabolic"), ("sd", "parabolic"),
                                              ("mcf", "pdae"), ("sd", "pdae")])
def test_declared_sparsity_covers_dense_jacobian(law, formulation):
    prob = ClosedCurveProblem(20, law, formulation, alpha=-100.0 if formulation == "parabolic" else 0.0)
    s = ClosedState(star(20, amplitude=0.2))
    prob.bind(s)
    x = prob.pack(s)
    fun = lambda z: prob.step_residual(z, x, 1e-3)  # noqa: E731
    J = fd_jacobian(fun, x)
    bad = np.argwhere((np.abs(J) > 1e-12 * np.abs(J).max()) & ~prob.sparsity().toarray())
    assert bad.size == 0
    Js = fd_jacobian(fun, x, sparsity=prob.sparsity(), groups=prob.groups()).toarray()
    np.testing.assert_allclose(Js, J, rtol=1e-9, atol=1e-9 * np.abs(J).max())


def test_sd_conserves_area_and_rounds_the_star():
    res = run_star(load_config(None, initial="star", formulation="pdae", N=(64,), dt=1e-4, tEnd=0.01))
    assert res.monitors["area_rel_change"] < 5e-3
    ratios = [q for _, _, _, q in res.series]
    assert ratios[-1] > ratios[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_explicit_surface_diffusion_is_stiff():
    """Forward Euler on the 50-node star: dt = 1e-6 blows up, dt = 1e-12 does not."""
    def run(dt, steps):
        prob = ClosedCurveProblem(50, "sd", "parabolic")
        s = ClosedState(star(50))
        for _ in range(steps):
            s = forward_euler_step(prob, s, dt)
            if not np.all(np.isfinite(s.curve.points)) or np.abs(s.curve.points).max() > 1e3:
                return np.inf
        return np.abs(s.curve.points).max()
    assert run(1e-6, 1000) == np.inf
    assert run(1e-12, 100) < 1.31


def test_normalised_twin_run_matches():
    """MCF with A = 2 against the unit run on R X for time T t, mapped back."""
    coeffs = MotionCoefficients(A=2.0, B=1.0)
    R, T = normalize_coefficients(coeffs)
    N, dt, steps = 64, 1e-3, 50
    a = ClosedState(circle(N))
    pa = ClosedCurveProblem(N, "mcf", "parabolic", coeffs)
    b = ClosedState(circle(N, R))
    pb = ClosedCurveProblem(N, "mcf", "parabolic")
    hist_a, hist_b = [], []
    for _ in range(steps):
        a, _ = backward_euler_step(pa, a, dt)
        b, _ = backward_euler_step(pb, b, T * dt)
        hist_a.append(a.mean_radius)
        hist_b.append(b.mean_radius / R)
    np.testing.assert_allclose(hist_a, hist_b, rtol=1e-8)
    assert hist_a[-1] == pytest.approx(mcf_circle_radius(1.0, steps * dt, A=2.0), abs=5e-3)


def test_state_measures():
    s = ClosedState(circle(256, 2.0))
    assert s.area == pytest.approx(4 * np.pi, rel=1e-3)
    assert s.length == pytest.approx(4 * np.pi, rel=1e-3)
    assert s.isoperimetric_ratio == pytest.approx(1.0, abs=1e-3)
    sq = ClosedState(GridCurve(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), "closed", 0))
    assert sq.isoperimetric_ratio == pytest.approx(np.pi / 4)
