import json

import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given, settings, strategies as st

from gbmotion.closed import ClosedCurveProblem, ClosedState, circle
from gbmotion.integrators import (
    NewtonConfig,
    NewtonError,
    RunLog,
    SingularJacobianError,
    backward_euler_step,
    color_columns,
    fd_jacobian,
    forward_euler_step,
    newton_solve,
)


def test_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(tol=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)


def test_coloring_groups_are_structurally_orthogonal():
    rng = np.random.default_rng(0)
    P = sps.random(40, 40, density=0.1, random_state=rng, format="csc") != 0
    P = P + sps.eye(40, dtype=bool)
    g = color_columns(P)
    P = sps.csc_matrix(P)
    for k in range(g.max() + 1):
        cols = np.flatnonzero(g == k)
        counts = np.asarray(P[:, cols].sum(axis=1)).ravel()
        assert counts.max() <= 1


def test_tridiagonal_coloring_uses_three_groups():
    P = sps.diags([1, 1, 1], [-1, 0, 1], shape=(30, 30), dtype=bool)
    assert color_columns(P).max() + 1 == 3


def test_sparse_and_dense_fd_jacobians_agree():
    def fun(x):
        r = x**3 - 2.0
        r[1:] += np.sin(x[:-1])
        r[:-1] -= x[1:] ** 2
        return r
    x = np.linspace(0.3, 1.7, 25)
    P = sps.diags([1, 1, 1], [-1, 0, 1], shape=(25, 25), dtype=bool)
    Jd = fd_jacobian(fun, x)
    Js = fd_jacobian(fun, x, sparsity=P).toarray()
    np.testing.assert_allclose(Js, Jd, rtol=1e-12, atol=1e-12)
    exact = np.diag(3 * x**2) + np.diag(np.cos(x[:-1]), -1) + np.diag(-2 * x[1:], 1)
    np.testing.assert_allclose(Jd, exact, atol=1e-6)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fd_jacobian_rejects_nonfinite_entries():
    with pytest.raises(ValueError, match="non-finite"):
        fd_jacobian(lambda x: np.where(x > 1.0, np.inf, x), np.array([1.0]))
    with pytest.raises(ValueError, match="base point"):
        fd_jacobian(lambda x: x / 0.0 * 0.0, np.array([0.0]))


def test_newton_converges_quadratically():
    fun = lambda x: np.array([x[0] ** 2 - 2.0, x[1] - x[0] ** 3])  # noqa: E731
    x, rep = newton_solve(fun, np.array([1.0, 1.0]), NewtonConfig(tol=1e-13))
    np.testing.assert_allclose(x, [np.sqrt(2), 2 * np.sqrt(2)], rtol=1e-12)
    h = rep.history
    # e_{k+1} ~ C e_k^2 once in the basin
    ratios = [np.log(h[k + 1]) / np.log(h[k]) for k in range(1, len(h) - 1) if h[k + 1] > 1e-15]
    assert max(ratios) > 1.7


def test_newton_already_converged_needs_no_iteration():
    x, rep = newton_solve(lambda x: x - 1.0, np.ones(3))
    assert rep.iterations == 0


def test_newton_rejects_nonsquare_system():
    with pytest.raises(ValueError, match="square"):
        newton_solve(lambda x: np.r_[x, 0.0], np.zeros(2))


@pytest.mark.filterwarnings("ignore")
def test_newton_reports_singular_jacobian():
    with pytest.raises(SingularJacobianError):
        newton_solve(lambda x: np.array([x[0] + x[1] - 1.0, 2 * x[0] + 2 * x[1] + 3.0]), np.zeros(2))


def test_newton_failure_carries_history():
    with pytest.raises(NewtonError) as exc:
        newton_solve(lambda x: np.array([x[0] ** 2 + 1.0]), np.array([0.5]), NewtonConfig(max_iter=5))
    assert len(exc.value.history) == 6


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_newton_halves_steps_into_nonfinite_region():
    fun = lambda x: np.array([np.log(x[0])])  # noqa: E731
    x, _ = newton_solve(fun, np.array([3.0]))
    assert x[0] == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 4.0))
def test_newton_cube_root(a):
    x, _ = newton_solve(lambda x: x**3 - a, np.array([1.0]))
    assert x[0] == pytest.approx(a ** (1 / 3), rel=1e-10)


def test_step_size_validation():
    prob = ClosedCurveProblem(16, "mcf", "parabolic")
    st0 = ClosedState(circle(16))
    with pytest.raises(ValueError):
        backward_euler_step(prob, st0, 0.0)
    with pytest.raises(ValueError):
        forward_euler_step(prob, st0, -1e-3)
    assert forward_euler_step(prob, st0, 0.0) is st0


def test_backward_euler_first_order_in_time():
    """Halving dt halves the error of a circle shrinking by MCF."""
    R0, T = 1.0, 0.05
    errs = []
    for n in (5, 10, 20):
        dt = T / n
        prob = ClosedCurveProblem(64, "mcf", "parabolic")
        s = ClosedState(circle(64, R0))
        for _ in range(n):
            s, _ = backward_euler_step(prob, s, dt)
        errs.append(s.mean_radius)
    # self-convergence: differences of successive dt levels
    d1, d2 = abs(errs[0] - errs[1]), abs(errs[1] - errs[2])
    assert abs(np.log2(d1 / d2) - 1.0) < 0.15


def test_explicit_and_implicit_agree_to_order_dt():
    prob = ClosedCurveProblem(32, "sd", "parabolic", alpha=0.0)
    s0 = ClosedState(circle(32).with_points(circle(32).points * [1.1, 0.9]))
    for dt in (1e-7, 1e-8):
        e = forward_euler_step(prob, s0, dt).curve.interior
        i, _ = backward_euler_step(prob, s0, dt, NewtonConfig(tol=1e-12))
        v = np.abs(prob.velocity(s0.curve.interior)).max()
        # both displace by dt * v; they may differ only by O(dt^2)
        assert np.abs(e - i.curve.interior).max() < 0.01 * v * dt


def test_runlog_writes_jsonl(tmp_path):
    log = RunLog(tmp_path / "log.jsonl")
    prob = ClosedCurveProblem(16, "mcf", "parabolic")
    s, rep = backward_euler_step(prob, ClosedState(circle(16)), 1e-3)
    log.append(1, s.t, rep, 1e-3)
    log.append(2, s.t, None, 1e-3)
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert set(rec) == {"step", "t", "iters", "resid", "dt"}
    assert rec["resid"] <= 1e-10 * 1e4
    assert json.loads(lines[1])["iters"] is None
