import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gbmotion.cartesian import (
    CartesianProblem,
    CartesianRegimeError,
    CartesianState,
    cartesian_step_residual,
    check_regime,
    required_junction_slope,
    to_parametric,
    write_cartesian_snapshot,
)
from gbmotion.curve import curvature_at
from gbmotion.integrators import backward_euler_step, fd_jacobian, newton_solve
from gbmotion.quarterloop import InitialShape, junction_angle, x_overhang


def flat_state(m=0.5, h=0.5, s=0.0):
    NL, NR = int(6 / h), int(12 / h)
    return CartesianState(np.zeros(NL + 4), np.zeros(NR + 4), -np.ones(NR + 2), h, m, sPos=s)


@pytest.mark.parametrize("s", [0.0, 0.7, -2.0])
def test_flat_state_residual_only_in_junction_rows(s):
    st0 = flat_state(s=s)
    prob = CartesianProblem.for_state(st0)
    r = cartesian_step_residual(st0, st0, 0.01)
    n_int = st0.NL + 2 * st0.NR
    np.testing.assert_array_equal(r[:n_int], 0.0)
    np.testing.assert_array_equal(r[n_int + 6:], 0.0)
    jr = r[n_int:n_int + 6]
    # u = -1 against y = 0, opening mismatch, grain horizontal instead of vertical
    np.testing.assert_allclose(jr, [0.0, 1.0, -prob.opening, 0.5 * np.pi, 0.0, 0.0], atol=1e-15)


def test_opening_matches_young_angle():
    prob = CartesianProblem(0.5, 0.5, 12, 24)
    assert prob.opening == pytest.approx(2 * np.arcsin(0.25))
    assert required_junction_slope(0.5) == pytest.approx(np.tan(np.arcsin(0.25)))


def test_residual_of_previous_state_is_order_dt():
    st0 = CartesianState.initial(0.5, 0.2)
    r1 = cartesian_step_residual(st0, st0, 1e-3)
    r2 = cartesian_step_residual(st0, st0, 5e-4)
    n = st0.NL + 2 * st0.NR
    np.testing.assert_allclose(r1[:n], 2 * r2[:n], rtol=1e-12, atol=1e-15)
    assert np.abs(r1[:n]).max() > 0


def test_nonpositive_dt_rejected():
    st0 = flat_state()
    with pytest.raises(ValueError):
        cartesian_step_residual(st0, st0, 0.0)


def test_initial_grain_profile():
    st0 = CartesianState.initial(0.5, 0.1)
    x = (np.arange(st0.NR + 2) - 0.5) * 0.1
    assert st0.uGrain[-1] == -1.0
    assert st0.uGrain[3] == pytest.approx(-np.sqrt(1 - (1 - x[3]) ** 2))
    assert st0.uGrain[0] == -st0.uGrain[1]
    with pytest.raises(ValueError):
        CartesianState.initial(0.5, 0.07)


def test_state_rejects_bad_input():
    with pytest.raises(ValueError):
        CartesianState(np.zeros(8), np.zeros(8), np.zeros(3), 0.5, 0.5)
    with pytest.raises(ValueError):
        CartesianState(np.zeros(8), np.full(8, np.nan), np.zeros(6), 0.5, 0.5)


def test_steep_surface_is_a_regime_error():
    st0 = flat_state()
    st0.yRight[5] = 5.0
    with pytest.raises(CartesianRegimeError, match="parametric"):
        check_regime(st0)
    assert check_regime(flat_state()) == 0.0


def test_steep_angle_is_a_regime_error():
    st0 = CartesianState.initial(1.96, 0.2)
    prob = CartesianProblem.for_state(st0)
    with pytest.raises(CartesianRegimeError) as exc:
        backward_euler_step(prob, st0, 1e-4)
    assert exc.value.slope == pytest.approx(required_junction_slope(1.96))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.5))
def test_moderate_angles_pass_the_regime_check(m):
    assert required_junction_slope(m) < 3.0
    CartesianProblem.for_state(CartesianState.initial(m, 0.5)).bind(CartesianState.initial(m, 0.5))


@pytest.mark.parametrize("variant", ["u", "y"])
def test_declared_sparsity_covers_dense_jacobian(variant):
    st0 = CartesianState.initial(0.5, 0.5)
    prob = CartesianProblem.for_state(st0, grain_advection=variant).bind(st0)
    x = prob.pack(st0)
    x[-1] = 0.3  # nonzero s_t so the advection columns are exercised
    fun = lambda z: prob.step_residual(z, x, 0.01)  # noqa: E731
    J = fd_jacobian(fun, x)
    P = prob.sparsity().toarray()
    bad = np.argwhere((np.abs(J) > 1e-12) & ~P)
    assert bad.size == 0, bad[:10]
    Js = fd_jacobian(fun, x, sparsity=prob.sparsity(), groups=prob.groups()).toarray()
    np.testing.assert_allclose(Js, J, rtol=1e-10, atol=1e-10)


def test_advection_variant_validated():
    with pytest.raises(ValueError):
        CartesianProblem(0.5, 0.5, 12, 24, grain_advection="z")


def test_implicit_step_converges_quadratically():
    st0 = CartesianState.initial(0.5, 0.2)
    prob = CartesianProblem.for_state(st0).bind(st0)
    x_old = prob.pack(st0)
    _, rep = newton_solve(lambda x: prob.step_residual(x, x_old, 1e-3), x_old,
                          sparsity=prob.sparsity(), groups=prob.groups())
    h = rep.history
    assert all(h[k + 1] < 0.5 * h[k] for k in range(len(h) - 3, len(h) - 1))


def test_far_field_pins_are_preserved():
    st0 = CartesianState.initial(0.5, 0.2)
    prob = CartesianProblem.for_state(st0)
    for _ in range(3):
        st0, _ = backward_euler_step(prob, st0, 1e-3)
    assert 0.5 * (st0.yLeft[-3] + st0.yLeft[-2]) == pytest.approx(0.0, abs=1e-10)
    assert 0.5 * (st0.yRight[-3] + st0.yRight[-2]) == pytest.approx(0.0, abs=1e-10)
    assert 0.5 * (st0.uGrain[-2] + st0.uGrain[-1]) == pytest.approx(-1.0, abs=1e-10)
    # the junction conditions hold: opening angle recovered
    sL = -(st0.yLeft[2] - st0.yLeft[1]) / st0.h
    sR = (st0.yRight[2] - st0.yRight[1]) / st0.h
    assert np.arctan(sR) - np.arctan(sL) == pytest.approx(2 * (junction_angle(0.5) - np.pi / 2), abs=1e-9)


def test_flat_state_maps_to_straight_curves():
    g, l, r = to_parametric(flat_state(s=0.4))
    for c, y in ((g, -1.0), (l, 0.0), (r, 0.0)):
        np.testing.assert_array_equal(c.interior[:, 1], y)
        assert curvature_at(c, 3) == 0.0
    assert l.point(1)[0] == pytest.approx(0.4 - 0.25)
    assert r.point(1)[0] == pytest.approx(0.4 + 0.25)


def test_parametric_conversion_is_x_monotone():
    st0 = CartesianState.initial(0.5, 0.2)
    for c in to_parametric(st0):
        assert not x_overhang(c)


def test_converted_groove_curvature_matches_graph_formula():
    st0 = CartesianState.initial(0.5, 0.1, InitialShape())
    g, _, _ = to_parametric(st0)
    # quarter circle of radius 1: curvature magnitude 1 in the arc
    assert abs(abs(curvature_at(g, 5)) - 1.0) < 0.02


def test_snapshot_files(tmp_path):
    st0 = CartesianState.initial(0.5, 0.5)
    meta_path = write_cartesian_snapshot(st0, tmp_path, "step000000")
    meta = json.loads(meta_path.read_text())
    assert {"t", "s", "s_t"} <= set(meta)
    lines = (tmp_path / "step000000_cartesian.csv").read_text().splitlines()
    assert lines[0] == "x,y_or_u,branch"
    assert len(lines) == 1 + st0.NL + 2 * st0.NR
