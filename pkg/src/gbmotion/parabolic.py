"""Fully parabolic formulation of the coupled quarter-loop motion.

Unknowns of an implicit step are every stored slot of the three curves:
grain ``j = 0..N+1`` and each surface ``j = -1..N+2``.  The five junction
ghosts (10 scalars) are closed by the ten junction conditions, the outer
ghosts by the sigma = 1 conditions (frozen ``F X_N``; for the surfaces also
a vanishing second difference across the sigma = 1 face).

Junction residual rows, in order::

    0-1  F X^1_0 - F X^2_0          common point
    2-3  F X^1_0 - F X^3_0
    4    e1 . e2 - cos(theta)       angles, e_i = D+ X^i_0 / |D+ X^i_0|
    5    e1 . e3 - cos(theta)
    6    kappa^2_C + kappa^3_C      chemical potential (sign flip: opposite sigma)
    7    kappa^2_s,C - kappa^3_s,C  mass flux
    8-9  artificial tangential condition on curves 2 and 3
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .curve import GridCurve, curvature, curvature_s, dot, norm
from .integrators import NewtonConfig, NewtonError, color_columns, newton_with_fallback
from .motion import DEFAULT_ALPHA, UNIT, MotionCoefficients, mcf_rhs_window, sd_rhs_window
from .quarterloop import InitialShape, PatternBuilder, QuarterLoopState, junction_angle, outer_anchors

TANGENTIAL_VARIANTS = ("midpoint", "ghost-node")


class ClosureError(NewtonError):
    pass


@dataclass
class QuarterLoopParabolicState(QuarterLoopState):
    @property
    def ghosts(self):
        g, l, r = self.curves
        return {
            "X1_0": g.point(0),
            "X2_-1": l.point(-1), "X2_0": l.point(0),
            "X3_-1": r.point(-1), "X3_0": r.point(0),
        }


def initial_state(m: float, ds: float | None = None, N=None, shape: InitialShape = InitialShape()):
    curves = shape.curves(ds=ds, N=N, ghosts=(1, 2, 2))
    return QuarterLoopParabolicState(*curves, m=m, anchors=outer_anchors(curves))


# ---------------------------------------------------------- residual pieces

def _surface_midpoint_stencil(P, h):
    """D1, D2, D3 at the junction face from slots holding X_-1, X_0, X_1, X_2."""
    x_m1, x_0, x_1, x_2 = P[0], P[1], P[2], P[3]
    q0 = 0.5 * (x_m1 + x_0)
    q1 = 0.5 * (x_0 + x_1)
    q2 = 0.5 * (x_1 + x_2)
    d1 = (q2 - q0) / (2.0 * h)
    d2 = (q2 + q0 - 2.0 * q1) / h**2
    d3 = (x_2 - 3.0 * x_1 + 3.0 * x_0 - x_m1) / h**3
    return d1, d2, d3


def _unit(v):
    n = norm(v)
    if n == 0.0:
        raise ValueError("degenerate forward difference at the junction")
    return v / n


def _tangential_row(P, h, variant):
    if variant == "midpoint":
        d1, d2, _ = _surface_midpoint_stencil(P, h)
        return dot(d2, d1) / norm(d1) ** 3
    # ghost-node: D2 X_0 . D1 X_0 at the ghost node itself
    d1 = (P[2] - P[0]) / (2.0 * h)
    d2 = (P[2] + P[0] - 2.0 * P[1]) / h**2
    return dot(d2, d1) / norm(d1) ** 3


def junction_rows(G, L, R, hs, cos_theta, variant="midpoint"):
    """Ten junction residuals from raw slot arrays (grain slot 0 is X_0; surface slot 0 is X_-1)."""
    h1, h2, h3 = hs
    c1 = 0.5 * (G[0] + G[1])
    c2 = 0.5 * (L[1] + L[2])
    c3 = 0.5 * (R[1] + R[2])
    e1 = _unit(G[1] - G[0])
    e2 = _unit(L[2] - L[1])
    e3 = _unit(R[2] - R[1])
    d1l, d2l, d3l = _surface_midpoint_stencil(L, h2)
    d1r, d2r, d3r = _surface_midpoint_stencil(R, h3)
    # kappa_s carries 1/length^2; scale by the local spacing so all rows are O(1)
    scale_s = 0.5 * (norm(d1l) * h2 + norm(d1r) * h3)
    return np.array([
        *(c1 - c2),
        *(c1 - c3),
        dot(e1, e2) - cos_theta,
        dot(e1, e3) - cos_theta,
        curvature(d1l, d2l) + curvature(d1r, d2r),
        scale_s * (curvature_s(d1l, d2l, d3l) - curvature_s(d1r, d2r, d3r)),
        _tangential_row(L, h2, variant),
        _tangential_row(R, h3, variant),
    ])


class ParabolicQuarterLoop:
    """Discrete parabolic system for one quarter-loop configuration.

    Parameters
    ----------
    m : float
        Energy ratio ``gamma_grain / gamma_exterior`` in (0, 2).
    N : (int, int, int)
        Interior node counts of grain, left and right surface.
    alpha, mode :
        Tangential adjustment on the surfaces (``alpha = 0`` disables it).
    tangential : {"midpoint", "ghost-node"}
        Which artificial tangential condition closes the junction.
    """

    def __init__(self, m, N, alpha=DEFAULT_ALPHA, mode="fourth-order",
                 coeffs: MotionCoefficients = UNIT, tangential="midpoint"):
        if tangential not in TANGENTIAL_VARIANTS:
            raise ValueError(f"tangential must be one of {TANGENTIAL_VARIANTS}")
        self.m = m
        self.cos_theta = float(np.cos(junction_angle(m)))
        self.N = tuple(int(n) for n in N)
        self.h = tuple(1.0 / n for n in self.N)
        self.alpha = float(alpha)
        self.mode = mode
        self.coeffs = coeffs
        self.tangential = tangential
        n1, n2, n3 = self.N
        self.slots = (n1 + 2, n2 + 4, n3 + 4)
        self.offsets = np.concatenate([[0], np.cumsum([2 * s for s in self.slots])])
        self.size = int(self.offsets[-1])
        self._pattern = None
        self._groups = None
        self._check_square()

    @classmethod
    def for_state(cls, state, **kw):
        return cls(state.m, [c.N for c in state.curves], **kw)

    def _check_square(self):
        n_rows = 2 * sum(self.N) + 10 + 2 + 4 + 4
        if n_rows != self.size:
            raise AssertionError(f"parabolic system not square: {n_rows} rows, {self.size} unknowns")

    # ------------------------------------------------------------ packing
    def pack(self, state) -> np.ndarray:
        return np.concatenate([c.points.ravel() for c in state.curves])

    def split(self, x):
        o = self.offsets
        return tuple(x[o[i]:o[i + 1]].reshape(-1, 2) for i in range(3))

    def unpack(self, x, like, dt=0.0):
        curves = [replace(c, points=P.copy()) for c, P in zip(like.curves, self.split(x))]
        return like.with_curves(curves, t=like.t + dt)

    # ----------------------------------------------------------- residuals
    def interior_rates(self, G, L, R):
        A, B = self.coeffs.A, self.coeffs.B
        h1, h2, h3 = self.h
        return (
            mcf_rhs_window(G, h1, A),
            sd_rhs_window(L, h2, self.alpha, self.mode, B),
            sd_rhs_window(R, h3, self.alpha, self.mode, B),
        )

    def junction_residual_arrays(self, G, L, R):
        return junction_rows(G, L, R, self.h, self.cos_theta, self.tangential)

    def outer_rows(self, G, L, R, anchors):
        n1, n2, n3 = self.N
        rows = [0.5 * (G[n1] + G[n1 + 1]) - anchors[0]]
        for P, n, a in ((L, n2, anchors[1]), (R, n3, anchors[2])):
            k = n + 1  # slot of node N
            rows.append(0.5 * (P[k] + P[k + 1]) - a)
            rows.append(P[k + 2] - P[k + 1] - P[k] + P[k - 1])
        return np.concatenate(rows)

    def step_residual(self, x, x_old, dt, anchors=None):
        G, L, R = self.split(x)
        Go, Lo, Ro = self.split(x_old)
        anchors = self._anchors if anchors is None else anchors
        vg, vl, vr = self.interior_rates(G, L, R)
        return np.concatenate([
            (G[1:-1] - Go[1:-1] - dt * vg).ravel(),
            (L[2:-2] - Lo[2:-2] - dt * vl).ravel(),
            (R[2:-2] - Ro[2:-2] - dt * vr).ravel(),
            self.junction_residual_arrays(G, L, R),
            self.outer_rows(G, L, R, anchors),
        ])

    def sparsity(self):
        if self._pattern is not None:
            return self._pattern
        n1, n2, n3 = self.N
        o = self.offsets
        pb = PatternBuilder(self.size, self.size)
        row = 0
        # interior: node j of a curve lives in slot j + g - 1
        pb.banded(row, n1, lambda k: o[0] + 2 * (k + 1), 1)
        row += 2 * n1
        pb.banded(row, n2, lambda k: o[1] + 2 * (k + 2), 2)
        row += 2 * n2
        pb.banded(row, n3, lambda k: o[2] + 2 * (k + 2), 2)
        row += 2 * n3
        jcols = list(range(o[0], o[0] + 4)) + list(range(o[1], o[1] + 8)) + list(range(o[2], o[2] + 8))
        pb.block(range(row, row + 10), jcols)
        row += 10
        pb.block(range(row, row + 2), range(o[0] + 2 * n1, o[0] + 2 * (n1 + 2)))
        row += 2
        for c, n in ((1, n2), (2, n3)):
            pb.block(range(row, row + 4), range(o[c] + 2 * n, o[c] + 2 * (n + 4)))
            row += 4
        self._pattern = pb.matrix()
        return self._pattern

    def groups(self):
        if self._groups is None:
            self._groups = color_columns(self.sparsity())
        return self._groups

    def bind(self, state):
        """Record the frozen sigma = 1 anchors of ``state`` for residual evaluation."""
        self._anchors = np.asarray(state.anchors, dtype=float)
        return self

    # --------------------------------------------------------- explicit path
    def rhs(self, state):
        G, L, R = (c.points for c in state.curves)
        return self.interior_rates(G, L, R)

    def advance(self, state, v, dt, cfg):
        G, L, R = (c.points.copy() for c in state.curves)
        G[1:-1] += dt * v[0]
        L[2:-2] += dt * v[1]
        R[2:-2] += dt * v[2]
        new = state.with_curves([replace(c, points=P) for c, P in zip(state.curves, (G, L, R))],
                                t=state.t + dt)
        return closure_solve(new, cfg, problem=self)


# ------------------------------------------------------------ module API

def junction_residual(state, tangential="midpoint") -> np.ndarray:
    """The ten junction residuals of ``state`` (all ghost slots must be set)."""
    g, l, r = state.curves
    G = g.window(0, 2)
    L = l.window(-1, 2)
    R = r.window(-1, 2)
    h = tuple(c.h for c in state.curves)
    return junction_rows(G, L, R, h, float(np.cos(junction_angle(state.m))), tangential)


def close_outer(state):
    """Fill the sigma = 1 ghosts from the frozen anchors (linear, exact)."""
    out = []
    for i, c in enumerate(state.curves):
        P = np.array(c.points)
        n = c.N
        k = n - c.first  # slot of node N
        P[k + 1] = 2.0 * state.anchors[i] - P[k]
        if c.ghost == 2:
            P[k + 2] = P[k + 1] + P[k] - P[k - 1]
        out.append(replace(c, points=P))
    return state.with_curves(out)


def closure_solve(state, cfg: NewtonConfig = NewtonConfig(), problem=None, tangential=None):
    """Fill junction ghosts (10 unknowns, Newton) and outer ghosts for given interior nodes."""
    if tangential is None:
        tangential = problem.tangential if problem is not None else "midpoint"
    state = close_outer(state)
    g, l, r = state.curves
    # initial guess for unset ghosts: linear extrapolation from the interior
    G, L, R = (np.array(c.points) for c in (g, l, r))
    if not np.all(np.isfinite(G[0])):
        G[0] = 2 * G[1] - G[2]
    for P in (L, R):
        if not np.all(np.isfinite(P[1])):
            P[1] = 2 * P[2] - P[3]
        if not np.all(np.isfinite(P[0])):
            P[0] = 2 * P[1] - P[2]
    h = tuple(c.h for c in state.curves)
    cos_t = float(np.cos(junction_angle(state.m)))

    def fun(z):
        G[0] = z[0:2]
        L[0], L[1] = z[2:4], z[4:6]
        R[0], R[1] = z[6:8], z[8:10]
        return junction_rows(G, L, R, h, cos_t, tangential)

    z0 = np.concatenate([G[0], L[0], L[1], R[0], R[1]])
    try:
        z, rep = newton_with_fallback(fun, z0, cfg)
    except NewtonError as exc:
        raise ClosureError(f"junction closure failed: {exc}", exc.x, exc.history) from exc
    fun(z)
    new = state.with_curves([replace(c, points=P) for c, P in zip((g, l, r), (G, L, R))])
    new.extras["closure_report"] = rep
    return new


def interior_rhs(state, alpha=DEFAULT_ALPHA, mode="fourth-order", coeffs: MotionCoefficients = UNIT):
    """Velocities on all interior nodes: MCF for the grain, adjusted surface diffusion otherwise."""
    prob = ParabolicQuarterLoop(state.m, [c.N for c in state.curves], alpha, mode, coeffs)
    return prob.rhs(state)
