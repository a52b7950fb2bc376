"""PDAE formulation: normal-motion equations plus the equidistribution constraint.

Per interior node ``j`` each curve contributes two scalar rows::

    (X_j - X_j^old) . n_j - dt V_j          V = A kappa (grain) or -B kappa_ss
    D1 X_j . D2 X_j / |D1 X_j|^2            discrete |X_sigma|_sigma = 0

The grain keeps one junction ghost ``X^1_0``; each surface keeps one ghost
``X^i_0`` plus an unknown ghost curvature ``kappa^i_0`` standing in for the
missing ``X^i_-1``.  Junction rows (8)::

    0-3  F X^1_0 = F X^2_0 = F X^3_0
    4-5  angle conditions on D+ X_0
    6    (kappa^2_0 + kappa^2_1)/2 + (kappa^3_0 + kappa^3_1)/2
    7    (kappa^2_0 - kappa^2_1)/|X^2_1 - X^2_0| - (kappa^3_0 - kappa^3_1)/|X^3_1 - X^3_0|

The sigma = 1 rows match the parabolic formulation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .curve import GridCurve, diff1, diff2, dot, norm, perp
from .integrators import color_columns
from .motion import UNIT, MotionCoefficients, kappa_window
from .quarterloop import InitialShape, PatternBuilder, QuarterLoopState, junction_angle, outer_anchors


@dataclass
class PdaeState(QuarterLoopState):
    """Quarter-loop state for the PDAE formulation.

    ``kappa_ghost`` holds ``(kappa^2_0, kappa^3_0)``.  Surface slot ``j = -1``
    is never used and stays NaN.
    """

    kappa_ghost: np.ndarray = None

    @property
    def ghosts(self):
        g, l, r = self.curves
        return {"X1_0": g.point(0), "X2_0": l.point(0), "X3_0": r.point(0)}


def initial_state(m: float, ds: float | None = None, N=None, shape: InitialShape = InitialShape()):
    curves = shape.curves(ds=ds, N=N, ghosts=(1, 2, 2))
    anchors = outer_anchors(curves)
    out = []
    for c in curves[1:]:
        P = np.array(c.points)
        P[0] = np.nan
        out.append(replace(c, points=P))
    curves = [curves[0]] + out
    k0 = [float(kappa_window(c.window(0, 2), c.h)[0]) for c in curves[1:]]
    return PdaeState(*curves, m=m, anchors=anchors, kappa_ghost=np.array(k0))


def constraint_drift(state) -> float:
    """max over curves and interior nodes of ``|D1 X . D2 X| / |D1 X|^2``."""
    worst = 0.0
    for c in state.curves:
        P = c.window(0, c.N + 1)
        d1 = diff1(P, c.h)
        d2 = diff2(P, c.h)
        nn = dot(d1, d1)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(nn > 0, np.abs(dot(d1, d2)) / nn, np.inf)
        worst = max(worst, float(np.max(r)))
    return worst


def chord_spread(curve: GridCurve) -> float:
    """Relative spread ``(max - min)/mean`` of interior chord lengths."""
    seg = norm(np.diff(curve.interior, axis=0))
    return float((seg.max() - seg.min()) / seg.mean())


def to_common_form(state):
    """Plain curves (solver-only unknowns dropped) and the junction point."""
    return tuple(state.curves), state.junction.copy()


class PdaeQuarterLoop:
    """Discrete PDAE system for one quarter-loop configuration.

    The unknown vector is ``[grain slots 0..N+1, left slots for j = 0..N+2,
    right slots for j = 0..N+2, kappa^2_0, kappa^3_0]``.
    """

    def __init__(self, m, N, coeffs: MotionCoefficients = UNIT):
        self.m = m
        self.cos_theta = float(np.cos(junction_angle(m)))
        self.N = tuple(int(n) for n in N)
        self.h = tuple(1.0 / n for n in self.N)
        self.coeffs = coeffs
        n1, n2, n3 = self.N
        self.counts = (n1 + 2, n2 + 3, n3 + 3)
        self.offsets = np.concatenate([[0], np.cumsum([2 * s for s in self.counts])])
        self.size = int(self.offsets[-1]) + 2
        n_rows = 2 * sum(self.N) + 8 + 2 + 4 + 4
        if n_rows != self.size:
            raise AssertionError(f"PDAE system not square: {n_rows} rows, {self.size} unknowns")
        self._pattern = None
        self._groups = None
        self._anchors = None

    @classmethod
    def for_state(cls, state, **kw):
        return cls(state.m, [c.N for c in state.curves], **kw)

    def bind(self, state):
        self._anchors = np.asarray(state.anchors, dtype=float)
        return self

    # ------------------------------------------------------------ packing
    def pack(self, state) -> np.ndarray:
        g, l, r = state.curves
        return np.concatenate([g.points.ravel(), l.points[1:].ravel(), r.points[1:].ravel(),
                               state.kappa_ghost])

    def split(self, x):
        o = self.offsets
        G, L, R = (x[o[i]:o[i + 1]].reshape(-1, 2) for i in range(3))
        return G, L, R, x[o[3]:o[3] + 2]

    def unpack(self, x, like, dt=0.0):
        G, L, R, k = self.split(x)
        nan = np.full((1, 2), np.nan)
        g, l, r = like.curves
        curves = [replace(g, points=G.copy()),
                  replace(l, points=np.vstack([nan, L])),
                  replace(r, points=np.vstack([nan, R]))]
        return like.with_curves(curves, t=like.t + dt, kappa_ghost=k.copy())

    # ----------------------------------------------------------- residuals
    def _curve_rows(self, P, P_old, h, surface, kappa0, dt):
        """Normal-motion and constraint rows for nodes 1..N (P starts at j = 0)."""
        d1 = diff1(P, h)
        d2 = diff2(P, h)
        if surface:
            d1, d2 = d1[:-1], d2[:-1]
        nn = dot(d1, d1)
        sp = np.sqrt(nn)
        n_hat = perp(d1) / sp[:, None]
        n = d1.shape[0]
        disp = dot(P[1:n + 1] - P_old[1:n + 1], n_hat)
        if surface:
            k = kappa_window(P, h)  # nodes 1..N+1
            k_all = np.concatenate([[kappa0], k])
            kss = (k_all[2:] - 2.0 * k_all[1:-1] + k_all[:-2]) / (h * sp) ** 2
            normal = disp + dt * self.coeffs.B * kss
        else:
            normal = disp - dt * self.coeffs.A * dot(d2, perp(d1)) / sp**3
        constraint = dot(d1, d2) / nn
        return np.column_stack([normal, constraint]).ravel()

    def junction_residual_arrays(self, G, L, R, kg):
        c1 = 0.5 * (G[0] + G[1])
        c2 = 0.5 * (L[0] + L[1])
        c3 = 0.5 * (R[0] + R[1])
        e1 = G[1] - G[0]
        e2 = L[1] - L[0]
        e3 = R[1] - R[0]
        n1, n2, n3 = norm(e1), norm(e2), norm(e3)
        k2 = kappa_window(L[:3], self.h[1])[0]
        k3 = kappa_window(R[:3], self.h[2])[0]
        return np.array([
            *(c1 - c2),
            *(c1 - c3),
            dot(e1, e2) / (n1 * n2) - self.cos_theta,
            dot(e1, e3) / (n1 * n3) - self.cos_theta,
            0.5 * (kg[0] + k2) + 0.5 * (kg[1] + k3),
            0.5 * (n2 + n3) * ((kg[0] - k2) / n2 - (kg[1] - k3) / n3),
        ])

    def outer_rows(self, G, L, R, anchors):
        n1, n2, n3 = self.N
        rows = [0.5 * (G[n1] + G[n1 + 1]) - anchors[0]]
        for P, n, a in ((L, n2, anchors[1]), (R, n3, anchors[2])):
            k = n  # slot of node N (slot 0 is j = 0)
            rows.append(0.5 * (P[k] + P[k + 1]) - a)
            rows.append(P[k + 2] - P[k + 1] - P[k] + P[k - 1])
        return np.concatenate(rows)

    def step_residual(self, x, x_old, dt, anchors=None):
        G, L, R, kg = self.split(x)
        Go, Lo, Ro, _ = self.split(x_old)
        anchors = self._anchors if anchors is None else anchors
        h1, h2, h3 = self.h
        return np.concatenate([
            self._curve_rows(G, Go, h1, False, None, dt),
            self._curve_rows(L, Lo, h2, True, kg[0], dt),
            self._curve_rows(R, Ro, h3, True, kg[1], dt),
            self.junction_residual_arrays(G, L, R, kg),
            self.outer_rows(G, L, R, anchors),
        ])

    def sparsity(self):
        if self._pattern is not None:
            return self._pattern
        n1, n2, n3 = self.N
        o = self.offsets
        kcol = int(o[3])
        pb = PatternBuilder(self.size, self.size)
        row = 0
        pb.banded(row, n1, lambda k: o[0] + 2 * (k + 1), 1)
        row += 2 * n1
        for c, n, kc in ((1, n2, kcol), (2, n3, kcol + 1)):
            # node j = k + 1 lives in slot k + 1; stencil j-2..j+2 clipped at slot 0
            for k in range(n):
                lo = max(0, k - 1)
                cols = list(range(o[c] + 2 * lo, o[c] + 2 * (k + 4)))
                if k <= 1:
                    cols.append(kc)
                pb.block(range(row + 2 * k, row + 2 * k + 2), cols)
            row += 2 * n
        jcols = (list(range(o[0], o[0] + 4)) + list(range(o[1], o[1] + 6))
                 + list(range(o[2], o[2] + 6)) + [kcol, kcol + 1])
        pb.block(range(row, row + 8), jcols)
        row += 8
        pb.block(range(row, row + 2), range(o[0] + 2 * n1, o[0] + 2 * (n1 + 2)))
        row += 2
        for c, n in ((1, n2), (2, n3)):
            pb.block(range(row, row + 4), range(o[c] + 2 * (n - 1), o[c] + 2 * (n + 3)))
            row += 4
        self._pattern = pb.matrix()
        return self._pattern

    def groups(self):
        if self._groups is None:
            self._groups = color_columns(self.sparsity())
        return self._groups


def pdae_step_residual(prev: PdaeState, cand: PdaeState, dt: float) -> np.ndarray:
    """Backward-Euler PDAE residual of candidate ``cand`` given ``prev``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    prob = PdaeQuarterLoop.for_state(prev)
    return prob.step_residual(prob.pack(cand), prob.pack(prev), dt, anchors=prev.anchors)
