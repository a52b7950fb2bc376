"""Single closed curves: shrinking circles, the star test and rescaling checks.

Two formulations share the :mod:`integrators` problem interface:

``parabolic``
    ``X_t = F(X)`` with the full parametric velocity (optionally with the
    tangential adjustment for surface diffusion).
``pdae``
    Normal-motion rows plus the equidistribution constraint.  On a closed
    curve the N constraint rows only fix N - 1 chord ratios, so the row at
    node 1 is replaced by the gauge ``(X_1 - X_1^old) . t_1^old = 0`` which
    pins the tangential drift of the whole grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .curve import GridCurve, curvature, diff1, diff2, dot, perp, polygon_area, curve_length, regrid_uniform
from .integrators import color_columns
from .motion import UNIT, MotionCoefficients, ADJUST_MODES, mcf_rhs_window, sd_rhs_window

LAWS = ("mcf", "sd")
FORMULATIONS = ("parabolic", "pdae")


@dataclass
class ClosedState:
    curve: GridCurve
    t: float = 0.0

    @property
    def area(self) -> float:
        return polygon_area(self.curve)

    @property
    def length(self) -> float:
        return curve_length(self.curve)

    @property
    def isoperimetric_ratio(self) -> float:
        """``4 pi A / L^2``; 1 for a circle."""
        return 4.0 * np.pi * abs(self.area) / self.length**2

    @property
    def mean_radius(self) -> float:
        X = self.curve.interior
        return float(np.mean(np.linalg.norm(X - X.mean(axis=0), axis=1)))


def circle(N: int, radius: float = 1.0, center=(0.0, 0.0)) -> GridCurve:
    th = 2.0 * np.pi * (np.arange(N) + 0.5) / N
    P = np.column_stack([radius * np.cos(th), radius * np.sin(th)]) + np.asarray(center)
    return GridCurve(P, "closed", 0)


def star(N: int, amplitude: float = 0.3, lobes: int = 6, fine: int = 8) -> GridCurve:
    """``r = 1 + amplitude cos(lobes theta)`` resampled to equal chord spacing."""
    if not 0 <= amplitude < 1:
        raise ValueError("star amplitude must lie in [0, 1)")
    M = fine * N
    th = 2.0 * np.pi * np.arange(M) / M
    r = 1.0 + amplitude * np.cos(lobes * th)
    dense = GridCurve(np.column_stack([r * np.cos(th), r * np.sin(th)]), "closed", 0)
    return regrid_uniform(dense, N)


def _periodic(X, w):
    return np.vstack([X[-w:], X, X[:w]])


class ClosedCurveProblem:
    """One closed curve evolving by ``law`` in the chosen ``formulation``."""

    def __init__(self, N, law="sd", formulation="pdae", coeffs: MotionCoefficients = UNIT,
                 alpha=0.0, mode="fourth-order"):
        if law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}")
        if formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}")
        if mode not in ADJUST_MODES:
            raise ValueError(f"mode must be one of {ADJUST_MODES}")
        if N < 6:
            raise ValueError("closed curves need N >= 6")
        self.N = int(N)
        self.h = 1.0 / self.N
        self.law = law
        self.formulation = formulation
        self.coeffs = coeffs
        self.alpha = alpha
        self.mode = mode
        if formulation == "parabolic":
            self.halfwidth = 1 if law == "mcf" else 2
        else:
            self.halfwidth = 1 if law == "mcf" else 3
        self.size = 2 * self.N
        self._pattern = None
        self._groups = None
        self._gauge = None

    def bind(self, state):
        X = state.curve.interior
        d1 = (X[1] - X[-1]) / (2.0 * self.h)
        self._gauge = (X[0].copy(), d1 / np.linalg.norm(d1))
        return self

    def pack(self, state) -> np.ndarray:
        return np.array(state.curve.interior).ravel()

    def unpack(self, x, like, dt=0.0):
        return ClosedState(replace(like.curve, points=x.reshape(-1, 2).copy()), like.t + dt)

    # ------------------------------------------------------------ velocities
    def velocity(self, X):
        if self.law == "mcf":
            return mcf_rhs_window(_periodic(X, 1), self.h, self.coeffs.A)
        return sd_rhs_window(_periodic(X, 2), self.h, self.alpha, self.mode, self.coeffs.B)

    def normal_speed(self, X):
        """``(d1 / |d1|, V)`` where ``V = A kappa`` or ``-B kappa_ss``."""
        h = self.h
        P = _periodic(X, 1)
        d1 = diff1(P, h)
        d2 = diff2(P, h)
        sp = np.linalg.norm(d1, axis=1)
        k = curvature(d1, d2)
        if self.law == "mcf":
            V = self.coeffs.A * k
        else:
            kss = (np.roll(k, -1) - 2.0 * k + np.roll(k, 1)) / (h * sp) ** 2
            V = -self.coeffs.B * kss
        return d1, d2, sp, V

    def rhs(self, state):
        if self.formulation != "parabolic":
            raise NotImplementedError("the PDAE form has no explicit right-hand side")
        return self.velocity(state.curve.interior)

    def advance(self, state, v, dt, cfg=None):
        X = state.curve.interior + dt * v
        return ClosedState(replace(state.curve, points=X), state.t + dt)

    # ------------------------------------------------------------ residual
    def step_residual(self, x, x_old, dt):
        X = x.reshape(-1, 2)
        Xo = x_old.reshape(-1, 2)
        if self.formulation == "parabolic":
            return (X - Xo - dt * self.velocity(X)).ravel()
        d1, d2, sp, V = self.normal_speed(X)
        n = perp(d1) / sp[:, None]
        normal = dot(X - Xo, n) - dt * V
        constraint = dot(d1, d2) / sp**2
        if self._gauge is None:
            raise RuntimeError("bind(state) before evaluating the PDAE residual")
        p0, t0 = self._gauge
        constraint[0] = dot(X[0] - p0, t0)
        return np.column_stack([normal, constraint]).ravel()

    def sparsity(self):
        if self._pattern is None:
            import scipy.sparse as sps
            w = self.halfwidth
            rows, cols = [], []
            for j in range(self.N):
                nodes = (np.arange(j - w, j + w + 1)) % self.N
                c = np.concatenate([2 * nodes, 2 * nodes + 1])
                for r in (2 * j, 2 * j + 1):
                    rows.append(np.full(c.size, r))
                    cols.append(c)
            r = np.concatenate(rows)
            c = np.concatenate(cols)
            P = sps.coo_matrix((np.ones(r.size, dtype=bool), (r, c)), shape=(self.size, self.size))
            P.sum_duplicates()
            self._pattern = P.tocsc()
        return self._pattern

    def groups(self):
        if self._groups is None:
            self._groups = color_columns(self.sparsity())
        return self._groups


def mcf_circle_radius(R0: float, t, A: float = 1.0):
    """Exact radius of a circle under ``V = A kappa``: ``R^2 = R0^2 - 2 A t``."""
    r2 = R0**2 - 2.0 * A * np.asarray(t, dtype=float)
    if np.any(r2 < 0):
        raise ValueError("circle has vanished before t")
    return np.sqrt(r2)
