"""Height-function formulation in the frame that moves with the junction.

With ``xb = x - s(t)`` the junction sits at the cell face ``xb = 0`` of a
fixed staggered grid of spacing ``h``.  Unknowns of one implicit step::

    left surface   yL_j at xb = -(j - 1/2) h,  j = -1 .. NL + 2
    right surface  yR_j at xb =  (j - 1/2) h,  j = -1 .. NR + 2
    grain          u_j  at xb =  (j - 1/2) h,  j =  0 .. NR + 1
    junction speed s_t

The left surface is stored as a function of ``xi = -xb`` so every curve is
indexed outward from the junction; its x-slope is ``-d yL / d xi``.

Interior equations (flux form)::

    y_t = -d/dx [ (1 + y_x^2)^(-1/2) d kappa/dx ] + y_x s_t,
          kappa = y_xx (1 + y_x^2)^(-3/2)
    u_t = u_xx / (1 + u_x^2) + u_x s_t

The grain's frame-advection term uses ``u_x``; ``grain_advection="y"``
switches to the surface slope sampled on the grain grid for comparison.

Junction rows (6): two height matches, the opening angle between the
surfaces, the grain bisector angle, curvature continuity and flux
continuity.  Far field (5): ``F y_N = 0`` and ``y_xx = 0`` on each surface,
``F u_N = -1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .curve import GridCurve, atomic_write_text
from .integrators import color_columns
from .quarterloop import DEFAULT_DOMAIN, InitialShape

DEFAULT_SLOPE_MAX = 3.0
ADVECTION_VARIANTS = ("u", "y")


class CartesianRegimeError(ValueError):
    """A surface is too steep (or about to overhang) for a height function."""

    def __init__(self, msg, slope=None):
        super().__init__(msg + "; use the parametric (parabolic or PDAE) formulations")
        self.slope = slope


@dataclass
class CartesianState:
    """Heights on the fixed staggered grid, ghost slots included.

    ``yLeft`` and ``yRight`` have two ghost slots at each end, ``uGrain`` one.
    """

    yLeft: np.ndarray
    yRight: np.ndarray
    uGrain: np.ndarray
    h: float
    m: float
    sPos: float = 0.0
    sVel: float = 0.0
    t: float = 0.0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("yLeft", "yRight", "uGrain"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} has non-finite entries")
            setattr(self, name, a)
        if self.uGrain.size != self.yRight.size - 2:
            raise ValueError("grain and right surface must share one grid")

    @property
    def NL(self) -> int:
        return self.yLeft.size - 4

    @property
    def NR(self) -> int:
        return self.yRight.size - 4

    @property
    def junction_height(self) -> float:
        return 0.5 * float(self.yRight[1] + self.yRight[2])

    @property
    def junction(self) -> np.ndarray:
        return np.array([self.sPos, self.junction_height])

    def surface_slopes(self) -> np.ndarray:
        """x-slopes at every face of both surfaces (junction faces included)."""
        h = self.h
        return np.concatenate([-np.diff(self.yLeft[1:-1]) / h, np.diff(self.yRight[1:-1]) / h])

    @classmethod
    def initial(cls, m, h, shape: InitialShape = InitialShape()):
        xl, xr = shape.domain
        NL = int(round(-xl / h))
        NR = int(round(xr / h))
        if not (np.isclose(NL * h, -xl) and np.isclose(NR * h, xr)):
            raise ValueError("h must divide both domain lengths")
        x = (np.arange(0, NR + 2) - 0.5) * h
        u = np.empty_like(x)
        r, d = shape.radius, shape.depth
        inside = (x > 0) & (x < r)
        u[inside] = -np.sqrt(r**2 - (r - x[inside]) ** 2)
        u[x >= r] = -d
        # the ghost sits left of the junction: mirror the first node upward
        u[0] = -u[1]
        return cls(np.zeros(NL + 4), np.zeros(NR + 4), u, h, m)


def check_regime(state: CartesianState, slope_max=DEFAULT_SLOPE_MAX):
    s = state.surface_slopes()
    worst = float(np.max(np.abs(s)))
    if worst > slope_max:
        raise CartesianRegimeError(
            f"surface slope {worst:.3g} exceeds slope_max = {slope_max:g}; the surface may not be single-valued",
            worst)
    return worst


def required_junction_slope(m) -> float:
    """Surface slope at the junction when the groove is symmetric."""
    from .quarterloop import junction_angle
    return float(np.tan(junction_angle(m) - 0.5 * np.pi))


def _kappa(y, h):
    """Graph curvature at y[1:-1]; reflection invariant so it serves both sides."""
    yx = (y[2:] - y[:-2]) / (2.0 * h)
    yxx = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / h**2
    return yxx / (1.0 + yx**2) ** 1.5


def _face_flux(y, k, h):
    """``(1 + y_x^2)^(-1/2) kappa_x`` at faces between consecutive entries of k.

    ``y`` and ``k`` cover the same nodes.
    """
    yx = np.diff(y) / h
    return np.diff(k) / h / np.sqrt(1.0 + yx**2)


class CartesianProblem:
    def __init__(self, m, h, NL, NR, grain_advection="u", slope_max=DEFAULT_SLOPE_MAX):
        from .quarterloop import junction_angle
        if grain_advection not in ADVECTION_VARIANTS:
            raise ValueError(f"grain_advection must be one of {ADVECTION_VARIANTS}")
        self.m = m
        self.opening = 2.0 * (junction_angle(m) - 0.5 * np.pi)
        self.h = float(h)
        self.NL, self.NR = int(NL), int(NR)
        self.grain_advection = grain_advection
        self.slope_max = slope_max
        self.sizes = (self.NL + 4, self.NR + 4, self.NR + 2, 1)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.size = int(self.offsets[-1])
        n_rows = self.NL + 2 * self.NR + 6 + 5
        if n_rows != self.size:
            raise AssertionError(f"Cartesian system not square: {n_rows} rows, {self.size} unknowns")
        self._pattern = None
        self._groups = None

    @classmethod
    def for_state(cls, state: CartesianState, **kw):
        return cls(state.m, state.h, state.NL, state.NR, **kw)

    def bind(self, state):
        forced = required_junction_slope(self.m)
        if forced > self.slope_max:
            raise CartesianRegimeError(
                f"m = {self.m:g} forces surface slope {forced:.3g} > slope_max = {self.slope_max:g} "
                "at the junction", forced)
        check_regime(state, self.slope_max)
        return self

    def pack(self, state) -> np.ndarray:
        return np.concatenate([state.yLeft, state.yRight, state.uGrain, [state.sVel]])

    def split(self, x):
        o = self.offsets
        return x[o[0]:o[1]], x[o[1]:o[2]], x[o[2]:o[3]], float(x[o[3]])

    def unpack(self, x, like, dt=0.0):
        yL, yR, u, st = self.split(x)
        out = replace(like, yLeft=yL.copy(), yRight=yR.copy(), uGrain=u.copy(), sVel=st,
                      sPos=like.sPos + dt * st, t=like.t + dt, extras=dict(like.extras))
        check_regime(out, self.slope_max)
        return out

    # ----------------------------------------------------------- residuals
    def _surface_rate(self, y, sign, st):
        """dy/dt at nodes 1..N; ``sign`` is dxi/dx (-1 on the left)."""
        h = self.h
        k = _kappa(y, h)  # nodes 0..N+1
        flux = _face_flux(y[1:-1], k, h)  # faces 1/2 .. N+1/2, in xi
        # d/dx twice carries sign^2 = 1
        div = np.diff(flux) / h
        yx = sign * (y[3:-1] - y[1:-3]) / (2.0 * h)
        return -div + yx * st

    def _grain_rate(self, u, yR, st):
        h = self.h
        ux = (u[2:] - u[:-2]) / (2.0 * h)
        uxx = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
        adv = ux if self.grain_advection == "u" else (yR[3:-1] - yR[1:-3]) / (2.0 * h)
        return uxx / (1.0 + ux**2) + adv * st

    def junction_rows(self, yL, yR, u):
        h = self.h
        cL = 0.5 * (yL[1] + yL[2])
        cR = 0.5 * (yR[1] + yR[2])
        cU = 0.5 * (u[0] + u[1])
        sL = -(yL[2] - yL[1]) / h
        sR = (yR[2] - yR[1]) / h
        aL, aR = np.arctan(sL), np.arctan(sR)
        grain_angle = np.arctan2(u[1] - u[0], h)
        kL = _kappa(yL[:4], h)
        kR = _kappa(yR[:4], h)
        fL = -_face_flux(yL[1:3], kL, h)[0]
        fR = _face_flux(yR[1:3], kR, h)[0]
        return np.array([
            cL - cR,
            cR - cU,
            aR - aL - self.opening,
            grain_angle + 0.5 * np.pi - 0.5 * (aR + aL),
            0.5 * (kR[0] + kR[1]) - 0.5 * (kL[0] + kL[1]),
            fR - fL,
        ])

    def far_rows(self, yL, yR, u):
        rows = []
        for y, N in ((yL, self.NL), (yR, self.NR)):
            k = N + 1  # slot of node N
            rows += [0.5 * (y[k] + y[k + 1]), y[k + 2] - y[k + 1] - y[k] + y[k - 1]]
        NR = self.NR
        rows.append(0.5 * (u[NR] + u[NR + 1]) + 1.0)
        return np.array(rows)

    def step_residual(self, x, x_old, dt):
        yL, yR, u, st = self.split(x)
        yLo, yRo, uo, _ = self.split(x_old)
        rL = yL[2:-2] - yLo[2:-2] - dt * self._surface_rate(yL, -1.0, st)
        rR = yR[2:-2] - yRo[2:-2] - dt * self._surface_rate(yR, 1.0, st)
        rU = u[1:-1] - uo[1:-1] - dt * self._grain_rate(u, yR, st)
        return np.concatenate([rL, rR, rU, self.junction_rows(yL, yR, u), self.far_rows(yL, yR, u)])

    def sparsity(self):
        if self._pattern is not None:
            return self._pattern
        o = self.offsets
        scol = int(o[3])
        rows, cols = [], []

        def add(r, cs):
            cs = np.asarray(list(cs))
            rows.append(np.full(cs.size, r))
            cols.append(cs)

        r = 0
        for c, N in ((0, self.NL), (1, self.NR)):
            for j in range(1, N + 1):
                add(r, [o[c] + j + 1 + q for q in range(-2, 3)] + [scol])
                r += 1
        for j in range(1, self.NR + 1):
            extra = [o[1] + j + 1 + q for q in (-1, 1)] if self.grain_advection == "y" else []
            add(r, [o[2] + j + q for q in range(-1, 2)] + extra + [scol])
            r += 1
        jcols = list(range(o[0], o[0] + 4)) + list(range(o[1], o[1] + 4)) + [o[2], o[2] + 1]
        for _ in range(6):
            add(r, jcols)
            r += 1
        for c, N in ((0, self.NL), (1, self.NR)):
            k = N + 1
            add(r, [o[c] + k, o[c] + k + 1])
            add(r + 1, [o[c] + k + q for q in range(-1, 3)])
            r += 2
        add(r, [o[2] + self.NR, o[2] + self.NR + 1])
        R = np.concatenate(rows)
        C = np.concatenate(cols)
        P = sps.coo_matrix((np.ones(R.size, dtype=bool), (R, C)), shape=(self.size, self.size))
        P.sum_duplicates()
        self._pattern = P.tocsc()
        return self._pattern

    def groups(self):
        if self._groups is None:
            self._groups = color_columns(self.sparsity())
        return self._groups


def cartesian_step_residual(prev: CartesianState, cand: CartesianState, dt: float,
                            grain_advection="u", slope_max=DEFAULT_SLOPE_MAX) -> np.ndarray:
    """Backward-Euler residual of ``cand`` given ``prev``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    check_regime(cand, slope_max)
    prob = CartesianProblem.for_state(prev, grain_advection=grain_advection, slope_max=slope_max)
    return prob.step_residual(prob.pack(cand), prob.pack(prev), dt)


def to_parametric(state: CartesianState):
    """Three junction-topology curves ``(grain, left, right)`` in lab coordinates."""
    h, s = state.h, state.sPos
    xs = (np.arange(-1, state.NR + 3) - 0.5) * h
    xl = -(np.arange(-1, state.NL + 3) - 0.5) * h
    xg = (np.arange(0, state.NR + 2) - 0.5) * h
    grain = GridCurve(np.column_stack([xg + s, state.uGrain]), "junction", 1, 1)
    left = GridCurve(np.column_stack([xl + s, state.yLeft]), "junction", 2, 1)
    right = GridCurve(np.column_stack([xs + s, state.yRight]), "junction", 2, 1)
    return grain, left, right


def write_cartesian_snapshot(state: CartesianState, directory, tag) -> Path:
    """CSV ``x,y_or_u,branch`` (lab x, ghosts omitted) plus JSON ``{t, s, s_t}``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = ["x,y_or_u,branch"]
    g, l, r = to_parametric(state)
    for name, c in (("surfLeft", l), ("surfRight", r), ("grain", g)):
        for x, y in c.interior:
            lines.append(f"{x:.17g},{y:.17g},{name}")
    atomic_write_text(d / f"{tag}_cartesian.csv", "\n".join(lines) + "\n")
    meta = {"t": state.t, "s": state.sPos, "s_t": state.sVel, "m": state.m, "h": state.h,
            "junction_height": state.junction_height}
    atomic_write_text(d / f"{tag}.json", json.dumps(meta, indent=1, sort_keys=True))
    return d / f"{tag}.json"


__all__ = [
    "CartesianRegimeError", "CartesianState", "CartesianProblem", "cartesian_step_residual",
    "check_regime", "required_junction_slope", "to_parametric", "write_cartesian_snapshot",
    "DEFAULT_DOMAIN", "DEFAULT_SLOPE_MAX",
]
