"""Quarter-loop bicrystal geometry shared by the parametric formulations.

Curve 1 is the grain boundary, curves 2 and 3 the left and right branches of
the exterior surface.  All three start at the triple junction (sigma = 0)
and run outward, so ``orientation = +1`` on every curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .curve import GridCurve, atomic_write_text, read_curve_csv, write_curve_csv

CURVE_NAMES = ("grain", "surfLeft", "surfRight")
DEFAULT_DOMAIN = (-6.0, 12.0)


def junction_angle(m: float) -> float:
    """Angle between grain boundary and either surface branch, ``pi/2 + arcsin(m/2)``."""
    if not 0.0 < m < 2.0:
        raise ValueError("energy ratio m must lie in (0, 2)")
    return 0.5 * np.pi + np.arcsin(0.5 * m)


@dataclass(frozen=True)
class InitialShape:
    """Smooth C^1 quarter-loop start: flat surfaces at y = 0, grain a quarter
    circle of ``radius`` from the junction down to ``y = -depth`` then flat."""

    domain: tuple = DEFAULT_DOMAIN
    radius: float = 1.0
    depth: float = 1.0

    def lengths(self):
        xl, xr = self.domain
        return (0.5 * np.pi * self.radius + (self.depth - self.radius) + (xr - self.radius),
                -xl, xr)

    def grain_point(self, s):
        """Point at arc length ``s`` along the grain boundary (extended linearly past the ends)."""
        s = np.asarray(s, dtype=float)
        r = self.radius
        arc = 0.5 * np.pi * r
        drop = self.depth - r
        out = np.empty(s.shape + (2,))
        a = s < 0
        out[a] = np.stack([np.zeros(a.sum()), -s[a]], axis=-1)
        b = (s >= 0) & (s <= arc)
        ang = s[b] / r
        out[b] = np.stack([r * (1 - np.cos(ang)), -r * np.sin(ang)], axis=-1)
        c = (s > arc) & (s <= arc + drop)
        out[c] = np.stack([np.full(c.sum(), r), -r - (s[c] - arc)], axis=-1)
        d = s > arc + drop
        out[d] = np.stack([r + (s[d] - arc - drop), np.full(d.sum(), -self.depth)], axis=-1)
        return out

    def curves(self, ds: float | None = None, N=None, ghosts=(1, 2, 2)):
        """Arc-length-uniform staggered curves with every ghost slot filled.

        Give either a target spacing ``ds`` or explicit node counts ``N``.
        """
        L = self.lengths()
        if N is None:
            if ds is None:
                raise ValueError("give ds or N")
            N = [max(8, int(round(Li / ds))) for Li in L]
        out = []
        for i, (Li, Ni, g) in enumerate(zip(L, N, ghosts)):
            s = (np.arange(1 - g, Ni + g + 1) - 0.5) * Li / Ni
            if i == 0:
                P = self.grain_point(s)
            elif i == 1:
                P = np.stack([-s, np.zeros_like(s)], axis=-1)
            else:
                P = np.stack([s, np.zeros_like(s)], axis=-1)
            out.append(GridCurve(P, "junction", g, 1))
        return out


@dataclass
class QuarterLoopState:
    grain: GridCurve
    surfLeft: GridCurve
    surfRight: GridCurve
    m: float
    anchors: np.ndarray
    t: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def curves(self):
        return (self.grain, self.surfLeft, self.surfRight)

    @property
    def junction(self) -> np.ndarray:
        """Junction point C, the forward average ``F X^1_0``."""
        return 0.5 * (self.grain.point(0) + self.grain.point(1))

    @property
    def theta(self) -> float:
        return junction_angle(self.m)

    def with_curves(self, curves, **kw):
        kw.setdefault("extras", dict(self.extras))
        return replace(self, grain=curves[0], surfLeft=curves[1], surfRight=curves[2], **kw)


def outer_anchors(curves) -> np.ndarray:
    """``F X_N`` (the sigma = 1 face) of each curve."""
    return np.array([0.5 * (c.point(c.N) + c.point(c.N + 1)) for c in curves])


def groove_depth(state) -> float:
    """Height of the triple junction (negative for a groove)."""
    return float(state.junction[1])


def spacing_ratio(curve: GridCurve) -> float:
    """max/min adjacent chord length over interior nodes."""
    seg = np.linalg.norm(np.diff(curve.interior, axis=0), axis=1)
    return float(seg.max() / seg.min())


def x_overhang(curve: GridCurve) -> bool:
    """True when x is not monotone along the curve (a non-single-valued branch)."""
    dx = np.diff(curve.interior[:, 0])
    return bool(np.any(dx > 0) and np.any(dx < 0))


# ------------------------------------------------------------- sparsity helper

class PatternBuilder:
    """Accumulate a boolean Jacobian pattern block by block."""

    def __init__(self, n_rows, n_cols):
        self.shape = (n_rows, n_cols)
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []

    def block(self, rows, cols):
        r, c = np.meshgrid(np.asarray(rows), np.asarray(cols), indexing="ij")
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())

    def banded(self, row0, n_nodes, col_of_node, halfwidth, dims=2):
        """Node ``k`` (rows ``row0 + dims k ...``) depends on nodes ``k-w..k+w``.

        ``col_of_node(k)`` gives the first column of node ``k`` (2 columns each).
        """
        for k in range(n_nodes):
            cols = [col_of_node(q) + d for q in range(k - halfwidth, k + halfwidth + 1) for d in (0, 1)]
            self.block(range(row0 + dims * k, row0 + dims * (k + 1)), cols)

    def matrix(self):
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        P = sps.coo_matrix((np.ones(r.size, dtype=bool), (r, c)), shape=self.shape)
        P.sum_duplicates()
        return P.tocsc()


# ------------------------------------------------------------------- snapshots

def write_snapshot(state, directory, tag, extra=None) -> Path:
    """Three curve CSVs plus a JSON sidecar ``{t, m, junction, ...}``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, c in zip(CURVE_NAMES, state.curves):
        write_curve_csv(c, d / f"{tag}_{name}.csv")
    meta = {"t": state.t, "m": state.m, "junction": [float(v) for v in state.junction]}
    meta.update(extra or {})
    atomic_write_text(d / f"{tag}.json", json.dumps(meta, indent=1, sort_keys=True))
    return d / f"{tag}.json"


def read_snapshot(directory, tag):
    d = Path(directory)
    meta = json.loads((d / f"{tag}.json").read_text())
    curves = [read_curve_csv(d / f"{tag}_{name}.csv", "junction", g)
              for name, g in zip(CURVE_NAMES, (1, 2, 2))]
    return curves, meta
