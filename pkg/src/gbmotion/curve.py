"""Staggered-grid planar curves and finite-difference primitives.

A curve is sampled at ``X_j ~ X((j - 1/2) h)`` for ``j = 1..N`` with
``h = 1/N`` and ``sigma`` in ``[0, 1]``.  Open curves carry ``ghost`` extra
slots on each end (indices ``1-ghost .. 0`` and ``N+1 .. N+ghost``); unset
slots hold NaN and any stencil touching one raises :class:`StencilError`.
Closed curves use periodic indexing and have no ghost slots.

Two layers live here: array kernels (``diff1`` .. ``diff4``, ``curvature``,
``curvature_s``, ``arc_derivatives``) used by the solvers on whole windows,
and per-node functions (``fd_derivative``, ``curvature_at`` ...) that act on a
:class:`GridCurve` and index ``j``.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

TOPOLOGIES = ("junction", "open", "closed")

# relative to the curve diameter
EPS_LEN = 1e-10


class StencilError(IndexError):
    """A stencil reached an index that is outside the curve or unset."""


class DegenerateParametrizationError(ValueError):
    """|X_sigma| vanished (coincident neighbouring nodes)."""


def perp(v):
    """Rotate by +90 degrees: ``(a, b) -> (-b, a)``.  Works on (..., 2) arrays."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def norm(a):
    return np.sqrt(dot(a, a))


@dataclass(frozen=True)
class GridCurve:
    """Planar curve on a staggered grid.

    Parameters
    ----------
    points : (N + 2*ghost, 2) array
        Slot ``k`` holds node ``j = k + 1 - ghost``.  Ghost slots may be NaN.
    topology : {"junction", "open", "closed"}
        ``"junction"`` marks an open curve whose ``sigma = 0`` end sits at a
        triple junction.
    ghost : int
        Number of ghost slots on each end of an open curve (0 for closed).
    orientation : int
        +1 when sigma increases away from the junction (the convention used
        throughout); -1 otherwise.
    """

    points: np.ndarray
    topology: str = "open"
    ghost: int = 2
    orientation: int = 1
    _diam: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        ghost = 0 if self.topology == "closed" else int(self.ghost)
        if ghost < 0:
            raise ValueError("ghost must be non-negative")
        if pts.shape[0] - 2 * ghost < 3:
            raise ValueError("curve needs at least 3 interior nodes")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ghost", ghost)
        inner = pts[ghost: pts.shape[0] - ghost]
        span = np.nanmax(inner, axis=0) - np.nanmin(inner, axis=0)
        object.__setattr__(self, "_diam", float(np.hypot(*span)) or 1.0)

    @classmethod
    def from_interior(cls, interior, topology="open", ghost=2, orientation=1):
        """Build a curve from its ``N`` interior nodes; ghost slots left unset."""
        interior = np.asarray(interior, dtype=float)
        if topology == "closed":
            ghost = 0
        pad = np.full((ghost, 2), np.nan)
        return cls(np.vstack([pad, interior, pad]), topology, ghost, orientation)

    @property
    def closed(self) -> bool:
        return self.topology == "closed"

    @property
    def N(self) -> int:
        return self.points.shape[0] - 2 * self.ghost

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def first(self) -> int:
        """Lowest stored node index."""
        return 1 - self.ghost

    @property
    def last(self) -> int:
        return self.N + self.ghost

    @property
    def interior(self) -> np.ndarray:
        return self.points[self.ghost: self.ghost + self.N]

    @property
    def sigma(self) -> np.ndarray:
        return (np.arange(1, self.N + 1) - 0.5) * self.h

    @property
    def eps_len(self) -> float:
        return EPS_LEN * self._diam

    def slot(self, j: int) -> int:
        if self.closed:
            return (j - 1) % self.N
        if not self.first <= j <= self.last:
            raise StencilError(f"index {j} outside stored range [{self.first}, {self.last}]")
        return j - self.first

    def is_set(self, j: int) -> bool:
        try:
            return bool(np.all(np.isfinite(self.points[self.slot(j)])))
        except StencilError:
            return False

    def point(self, j: int) -> np.ndarray:
        p = self.points[self.slot(j)]
        if not np.all(np.isfinite(p)):
            raise StencilError(f"node {j} is an unset ghost slot")
        return p.copy()

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Nodes ``lo..hi`` inclusive as an array; raises on unset slots."""
        if self.closed:
            idx = (np.arange(lo, hi + 1) - 1) % self.N
            return self.points[idx]
        if lo < self.first or hi > self.last:
            raise StencilError(f"stencil [{lo}, {hi}] leaves stored range [{self.first}, {self.last}]")
        w = self.points[lo - self.first: hi - self.first + 1]
        if not np.all(np.isfinite(w)):
            bad = [lo + k for k in range(len(w)) if not np.all(np.isfinite(w[k]))]
            raise StencilError(f"stencil [{lo}, {hi}] touches unset ghost node(s) {bad}")
        return w

    def with_point(self, j: int, value) -> "GridCurve":
        pts = self.points.copy()
        pts[self.slot(j)] = value
        return replace(self, points=pts)

    def with_points(self, points) -> "GridCurve":
        return replace(self, points=np.asarray(points, dtype=float))

    def translated(self, shift) -> "GridCurve":
        return replace(self, points=self.points + np.asarray(shift, dtype=float))

    def reversed(self) -> "GridCurve":
        return replace(self, points=self.points[::-1].copy(), orientation=-self.orientation)


# ---------------------------------------------------------------- array kernels
# Each kernel takes consecutive nodes P (n, 2) and returns values at the nodes
# where the stencil fits: diff1/diff2 at P[1:-1], diff3/diff4 at P[2:-2].

def diff1(P, h):
    return (P[2:] - P[:-2]) / (2.0 * h)


def diff2(P, h):
    return (P[2:] + P[:-2] - 2.0 * P[1:-1]) / h**2


def diff3(P, h):
    return (P[4:] - 2.0 * P[3:-1] + 2.0 * P[1:-3] - P[:-4]) / (2.0 * h**3)


def diff4(P, h):
    return (P[4:] - 4.0 * P[3:-1] + 6.0 * P[2:-2] - 4.0 * P[1:-3] + P[:-4]) / h**4


def curvature(d1, d2):
    """kappa = X_ss . n with n = t^perp."""
    return dot(d2, perp(d1)) / norm(d1) ** 3


def curvature_s(d1, d2, d3):
    sp = norm(d1)
    s2 = dot(d1, d2) / sp
    dp = perp(d1)
    return dot(d3, dp) / sp**4 - 3.0 * s2 * dot(d2, dp) / sp**5


def arc_derivatives(d1, d2, d3):
    """(S_sigma, S_sigmasigma, S_sigmasigmasigma) from the first three derivatives."""
    sp = norm(d1)
    x12 = dot(d1, d2)
    s2 = x12 / sp
    s3 = -(x12**2) / sp**3 + (dot(d2, d2) + dot(d1, d3)) / sp
    return sp, s2, s3


# ------------------------------------------------------------ per-node functions

_HALF_WIDTH = {1: 1, 2: 1, 3: 2, 4: 2}
_KERNEL = {1: diff1, 2: diff2, 3: diff3, 4: diff4}


def fd_derivative(curve: GridCurve, j: int, order: int) -> np.ndarray:
    """Centered second-order approximation of ``d^order X / d sigma^order`` at node ``j``."""
    if order not in _KERNEL:
        raise ValueError("order must be 1, 2, 3 or 4")
    w = _HALF_WIDTH[order]
    P = curve.window(j - w, j + w)
    return _KERNEL[order](P, curve.h)[0]


def forward_ops(curve: GridCurve, j: int):
    """Forward difference ``D+ X_j`` and forward average ``F X_j``."""
    P = curve.window(j, j + 1)
    return (P[1] - P[0]) / curve.h, 0.5 * (P[1] + P[0])


def _checked_d1(curve, j):
    d1 = fd_derivative(curve, j, 1)
    if norm(d1) * curve.h <= curve.eps_len:
        raise DegenerateParametrizationError(f"|X_sigma| vanishes at node {j}")
    return d1


def arc_quantities(curve: GridCurve, j: int):
    d1 = _checked_d1(curve, j)
    d2 = fd_derivative(curve, j, 2)
    d3 = fd_derivative(curve, j, 3)
    return tuple(float(v) for v in arc_derivatives(d1, d2, d3))


def curvature_at(curve: GridCurve, j: int) -> float:
    d1 = _checked_d1(curve, j)
    return float(curvature(d1, fd_derivative(curve, j, 2)))


def curvature_s_at(curve: GridCurve, j: int) -> float:
    d1 = _checked_d1(curve, j)
    return float(curvature_s(d1, fd_derivative(curve, j, 2), fd_derivative(curve, j, 3)))


def unit_frames(curve: GridCurve, j: int):
    d1 = _checked_d1(curve, j)
    t = d1 / norm(d1)
    return t, perp(t)


def polygon_area(curve: GridCurve) -> float:
    """Signed shoelace area; positive for counterclockwise node order."""
    if not curve.closed:
        raise ValueError("polygon_area needs a closed curve")
    x, y = curve.interior.T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def curve_length(curve: GridCurve) -> float:
    P = _polyline(curve)
    return float(norm(np.diff(P, axis=0)).sum())


def _polyline(curve: GridCurve) -> np.ndarray:
    """Physical polyline: end midpoints (or linear extrapolation) plus interior nodes."""
    X = curve.interior
    if curve.closed:
        return np.vstack([X, X[:1]])
    start = 0.5 * (curve.point(0) + X[0]) if curve.is_set(0) else 1.5 * X[0] - 0.5 * X[1]
    N = curve.N
    end = 0.5 * (curve.point(N + 1) + X[-1]) if curve.is_set(N + 1) else 1.5 * X[-1] - 0.5 * X[-2]
    return np.vstack([start, X, end])


def regrid_uniform(curve: GridCurve, targetN: int) -> GridCurve:
    """Resample so nodes are equally spaced in cumulative chord length.

    Open curves keep their end points (the sigma = 0 and 1 faces); the new
    curve has unset ghost slots.  Closed curves keep node 1.
    """
    if targetN < 4:
        raise ValueError("targetN below the minimum stencil size (4)")
    P = _polyline(curve)
    seg = norm(np.diff(P, axis=0))
    if np.any(seg <= curve.eps_len):
        raise DegenerateParametrizationError("coincident nodes in regrid input")
    c = np.concatenate([[0.0], np.cumsum(seg)])
    total = c[-1]
    if curve.closed:
        spline = CubicSpline(c, P, bc_type="periodic")
        new = spline(np.arange(targetN) * total / targetN)
    else:
        spline = CubicSpline(c, P)
        new = spline((np.arange(1, targetN + 1) - 0.5) * total / targetN)
    return GridCurve.from_interior(new, curve.topology, curve.ghost, curve.orientation)


# ------------------------------------------------------------------- snapshots

def curve_to_csv(curve: GridCurve) -> str:
    """CSV text with header ``j,sigma,x,y``; ghosts omitted, 17 significant digits."""
    buf = io.StringIO()
    buf.write("j,sigma,x,y\n")
    for j, (s, (x, y)) in enumerate(zip(curve.sigma, curve.interior), start=1):
        buf.write(f"{j},{s:.17g},{x:.17g},{y:.17g}\n")
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temporary file and rename, so readers never see a partial file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_curve_csv(curve: GridCurve, path) -> None:
    atomic_write_text(path, curve_to_csv(curve))


def read_curve_csv(path, topology="open", ghost=2, orientation=1) -> GridCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    return GridCurve.from_interior(pts, topology, ghost, orientation)
