"""Laplace-domain linear stability of the junction conditions.

Linearising about three straight rays with unit directions ``d1, d2, d3``
leaves ``X^1_t = X^1_ss`` and ``X^i_t = -X^i_ssss`` (i = 2, 3).  Laplace
transforming in time gives modes ``exp(mu sigma)`` with ``mu = -sqrt(z)`` for
the grain and ``mu = lambda_{1,2} = (-1 +- i) z^{1/4} / sqrt(2)`` for the
surfaces.  Substituting the modes into the linearised junction conditions
gives a square matrix ``M(z)``; the problem is linearly well posed when
``det M(z) != 0`` for all ``Re z > 0``.

Matrices are assembled by differentiating the modes, not transcribed, and
the closed-form determinants are kept separately as the check.

Row order (parabolic, 10 rows; PDAE uses the first 8)::

    u1 - u2, u2 - u3, v1 - v2, v2 - v3,
    angle(1, 2), angle(1, 3),
    X2_ss . d2^perp + X3_ss . d3^perp,          chemical potential
    X2_sss . d2^perp - X3_sss . d3^perp,        mass flux
    artificial tangential rows for curves 2, 3  (parabolic only)
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .curve import perp

SQ2 = np.sqrt(2.0)
PARABOLIC_VARIANTS = ("curvature", "third", "mixed")
RIGHT_ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class AngleConfig:
    """Junction geometry with the grain direction fixed at ``d1 = (0, -1)``."""

    theta12: float
    theta13: float

    def __post_init__(self):
        for th in (self.theta12, self.theta13):
            if not 0.0 < th < np.pi:
                raise ValueError("junction angles must lie in (0, pi)")

    @classmethod
    def from_m(cls, m: float):
        from .quarterloop import junction_angle
        th = junction_angle(m)
        return cls(th, th)

    @property
    def d1(self):
        return np.array([0.0, -1.0])

    @property
    def d2(self):
        return np.array([-np.sin(self.theta12), -np.cos(self.theta12)])

    @property
    def d3(self):
        return np.array([np.sin(self.theta13), -np.cos(self.theta13)])

    @property
    def directions(self):
        return self.d1, self.d2, self.d3


@dataclass(frozen=True)
class LaplaceAnsatz:
    """Exponents of the decaying modes at Laplace variable ``z``."""

    z: complex

    def __post_init__(self):
        if not np.real(self.z) > 0:
            raise ValueError("Laplace variable needs Re(z) > 0")

    @property
    def grain_rate(self) -> complex:
        return -np.sqrt(complex(self.z))

    @property
    def lambda1(self) -> complex:
        return (-1 + 1j) / SQ2 * complex(self.z) ** 0.25

    @property
    def lambda2(self) -> complex:
        return (-1 - 1j) / SQ2 * complex(self.z) ** 0.25

    def decays(self) -> bool:
        return all(np.real(mu) < 0 for mu in (self.grain_rate, self.lambda1, self.lambda2))


# A mode is (curve, basis vector, exponent).  Its k-th sigma-derivative at
# sigma = 0 is basis * exponent**k (exponent 0 marks a constant mode).

def _derivative(mode, curve, k):
    c, b, mu = mode
    if c != curve:
        return np.zeros(2, dtype=complex)
    if k == 0:
        return b.astype(complex)
    return b * complex(mu) ** k


def _junction_rows(mode, angles: AngleConfig):
    d1, d2, d3 = angles.directions
    X = lambda i, k: _derivative(mode, i, k)  # noqa: E731
    rows = [
        X(1, 0)[0] - X(2, 0)[0],
        X(2, 0)[0] - X(3, 0)[0],
        X(1, 0)[1] - X(2, 0)[1],
        X(2, 0)[1] - X(3, 0)[1],
    ]
    for d, i in ((d2, 2), (d3, 3)):
        rows.append(d1 @ X(i, 1) + d @ X(1, 1) - (d1 @ d) * (d1 @ X(1, 1) + d @ X(i, 1)))
    rows.append(X(2, 2) @ perp(d2) + X(3, 2) @ perp(d3))
    rows.append(X(2, 3) @ perp(d2) - X(3, 3) @ perp(d3))
    return rows


def _tangential_rows(mode, angles, variant):
    d2, d3 = angles.d2, angles.d3
    X = lambda i, k: _derivative(mode, i, k)  # noqa: E731
    if variant == "curvature":
        return [X(2, 2) @ d2, X(3, 2) @ d3]
    if variant == "third":
        return [X(2, 3) @ d2, X(3, 3) @ d3]
    if variant == "mixed":
        return [X(2, 2) @ d2 + X(2, 3) @ d2, X(3, 2) @ d3 - 2.0 * X(3, 3) @ d3]
    raise ValueError(f"unknown tangential variant {variant!r}; choose from {PARABOLIC_VARIANTS}")


def parabolic_modes(z):
    a = LaplaceAnsatz(z)
    ex, ey = np.eye(2)
    r, l1, l2 = a.grain_rate, a.lambda1, a.lambda2
    # coefficient order A11, A12, A21, B21, A22, B22, A31, B31, A32, B32
    return [(1, ex, r), (1, ey, r),
            (2, ex, l1), (2, ex, l2), (2, ey, l1), (2, ey, l2),
            (3, ex, l1), (3, ex, l2), (3, ey, l1), (3, ey, l2)]


def assemble_parabolic_M(angles: AngleConfig, z, variant: str = "curvature") -> np.ndarray:
    """10 x 10 boundary matrix; column k holds the conditions applied to mode k."""
    M = np.empty((10, 10), dtype=complex)
    for k, mode in enumerate(parabolic_modes(z)):
        M[:, k] = _junction_rows(mode, angles) + _tangential_rows(mode, angles, variant)
    return M


def _is_right(theta):
    return abs(theta - 0.5 * np.pi) <= RIGHT_ANGLE_TOL


def pdae_modes(angles: AngleConfig, z):
    """Reduced mode set: normal modes decay, tangential parts are constants.

    A surface with direction ``d = (d_x, d_y)`` and ``d_y != 0`` uses the
    normal basis ``(1, -k)`` and tangential constant ``(1, 1/k)`` with
    ``k = d_x / d_y``; a horizontal surface (right angle) uses ``(0, 1)`` and
    ``(1, 0)``.  Coefficient order ``A11, B11, A_i, B_i, C_i`` per surface.
    """
    a = LaplaceAnsatz(z)
    l1, l2 = a.lambda1, a.lambda2
    modes = [(1, np.array([1.0, 0.0]), a.grain_rate), (1, np.array([0.0, 1.0]), 0)]
    for curve, d, th in ((2, angles.d2, angles.theta12), (3, angles.d3, angles.theta13)):
        if _is_right(th):
            normal, tangent = np.array([0.0, 1.0]), np.array([1.0, 0.0])
        else:
            k = d[0] / d[1]
            normal, tangent = np.array([1.0, -k]), np.array([1.0, 1.0 / k])
        modes += [(curve, normal, l1), (curve, normal, l2), (curve, tangent, 0)]
    return modes


def assemble_pdae_M(angles: AngleConfig, z) -> np.ndarray:
    M = np.empty((8, 8), dtype=complex)
    for k, mode in enumerate(pdae_modes(angles, z)):
        M[:, k] = _junction_rows(mode, angles)
    return M


# ------------------------------------------------------------ closed forms

def parabolic_det_closed_form(angles: AngleConfig, z):
    s12, s13 = np.sin(angles.theta12), np.sin(angles.theta13)
    z = complex(z)
    return (32.0 * (s13 * s12**2 + s12 * s13**2) * z**3
            - 16.0 * SQ2 * s12 * s13 * np.sin(angles.theta12 + angles.theta13) * z**2.75)


def symmetric_det_closed_form(z):
    """Both angles 2 pi / 3."""
    z = complex(z)
    return 6.0 * np.sqrt(6.0) * z**2.75 + 24.0 * np.sqrt(3.0) * z**3


def pdae_det_closed_form(angles: AngleConfig, z):
    t12, t13 = angles.theta12, angles.theta13
    z = complex(z)
    r12, r13 = _is_right(t12), _is_right(t13)
    if r12 and r13:
        return -16.0 * z**2
    if r12 or r13:
        t = t13 if r12 else t12
        return (-8.0 * z**2 * np.sin(t) + 4.0 * SQ2 * z**1.75 * np.cos(t) - 8.0 * z**2) / np.cos(t) ** 2
    return ((4.0 * SQ2 * z**1.75 * np.sin(t12 + t13) - 8.0 * z**2 * (np.sin(t12) + np.sin(t13)))
            / (np.cos(t12) ** 2 * np.cos(t13) ** 2))


def pdae_real_root(angles: AngleConfig):
    """Positive real zero of the generic PDAE determinant, or None if there is none."""
    s = np.sin(angles.theta12 + angles.theta13)
    if s <= 0:
        return None
    return float((s / (SQ2 * (np.sin(angles.theta12) + np.sin(angles.theta13)))) ** 4)


def determinant(which: str, angles: AngleConfig, z, variant="curvature"):
    if which == "parabolic":
        return complex(np.linalg.det(assemble_parabolic_M(angles, z, variant)))
    if which == "pdae":
        return complex(np.linalg.det(assemble_pdae_M(angles, z)))
    raise ValueError("which must be 'parabolic' or 'pdae'")


def closed_form(which: str, angles: AngleConfig, z):
    if which == "parabolic":
        return parabolic_det_closed_form(angles, z)
    return pdae_det_closed_form(angles, z)


def closed_form_max_rel_err(which, angles, grid) -> float:
    err = 0.0
    for z in np.ravel(grid):
        cf = closed_form(which, angles, z)
        err = max(err, abs(determinant(which, angles, z) - cf) / abs(cf))
    return float(err)


def scan_min_abs_det(which: str, angles: AngleConfig, grid):
    """Smallest ``|det M(z)|`` over ``grid`` and where it occurs."""
    pts = np.ravel(np.asarray(grid, dtype=complex))
    if pts.size == 0:
        raise ValueError("empty z grid")
    if np.any(pts.real <= 0):
        raise ValueError("every grid point needs Re(z) > 0")
    vals = np.array([abs(determinant(which, angles, z)) for z in pts])
    k = int(np.argmin(vals))
    return float(vals[k]), complex(pts[k])


def rect_grid(re=(0.1, 10.0), im=(-10.0, 10.0), n_re=25, n_im=41):
    R, I = np.meshgrid(np.linspace(*re, n_re), np.linspace(*im, n_im), indexing="ij")
    return (R + 1j * I).ravel()


def solve_coefficients(angles: AngleConfig, z, variant: str, P) -> np.ndarray:
    """Coefficients ``C`` of the parabolic modes with ``M C = P``."""
    M = assemble_parabolic_M(angles, z, variant)
    if abs(np.linalg.det(M)) < 1e-300:
        raise np.linalg.LinAlgError("boundary matrix is singular")
    return np.linalg.solve(M, np.asarray(P, dtype=complex))


def tangential_independence_check(angles: AngleConfig, z, variantA: str, variantB: str, P,
                                  tailB=None) -> float:
    """``|dA11| + |dA12|`` between two artificial tangential conditions.

    ``P`` is the 10-entry right side for variant A; variant B uses the same
    first eight entries and ``tailB`` (default: ``P``'s own) for the last two.
    """
    P = np.asarray(P, dtype=complex)
    PB = P.copy()
    if tailB is not None:
        PB[8:] = tailB
    ca = solve_coefficients(angles, z, variantA, P)
    cb = solve_coefficients(angles, z, variantB, PB)
    return float(abs(ca[0] - cb[0]) + abs(ca[1] - cb[1]))


def wellposedness_report(formulation: str, angles: AngleConfig, grid) -> dict:
    grid = np.ravel(np.asarray(grid, dtype=complex))
    min_abs, arg = scan_min_abs_det(formulation, angles, grid)
    return {
        "formulation": formulation,
        "theta12": angles.theta12,
        "theta13": angles.theta13,
        "grid": {"n": int(grid.size),
                 "re": [float(grid.real.min()), float(grid.real.max())],
                 "im": [float(grid.imag.min()), float(grid.imag.max())]},
        "minAbsDet": min_abs,
        "argmin": [arg.real, arg.imag],
        "closedFormMaxRelErr": closed_form_max_rel_err(formulation, angles, grid),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True)
