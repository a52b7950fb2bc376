"""Parametric velocity laws for mean-curvature motion and surface diffusion.

Both laws are written so that the normal velocity is the physical one
(``A kappa`` and ``-B kappa_ss``) while the tangential part keeps the system
fully parabolic in sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import (
    DegenerateParametrizationError,
    GridCurve,
    arc_derivatives,
    curvature,
    diff1,
    diff2,
    diff3,
    diff4,
    dot,
    norm,
    perp,
)

ADJUST_MODES = ("fourth-order", "second-order")
DEFAULT_ALPHA = -100.0


@dataclass(frozen=True)
class MotionCoefficients:
    """Mobilities: ``A`` for mean curvature motion, ``B`` for surface diffusion."""

    A: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("mobilities A and B must be positive")


UNIT = MotionCoefficients()


# ---------------------------------------------------------------- array forms

def mcf_rhs(d1, d2, A=1.0):
    """``A X_ss/|X_s|^2`` given D1 and D2 at the same nodes."""
    return A * d2 / dot(d1, d1)[..., None]


def sd_rhs(d1, d2, d3, d4, B=1.0):
    """Surface-diffusion velocity with the lower-order term that makes it parabolic."""
    sp, s2, s3 = arc_derivatives(d1, d2, d3)
    k = curvature(d1, d2)
    sp = sp[..., None]
    s2 = s2[..., None]
    s3 = s3[..., None]
    k = k[..., None]
    v = (
        -d4 / sp**4
        + 6.0 * s2 * d3 / sp**5
        - (15.0 * s2**2 / sp**4 - 4.0 * s3 / sp**3 + k**2) * d2 / sp**2
    )
    return B * v


def tangential_adjustment(d1, d2, d4, alpha, mode="fourth-order"):
    """Extra tangential velocity ``alpha (Y . t) t``; Y is the 4th or 2nd scaled derivative."""
    if mode not in ADJUST_MODES:
        raise ValueError(f"mode must be one of {ADJUST_MODES}")
    sp = norm(d1)[..., None]
    t = d1 / sp
    y = d4 / sp**4 if mode == "fourth-order" else d2 / sp**2
    return alpha * dot(y, t)[..., None] * t


def sd_rhs_adjusted(d1, d2, d3, d4, alpha=0.0, mode="fourth-order", B=1.0):
    v = sd_rhs(d1, d2, d3, d4, B)
    if alpha != 0.0:
        v = v + tangential_adjustment(d1, d2, d4, alpha, mode)
    return v


def mcf_rhs_window(P, h, A=1.0):
    """MCF velocity at ``P[1:-1]`` for consecutive nodes ``P``."""
    return mcf_rhs(diff1(P, h), diff2(P, h), A)


def sd_rhs_window(P, h, alpha=0.0, mode="fourth-order", B=1.0):
    """Surface-diffusion velocity at ``P[2:-2]`` for consecutive nodes ``P``."""
    d1 = diff1(P, h)[1:-1]
    d2 = diff2(P, h)[1:-1]
    return sd_rhs_adjusted(d1, d2, diff3(P, h), diff4(P, h), alpha, mode, B)


# --------------------------------------------------------------- node forms

def _stencil(curve: GridCurve, j: int, w: int):
    P = curve.window(j - w, j + w)
    h = curve.h
    d1 = diff1(P, h)[w - 1]
    if norm(d1) * h <= curve.eps_len:
        raise DegenerateParametrizationError(f"|X_sigma| vanishes at node {j}")
    d2 = diff2(P, h)[w - 1]
    if w == 1:
        return d1, d2, None, None
    return d1, d2, diff3(P, h)[0], diff4(P, h)[0]


def mcf_velocity(curve: GridCurve, j: int, coeffs: MotionCoefficients = UNIT) -> np.ndarray:
    d1, d2, _, _ = _stencil(curve, j, 1)
    return mcf_rhs(d1, d2, coeffs.A)


def sd_velocity(curve: GridCurve, j: int, coeffs: MotionCoefficients = UNIT) -> np.ndarray:
    return sd_velocity_adjusted(curve, j, 0.0, coeffs=coeffs)


def sd_velocity_adjusted(curve: GridCurve, j: int, alpha: float,
                         mode: str = "fourth-order",
                         coeffs: MotionCoefficients = UNIT) -> np.ndarray:
    d1, d2, d3, d4 = _stencil(curve, j, 2)
    return sd_rhs_adjusted(d1, d2, d3, d4, alpha, mode, coeffs.B)


def kappa_window(P, h):
    """Curvature at ``P[1:-1]``."""
    return curvature(diff1(P, h), diff2(P, h))


def kappa_ss_identity_gap(curve: GridCurve, j: int, arclength_tol: float = 1e-2) -> float:
    """Discrepancy between ``(X_ssss + kappa^2 X_ss) . n`` and a direct kappa_ss.

    The curve must already be (nearly) arc-length parametrised: the relative
    change of |X_sigma| between neighbours, ``h S_ss / S_s``, may not exceed
    ``arclength_tol``.
    """
    h = curve.h
    P = curve.window(j - 2, j + 2)
    d1, d2, _, d4 = _stencil(curve, j, 2)
    sp = norm(d1)
    if abs(dot(d1, d2)) / sp * h / sp > arclength_tol:
        raise ValueError(f"curve is not arc-length parametrised near node {j}; regrid first")
    n = perp(d1) / sp
    k = kappa_window(P, h)
    lhs = dot(d4 / sp**4 + k[1] ** 2 * d2 / sp**2, n)
    kss = (k[2] - 2.0 * k[1] + k[0]) / (h * sp) ** 2
    return float(abs(lhs - kss))


def normalize_coefficients(coeffs: MotionCoefficients):
    """Space and time scales ``(R, T)`` with ``X~ = R X`` and ``t~ = T t`` giving A = B = 1."""
    A, B = coeffs.A, coeffs.B
    if not (A > 0 and B > 0):
        raise ValueError("mobilities must be positive")
    return float(np.sqrt(A / B)), float(A * A / B)
