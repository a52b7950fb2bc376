"""Grain-boundary grooving by coupled curvature motion and surface diffusion.

Three curves meet at a triple junction: a grain boundary moving by mean
curvature and two exterior-surface branches moving by surface diffusion.
Two parametric formulations (fully parabolic, and a PDAE with an
equidistribution constraint), a height-function oracle, closed-curve runs
and a Laplace-domain well-posedness analysis share one staggered-grid core.
"""

__version__ = "0.1.0"

from .curve import GridCurve, curvature_at, curvature_s_at, fd_derivative, polygon_area, regrid_uniform
from .integrators import NewtonConfig, NewtonError, SingularJacobianError, backward_euler_step, forward_euler_step, newton_solve
from .motion import MotionCoefficients, mcf_velocity, normalize_coefficients, sd_velocity, sd_velocity_adjusted

__all__ = [
    "GridCurve", "MotionCoefficients", "NewtonConfig", "NewtonError", "SingularJacobianError",
    "backward_euler_step", "curvature_at", "curvature_s_at", "fd_derivative", "forward_euler_step",
    "mcf_velocity", "newton_solve", "normalize_coefficients", "polygon_area", "regrid_uniform",
    "sd_velocity", "sd_velocity_adjusted",
]
