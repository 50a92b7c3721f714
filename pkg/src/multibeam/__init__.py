"""Multibeam interferometric duality toolkit.

Beam states, fringe visibilities and predictabilities, trace-power
inequality audits, which-way detector measurements, and POVM optimization
of path distinguishability for small (n <= ~16 beam) interferometers.
"""

from . import beams, detector, errors, inequalities, numerics, optimizer
from .beams import BeamState, lambda_example, new_beam_state
from .detector import DetectorStates, JointState, Povm, measurement_report
from .inequalities import InequalityReport, audit_random
from .numerics import Rng
from .optimizer import (
    OptimizationResult,
    SymmetricConfig,
    analytic_D,
    analytic_V,
    distinguishability_numeric,
    symmetric_example,
    theta_scan,
)

__version__ = "0.1.0"

__all__ = [
    "BeamState",
    "DetectorStates",
    "InequalityReport",
    "JointState",
    "OptimizationResult",
    "Povm",
    "Rng",
    "SymmetricConfig",
    "analytic_D",
    "analytic_V",
    "audit_random",
    "beams",
    "detector",
    "distinguishability_numeric",
    "errors",
    "inequalities",
    "lambda_example",
    "measurement_report",
    "new_beam_state",
    "numerics",
    "optimizer",
    "symmetric_example",
    "theta_scan",
]
