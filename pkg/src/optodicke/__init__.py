"""Semiclassical simulation and phase analysis of the optomechanical
Dicke model: spin-cavity-mirror dynamics, steady states, superradiant
phase boundaries and persistent-oscillation detection."""

__version__ = "0.1.0"

from .model import (State, SystemParams, jacobian, normal_state, rhs,
                    spin_norm_sq)
from .dynamics import (CycleReport, IntegratorConfig, Trajectory,
                       detect_cycle, integrate, relaxation_time)
from .steadystate import (FixedPoint, SrbQuantities, all_fixed_points,
                          assess_stability, find_fixed_points,
                          find_sra_roots, mirror_steady, sra_boundary,
                          srb_quantities)
from .phases import (ClassifyOptions, PhaseDiagram, classify_point, sweep,
                     trace_boundary, two_sra_area)

__all__ = [
    "State", "SystemParams", "jacobian", "normal_state", "rhs",
    "spin_norm_sq",
    "CycleReport", "IntegratorConfig", "Trajectory", "detect_cycle",
    "integrate", "relaxation_time",
    "FixedPoint", "SrbQuantities", "all_fixed_points", "assess_stability",
    "find_fixed_points", "find_sra_roots", "mirror_steady", "sra_boundary",
    "srb_quantities",
    "ClassifyOptions", "PhaseDiagram", "classify_point", "sweep",
    "trace_boundary", "two_sra_area",
]
