"""Distance-based rigid-formation control for double-integrator agents.

Graphs and rigidity (``graph``), control laws and estimators (``control``),
motion-parameter design (``motion``), RK4 simulation (``simulator``),
trajectory analytics (``analysis``), scenario files (``scenario``) and the
command line (``cli``).
"""

from __future__ import annotations

from .control import ControllerConfig, SwarmState, make_rhs
from .errors import (
    ConfigError,
    DivergenceError,
    IntegrationError,
    InvalidInputError,
    PreconditionError,
    RigidFormError,
)
from .graph import FormationGraph, ShapeSpec, is_inf_min_rigid
from .motion import assemble_motion, check_assumption1
from .scenario import Scenario, bundled, load_scenario
from .simulator import InitialSpec, SimConfig, Trajectory, detect_steady_state, simulate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ControllerConfig",
    "DivergenceError",
    "FormationGraph",
    "InitialSpec",
    "IntegrationError",
    "InvalidInputError",
    "PreconditionError",
    "RigidFormError",
    "Scenario",
    "ShapeSpec",
    "SimConfig",
    "SwarmState",
    "Trajectory",
    "assemble_motion",
    "bundled",
    "check_assumption1",
    "detect_steady_state",
    "is_inf_min_rigid",
    "load_scenario",
    "make_rhs",
    "simulate",
]
