"""Filippov-solution simulator for nonlinear and quantized consensus protocols."""

from .analysis import ConvergenceSet, SetId, conformance_report, lyapunov_trace, member
from .dynamics import (
    Explicit,
    LeftContinuous,
    Midpoint,
    ProtocolSpec,
    RightContinuous,
    communication,
    is_equilibrium,
    measurement,
    rhs_decomposition,
    select,
)
from .graph import WeightedDigraph, build_graph, classify, incidence_matrix, laplacian, left_null_vector
from .integrator import IntegratorConfig, PrescribedSelection, Trajectory, simulate, sliding_selection, step
from .nonlinear import (
    AsymmetricQuantizer,
    Linear,
    LogarithmicQuantizer,
    PiecewiseConstant,
    Scaled,
    Sign,
    StepPhi,
    SymmetricQuantizer,
    antiderivative,
    check_odd,
    filippov_interval,
)

__version__ = "0.1.0"

__all__ = [
    "AsymmetricQuantizer",
    "ConvergenceSet",
    "Explicit",
    "IntegratorConfig",
    "LeftContinuous",
    "Linear",
    "LogarithmicQuantizer",
    "Midpoint",
    "PiecewiseConstant",
    "PrescribedSelection",
    "ProtocolSpec",
    "RightContinuous",
    "Scaled",
    "SetId",
    "Sign",
    "StepPhi",
    "SymmetricQuantizer",
    "Trajectory",
    "WeightedDigraph",
    "antiderivative",
    "build_graph",
    "check_odd",
    "classify",
    "communication",
    "conformance_report",
    "filippov_interval",
    "incidence_matrix",
    "is_equilibrium",
    "laplacian",
    "left_null_vector",
    "lyapunov_trace",
    "measurement",
    "member",
    "rhs_decomposition",
    "select",
    "simulate",
    "sliding_selection",
    "step",
]
