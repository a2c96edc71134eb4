"""Contextual entanglement of a driven atom in a damped cavity.

Quantum-trajectory simulation (direct and homodyne detection) of a
resonantly driven two-level atom coupled to a damped cavity mode, with
master-equation, semiclassical and phase-space cross-checks.
"""

__version__ = "0.1.0"

from .errors import (
    CQEDError,
    DegenerateSteadyState,
    DomainError,
    InsufficientData,
    NumericalError,
    StepSizeError,
    TruncationError,
)
from .hilbert import (
    SystemParams,
    binary_entropy,
    build_operators,
    coherent_state,
    displacement_operator,
    entanglement_entropy,
    partial_trace,
    trace_distance,
    von_neumann_entropy,
)
from .master import Frame, build_liouvillian, evolve, steady_state, to_displaced_frame, to_original_frame
from .semiclassical import (
    analytic_phase_ensemble_entropy,
    averaged_phase_entanglement,
    construct_ensemble_state,
    fixed_points,
)
from .trajectories import (
    SweepPoint,
    Unraveling,
    UnravelingConfig,
    average_entanglement,
    simulate,
    sweep_entanglement,
)
from .wigner import wigner_function

__all__ = [
    "CQEDError", "DegenerateSteadyState", "DomainError", "InsufficientData", "NumericalError",
    "StepSizeError", "TruncationError", "SystemParams", "binary_entropy", "build_operators",
    "coherent_state", "displacement_operator", "entanglement_entropy", "partial_trace",
    "trace_distance", "von_neumann_entropy", "Frame", "build_liouvillian", "evolve", "steady_state",
    "to_displaced_frame", "to_original_frame", "analytic_phase_ensemble_entropy",
    "averaged_phase_entanglement", "construct_ensemble_state", "fixed_points", "SweepPoint",
    "Unraveling", "UnravelingConfig", "average_entanglement", "simulate", "sweep_entanglement",
    "wigner_function",
]
