"""End-to-end entanglement in open XXZ chains after a boundary-bond quench.

Two engines produce the same trajectories: sector-resolved exact
diagonalization for short chains and second-order TEBD on matrix product
states for long ones. The protocol layer runs quenches and sweeps; ``config``,
``records`` and ``cli`` handle input and output.
"""

from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    DomainError,
    NumericalError,
    ParameterError,
    ReconstructionError,
    ToleranceError,
    XXZError,
)
from .model import ModelParams, build_h0, build_h1
from .observables import TwoQubitDensity, concurrence
from .protocol import (
    EngineConfig,
    PeakSummary,
    SweepResult,
    find_peak,
    run_quench,
    sweep_delta,
    sweep_j1,
    sweep_size,
    sweep_temperature,
    temperature_threshold,
    thermal_trajectory,
    validate_engines,
    xi_baseline,
)
from .trajectory import QuenchTrajectory

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "EngineConfig",
    "ModelParams",
    "NumericalError",
    "ParameterError",
    "PeakSummary",
    "QuenchTrajectory",
    "ReconstructionError",
    "SweepResult",
    "ToleranceError",
    "TwoQubitDensity",
    "XXZError",
    "build_h0",
    "build_h1",
    "concurrence",
    "find_peak",
    "run_quench",
    "sweep_delta",
    "sweep_j1",
    "sweep_size",
    "sweep_temperature",
    "temperature_threshold",
    "thermal_trajectory",
    "validate_engines",
    "xi_baseline",
]
