"""Tools for a balanced gain/loss pair of coupled oscillators.

The package simulates the coupled pair under three models (lossless,
linear gain/loss, discrete energy transfer), computes the modal spectrum
and its phase label (unbroken / broken / exceptional), evaluates the
classical time-of-flight integral for complex power-law potentials, and
maps phase diagrams over parameter grids with deterministic parallel
sweeps.  The :mod:`ptdimer.cli` module exposes all of it as the
``ptdimer`` command.
"""

from ._version import __version__
from .core import (
    CoupledParams,
    PhaseLabel,
    StateVector,
    TimeSeries,
    TransferEvent,
    TransferLog,
    TwoBoxParams,
    read_trajectory_csv,
    read_transfer_log_csv,
    validate_params,
)
from .dynamics import (
    Envelope,
    Model,
    PeakEvent,
    RabiMetrics,
    SimConfig,
    SimResult,
    classify_dynamics,
    detect_peaks,
    envelope_of,
    integrate,
    rabi_metrics,
)
from .errors import (
    BranchError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InsufficientDataError,
    NoTransitionError,
    PtDimerError,
    SingularityError,
    StepSizeError,
    ValidationError,
)
from .spectral import (
    ModalSpectrum,
    TwoBoxSpectrum,
    classify_phase,
    critical_damping,
    modal_eigenvalues,
    phase_margin,
    two_box_critical_coupling,
    two_box_eigenvalues,
)
from .sweep import (
    BoundaryPoint,
    GridSpec,
    PhaseMap,
    SweepMode,
    grid_from_manifest,
    read_phase_map_labels,
    refine_boundary,
    run_sweep,
    sweep_manifest_json,
    write_boundary_csv,
    write_phase_map_csv,
)
from .time_of_flight import (
    TailBehavior,
    TofRequest,
    TofResult,
    potential,
    tail_bound,
    tail_exponent,
    time_of_flight,
)

__all__ = [
    "__version__",
    "BoundaryPoint",
    "BranchError",
    "ConfigError",
    "ConvergenceError",
    "CoupledParams",
    "DomainError",
    "Envelope",
    "GridSpec",
    "InsufficientDataError",
    "ModalSpectrum",
    "Model",
    "NoTransitionError",
    "PeakEvent",
    "PhaseLabel",
    "PhaseMap",
    "PtDimerError",
    "RabiMetrics",
    "SimConfig",
    "SimResult",
    "SingularityError",
    "StateVector",
    "StepSizeError",
    "SweepMode",
    "TailBehavior",
    "TimeSeries",
    "TofRequest",
    "TofResult",
    "TransferEvent",
    "TransferLog",
    "TwoBoxParams",
    "TwoBoxSpectrum",
    "ValidationError",
    "classify_dynamics",
    "classify_phase",
    "critical_damping",
    "detect_peaks",
    "envelope_of",
    "grid_from_manifest",
    "integrate",
    "modal_eigenvalues",
    "phase_margin",
    "potential",
    "rabi_metrics",
    "read_phase_map_labels",
    "read_trajectory_csv",
    "read_transfer_log_csv",
    "refine_boundary",
    "run_sweep",
    "sweep_manifest_json",
    "tail_bound",
    "tail_exponent",
    "time_of_flight",
    "two_box_critical_coupling",
    "two_box_eigenvalues",
    "validate_params",
    "write_boundary_csv",
    "write_phase_map_csv",
]
