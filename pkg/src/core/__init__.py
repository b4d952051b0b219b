from .exceptions import (
    ConstructionError,
    DomainError,
    AdmissibilityError,
    SolverError,
    NonConvergenceError,
    LightlikeCellError,
    ConjugationError,
    LoopPlacementError,
    HalfStripError,
    PeriodError,
    FaceSignError,
    CalibrationError,
    SignChangeLostError,
    MeshError,
    WeldMismatchError,
    MeshExportError,
    SequenceError,
    PipelineStageError,
    ConfigurationError,
    InvalidConfigError,
    ConfigFileError,
)

__all__ = [
    "ConstructionError",
    "DomainError",
    "AdmissibilityError",
    "SolverError",
    "NonConvergenceError",
    "LightlikeCellError",
    "ConjugationError",
    "LoopPlacementError",
    "HalfStripError",
    "PeriodError",
    "FaceSignError",
    "CalibrationError",
    "SignChangeLostError",
    "MeshError",
    "WeldMismatchError",
    "MeshExportError",
    "SequenceError",
    "PipelineStageError",
    "ConfigurationError",
    "InvalidConfigError",
    "ConfigFileError",
]
