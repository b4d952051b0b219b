from typing import Any, Dict, Optional


class ConstructionError(Exception):
    pass


class DomainError(ConstructionError, ValueError):
    pass


class AdmissibilityError(ConstructionError):
    pass


class SolverError(ConstructionError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message: str, last_residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class LightlikeCellError(SolverError):
    pass


class ConjugationError(ConstructionError):
    pass


class LoopPlacementError(ConjugationError):
    pass


class HalfStripError(ConjugationError):
    pass


class PeriodError(ConstructionError):
    pass


class FaceSignError(PeriodError):
    pass


class CalibrationError(PeriodError):
    def __init__(self, message: str, profile: Optional[Any] = None):
        super().__init__(message)
        self.profile = profile


class SignChangeLostError(PeriodError):
    def __init__(self, message: str, state: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.state = state or {}


class MeshError(ConstructionError):
    pass


class WeldMismatchError(MeshError):
    pass


class MeshExportError(MeshError):
    pass


class SequenceError(ConstructionError, ValueError):
    pass


class PipelineStageError(ConstructionError):
    def __init__(self, stage: str, message: str, exit_code: int, report_path: Optional[str] = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code
        self.report_path = report_path


class ConfigurationError(Exception):
    pass


class InvalidConfigError(ConfigurationError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class ConfigFileError(ConfigurationError):
    pass
