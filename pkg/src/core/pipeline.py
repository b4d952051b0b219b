"""
End-to-end construction run: admissibility, optional calibration, face signs,
period solve, verification, surface build, symmetric extension and export.

Every stage writes what it has into the output directory before the next one
starts, so a failed run still leaves a summary naming the failing stage.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .exceptions import (
    AdmissibilityError,
    ConfigFileError,
    ConfigurationError,
    ConjugationError,
    ConstructionError,
    DomainError,
    FaceSignError,
    MeshError,
    PeriodError,
    PipelineStageError,
    SequenceError,
    SolverError,
)
from .period_engine import PeriodEngine, calibrate_eta0, face_sign_check, scan_calibration
from .period_solver import SolveStatus, SolveTrace, solve_periods, symmetrized_residual, verify_solution
from .sequences import GapSequence, beatty_gaps, counting_gaps, quasiperiodicity_scan, translate_configuration
from .strip_domain import SingularSet, StripConfig, check_admissible
from ..config.defaults import (
    DEFAULT_OUTPUT_DIR,
    EXIT_ADMISSIBILITY,
    EXIT_CONFIG,
    EXIT_MESH,
    EXIT_OK,
    EXIT_PERIODS,
    EXIT_SOLVER,
)
from ..config.keys import SettingsKeys
from ..config.settings import PipelineSettings, SettingsFactory
from ..processing import reports
from ..processing.diagnostics import boundary_flux_pattern
from ..processing.mesh_export import export_mesh
from ..processing.surface_builder import build_fundamental_piece, embeddedness_probe, extend_by_symmetry

logger = logging.getLogger(__name__)

SUMMARY_FILENAME = "summary.txt"
RESOLVED_CONFIG_STEM = "config.resolved"


class Stage(Enum):
    CONFIG = "config"
    ADMISSIBILITY = "admissibility"
    CALIBRATE = "calibrate"
    FACE_SIGNS = "face-signs"
    PERIOD_SOLVE = "period-solve"
    VERIFY = "verify"
    BUILD = "build"
    EXTEND = "extend"
    EXPORT = "export"


STAGE_EXIT_CODES: Dict[Stage, int] = {
    Stage.CONFIG: EXIT_CONFIG,
    Stage.ADMISSIBILITY: EXIT_ADMISSIBILITY,
    Stage.CALIBRATE: EXIT_PERIODS,
    Stage.FACE_SIGNS: EXIT_PERIODS,
    Stage.PERIOD_SOLVE: EXIT_PERIODS,
    Stage.VERIFY: EXIT_PERIODS,
    Stage.BUILD: EXIT_MESH,
    Stage.EXTEND: EXIT_MESH,
    Stage.EXPORT: EXIT_MESH,
}


class RunState(Enum):
    IDLE = "idle"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


def exit_code_for(error: BaseException, stage: Stage) -> int:
    if isinstance(error, (ConfigurationError, SequenceError)):
        return EXIT_CONFIG
    if isinstance(error, AdmissibilityError):
        return EXIT_ADMISSIBILITY
    if isinstance(error, SolverError):
        return EXIT_SOLVER
    if isinstance(error, (PeriodError, ConjugationError)):
        return EXIT_PERIODS
    if isinstance(error, MeshError):
        return EXIT_MESH
    return STAGE_EXIT_CODES[stage]


@dataclass
class StageRecord:
    stage: Stage
    seconds: float
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass
class PipelineResult:
    exit_code: int
    output_dir: Path
    state: RunState
    stages: List[StageRecord] = field(default_factory=list)
    error: Optional[PipelineStageError] = None

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK

    @property
    def summary_path(self) -> Path:
        return self.output_dir / SUMMARY_FILENAME


def gap_sequence(generator: str, window: Tuple[int, int], alpha: Optional[str] = None,
                 p_list: Sequence[int] = ()) -> GapSequence:
    if generator == "beatty":
        return beatty_gaps(str(alpha), window)
    if generator == "counting":
        return counting_gaps(window)
    if generator == "explicit":
        return GapSequence.explicit(p_list)
    raise SequenceError(f"unknown generator '{generator}'")


def handle_positions(settings: PipelineSettings) -> GapSequence:
    """Handle positions p from the configured generator."""
    return gap_sequence(
        settings.get(SettingsKeys.Handles.GENERATOR),
        tuple(int(v) for v in settings.get(SettingsKeys.Handles.WINDOW)),
        alpha=settings.get(SettingsKeys.Handles.ALPHA),
        p_list=settings.get(SettingsKeys.Handles.P_LIST) or [],
    )


def configured_handles(settings: PipelineSettings) -> Tuple[int, ...]:
    generator = settings.get(SettingsKeys.Handles.GENERATOR)
    if generator == "explicit":
        return tuple(sorted(int(v) for v in settings.get(SettingsKeys.Handles.P_LIST) or []))
    return tuple(handle_positions(settings).p)


def quasi_period_shift(settings: PipelineSettings, n_max: int, index_radius: int) -> int:
    """Smallest n <= n_max whose shift repeats the gaps g(i) for |i| <= index_radius."""
    generator = settings.get(SettingsKeys.Handles.GENERATOR)
    if generator == "explicit":
        raise SequenceError("an explicit handle list has no quasi-period shift; "
                            "use the beatty or counting generator")
    lo, hi = (int(v) for v in settings.get(SettingsKeys.Handles.WINDOW))
    window = (min(lo, -index_radius - 1), max(hi, index_radius) + n_max + 1)
    g = gap_sequence(generator, window, alpha=settings.get(SettingsKeys.Handles.ALPHA)).gaps()
    scores = quasiperiodicity_scan(g, n_max, index_radius)
    if not scores:
        raise SequenceError(f"no shift n <= {n_max} repeats the gaps within index radius {index_radius}")
    return scores[0].n


def translated_handles(settings: PipelineSettings, n: int) -> Tuple[int, ...]:
    """Handles p(i + n) - p(n) on the configured index window."""
    generator = settings.get(SettingsKeys.Handles.GENERATOR)
    lo, hi = (int(v) for v in settings.get(SettingsKeys.Handles.WINDOW))
    extended = gap_sequence(generator, (lo, hi + n), alpha=settings.get(SettingsKeys.Handles.ALPHA))
    p_n, _ = translate_configuration(extended.values, [2.0 * v for v in extended.p], n)
    return tuple(p_n.values)


class PipelineRunner:
    def __init__(self, settings: PipelineSettings, output_dir: Optional[Path] = None):
        self._settings = settings
        self._output_dir = Path(output_dir or settings.get(SettingsKeys.Output.DIR))
        self._state = RunState.IDLE
        self._records: List[StageRecord] = []
        self._summary: Dict[str, Dict[str, Any]] = {}
        self._engine: Optional[PeriodEngine] = None
        self.cfg: Optional[StripConfig] = None
        self.p: Tuple[int, ...] = ()
        self.calibrate = False
        self.eta0: Optional[float] = None
        self.trace: Optional[SolveTrace] = None
        self.forms = None
        self.piece = None
        self.mesh = None

    @property
    def state(self) -> RunState:
        return self._state

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    def run(self) -> PipelineResult:
        self._state = RunState.RUNNING
        self._output_dir.mkdir(parents=True, exist_ok=True)
        self._summary["config"] = _flatten(self._settings.as_dict())
        stage = Stage.CONFIG
        try:
            for stage, step in self._stages():
                started = time.perf_counter()
                logger.info("stage %s", stage.value)
                details = step() or {}
                record = StageRecord(stage, time.perf_counter() - started, details)
                self._records.append(record)
                self._summary[stage.value] = details
        except (ConstructionError, ConfigurationError) as e:
            code = exit_code_for(e, stage)
            self._state = RunState.FAILED
            self._summary["failure"] = {"stage": stage.value, "exit_code": code,
                                        "error": type(e).__name__, "message": str(e)}
            path = reports.write_summary(self._output_dir / SUMMARY_FILENAME, self._summary)
            logger.error("stage %s failed (exit %d): %s", stage.value, code, e)
            error = PipelineStageError(stage.value, str(e), code, str(path))
            self._close()
            return PipelineResult(code, self._output_dir, self._state, self._records, error)

        self._state = RunState.COMPLETED
        self._summary["result"] = {"exit_code": EXIT_OK}
        reports.write_summary(self._output_dir / SUMMARY_FILENAME, self._summary)
        self._close()
        return PipelineResult(EXIT_OK, self._output_dir, self._state, self._records)

    def _close(self) -> None:
        if self._engine is not None:
            self._engine.close()

    def _stages(self):
        return [
            (Stage.CONFIG, self._configure),
            (Stage.ADMISSIBILITY, self._admissibility),
            (Stage.CALIBRATE, self._calibrate),
            (Stage.FACE_SIGNS, self._face_signs),
            (Stage.PERIOD_SOLVE, self._period_solve),
            (Stage.VERIFY, self._verify),
            (Stage.BUILD, self._build),
            (Stage.EXTEND, self._extend),
            (Stage.EXPORT, self._export),
        ]

    def _configure(self) -> Dict[str, Any]:
        settings = self._settings
        try:
            self.cfg = StripConfig.from_settings(settings)
        except DomainError as e:
            raise ConfigurationError(str(e)) from e
        self.p = configured_handles(settings)
        self._engine = PeriodEngine.from_settings(settings, self.cfg)
        self.calibrate = settings.get(SettingsKeys.Periods.ETA0) == "calibrate"
        self.eta0 = self.cfg.eta0
        suffix = settings.config_path.suffix.lower()
        resolved = settings.save_resolved(
            self._output_dir / f"{RESOLVED_CONFIG_STEM}{suffix if suffix in ('.yaml', '.yml') else '.conf'}")
        return {"eta": self.cfg.eta, "p": list(self.p), "N": len(self.p), "resolved": str(resolved)}

    def _admissibility(self) -> Dict[str, Any]:
        centred = SingularSet.centred(self.p)
        verdict = check_admissible(self.cfg, centred)
        if not verdict:
            raise AdmissibilityError(verdict.describe())
        return {"verdict": "admissible", "clearance": self.cfg.odd_vertex_clearance}

    def _calibrate(self) -> Dict[str, Any]:
        if not self.calibrate:
            return {"eta0": self.eta0, "source": "config"}
        settings = self._settings
        resolution = int(settings.get(SettingsKeys.Periods.SCAN_RESOLUTION))
        threshold = float(settings.get(SettingsKeys.Periods.F_THRESHOLD))
        profile = scan_calibration(self.cfg, resolution, threshold, self._engine)
        reports.write_calibration(self._output_dir / "calibration.csv", profile)
        self.eta0 = calibrate_eta0(self.cfg, resolution, threshold, self._engine)
        return {"eta0": self.eta0, "source": "calibrated"}

    def _face_signs(self) -> Dict[str, Any]:
        if not self.p:
            return {"faces": 0}
        settings = self._settings
        verdict = face_sign_check(
            self.cfg, self.p, self.eta0,
            samples_per_face=int(settings.get(SettingsKeys.Periods.SAMPLES_PER_FACE)),
            seed=int(settings.get(SettingsKeys.Periods.SEED)),
            engine=self._engine,
        )
        if not verdict:
            raise FaceSignError(verdict.describe())
        return {"faces": len(verdict.faces), "verdict": "passed"}

    def _period_solve(self) -> Dict[str, Any]:
        settings = self._settings
        self.trace = solve_periods(
            self.cfg, self.p, self.eta0,
            tol_F=float(settings.get(SettingsKeys.Periods.TOL_F)),
            engine=self._engine,
            max_sweeps=int(settings.get(SettingsKeys.Periods.MAX_SWEEPS)),
        )
        reports.write_trace(self._output_dir / "trace.csv", self.trace)
        if self.trace.status == SolveStatus.FAILED:
            raise PeriodError(f"period solve did not reach tolerance or bracket resolution "
                              f"in {self.trace.sweeps} sweeps")
        details: Dict[str, Any] = {"status": self.trace.status.value, "sweeps": self.trace.sweeps,
                                   "q": list(self.trace.final_q.q), "F": self.trace.final_F,
                                   "noise": self.trace.noise, "solves": self._engine.solves}
        if self.p and tuple(-v for v in reversed(self.p)) == self.p:
            details["symmetrized_max_F"] = symmetrized_residual(self.cfg, self.trace, self._engine)
        return details

    def _verify(self) -> Dict[str, Any]:
        coarse = self._engine.evaluate(self.trace.final_q)
        reports.write_periods(self._output_dir / "periods.csv", coarse)
        report = verify_solution(self.trace, self._engine)
        if not report.verified:
            raise PeriodError(f"periods at h/2 reach {report.max_abs_F:.3e} "
                              f"(tolerance {report.acceptance_tol:.3e})")
        return {"F_fine": report.F, "acceptance_tol": report.acceptance_tol,
                "handle_sizes": coarse.handle_sizes, "closedness_bounds": coarse.closedness_bounds,
                "ridge_cells": coarse.ridge_cells}

    def _build(self) -> Dict[str, Any]:
        settings = self._settings
        self.forms = self._engine.forms(self.trace.final_q)
        self.piece = build_fundamental_piece(self.cfg, self.trace.final_q, self.forms,
                                             mesh_tol=settings.get(SettingsKeys.Mesh.MESH_TOL))
        probe = embeddedness_probe(self.piece)
        return {"vertices": self.piece.n_vertices, "triangles": self.piece.n_triangles,
                "mesh_tol": self.piece.mesh_tol, "embeddedness": probe.describe(),
                "residual": self.forms.source_residual}

    def _extend(self) -> Dict[str, Any]:
        settings = self._settings
        self.mesh = extend_by_symmetry(self.piece,
                                       int(settings.get(SettingsKeys.Mesh.COPIES_X)),
                                       int(settings.get(SettingsKeys.Mesh.COPIES_Z)))
        return {"vertices": self.mesh.n_vertices, "triangles": self.mesh.n_triangles}

    def _export(self) -> Dict[str, Any]:
        fmt = str(self._settings.get(SettingsKeys.Mesh.FORMAT))
        path = export_mesh(self.mesh, self._output_dir / f"mesh.{fmt}", fmt)
        flux_tol = float(self._settings.get(SettingsKeys.Diagnostics.FLUX_TOL))
        reports.write_flux(self._output_dir / "diagnostics" / "flux.csv",
                           boundary_flux_pattern(self.forms.field, flux_tol))
        return {"mesh": str(path)}


def _flatten(config: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in config.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = "none" if value is None else value
    return flat


def _config_failure(target: Path, error: ConfigurationError) -> PipelineResult:
    logger.error("configuration error: %s", error)
    path = reports.write_summary(target / SUMMARY_FILENAME, {
        "failure": {"stage": Stage.CONFIG.value, "exit_code": EXIT_CONFIG,
                    "error": type(error).__name__, "message": str(error),
                    "key": getattr(error, "key", None) or "none"},
    })
    stage_error = PipelineStageError(Stage.CONFIG.value, str(error), EXIT_CONFIG, str(path))
    return PipelineResult(EXIT_CONFIG, target, RunState.FAILED, error=stage_error)


def run_pipeline(config_path: Optional[str], output_dir: Optional[str] = None) -> PipelineResult:
    """Load a config file and run every stage; construction failures become exit codes."""
    out = Path(output_dir) if output_dir else None
    fallback = out or Path(DEFAULT_OUTPUT_DIR)
    if config_path and not Path(config_path).exists():
        return _config_failure(fallback, ConfigFileError(f"config file not found: {config_path}"))
    try:
        settings = SettingsFactory.create(config_path)
    except ConfigurationError as e:
        return _config_failure(fallback, e)
    return PipelineRunner(settings, out).run()
