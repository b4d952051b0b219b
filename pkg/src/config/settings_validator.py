from typing import Dict, Any, List, Tuple, Optional, Callable

from .defaults import get_default_config
from .keys import SettingsKeys
from ..utils.validators import (
    validate_ell,
    validate_grid_h,
    validate_window,
    validate_index_window,
    validate_p_list,
    validate_generator,
    validate_eta0,
    validate_positive,
    validate_positive_int,
    validate_fraction,
    validate_mesh_format,
    validate_alpha,
    validate_copies_x,
)


class ValidationResult:
    def __init__(self, is_valid: bool, errors: Optional[List[str]] = None):
        self.is_valid = is_valid
        self.errors = errors or []
        self.keys: List[str] = []

    def __bool__(self) -> bool:
        return self.is_valid

    def add_error(self, error: str, key: Optional[str] = None) -> None:
        self.errors.append(error)
        if key is not None:
            self.keys.append(key)
        self.is_valid = False


class SettingsValidator:
    VALIDATORS: Dict[str, Tuple[Callable[[Any], Tuple[bool, Optional[str]]], bool]] = {
        SettingsKeys.Strip.ELL: (validate_ell, True),
        SettingsKeys.Strip.GRID_H: (validate_grid_h, True),
        SettingsKeys.Strip.X_WINDOW: (validate_window, False),
        SettingsKeys.Handles.GENERATOR: (validate_generator, True),
        SettingsKeys.Handles.P_LIST: (validate_p_list, False),
        SettingsKeys.Handles.ALPHA: (validate_alpha, False),
        SettingsKeys.Handles.WINDOW: (validate_index_window, False),
        SettingsKeys.Solver.TOL_PDE: (lambda v: validate_positive(v, 'tol_pde'), True),
        SettingsKeys.Solver.MAX_ITER: (lambda v: validate_positive_int(v, 'max_iter'), True),
        SettingsKeys.Solver.EPS_CAP: (lambda v: validate_positive(v, 'eps_cap', allow_none=True), False),
        SettingsKeys.Solver.EPS_BDRY: (lambda v: validate_positive(v, 'eps_bdry', allow_none=True), False),
        SettingsKeys.Periods.ETA0: (validate_eta0, False),
        SettingsKeys.Periods.TOL_F: (lambda v: validate_positive(v, 'tol_f'), True),
        SettingsKeys.Periods.F_THRESHOLD: (lambda v: validate_positive(v, 'f_threshold'), True),
        SettingsKeys.Periods.LOOP_RADIUS: (lambda v: validate_positive(v, 'loop_radius', allow_none=True), False),
        SettingsKeys.Periods.SAMPLES_PER_FACE: (lambda v: validate_positive_int(v, 'samples_per_face'), True),
        SettingsKeys.Periods.SCAN_RESOLUTION: (lambda v: validate_positive_int(v, 'scan_resolution', 2), True),
        SettingsKeys.Periods.MAX_SWEEPS: (lambda v: validate_positive_int(v, 'max_sweeps'), True),
        SettingsKeys.Periods.SEED: (lambda v: validate_positive_int(v, 'seed', 0), False),
        SettingsKeys.Mesh.COPIES_X: (validate_copies_x, False),
        SettingsKeys.Mesh.COPIES_Z: (lambda v: validate_positive_int(v, 'copies_z', 0), False),
        SettingsKeys.Mesh.FORMAT: (validate_mesh_format, False),
        SettingsKeys.Mesh.MESH_TOL: (lambda v: validate_positive(v, 'mesh_tol', allow_none=True), False),
        SettingsKeys.Diagnostics.FLUX_TOL: (lambda v: validate_fraction(v, 'flux_tol'), False),
        SettingsKeys.Diagnostics.RIDGE_EPS: (lambda v: validate_positive(v, 'ridge_eps', allow_none=True), False),
        SettingsKeys.Output.DIR: (lambda v: (True, None) if isinstance(v, str) and v else (False, "output dir must be a non-empty string"), False),
        SettingsKeys.Output.THREADS: (lambda v: validate_positive_int(v, 'threads'), False),
    }

    @classmethod
    def is_known_key(cls, key: str) -> bool:
        return key in cls.VALIDATORS

    @classmethod
    def validate_setting(cls, key: str, value: Any) -> Tuple[bool, Optional[str]]:
        if key in cls.VALIDATORS:
            validator, _ = cls.VALIDATORS[key]
            return validator(value)
        return True, None

    @classmethod
    def validate_section(cls, section: str, values: Dict[str, Any]) -> ValidationResult:
        result = ValidationResult(True)

        for key, value in values.items():
            full_key = f"{section}.{key}"
            is_valid, error = cls.validate_setting(full_key, value)
            if not is_valid:
                result.add_error(f"{key}: {error}", full_key)

        return result

    @classmethod
    def validate_config(cls, config: Dict[str, Any]) -> ValidationResult:
        result = ValidationResult(True)

        for section, values in config.items():
            if isinstance(values, dict):
                section_result = cls.validate_section(section, values)
                for error, key in zip(section_result.errors, section_result.keys):
                    result.add_error(f"{section}.{error}", key)

        return result

    @classmethod
    def unknown_keys(cls, config: Dict[str, Any]) -> List[str]:
        defaults = get_default_config()
        unknown: List[str] = []

        for section, values in config.items():
            if section not in defaults or not isinstance(values, dict):
                unknown.append(section)
                continue
            for key in values:
                if f"{section}.{key}" not in cls.VALIDATORS:
                    unknown.append(f"{section}.{key}")

        return unknown

