# input validation utilities

import math
from typing import Any, Optional, Tuple

from ..config.defaults import (
    MIN_ELL,
    MAX_ELL,
    MAX_GRID_H,
    GRID_ALIGNMENT_TOL,
    GENERATORS,
    MESH_FORMATS,
)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_ell(value: Any) -> Tuple[bool, Optional[str]]:
    if not _is_number(value):
        return False, "ell must be a number"
    if not MIN_ELL < value < MAX_ELL:
        return False, f"ell must lie in ({MIN_ELL}, {MAX_ELL})"
    return True, None


def validate_grid_h(value: Any) -> Tuple[bool, Optional[str]]:
    if not _is_number(value):
        return False, "grid_h must be a number"
    if value <= 0 or value > MAX_GRID_H:
        return False, f"grid_h must lie in (0, {MAX_GRID_H}]"
    inverse = 1.0 / value
    if abs(inverse - round(inverse)) > GRID_ALIGNMENT_TOL * max(1.0, inverse):
        return False, "1/grid_h must be an integer so the vertices a_k are grid nodes"
    return True, None


def validate_window(value: Any) -> Tuple[bool, Optional[str]]:
    if value is None:
        return True, None
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return False, "window must be a pair [left, right]"
    left, right = value
    if not (_is_number(left) and _is_number(right)):
        return False, "window ends must be numbers"
    if left >= right:
        return False, "window must satisfy left < right"
    for end in (left, right):
        if abs(end - round(end)) > GRID_ALIGNMENT_TOL or int(round(end)) % 2 != 0:
            return False, "window ends must be even integers"
    return True, None


def validate_index_window(value: Any) -> Tuple[bool, Optional[str]]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return False, "index window must be a pair [i_min, i_max]"
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return False, "index window ends must be integers"
    if value[0] > value[1]:
        return False, "index window must satisfy i_min <= i_max"
    return True, None


def validate_p_list(value: Any) -> Tuple[bool, Optional[str]]:
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)):
        return False, "p_list must be a list of integers"
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return False, "p_list entries must be integers"
    if any(b <= a for a, b in zip(value, value[1:])):
        return False, "p_list must be strictly increasing"
    return True, None


def validate_generator(value: Any) -> Tuple[bool, Optional[str]]:
    if not isinstance(value, str) or value.lower() not in GENERATORS:
        return False, f"generator must be one of: {', '.join(GENERATORS)}"
    return True, None


def validate_eta0(value: Any) -> Tuple[bool, Optional[str]]:
    if value is None:
        return True, None
    if isinstance(value, str):
        if value.lower() == "calibrate":
            return True, None
        return False, "eta0 must be a number or 'calibrate'"
    if not _is_number(value) or value <= 0:
        return False, "eta0 must be positive"
    return True, None


def validate_positive(value: Any, name: str, allow_none: bool = False) -> Tuple[bool, Optional[str]]:
    if value is None and allow_none:
        return True, None
    if not _is_number(value):
        return False, f"{name} must be a number"
    if value <= 0:
        return False, f"{name} must be positive"
    return True, None


def validate_positive_int(value: Any, name: str, minimum: int = 1) -> Tuple[bool, Optional[str]]:
    if not isinstance(value, int) or isinstance(value, bool):
        return False, f"{name} must be an integer"
    if value < minimum:
        return False, f"{name} must be at least {minimum}"
    return True, None


def validate_fraction(value: Any, name: str) -> Tuple[bool, Optional[str]]:
    if not _is_number(value):
        return False, f"{name} must be a number"
    if not 0 < value < 1:
        return False, f"{name} must lie in (0, 1)"
    return True, None


def validate_mesh_format(value: Any) -> Tuple[bool, Optional[str]]:
    if not isinstance(value, str) or value.lower() not in MESH_FORMATS:
        return False, f"mesh format must be one of: {', '.join(MESH_FORMATS)}"
    return True, None


def validate_alpha(value: Any) -> Tuple[bool, Optional[str]]:
    if _is_number(value):
        if value <= 1:
            return False, "alpha must exceed 1"
        return True, None
    if isinstance(value, str) and value.strip():
        return True, None
    return False, "alpha must be a number or a named irrational such as sqrt2"


def validate_copies_x(value: Any) -> Tuple[bool, Optional[str]]:
    # only the reflection across X1 = 0 is available in x
    if isinstance(value, bool) or value not in (0, 1):
        return False, "copies_x must be 0 or 1"
    return True, None
