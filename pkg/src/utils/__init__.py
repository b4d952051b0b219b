# utilities for the surface construction pipeline

# settings load before the validators they use
from ..config import defaults as _defaults  # noqa: F401

from .validators import (
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
from .parallel import WorkerPool, parallel_map

__all__ = [
    "validate_ell",
    "validate_grid_h",
    "validate_window",
    "validate_index_window",
    "validate_p_list",
    "validate_generator",
    "validate_eta0",
    "validate_positive",
    "validate_positive_int",
    "validate_fraction",
    "validate_mesh_format",
    "validate_alpha",
    "validate_copies_x",
    "WorkerPool",
    "parallel_map",
]
