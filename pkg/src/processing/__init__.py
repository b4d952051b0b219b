# processing: surface construction, mesh files, diagnostics and reports

from .surface_builder import (
    SurfaceMesh,
    build_fundamental_piece,
    extend_by_symmetry,
    embeddedness_probe,
    isometry_deviation,
)
from .mesh_export import export_mesh, load_mesh
from .diagnostics import (
    FluxClass,
    boundary_flux_classify,
    curvature_field,
    divergence_ridges,
    gradient_floor_check,
)

__all__ = [
    "SurfaceMesh",
    "build_fundamental_piece",
    "extend_by_symmetry",
    "embeddedness_probe",
    "isometry_deviation",
    "export_mesh",
    "load_mesh",
    "FluxClass",
    "boundary_flux_classify",
    "curvature_field",
    "divergence_ridges",
    "gradient_floor_check",
]
