from dataclasses import replace

import numpy as np
import pytest

from src.core.conjugation import build_forms, handle_size, integrate_u
from src.core.exceptions import MeshError, WeldMismatchError
from src.processing.surface_builder import (
    EmbeddednessReport,
    SurfaceMesh,
    build_fundamental_piece,
    embeddedness_probe,
    extend_by_symmetry,
    isometry_deviation,
    symmetry_curve_planarity,
    weld,
)
from src.core.maximal_solver import solve_dirichlet
from src.core.period_engine import PeriodEngine
from src.core.period_solver import solve_periods
from src.core.strip_domain import SingularSet, StripConfig


@pytest.fixture(scope="module")
def empty_piece(cfg, empty_forms):
    return build_fundamental_piece(cfg, SingularSet.empty(), empty_forms)


@pytest.fixture(scope="module")
def single_piece(cfg, single_forms):
    return build_fundamental_piece(cfg, SingularSet.centred([0]), single_forms)


def test_piece_has_one_vertex_per_upper_node(empty_piece, empty_forms):
    grid = empty_forms.grid
    assert empty_piece.n_vertices == grid.nx * (grid.ny - grid.axis_row)
    assert empty_piece.n_vertices == 129 * 11
    assert empty_piece.triangles.max() < empty_piece.n_vertices
    assert (empty_piece.copy_ids == 0).all()


def test_x3_is_v(single_piece):
    x3 = single_piece.vertices[:, 2]
    assert x3.min() >= -1e-10
    assert x3.max() <= 1.0 + 1e-10


def test_base_vertex_at_origin(single_piece, single_forms):
    base = single_forms.grid.column_of(-1.0)
    x1, x2, _ = single_piece.vertices[base]
    assert x1 == 0.0
    assert x2 == 0.0
    assert single_piece.domain_points[base] == pytest.approx((-1.0, 0.0))


def test_boundary_tags(single_piece, empty_piece):
    assert len(single_piece.tagged("plane_z0")) == 1
    assert len(empty_piece.tagged("plane_z0")) == 0
    # integer x on the top edge of the window (-4, 4)
    assert len(single_piece.tagged("vertical_line_Ak")) == 9
    assert len(single_piece.boundary_tags) == single_piece.n_vertices
    assert "plane_z1" not in single_piece.boundary_tags


def test_tagged_vertices_lie_on_their_planes(single_piece):
    tol = single_piece.mesh_tol
    np.testing.assert_array_less(np.abs(single_piece.vertices[single_piece.tagged("plane_z0"), 2]), tol)
    np.testing.assert_array_less(np.abs(single_piece.vertices[single_piece.tagged("plane_x0"), 0]), tol)

    corners = single_piece.tagged("vertical_line_Ak")
    x = np.round(single_piece.domain_points[corners, 0]).astype(int)
    x3 = single_piece.vertices[corners, 2]
    np.testing.assert_array_less(np.abs(x3[x % 2 == 0]), tol)
    np.testing.assert_array_less(np.abs(x3[x % 2 == 1] - 1.0), tol)


def test_metadata(single_piece):
    assert set(single_piece.metadata) >= {"ell", "h", "p", "q", "base"}
    assert single_piece.metadata["p"] == "0"


def test_base_must_be_a_regular_axis_node(cfg, single_forms):
    with pytest.raises(MeshError):
        build_fundamental_piece(cfg, SingularSet.centred([0]), single_forms, base_x=0.0)
    with pytest.raises(MeshError):
        build_fundamental_piece(cfg, SingularSet.centred([0]), single_forms, base_x=-1.01)


def test_extend_without_copies_keeps_the_piece(empty_piece):
    extended = extend_by_symmetry(empty_piece, 0, 0)
    assert extended.n_vertices == empty_piece.n_vertices
    assert extended.n_triangles == empty_piece.n_triangles


@pytest.mark.parametrize("copies_x, copies_z", [(2, 0), (-1, 0), (1, -1)])
def test_extend_rejects_copy_counts(empty_piece, copies_x, copies_z):
    with pytest.raises(MeshError):
        extend_by_symmetry(empty_piece, copies_x, copies_z)


def test_extend_empty_mesh():
    assert extend_by_symmetry(SurfaceMesh.empty(), 1, 1).n_vertices == 0


def test_seam_off_plane_is_a_weld_mismatch(empty_piece):
    broken = replace(empty_piece, vertices=empty_piece.vertices.copy())
    broken.vertices[broken.tagged("plane_x0")[3], 0] = 1.0
    with pytest.raises(WeldMismatchError):
        extend_by_symmetry(broken, 1, 0)


def test_reflection_welds_along_the_axis(empty_piece, empty_forms):
    nx = empty_forms.grid.nx
    extended = extend_by_symmetry(empty_piece, 1, 0)
    assert empty_piece.n_vertices < extended.n_vertices <= 2 * empty_piece.n_vertices - nx
    assert set(np.unique(extended.copy_ids)) == {0, 1}


def test_vertical_extension_doubles_layers(empty_piece):
    layer = extend_by_symmetry(empty_piece, 1, 0)
    slab = extend_by_symmetry(empty_piece, 1, 1)
    assert slab.n_vertices > layer.n_vertices
    assert 1.9 < slab.vertices[:, 2].max() <= 2.0 + 1e-10


def test_weld_only_joins_different_copies(empty_piece):
    welded = weld(empty_piece, tol=0.25)
    assert welded.n_vertices == empty_piece.n_vertices


def test_embeddedness_report(single_piece):
    report = embeddedness_probe(single_piece)
    assert isinstance(report, EmbeddednessReport)
    assert report.checked_vertices == single_piece.n_vertices
    assert report.violations == 0
    assert bool(report)
    assert "column collisions" in report.describe()


def test_symmetry_curve_planarity(single_piece, empty_piece):
    segments = symmetry_curve_planarity(single_piece)
    assert set(segments) == {0, 1}
    assert max(segments.values()) <= single_piece.mesh_tol
    assert symmetry_curve_planarity(empty_piece)[0] < empty_piece.mesh_tol


def test_isometry_needs_the_unextended_piece(empty_piece, empty_forms):
    extended = extend_by_symmetry(empty_piece, 1, 0)
    with pytest.raises(MeshError):
        isometry_deviation(extended, integrate_u(empty_forms))


@pytest.mark.slow
def test_isometry_with_graph_of_u(empty_piece, empty_forms):
    deviation = isometry_deviation(empty_piece, integrate_u(empty_forms))
    assert 0.0 <= deviation < 0.1


@pytest.mark.slow
def test_symmetry_curves_planar_after_period_solve():
    cfg = StripConfig(ell=0.6, grid_h=1.0 / 32.0)
    with PeriodEngine(cfg) as engine:
        trace = solve_periods(cfg, (0,), 0.15, engine=engine)
        forms = engine.forms(trace.final_q)
    piece = build_fundamental_piece(cfg, trace.final_q, forms)
    assert max(symmetry_curve_planarity(piece).values()) <= piece.mesh_tol
    assert embeddedness_probe(piece).violations == 0


@pytest.mark.slow
def test_handle_size_stable_under_refinement(cfg):
    coarse = build_forms(solve_dirichlet(cfg, SingularSet.centred([0])), loop_radius=0.25)
    fine_cfg = cfg.with_grid_h(cfg.grid_h / 2.0)
    fine = build_forms(solve_dirichlet(fine_cfg, SingularSet.centred([0])), loop_radius=0.25)
    coarse_size, fine_size = abs(handle_size(coarse, 0)), abs(handle_size(fine, 0))
    assert coarse_size > 0.0
    assert fine_size == pytest.approx(coarse_size, rel=0.1)
