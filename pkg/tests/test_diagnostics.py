import numpy as np
import pytest

from src.core.conjugation import build_forms, integrate_u
from src.core.exceptions import DomainError
from src.core.grid import GridSpec
from src.core.maximal_solver import ScalarField, solve_dirichlet
from src.core.strip_domain import SingularSet, check_admissible
from src.processing.diagnostics import (
    CurvatureReport,
    FluxClass,
    boundary_flux_classify,
    boundary_flux_pattern,
    curvature_field,
    divergence_ridges,
    expected_flux_class,
    gradient_floor_check,
    two_way_gradient_check,
)


@pytest.fixture(scope="module")
def upper():
    return GridSpec.for_strip(0.6, (-4.0, 4.0), 1.0 / 16.0).upper_half()


def _field(grid, fn):
    xx, yy = np.meshgrid(grid.x, grid.y)
    return ScalarField.from_values(grid, fn(xx, yy))


def test_expected_flux_class_alternates():
    assert expected_flux_class(0) == FluxClass.MINUS_INFINITY
    assert expected_flux_class(1) == FluxClass.PLUS_INFINITY
    assert expected_flux_class(-1) == FluxClass.PLUS_INFINITY


def test_top_edge_flux_pattern(empty_field):
    pattern = boundary_flux_pattern(empty_field, flux_tol=0.02)
    assert [(x0, x1) for x0, x1, _ in pattern] == [(float(k), float(k + 1)) for k in range(-4, 4)]
    for x0, _, cls in pattern:
        assert cls == expected_flux_class(int(x0))
    classes = [cls for _, _, cls in pattern]
    assert all(a != b for a, b in zip(classes, classes[1:]))


def test_interior_edge_is_finite(single_field):
    grid = single_field.grid
    y = grid.y[grid.axis_row]
    assert boundary_flux_classify(single_field, ((-3.0, y), (-2.0, y))) == FluxClass.FINITE


def test_flux_edge_must_be_horizontal(single_field):
    grid = single_field.grid
    with pytest.raises(DomainError):
        boundary_flux_classify(single_field, ((0.0, grid.y[0]), (0.0, grid.y[-1])))
    with pytest.raises(DomainError):
        boundary_flux_classify(single_field, ((0.01, 0.0), (1.0, 0.0)))
    with pytest.raises(DomainError):
        boundary_flux_classify(single_field, ((-9.0, 0.0), (1.0, 0.0)))


def _tent(x):
    return 1.0 - np.abs(np.mod(x, 2.0) - 1.0)


@pytest.fixture(scope="module")
def strip():
    return GridSpec.for_strip(0.6, (-4.0, 4.0), 1.0 / 16.0)


def test_flux_class_comes_from_the_interior_values(strip):
    # lightlike data on the top edge over a flat interior
    xx, yy = np.meshgrid(strip.x, strip.y)
    values = np.where(np.isclose(yy, strip.y[-1]), _tent(xx), 0.5)
    flat = ScalarField.from_values(strip, values)
    top = strip.y[-1]
    assert boundary_flux_classify(flat, ((1.0, top), (2.0, top))) == FluxClass.FINITE
    assert boundary_flux_classify(flat, ((0.0, top), (1.0, top))) == FluxClass.FINITE


def test_steep_interior_gives_divergent_flux(strip):
    xx, _ = np.meshgrid(strip.x, strip.y)
    steep = ScalarField.from_values(strip, _tent(xx))
    top, bottom = strip.y[-1], strip.y[0]
    assert boundary_flux_classify(steep, ((1.0, top), (2.0, top))) == FluxClass.PLUS_INFINITY
    assert boundary_flux_classify(steep, ((0.0, top), (1.0, top))) == FluxClass.MINUS_INFINITY
    assert boundary_flux_classify(steep, ((0.0, bottom), (1.0, bottom))) == FluxClass.PLUS_INFINITY
    assert boundary_flux_classify(steep, ((0.0, top), (1.0, top)), divergent_slope=1e6) == FluxClass.FINITE


def test_curvature_of_affine_graph_vanishes(upper):
    report = curvature_field(_field(upper, lambda x, y: 0.3 * x - 0.2 * y + 1.0))
    assert isinstance(report, CurvatureReport)
    assert report.max_abs < 1e-8
    assert np.isnan(report.K[0]).all()


def test_curvature_of_saddle(upper):
    report = curvature_field(_field(upper, lambda x, y: x * y))
    xx, yy = np.meshgrid(upper.x, upper.y)
    expected = -1.0 / (1.0 + xx ** 2 + yy ** 2) ** 2
    np.testing.assert_allclose(report.K[report.probe], expected[report.probe], rtol=1e-9)
    assert report.max_abs == pytest.approx(np.abs(expected[report.probe]).max())


def test_curvature_probe_avoids_boundary_vertices(upper):
    report = curvature_field(_field(upper, lambda x, y: x * y), delta=0.5)
    top = upper.ny - 2
    near_vertex = upper.column_of(1.0)
    assert not report.probe[top, near_vertex]
    assert report.probe[1, near_vertex]


def test_gradient_floor(single_field):
    assert gradient_floor_check(single_field, (0.0, 0.0), 0.0) > 0.0
    assert gradient_floor_check(single_field, (0.0, 0.0), 1e9) == 0.0


def test_gradient_floor_needs_a_special_point(single_field):
    with pytest.raises(DomainError):
        gradient_floor_check(single_field, (-2.0, 0.0), 1.0)
    assert gradient_floor_check(single_field, (-2.0, 0.0), 1e9, allow_regular=True) == 0.0


def test_two_way_gradient_check(single_field, single_forms):
    gap = two_way_gradient_check(single_field, integrate_u(single_forms))
    assert np.isfinite(gap)
    assert gap >= 0.0


def test_divergence_ridges(empty_field, single_field):
    assert divergence_ridges([]) == []
    ridges = divergence_ridges([empty_field]) + divergence_ridges([single_field])
    for ridge in ridges:
        assert ridge.cells >= 3
        assert ridge.length >= 0.0


@pytest.mark.parametrize("q", [0.0, 1.0 / 16.0, -1.0 / 16.0])
def test_no_ridges_at_admissible_offsets(cfg, q):
    field = solve_dirichlet(cfg, SingularSet(q=(q,), p=(0,)))
    assert divergence_ridges([field]) == []


def test_no_ridges_on_the_handle_free_layer(empty_field):
    assert divergence_ridges([empty_field]) == []


@pytest.mark.slow
def test_ridges_point_at_the_odd_vertices_near_the_box_edge(cfg):
    fine = cfg.with_grid_h(1.0 / 32.0)
    q = 0.1875
    assert check_admissible(fine, SingularSet(q=(q,), p=(0,)))
    field = solve_dirichlet(fine, SingularSet(q=(q,), p=(0,)))
    ridges = divergence_ridges([field], ridge_eps=0.05)
    assert ridges

    def aligned(ridge, target):
        direction = np.subtract(ridge.end, ridge.start)
        target = np.asarray(target) / np.hypot(*target)
        return abs(direction @ target) >= np.cos(np.radians(25.0)) * np.hypot(*direction)

    ell = fine.ell
    upper = [r for r in ridges if r.start[1] + r.end[1] > 0.0]
    lower = [r for r in ridges if r.start[1] + r.end[1] < 0.0]
    assert any(aligned(r, (1.0 - q, ell)) for r in upper)
    assert any(aligned(r, (1.0 - q, -ell)) for r in lower)


def test_gradient_floor_near_the_singular_node(single_field):
    floors = [gradient_floor_check(single_field, (0.0, 0.0), C) for C in (0.0, 0.5, 1.0)]
    assert floors[-1] > 0.0
    assert floors[0] >= floors[1] >= floors[2]


def test_gradient_floor_at_a_lightlike_cone(strip):
    # |x| + |y| is steeper than light everywhere; with a tiny cap |grad u| is huge
    xx, yy = np.meshgrid(strip.x, strip.y)
    cone = ScalarField.from_values(strip, np.abs(xx) + np.abs(yy), eps_cap=1e-8)
    assert gradient_floor_check(cone, (0.0, 0.0), 100.0, allow_regular=True) >= strip.hx


def test_two_way_gradient_check_is_exact_for_affine_data(strip):
    xx, yy = np.meshgrid(strip.x, strip.y)
    affine = ScalarField.from_values(strip, 0.5 + 0.3 * xx + 0.2 * yy)
    gap = two_way_gradient_check(affine, integrate_u(build_forms(affine)))
    assert gap < 1e-9
