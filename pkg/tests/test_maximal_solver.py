import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.config.defaults import VERTEX_ZONE_CELLS
from src.core.exceptions import AdmissibilityError, DomainError, LightlikeCellError
from src.core.maximal_solver import (
    CappedArea,
    SolverOptions,
    dirichlet_values,
    dump_binary,
    dump_csv,
    exhaustion_probe,
    load_binary,
    node_residuals,
    refine_and_resolve,
    residual,
    solve_dirichlet,
    triangle_gradients,
)
from src.core.strip_domain import SingularSet, check_admissible


@given(st.floats(min_value=0.0, max_value=2.0))
def test_capped_area_is_smooth_at_the_cap(s):
    cap = CappedArea(1.0 / 256.0)
    values = np.array([s])
    assert cap.dpsi(values)[0] > 0.0
    assert cap.d2psi(values)[0] > 0.0
    assert cap.weight(values)[0] > 0.0


def test_capped_area_continuity():
    cap = CappedArea(0.01)
    below = np.array([cap.s_cap - 1e-12])
    above = np.array([cap.s_cap + 1e-12])
    assert cap.psi(below)[0] == pytest.approx(cap.psi(above)[0], abs=1e-9)
    assert cap.dpsi(below)[0] == pytest.approx(cap.dpsi(above)[0], rel=1e-6)


def test_capped_area_matches_area_integrand_below_cap():
    cap = CappedArea(0.01)
    s = np.array([0.0, 0.25, 0.5])
    np.testing.assert_allclose(cap.psi(s), -np.sqrt(1.0 - s))
    np.testing.assert_allclose(cap.weight(s), np.sqrt(1.0 - s))


def test_dirichlet_values_contracted(cfg):
    grid = cfg.grid_for(SingularSet.empty())
    eps = 5.0 * cfg.grid_h ** 2
    data = dirichlet_values(grid, eps)
    top = data[-1]
    assert top.min() == pytest.approx(eps / 2)
    assert top.max() == pytest.approx(1.0 - eps / 2)
    np.testing.assert_allclose(data[1:-1, 0], eps / 2)
    np.testing.assert_allclose(data[1:-1, -1], eps / 2)


def test_values_between_zero_and_one(empty_field, single_field):
    for field in (empty_field, single_field):
        assert field.values.min() >= -1e-10
        assert field.values.max() <= 1.0 + 1e-10


def test_singular_node_pinned_to_zero(single_field):
    grid = single_field.grid
    (column,) = single_field.singular_columns
    assert grid.x[column] == pytest.approx(0.0)
    assert single_field.values[grid.axis_row, column] == 0.0
    assert single_field.pinned[grid.axis_row, column]


def test_reflection_symmetry(empty_field, single_field):
    for field in (empty_field, single_field):
        np.testing.assert_allclose(field.values, field.values[::-1], atol=1e-12)
        np.testing.assert_allclose(field.values, field.values[:, ::-1], atol=1e-12)


def test_residual_below_tolerance(empty_field, single_field):
    for field in (empty_field, single_field):
        assert residual(field) <= field.tol_pde
        assert residual(field) == pytest.approx(field.residual_norm)
        free = node_residuals(field)[field.free_mask]
        assert np.abs(free).max() <= field.tol_pde


def test_gradient_bounded_by_cap(single_field):
    gx, gy = triangle_gradients(single_field)
    grid = single_field.grid
    away = ~grid.triangles_touching(single_field.pinned) & ~grid.vertex_zone(VERTEX_ZONE_CELLS)
    assert np.hypot(gx, gy)[away].max() < 1.0
    assert single_field.ridge_cells == 0


def test_extrema_on_pinned_nodes(empty_field, single_field):
    for field in (empty_field, single_field):
        pinned = field.values[field.pinned]
        assert field.values.min() >= pinned.min() - 1e-10
        assert field.values.max() <= pinned.max() + 1e-10


def test_near_lightlike_solve_returns_flagged_field(cfg):
    # q = 3h leaves the segment to (1, ell) only just longer than 1
    field = solve_dirichlet(cfg, SingularSet(q=(0.1875,), p=(0,)))
    assert field.residual_norm <= field.tol_pde
    assert field.ridge_mask.shape == (field.grid.n_triangles,)
    assert field.ridge_cells == int(np.count_nonzero(field.ridge_mask))
    if field.ridge_cells:
        with pytest.raises(LightlikeCellError):
            residual(field)


@pytest.mark.slow
def test_fine_grid_solve_keeps_lightlike_cells_at_corners(cfg):
    fine = cfg.with_grid_h(1.0 / 32.0)
    field = solve_dirichlet(fine, SingularSet.centred([0]))
    assert field.residual_norm <= field.tol_pde
    assert field.ridge_cells == 0
    assert residual(field) <= field.tol_pde
    np.testing.assert_allclose(field.values, field.values[::-1], atol=1e-10)


@pytest.mark.slow
def test_nested_start_converges_at_h_1_64(cfg):
    finest = cfg.with_grid_h(1.0 / 64.0)
    field = solve_dirichlet(finest, SingularSet.centred([0]))
    assert field.residual_norm <= field.tol_pde
    assert field.ridge_cells == 0
    (column,) = field.singular_columns
    assert field.values[field.grid.axis_row, column] == 0.0


_single = st.sampled_from([-3, -2, -1, 0, 1, 2, 3]).map(lambda k: SingularSet(q=(k / 16.0,), p=(0,)))
_triple = st.tuples(*[st.integers(-2, 2)] * 3).map(
    lambda ks: SingularSet(q=(-6.0 + ks[0] / 16.0, ks[1] / 16.0, 6.0 + ks[2] / 16.0), p=(-3, 0, 3)))


@pytest.mark.slow
@settings(max_examples=10)
@given(_single | _triple)
def test_random_admissible_configurations(cfg, S):
    assert check_admissible(cfg, S)
    field = solve_dirichlet(cfg, S)
    assert field.residual_norm <= field.tol_pde
    pinned = field.values[field.pinned]
    assert pinned.min() - 1e-10 <= field.values.min()
    assert field.values.max() <= pinned.max() + 1e-10
    grid = field.grid
    for column in field.singular_columns:
        assert field.values[grid.axis_row, column] == 0.0


def test_inadmissible_set_rejected(cfg):
    with pytest.raises(AdmissibilityError):
        solve_dirichlet(cfg, SingularSet(q=(0.9,), p=(0,)))


def test_tol_override(cfg):
    field = solve_dirichlet(cfg, SingularSet.empty(), tol_pde=1e-6)
    assert field.tol_pde == 1e-6
    assert field.residual_norm <= 1e-6


def test_binary_dump_round_trip(tmp_path, single_field):
    path = dump_binary(single_field, tmp_path / "v.bin")
    header = path.read_bytes().split(b"\n")[:4]
    assert header[0] == f"nx {single_field.grid.nx}".encode()
    loaded = load_binary(path)
    assert loaded.grid.shape == single_field.grid.shape
    assert loaded.grid.window == single_field.grid.window
    np.testing.assert_array_equal(loaded.values, single_field.values)


def test_binary_dump_truncated(tmp_path, empty_field):
    path = dump_binary(empty_field, tmp_path / "v.bin")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DomainError):
        load_binary(path)


def test_csv_dump(tmp_path, empty_field):
    path = dump_csv(empty_field, tmp_path / "v.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,v"
    assert len(lines) == 1 + empty_field.grid.n_nodes


@pytest.mark.parametrize("factor", [1, 9, 2.0])
def test_refine_rejects_bad_factor(empty_field, factor):
    with pytest.raises(DomainError):
        refine_and_resolve(empty_field, factor)


@pytest.mark.slow
def test_refine_keeps_pins(single_field):
    fine = refine_and_resolve(single_field, 2)
    assert fine.h == pytest.approx(single_field.h / 2)
    assert fine.singular_columns == (2 * single_field.singular_columns[0],)
    assert fine.residual_norm <= fine.tol_pde


@pytest.mark.slow
def test_exhaustion_changes_shrink(cfg):
    changes = exhaustion_probe(cfg, SingularSet.centred([0]), steps=2,
                               options=SolverOptions(tol_pde=1e-11), threads=2)
    assert len(changes) == 2
    assert changes[0] > 0.0
    assert changes[1] < changes[0]
