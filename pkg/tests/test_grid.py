import numpy as np
import pytest

from src.core.exceptions import DomainError
from src.core.grid import GridSpec


@pytest.fixture
def grid():
    return GridSpec.for_strip(0.5, (-2.0, 2.0), 0.25)


def _coords(grid):
    return np.tile(grid.x, grid.ny), np.repeat(grid.y, grid.nx)


def test_shape(grid):
    assert grid.shape == (5, 17)
    assert grid.n_triangles == 2 * 16 * 4
    assert grid.triangles.shape == (grid.n_triangles, 3)
    assert grid.axis_row == 2
    assert grid.y[grid.axis_row] == pytest.approx(0.0)
    assert grid.window == (-2.0, 2.0)


def test_window_must_fit_grid():
    with pytest.raises(DomainError):
        GridSpec.for_strip(0.5, (-2.0, 2.1), 0.25)


def test_triangles_counter_clockwise(grid):
    xs, ys = _coords(grid)
    a, b, c = grid.triangles.T
    signed = 0.5 * ((xs[b] - xs[a]) * (ys[c] - ys[a]) - (xs[c] - xs[a]) * (ys[b] - ys[a]))
    np.testing.assert_allclose(signed, grid.triangle_area)


def test_gradients_exact_on_linear_functions(grid):
    xs, ys = _coords(grid)
    gx, gy = grid.gradients(0.3 * xs - 0.7 * ys + 2.0)
    np.testing.assert_allclose(gx, 0.3)
    np.testing.assert_allclose(gy, -0.7)


def test_herringbone_mirrors_across_axis(grid):
    up = grid.diagonal_up
    assert np.array_equal(up[::-1], ~up)


def test_herringbone_period_two(grid):
    # 2 / h = 8 cells
    up = grid.diagonal_up
    assert np.array_equal(up[:, :-8], up[:, 8:])


def test_edge_triangles(grid):
    assert grid.top_edge_triangle(0, 0) == 1
    assert grid.bottom_edge_triangle(3, 1) == 2 * (1 * 16 + 3)
    for i in range(grid.nx - 1):
        right = int(grid.right_edge_triangle(i, 0))
        left = int(grid.left_edge_triangle(i, 0))
        assert {right % 2, left % 2} == {0, 1}


def test_refine(grid):
    fine = grid.refine(2)
    assert fine.hx == pytest.approx(grid.hx / 2)
    assert fine.window == grid.window
    assert fine.shape == (9, 33)


def test_upper_half(grid):
    upper = grid.upper_half()
    assert upper.ny == 3
    assert upper.y[0] == 0.0
    assert upper.y[-1] == pytest.approx(0.5)


def test_triangles_touching(grid):
    mask = np.zeros(grid.shape, dtype=bool)
    mask[2, 8] = True
    touching = grid.triangles_touching(mask)
    assert 1 <= touching.sum() <= 8
    centroids = grid.triangle_centroids[touching]
    assert np.all(np.hypot(centroids[:, 0] - grid.x[8], centroids[:, 1]) < grid.hx)
