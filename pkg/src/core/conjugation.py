"""
Discrete conjugate 1-forms of a solved maximal graph.

All forms are constant on each triangle. Path integrals run on the dual
lattice of cell centres: a horizontal move between neighbouring centres
crosses one vertical edge at its midpoint, a vertical move crosses one
horizontal edge, and each half move lies inside a single triangle. With
this quadrature the counter-clockwise loop of du around a free node equals
hx * hy times the solver residual at that node.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .exceptions import ConjugationError, LoopPlacementError, HalfStripError
from .grid import GridSpec
from .maximal_solver import ScalarField, CappedArea, triangle_gradients
from ..config.defaults import DEFAULT_LOOP_RADIUS_CELLS, EXCLUSION_RADIUS_FACTOR, DEFAULT_BASE_X, VERTEX_ZONE_CELLS

logger = logging.getLogger(__name__)

FORM_NAMES = ("du", "dX1", "dX2", "dX3")


def du_from_v_gradient(gx, gy, weight) -> Tuple[np.ndarray, np.ndarray]:
    return gy / weight, -gx / weight


def dx1_from_u_gradient(ux, uy) -> Tuple[np.ndarray, np.ndarray]:
    norm = np.sqrt(1.0 + ux * ux + uy * uy)
    return ux * uy / norm, (1.0 + uy * uy) / norm


def dx2_from_u_gradient(ux, uy) -> Tuple[np.ndarray, np.ndarray]:
    norm = np.sqrt(1.0 + ux * ux + uy * uy)
    return -(1.0 + ux * ux) / norm, -ux * uy / norm


def dx1_from_v_gradient(gx, gy, weight) -> Tuple[np.ndarray, np.ndarray]:
    # u_x = v_y / W, u_y = -v_x / W, sqrt(1 + |grad u|^2) = 1 / W
    return -gx * gy / weight, (1.0 - gy * gy) / weight


def dx2_from_v_gradient(gx, gy, weight) -> Tuple[np.ndarray, np.ndarray]:
    return -(1.0 - gx * gx) / weight, gx * gy / weight


@dataclass
class ConjugateForms:
    field: ScalarField
    du: np.ndarray
    dX1: np.ndarray
    dX2: np.ndarray
    dX3: np.ndarray
    weight: np.ndarray
    source_residual: float
    flagged: np.ndarray
    loop_radius_cells: int = DEFAULT_LOOP_RADIUS_CELLS

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    @property
    def dPhi(self) -> np.ndarray:
        return self.du

    @property
    def ridge(self) -> np.ndarray:
        """Flagged triangles outside the data corners."""
        return self.flagged & ~self.grid.vertex_zone(VERTEX_ZONE_CELLS)

    def form(self, name: str) -> np.ndarray:
        if name not in FORM_NAMES:
            raise ConjugationError(f"unknown form {name!r}; expected one of {FORM_NAMES}")
        return getattr(self, name)

    def singular_column(self, i: int) -> int:
        columns = self.field.singular_columns
        if not 0 <= i < len(columns):
            raise LoopPlacementError(f"singularity index {i} out of range (N={len(columns)})")
        return columns[i]


def build_forms(field: ScalarField, loop_radius: Optional[float] = None) -> ConjugateForms:
    grid = field.grid
    gx, gy = triangle_gradients(field)
    s = gx * gx + gy * gy
    cap = CappedArea(field.eps_cap or grid.hx * grid.hx)
    weight = cap.weight(s)

    near_light = s >= (1.0 - cap.eps_cap / 2.0) ** 2
    flagged = near_light & ~grid.triangles_touching(field.pinned)
    if flagged.any():
        at_corners = int(np.count_nonzero(flagged & grid.vertex_zone(VERTEX_ZONE_CELLS)))
        logger.info("%d near-lightlike triangles excluded from closedness checks (%d at data corners)",
                    int(flagged.sum()), at_corners)

    k = DEFAULT_LOOP_RADIUS_CELLS if loop_radius is None else int(round(loop_radius / grid.hx))
    if k < 1:
        raise LoopPlacementError(f"loop radius {loop_radius} is below one cell")

    return ConjugateForms(
        field=field,
        du=np.stack(du_from_v_gradient(gx, gy, weight), axis=-1),
        dX1=np.stack(dx1_from_v_gradient(gx, gy, weight), axis=-1),
        dX2=np.stack(dx2_from_v_gradient(gx, gy, weight), axis=-1),
        dX3=np.stack([gx, gy], axis=-1),
        weight=weight,
        source_residual=max(field.residual_norm, field.tol_pde),
        flagged=flagged,
        loop_radius_cells=k,
    )


def _component(forms: ConjugateForms, name: str, axis: int) -> np.ndarray:
    grid = forms.grid
    return forms.form(name)[:, axis].reshape(grid.ny - 1, grid.nx - 1, 2)


def dual_moves(forms: ConjugateForms, name: str) -> Tuple[np.ndarray, np.ndarray]:
    """Integrals over unit dual moves.

    right[j, i]: centre (i, j) -> centre (i + 1, j), shape (ny - 1, nx - 2)
    up[j, i]:    centre (i, j) -> centre (i, j + 1), shape (ny - 2, nx - 1)
    """
    grid = forms.grid
    p = _component(forms, name, 0)
    q = _component(forms, name, 1)
    up_diag = grid.diagonal_up

    # kind of the triangle holding the right (left) edge of each cell
    right_kind = np.where(up_diag, 0, 1)
    left_kind = 1 - right_kind
    p_right = np.take_along_axis(p, right_kind[..., None], axis=-1)[..., 0]
    p_left = np.take_along_axis(p, left_kind[..., None], axis=-1)[..., 0]

    right = 0.5 * grid.hx * (p_right[:, :-1] + p_left[:, 1:])
    up = 0.5 * grid.hy * (q[:-1, :, 1] + q[1:, :, 0])
    return right, up


def _loop_bounds(forms: ConjugateForms, column: int, row: int, k: int) -> None:
    grid = forms.grid
    if k < 1:
        raise LoopPlacementError("loop half-width must be at least one cell")
    if column - k < 0 or column + k > grid.nx - 1 or row - k < 0 or row + k > grid.ny - 1:
        raise LoopPlacementError(
            f"loop of half-width {k} cells around node ({column}, {row}) leaves the grid"
        )


def loop_integral(forms: ConjugateForms, column: int, row: int, name: str = "du",
                  k: Optional[int] = None) -> float:
    """Counter-clockwise integral around the dual rectangle enclosing the
    (2k - 1) x (2k - 1) nodes centred on (column, row)."""
    k = forms.loop_radius_cells if k is None else k
    _loop_bounds(forms, column, row, k)
    right, up = dual_moves(forms, name)
    a, b = column, row
    total = (
        right[b - k, a - k:a + k - 1].sum()
        + up[b - k:b + k - 1, a + k - 1].sum()
        - right[b + k - 1, a - k:a + k - 1].sum()
        - up[b - k:b + k - 1, a - k].sum()
    )
    return float(total)


def enclosed_free_nodes(forms: ConjugateForms, column: int, row: int, k: int) -> int:
    a, b = column, row
    pinned = forms.field.pinned[b - k + 1:b + k, a - k + 1:a + k]
    return int(pinned.size - np.count_nonzero(pinned))


def closedness_bound(forms: ConjugateForms, column: int, row: int, k: Optional[int] = None) -> float:
    k = forms.loop_radius_cells if k is None else k
    grid = forms.grid
    return enclosed_free_nodes(forms, column, row, k) * grid.hx * grid.hy * forms.source_residual


def _check_exclusion(forms: ConjugateForms, i: int, k: int) -> int:
    column = forms.singular_column(i)
    for j, other in enumerate(forms.field.singular_columns):
        if j != i and abs(other - column) < EXCLUSION_RADIUS_FACTOR * k:
            raise LoopPlacementError(
                f"loop around singularity {i} (radius {k} cells) meets the exclusion zone of singularity {j}"
            )
    return column


def handle_size(forms: ConjugateForms, i: int, k: Optional[int] = None) -> float:
    k = forms.loop_radius_cells if k is None else k
    column = _check_exclusion(forms, i, k)
    return loop_integral(forms, column, forms.grid.axis_row, "du", k)


def period_integral(forms: ConjugateForms, i: int, k: Optional[int] = None) -> float:
    k = forms.loop_radius_cells if k is None else k
    column = _check_exclusion(forms, i, k)
    return loop_integral(forms, column, forms.grid.axis_row, "dX1", k)


def half_loop_integral(forms: ConjugateForms, i: int, name: str = "dX1", k: Optional[int] = None) -> float:
    """Upper half of the loop around singularity i, from its right axis
    crossing to its left one."""
    k = forms.loop_radius_cells if k is None else k
    a = _check_exclusion(forms, i, k)
    J = forms.grid.axis_row
    _loop_bounds(forms, a, J, k)

    grid = forms.grid
    right, up = dual_moves(forms, name)
    q = _component(forms, name, 1)
    total = (
        0.5 * grid.hy * q[J, a + k - 1, 0]
        + up[J:J + k - 1, a + k - 1].sum()
        - right[J + k - 1, a - k:a + k - 1].sum()
        - up[J:J + k - 1, a - k].sum()
        - 0.5 * grid.hy * q[J, a - k, 0]
    )
    return float(total)


def tau_pullback(forms: ConjugateForms, name: str) -> np.ndarray:
    """Pull-back of a form by (x, y) -> (x, -y), as per-triangle (P, Q)."""
    grid = forms.grid
    values = forms.form(name).reshape(grid.ny - 1, grid.nx - 1, 2, 2)
    # row j <-> ny - 2 - j, bottom triangle <-> top triangle
    mirrored = values[::-1, :, ::-1, :]
    pulled = mirrored.copy()
    pulled[..., 1] = -mirrored[..., 1]
    return pulled.reshape(-1, 2)


def integrate_u(forms: ConjugateForms,
                base: Tuple[float, float] = (DEFAULT_BASE_X, 0.0)) -> ScalarField:
    """Conjugate function on the closed upper half-strip, normalised so u(base) = 0.

    Values are integrated on the upper cell centres and on the axis edge
    midpoints; node values average their neighbouring dual values. At a
    singular node u jumps, and the stored node value is the mean of the two
    one-sided limits.
    """
    grid = forms.grid
    field = forms.field
    J = grid.axis_row
    bx, by = base
    if by < -1e-12:
        raise HalfStripError(f"base point {base} is below the axis")
    bi = grid.column_of(bx)
    bj = J + int(round(by / grid.hy))
    if not (0 <= bi < grid.nx and J <= bj < grid.ny):
        raise HalfStripError(f"base point {base} is outside the upper half-strip")

    right, up = dual_moves(forms, "du")
    q = _component(forms, "du", 1)

    # cell centres of rows J .. ny - 2
    bottom = np.concatenate([[0.0], np.cumsum(right[J, :])])
    column_steps = np.vstack([np.zeros((1, grid.nx - 1)), np.cumsum(up[J:, :], axis=0)])
    cells = bottom[None, :] + column_steps

    axis = cells[0, :] - 0.5 * grid.hy * q[J, :, 0]

    n_rows = grid.ny - J
    total = np.zeros((n_rows, grid.nx))
    count = np.zeros((n_rows, grid.nx))

    # cell row c touches node rows c and c + 1; the axis row only sees midpoints
    for di in (0, 1):
        cols = slice(di, grid.nx - 1 + di)
        total[1:, cols] += cells
        count[1:, cols] += 1.0
        total[1:-1, cols] += cells[1:]
        count[1:-1, cols] += 1.0
        total[0, cols] += axis
        count[0, cols] += 1.0
    values = total / count

    shift = values[bj - J, bi]
    values -= shift

    upper = grid.upper_half()
    pinned = np.zeros(upper.shape, dtype=bool)
    pinned[0, list(field.singular_columns)] = True

    result = ScalarField(
        values=values,
        grid=upper,
        pinned=pinned,
        residual_norm=forms.source_residual,
        singular_columns=field.singular_columns,
        singular_set=field.singular_set,
        config=field.config,
        options=field.options,
        eps_cap=field.eps_cap,
        eps_bdry=field.eps_bdry,
        cell_values=cells - shift,
        axis_values=axis - shift,
    )
    logger.debug("integrated u on %dx%d upper half-strip nodes", upper.nx, upper.ny)
    return result


def axis_jumps(u_field: ScalarField) -> Dict[int, float]:
    """Jump of u across each singular node along the axis (right minus left)."""
    if u_field.axis_values is None:
        raise HalfStripError("field carries no axis values; integrate it with integrate_u")
    return {
        c: float(u_field.axis_values[c] - u_field.axis_values[c - 1])
        for c in u_field.singular_columns
    }
