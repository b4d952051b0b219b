"""
Geometric diagnostics of solved fields: divergence ridges, boundary flux
classes, gradient floors, Gauss curvature of the graph of u and a two-way
gradient cross-check.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..config.defaults import (
    DEFAULT_DIVERGENT_SLOPE,
    DEFAULT_FLUX_TOL_FRACTION,
    DEFAULT_RIDGE_EPS_FACTOR,
    GRID_ALIGNMENT_TOL,
    MIN_RIDGE_CELLS,
    VERTEX_ZONE_CELLS,
)
from ..core.exceptions import DomainError
from ..core.grid import GridSpec
from ..core.maximal_solver import CappedArea, ScalarField, triangle_gradients
from ..core.period_engine import PeriodEngine
from ..core.strip_domain import SingularSet

logger = logging.getLogger(__name__)


class FluxClass(Enum):
    PLUS_INFINITY = "u->+inf"
    MINUS_INFINITY = "u->-inf"
    FINITE = "finite"


@dataclass
class RidgeSegment:
    start: Tuple[float, float]
    end: Tuple[float, float]
    cells: int
    max_gradient: float

    @property
    def length(self) -> float:
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))


def _vertex_points(grid: GridSpec) -> List[Tuple[float, float]]:
    """The boundary vertices a_k on both edges of the strip."""
    ints = [x for x in grid.x if abs(x - round(x)) < GRID_ALIGNMENT_TOL]
    return [(x, y) for x in ints for y in (grid.y[0], grid.y[-1])]


def _special_points(field: ScalarField) -> np.ndarray:
    grid = field.grid
    points = [(grid.x[c], 0.0) for c in field.singular_columns]
    points += _vertex_points(grid)
    return np.asarray(points, dtype=float).reshape(-1, 2)


def divergence_ridges(fields: Sequence[ScalarField], ridge_eps: Optional[float] = None,
                      edge_band: Optional[float] = None) -> List[RidgeSegment]:
    """Straight runs of near-lightlike triangles away from the pinned nodes, the data
    corners and the boundary layer along the lightlike edges.

    The boundary layer defaults to sqrt(2 ridge_eps) + h, where the slope of
    the solution next to a lightlike edge exceeds 1 - ridge_eps.
    """
    if not fields:
        return []
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise DomainError("ridge detection needs all fields on the same grid")

    eps = DEFAULT_RIDGE_EPS_FACTOR * fields[0].eps_cap if ridge_eps is None else ridge_eps
    band = np.sqrt(2.0 * eps) + grid.hy if edge_band is None else edge_band
    slope = np.max([np.hypot(*triangle_gradients(f)) for f in fields], axis=0)
    marked = slope > 1.0 - eps

    boundary = np.zeros(grid.shape, dtype=bool)
    boundary[0, :] = boundary[-1, :] = True
    boundary[:, 0] = boundary[:, -1] = True
    marked &= ~grid.triangles_touching(boundary)
    marked &= ~grid.vertex_zone(VERTEX_ZONE_CELLS)
    centroids = grid.triangle_centroids
    ell = max(abs(grid.y[0]), abs(grid.y[-1]))
    marked &= ell - np.abs(centroids[:, 1]) > band
    pins = np.asarray([(grid.x[c], 0.0) for f in fields for c in f.singular_columns]).reshape(-1, 2)
    if len(pins):
        distance, _ = cKDTree(pins).query(centroids)
        marked &= distance > VERTEX_ZONE_CELLS * grid.hx

    index = np.flatnonzero(marked)
    if index.size < MIN_RIDGE_CELLS:
        return []

    pairs = cKDTree(centroids[index]).query_pairs(1.5 * max(grid.hx, grid.hy), output_type="ndarray")
    n = index.size
    adjacency = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) \
        else coo_matrix((n, n))
    count, labels = connected_components(adjacency, directed=False)

    ridges: List[RidgeSegment] = []
    for label in range(count):
        members = index[labels == label]
        if members.size < MIN_RIDGE_CELLS:
            continue
        points = centroids[members]
        centre = points.mean(axis=0)
        _, _, vt = np.linalg.svd(points - centre, full_matrices=False)
        direction = vt[0]
        t = (points - centre) @ direction
        start = centre + t.min() * direction
        end = centre + t.max() * direction
        ridges.append(RidgeSegment(start=(float(start[0]), float(start[1])),
                                   end=(float(end[0]), float(end[1])),
                                   cells=int(members.size),
                                   max_gradient=float(slope[members].max())))
    logger.debug("found %d divergence ridges", len(ridges))
    return ridges


def _node(grid: GridSpec, point: Tuple[float, float]) -> Tuple[int, int]:
    i = int(round((point[0] - grid.x0) / grid.hx))
    j = int(round((point[1] - grid.y0) / grid.hy))
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise DomainError(f"point {point} is outside the grid")
    if (abs(grid.x[i] - point[0]) > GRID_ALIGNMENT_TOL * max(1.0, abs(point[0]))
            or abs(grid.y[j] - point[1]) > GRID_ALIGNMENT_TOL * max(1.0, abs(point[1]))):
        raise DomainError(f"point {point} is not a grid node")
    return i, j


def _conjugate_normal_slope(field: ScalarField, row: int, i0: int, i1: int) -> float:
    """Mean outward normal derivative of the conjugate function across node row `row`
    between columns i0 and i1, from the triangles whose x difference runs along that row.

    Boundary rows use their single interior-side triangle row; interior rows
    average both sides and take the normal pointing down.
    """
    grid = field.grid
    gx, gy = triangle_gradients(field)
    weight = CappedArea(field.eps_cap or field.h ** 2).weight(gx * gx + gy * gy)
    du_dy = -gx / weight
    columns = np.arange(i0, i1)
    if row == grid.ny - 1:
        return float(du_dy[grid.bottom_edge_triangle(columns, row - 1)].mean())
    if row == 0:
        return float(-du_dy[grid.top_edge_triangle(columns, 0)].mean())
    both = du_dy[grid.bottom_edge_triangle(columns, row)] + du_dy[grid.top_edge_triangle(columns, row - 1)]
    return float(-0.5 * both.mean())


def boundary_flux_classify(field: ScalarField, edge: Tuple[Tuple[float, float], Tuple[float, float]],
                           flux_tol: Optional[float] = None,
                           divergent_slope: float = DEFAULT_DIVERGENT_SLOPE) -> FluxClass:
    """Classify a horizontal edge by the flux of dv along it and by the conjugate
    flux of the solved field across it.

    Edges on the strip boundary are traversed in the boundary orientation
    (right to left on top, left to right at the bottom); interior edges left
    to right. An edge is divergent when the flux of dv is within flux_tol of
    +-|T| and the mean normal slope of u across it, taken from the solved
    interior values next to the edge, is at least divergent_slope with the
    same sign.
    """
    grid = field.grid
    (i0, j0), (i1, j1) = _node(grid, edge[0]), _node(grid, edge[1])
    if j0 != j1 or i0 == i1:
        raise DomainError(f"edge {edge} is not a horizontal grid segment")
    i0, i1 = sorted((i0, i1))

    length = (i1 - i0) * grid.hx
    tol = DEFAULT_FLUX_TOL_FRACTION * length if flux_tol is None else flux_tol * length
    left, right = field.values[j0, i0], field.values[j0, i1]
    flux = left - right if j0 == grid.ny - 1 else right - left

    if abs(flux - length) <= tol:
        sign = 1.0
    elif abs(flux + length) <= tol:
        sign = -1.0
    else:
        return FluxClass.FINITE

    slope = _conjugate_normal_slope(field, j0, i0, i1)
    if sign * slope < divergent_slope:
        logger.info("edge %s carries lightlike data but the conjugate slope across it is %.3g", edge, slope)
        return FluxClass.FINITE
    return FluxClass.PLUS_INFINITY if sign > 0 else FluxClass.MINUS_INFINITY


def boundary_flux_pattern(field: ScalarField, flux_tol: Optional[float] = None) -> List[Tuple[float, float, FluxClass]]:
    """Flux class of every unit segment between consecutive integers on the top edge."""
    grid = field.grid
    top = grid.y[-1]
    left, right = grid.window
    k0, k1 = int(np.ceil(left - GRID_ALIGNMENT_TOL)), int(np.floor(right + GRID_ALIGNMENT_TOL))
    return [
        (float(k), float(k + 1), boundary_flux_classify(field, ((k, top), (k + 1, top)), flux_tol))
        for k in range(k0, k1)
    ]


def expected_flux_class(k: int) -> FluxClass:
    """Class of the top-edge segment (k, k+1) for the alternating 1/0 data."""
    return FluxClass.PLUS_INFINITY if k % 2 else FluxClass.MINUS_INFINITY


def conjugate_gradient_norm(field: ScalarField) -> np.ndarray:
    """|grad u| per triangle from the slope of v."""
    gx, gy = triangle_gradients(field)
    energy = CappedArea(field.eps_cap or field.h ** 2)
    return np.hypot(gx, gy) * 2.0 * energy.dpsi(gx * gx + gy * gy)


def gradient_floor_check(field: ScalarField, center: Tuple[float, float], C: float,
                         allow_regular: bool = False) -> float:
    """Largest grid radius delta with |grad u| >= C on every triangle whose centroid lies within delta of center."""
    grid = field.grid
    i, j = _node(grid, center)
    is_singular = j == grid.axis_row and i in field.singular_columns
    is_vertex = j in (0, grid.ny - 1) and abs(grid.x[i] - round(grid.x[i])) < GRID_ALIGNMENT_TOL
    if not (is_singular or is_vertex or allow_regular):
        raise DomainError(f"{center} is neither a singular node nor a boundary vertex")

    norms = conjugate_gradient_norm(field)
    distance = np.hypot(*(grid.triangle_centroids - np.asarray(center, dtype=float)).T)
    corners = np.array([[grid.x[0], grid.y[0]], [grid.x[-1], grid.y[0]],
                        [grid.x[0], grid.y[-1]], [grid.x[-1], grid.y[-1]]])
    max_steps = int(np.ceil(np.hypot(*(corners - np.asarray(center)).T).max() / grid.hx))

    delta = 0.0
    for m in range(1, max_steps + 1):
        inside = distance < m * grid.hx
        if inside.any() and norms[inside].min() < C:
            break
        delta = m * grid.hx
    return delta


@dataclass
class CurvatureReport:
    K: np.ndarray
    probe: np.ndarray
    delta: float

    @property
    def max_abs(self) -> float:
        values = np.abs(self.K[self.probe])
        return float(values.max()) if values.size else 0.0


def curvature_field(u_field: ScalarField, delta: Optional[float] = None) -> CurvatureReport:
    """Gauss curvature of the graph of u at interior nodes of the half-strip grid,
    probed outside delta/2 of the singular nodes and the boundary vertices."""
    grid = u_field.grid
    delta = 8.0 * grid.hx if delta is None else delta
    u = u_field.values
    hx, hy = grid.hx, grid.hy

    c = u[1:-1, 1:-1]
    ux = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * hx)
    uy = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * hy)
    uxx = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / hx ** 2
    uyy = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / hy ** 2
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * hx * hy)

    K = np.full(grid.shape, np.nan)
    K[1:-1, 1:-1] = (uxx * uyy - uxy ** 2) / (1.0 + ux ** 2 + uy ** 2) ** 2

    probe = np.zeros(grid.shape, dtype=bool)
    probe[1:-1, 1:-1] = True
    special = [(grid.x[col], 0.0) for col in u_field.singular_columns]
    special += [(x, grid.y[-1]) for x in grid.x if abs(x - round(x)) < GRID_ALIGNMENT_TOL]
    if special:
        xx, yy = np.meshgrid(grid.x, grid.y)
        distance, _ = cKDTree(np.asarray(special)).query(np.stack([xx.ravel(), yy.ravel()], axis=-1))
        probe &= distance.reshape(grid.shape) >= delta / 2.0
    return CurvatureReport(K=K, probe=probe, delta=delta)


def two_way_gradient_check(field: ScalarField, u_field: ScalarField, margin_cells: int = 4) -> float:
    """max | |grad u| from differences of u - |grad u| from the slope of v | on upper
    half-strip triangles away from special points and the truncated boundary."""
    grid = field.grid
    upper = u_field.grid
    J = grid.axis_row
    n_upper = upper.n_triangles
    from_v = conjugate_gradient_norm(field).reshape(grid.ny - 1, -1)[J:].reshape(-1)
    from_u = np.hypot(*upper.gradients(u_field.values))
    if from_v.size != n_upper:
        raise DomainError("u and v grids do not match")

    margin = margin_cells * grid.hx
    centroids = upper.triangle_centroids
    special = _special_points(field)
    keep = np.ones(n_upper, dtype=bool)
    if len(special):
        distance, _ = cKDTree(special).query(centroids)
        keep &= distance >= margin
    left, right = upper.window
    keep &= (centroids[:, 0] - left >= margin) & (right - centroids[:, 0] >= margin)
    keep &= upper.y[-1] - centroids[:, 1] >= margin
    if not keep.any():
        raise DomainError("no triangles left for the gradient cross-check")
    return float(np.abs(from_u[keep] - from_v[keep]).max())


def handle_size_floor(configs: Sequence[SingularSet], engine: PeriodEngine) -> float:
    """Smallest |handle size| over every singular node of every configuration."""
    sizes = [abs(s) for report in engine.evaluate_many(list(configs)) for s in report.handle_sizes]
    if not sizes:
        raise DomainError("handle size floor needs at least one singular node")
    return float(min(sizes))
