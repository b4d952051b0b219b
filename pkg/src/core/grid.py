"""
Structured triangulation of the truncated strip.

Each grid cell is split into two P1 triangles. The diagonal follows a
herringbone pattern so the triangulation is invariant under y -> -y, under
the point reflections about every integer on the axis and under x -> x + 2.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import sparse

from .exceptions import DomainError
from ..config.defaults import GRID_ALIGNMENT_TOL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    x0: float
    nx: int
    hx: float
    y0: float
    ny: int
    hy: float

    @classmethod
    def for_strip(cls, ell: float, window: Tuple[float, float], h: float,
                  rows_per_half: int = 0) -> "GridSpec":
        left, right = window
        nx_cells = int(round((right - left) / h))
        if nx_cells < 2 or abs(nx_cells * h - (right - left)) > GRID_ALIGNMENT_TOL * max(1.0, right - left):
            raise DomainError(f"window {window} is not a multiple of h={h}")

        rows = rows_per_half or max(1, int(round(ell / h)))
        hy = ell / rows
        if abs(hy - h) > GRID_ALIGNMENT_TOL:
            logger.warning("ell/h=%.6f is not an integer; using hy=%.6g (hx=%.6g)", ell / h, hy, h)

        return cls(x0=float(left), nx=nx_cells + 1, hx=float(h),
                   y0=-float(ell), ny=2 * rows + 1, hy=float(hy))

    def refine(self, factor: int) -> "GridSpec":
        return GridSpec(
            x0=self.x0,
            nx=(self.nx - 1) * factor + 1,
            hx=self.hx / factor,
            y0=self.y0,
            ny=(self.ny - 1) * factor + 1,
            hy=self.hy / factor,
        )

    def upper_half(self) -> "GridSpec":
        return GridSpec(x0=self.x0, nx=self.nx, hx=self.hx,
                        y0=0.0, ny=self.axis_row_count, hy=self.hy)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def n_triangles(self) -> int:
        return 2 * (self.nx - 1) * (self.ny - 1)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def triangle_area(self) -> float:
        return 0.5 * self.hx * self.hy

    @property
    def window(self) -> Tuple[float, float]:
        return (self.x0, self.x0 + (self.nx - 1) * self.hx)

    @property
    def axis_row(self) -> int:
        # row of y = 0; only meaningful for grids that contain the axis
        return int(round(-self.y0 / self.hy))

    @property
    def axis_row_count(self) -> int:
        return self.ny - self.axis_row

    @cached_property
    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    def node_index(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)

    def column_of(self, x: float) -> int:
        return int(round((x - self.x0) / self.hx))

    def contains_column(self, i: int) -> bool:
        return 0 <= i < self.nx

    @cached_property
    def diagonal_up(self) -> np.ndarray:
        """True where the cell diagonal runs from (i, j) to (i+1, j+1)."""
        xc = self.x0 + self.hx * (np.arange(self.nx - 1) + 0.5)
        yc = self.y0 + self.hy * (np.arange(self.ny - 1) + 0.5)
        parity = np.where(np.mod(xc, 2.0) < 1.0, 1.0, -1.0)
        return (np.sign(yc)[:, None] * parity[None, :]) > 0

    @cached_property
    def _stencils(self) -> dict:
        nx, ny = self.nx, self.ny
        jj, ii = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
        up = self.diagonal_up

        n00 = jj * nx + ii
        n10 = n00 + 1
        n01 = n00 + nx
        n11 = n01 + 1

        # x differences: T0 from the bottom edge, T1 from the top edge
        gx_plus = np.stack([n10, n11], axis=-1)
        gx_minus = np.stack([n00, n01], axis=-1)

        # y differences depend on the diagonal
        gy_plus = np.stack([np.where(up, n11, n01), np.where(up, n01, n11)], axis=-1)
        gy_minus = np.stack([np.where(up, n10, n00), np.where(up, n00, n10)], axis=-1)

        v0 = np.stack([n00, np.where(up, n00, n10)], axis=-1)
        v1 = np.stack([n10, n11], axis=-1)
        v2 = np.stack([np.where(up, n11, n01), n01], axis=-1)

        return {
            "gx_plus": gx_plus.reshape(-1),
            "gx_minus": gx_minus.reshape(-1),
            "gy_plus": gy_plus.reshape(-1),
            "gy_minus": gy_minus.reshape(-1),
            "vertices": np.stack([v0, v1, v2], axis=-1).reshape(-1, 3),
        }

    def triangle_index(self, i, j, kind):
        return 2 * (np.asarray(j) * (self.nx - 1) + np.asarray(i)) + np.asarray(kind)

    def right_edge_triangle(self, i, j):
        """Triangle of cell (i, j) that contains the cell's right edge."""
        kind = np.where(self.diagonal_up[j, i], 0, 1)
        return self.triangle_index(i, j, kind)

    def left_edge_triangle(self, i, j):
        kind = np.where(self.diagonal_up[j, i], 1, 0)
        return self.triangle_index(i, j, kind)

    def top_edge_triangle(self, i, j):
        return self.triangle_index(i, j, 1)

    def bottom_edge_triangle(self, i, j):
        return self.triangle_index(i, j, 0)

    @property
    def triangles(self) -> np.ndarray:
        """Counter-clockwise node triples, shape (n_triangles, 3)."""
        return self._stencils["vertices"]

    @cached_property
    def gradient_operators(self) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
        st = self._stencils
        n_t = self.n_triangles
        rows = np.concatenate([np.arange(n_t), np.arange(n_t)])

        dx = sparse.coo_matrix(
            (np.concatenate([np.full(n_t, 1.0 / self.hx), np.full(n_t, -1.0 / self.hx)]),
             (rows, np.concatenate([st["gx_plus"], st["gx_minus"]]))),
            shape=(n_t, self.n_nodes),
        ).tocsr()
        dy = sparse.coo_matrix(
            (np.concatenate([np.full(n_t, 1.0 / self.hy), np.full(n_t, -1.0 / self.hy)]),
             (rows, np.concatenate([st["gy_plus"], st["gy_minus"]]))),
            shape=(n_t, self.n_nodes),
        ).tocsr()
        return dx, dy

    def gradients(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        flat = np.asarray(values, dtype=float).reshape(-1)
        dx, dy = self.gradient_operators
        return dx @ flat, dy @ flat

    @cached_property
    def triangle_centroids(self) -> np.ndarray:
        tri = self.triangles
        xs = np.tile(self.x, self.ny)
        ys = np.repeat(self.y, self.nx)
        return np.stack([xs[tri].mean(axis=1), ys[tri].mean(axis=1)], axis=-1)

    def vertex_zone(self, cells: int) -> np.ndarray:
        """Triangles whose centroid lies within `cells` cells of a corner (k, +-ell)."""
        cx, cy = self.triangle_centroids.T
        ell = max(abs(self.y[0]), abs(self.y[-1]))
        near_corner_x = np.abs(cx - np.round(cx)) <= cells * self.hx
        near_edge = ell - np.abs(cy) <= cells * self.hy
        return near_corner_x & near_edge

    def triangles_touching(self, node_mask: np.ndarray) -> np.ndarray:
        flat = np.asarray(node_mask, dtype=bool).reshape(-1)
        return flat[self.triangles].any(axis=1)
