"""
Conjugate minimal immersion of the upper half-strip and its symmetric extension.

The fundamental piece has one vertex per node of the closed upper half-strip.
X3 is v itself; X1 and X2 are integrated along primal grid edges, each edge
using the mean of the forms on its two neighbouring triangles.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..config.defaults import (
    DEFAULT_BASE_X,
    DEFAULT_MESH_TOL_FACTOR,
    GRID_ALIGNMENT_TOL,
    MESH_TAGS,
    VERTICAL_PERIOD,
)
from ..core.conjugation import ConjugateForms
from ..core.exceptions import MeshError, WeldMismatchError
from ..core.grid import GridSpec
from ..core.maximal_solver import ScalarField
from ..core.strip_domain import SingularSet, StripConfig

logger = logging.getLogger(__name__)

TAG_CODES: Dict[str, int] = {name: code for code, name in enumerate(MESH_TAGS)}


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    provenance: np.ndarray
    domain_points: np.ndarray
    mesh_tol: float = 0.0
    metadata: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def empty(cls, mesh_tol: float = 0.0) -> "SurfaceMesh":
        return cls(
            vertices=np.zeros((0, 3)),
            triangles=np.zeros((0, 3), dtype=np.int64),
            tags=np.zeros(0, dtype=np.int64),
            provenance=np.zeros((0, 3), dtype=np.int64),
            domain_points=np.zeros((0, 2)),
            mesh_tol=mesh_tol,
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_tags(self) -> List[str]:
        return [MESH_TAGS[c] for c in self.tags]

    @property
    def copy_ids(self) -> np.ndarray:
        return self.provenance[:, 2]

    def tagged(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.tags == TAG_CODES[name])

    def with_tags(self, tags: np.ndarray) -> "SurfaceMesh":
        return replace(self, tags=np.asarray(tags, dtype=np.int64))


def default_mesh_tol(h: float) -> float:
    return DEFAULT_MESH_TOL_FACTOR * h * h


def _edge_forms(forms: ConjugateForms, name: str) -> Tuple[np.ndarray, np.ndarray]:
    """Integrals of a form along every primal edge of the full grid.

    horizontal[j, i]: node (i, j) -> (i + 1, j); vertical[j, i]: node (i, j) -> (i, j + 1).
    """
    grid = forms.grid
    values = forms.form(name).reshape(grid.ny - 1, grid.nx - 1, 2, 2)
    p = values[..., 0]
    q = values[..., 1]

    # horizontal edges: bottom triangle of the cell above, top triangle of the cell below
    p_sum = np.zeros((grid.ny, grid.nx - 1))
    p_cnt = np.zeros((grid.ny, grid.nx - 1))
    p_sum[:-1] += p[:, :, 0]
    p_cnt[:-1] += 1.0
    p_sum[1:] += p[:, :, 1]
    p_cnt[1:] += 1.0
    horizontal = grid.hx * p_sum / p_cnt

    right_kind = np.where(grid.diagonal_up, 0, 1)
    q_right = np.take_along_axis(q, right_kind[..., None], axis=-1)[..., 0]
    q_left = np.take_along_axis(q, (1 - right_kind)[..., None], axis=-1)[..., 0]

    # vertical edges: right-edge triangle of the cell to the left, left-edge triangle of the cell to the right
    q_sum = np.zeros((grid.ny - 1, grid.nx))
    q_cnt = np.zeros((grid.ny - 1, grid.nx))
    q_sum[:, 1:] += q_right
    q_cnt[:, 1:] += 1.0
    q_sum[:, :-1] += q_left
    q_cnt[:, :-1] += 1.0
    vertical = grid.hy * q_sum / q_cnt
    return horizontal, vertical


def _axis_potential(horizontal: np.ndarray, vertical: np.ndarray, J: int,
                    singular: Tuple[int, ...], base: int) -> np.ndarray:
    """Potential along the axis row; singular columns are bypassed through row J + 1."""
    nx = horizontal.shape[1] + 1
    values = np.full(nx, np.nan)
    regular = [i for i in range(nx) if i not in singular]

    def step(a: int, b: int) -> float:
        if b == a + 1:
            return horizontal[J, a]
        # detour around the singular column a + 1
        return (vertical[J, a] + horizontal[J + 1, a] + horizontal[J + 1, a + 1] - vertical[J, b])

    values[regular[0]] = 0.0
    for a, b in zip(regular, regular[1:]):
        values[b] = values[a] + step(a, b)
    for c in singular:
        values[c] = values[c - 1] + horizontal[J, c - 1]
    return values - values[base]


def _classify(grid: GridSpec, upper: GridSpec, singular: Tuple[int, ...]) -> np.ndarray:
    tags = np.full(upper.shape, TAG_CODES["interior"], dtype=np.int64)
    tags[0, :] = TAG_CODES["plane_x0"]
    tags[:, 0] = TAG_CODES["truncation"]
    tags[:, -1] = TAG_CODES["truncation"]

    top = np.full(grid.nx, TAG_CODES["truncation"], dtype=np.int64)
    integer_x = np.abs(grid.x - np.round(grid.x)) < GRID_ALIGNMENT_TOL
    top[integer_x] = TAG_CODES["vertical_line_Ak"]
    tags[-1, :] = top

    for c in singular:
        tags[0, c] = TAG_CODES["plane_z0"]
    return tags


def build_fundamental_piece(cfg: StripConfig, S: SingularSet, forms: ConjugateForms,
                            base_x: float = DEFAULT_BASE_X,
                            mesh_tol: Optional[float] = None,
                            metadata: Optional[Dict[str, str]] = None) -> SurfaceMesh:
    field_ = forms.field
    grid = forms.grid
    J = grid.axis_row
    singular = tuple(field_.singular_columns)

    base = grid.column_of(base_x)
    if not 0 <= base < grid.nx or abs(grid.x[base] - base_x) > GRID_ALIGNMENT_TOL:
        raise MeshError(f"base point ({base_x}, 0) is not an axis node of the grid")
    if base in singular:
        raise MeshError(f"base point ({base_x}, 0) is a singular node")
    for c in singular:
        if c < 1 or c > grid.nx - 2:
            raise MeshError(f"singular column {c} is too close to the window end for the axis detour")

    upper_triangles = np.arange(grid.n_triangles).reshape(grid.ny - 1, -1)[J:].reshape(-1)
    ridge = forms.ridge[upper_triangles]
    if ridge.any():
        raise MeshError(f"{int(ridge.sum())} near-lightlike triangles in the upper half-strip "
                        f"away from pinned nodes and data corners")

    coords = []
    for name in ("dX1", "dX2"):
        horizontal, vertical = _edge_forms(forms, name)
        axis = _axis_potential(horizontal, vertical, J, singular, base)
        column_steps = np.cumsum(vertical[J:, :], axis=0)
        coords.append(np.vstack([axis[None, :], axis[None, :] + column_steps]))

    x3 = field_.values[J:, :]
    base_v = float(field_.values[J, base])
    # base vertex image is (0, 0, v(base))
    vertices = np.stack([coords[0], coords[1], x3], axis=-1).reshape(-1, 3)

    upper = grid.upper_half()
    jj, ii = np.meshgrid(np.arange(upper.ny), np.arange(upper.nx), indexing="ij")
    provenance = np.stack([ii.ravel(), (jj + J).ravel(), np.zeros(upper.n_nodes, dtype=np.int64)], axis=-1)
    domain = np.stack([np.tile(grid.x, upper.ny), np.repeat(grid.y[J:], grid.nx)], axis=-1)

    triangles = grid.triangles[upper_triangles] - J * grid.nx

    tol = default_mesh_tol(grid.hx) if mesh_tol is None else mesh_tol
    meta = {
        "ell": f"{cfg.ell!r}",
        "h": f"{grid.hx!r}",
        "p": " ".join(str(v) for v in S.p),
        "q": " ".join(f"{v!r}" for v in (field_.singular_set or S).q),
        "base": f"({base_x!r}, 0) -> (0, 0, {base_v!r})",
    }
    meta.update(metadata or {})

    mesh = SurfaceMesh(
        vertices=vertices,
        triangles=triangles.astype(np.int64),
        tags=_classify(grid, upper, singular).reshape(-1),
        provenance=provenance.astype(np.int64),
        domain_points=domain,
        mesh_tol=tol,
        metadata=meta,
    )

    axis_x1 = np.abs(mesh.vertices[mesh.tagged("plane_x0"), 0])
    logger.info("fundamental piece: %d vertices, %d triangles, max |X1| on the axis %.3e",
                mesh.n_vertices, mesh.n_triangles, float(axis_x1.max(initial=0.0)))
    return mesh


def reflect_x(mesh: SurfaceMesh, copy_id: int) -> SurfaceMesh:
    vertices = mesh.vertices * np.array([-1.0, 1.0, 1.0])
    return _transformed(mesh, vertices, copy_id, flip=True)


def reflect_z(mesh: SurfaceMesh, plane: float, copy_id: int) -> SurfaceMesh:
    vertices = mesh.vertices.copy()
    vertices[:, 2] = 2.0 * plane - vertices[:, 2]
    return _transformed(mesh, vertices, copy_id, flip=True)


def translate_period(mesh: SurfaceMesh, periods: int, copy_id: int) -> SurfaceMesh:
    vertices = mesh.vertices + np.array([0.0, 0.0, VERTICAL_PERIOD * periods])
    return _transformed(mesh, vertices, copy_id, flip=False)


def _transformed(mesh: SurfaceMesh, vertices: np.ndarray, copy_id: int, flip: bool) -> SurfaceMesh:
    triangles = mesh.triangles[:, ::-1].copy() if flip else mesh.triangles.copy()
    provenance = mesh.provenance.copy()
    provenance[:, 2] = provenance[:, 2] + copy_id
    return replace(mesh, vertices=vertices, triangles=triangles, provenance=provenance)


def _concatenate(pieces: List[SurfaceMesh]) -> SurfaceMesh:
    offsets = np.cumsum([0] + [p.n_vertices for p in pieces[:-1]])
    return replace(
        pieces[0],
        vertices=np.vstack([p.vertices for p in pieces]),
        triangles=np.vstack([p.triangles + o for p, o in zip(pieces, offsets)]),
        tags=np.concatenate([p.tags for p in pieces]),
        provenance=np.vstack([p.provenance for p in pieces]),
        domain_points=np.vstack([p.domain_points for p in pieces]),
    )


def weld(mesh: SurfaceMesh, tol: Optional[float] = None) -> SurfaceMesh:
    """Merge boundary vertices of different copies that lie within tol."""
    tol = mesh.mesh_tol if tol is None else tol
    n = mesh.n_vertices
    if n == 0:
        return mesh

    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    boundary = mesh.tags != TAG_CODES["interior"]
    pairs = cKDTree(mesh.vertices).query_pairs(tol, output_type="ndarray")
    copies = mesh.copy_ids
    for a, b in pairs:
        if copies[a] == copies[b] or not (boundary[a] and boundary[b]):
            continue
        ra, rb = find(a), find(b)
        if ra != rb:
            # keep the first occurrence
            parent[max(ra, rb)] = min(ra, rb)

    roots = np.array([find(a) for a in range(n)])
    keep = roots == np.arange(n)
    new_index = np.cumsum(keep) - 1
    triangles = new_index[roots[mesh.triangles]]
    degenerate = ((triangles[:, 0] == triangles[:, 1]) | (triangles[:, 1] == triangles[:, 2])
                  | (triangles[:, 0] == triangles[:, 2]))

    welded = int(n - keep.sum())
    if degenerate.any():
        logger.debug("dropping %d degenerate triangles after welding", int(degenerate.sum()))
    logger.debug("welded %d vertices", welded)
    return replace(
        mesh,
        vertices=mesh.vertices[keep],
        triangles=triangles[~degenerate],
        tags=mesh.tags[keep],
        provenance=mesh.provenance[keep],
        domain_points=mesh.domain_points[keep],
    )


def _check_seam(mesh: SurfaceMesh) -> None:
    seam = mesh.tagged("plane_x0")
    if seam.size == 0:
        return
    worst = float(np.abs(mesh.vertices[seam, 0]).max())
    if worst > mesh.mesh_tol:
        raise WeldMismatchError(
            f"symmetry-plane vertices are off the plane x=0 by up to {worst:.3e} "
            f"(mesh_tol {mesh.mesh_tol:.3e}); the periods are not solved"
        )


def extend_by_symmetry(mesh: SurfaceMesh, copies_x: int, copies_z: int) -> SurfaceMesh:
    """Reflect across X1 = 0 (copies_x = 1), then across X3 = 1 and translate
    by the vertical period to cover copies_z periods."""
    if copies_x not in (0, 1):
        raise MeshError(f"copies_x must be 0 or 1, got {copies_x}")
    if copies_z < 0:
        raise MeshError(f"copies_z must be non-negative, got {copies_z}")
    if mesh.n_vertices == 0:
        return mesh

    pieces = [mesh]
    if copies_x:
        _check_seam(mesh)
        pieces.append(reflect_x(mesh, copy_id=1))
    layer = _concatenate(pieces)

    if copies_z:
        stride = len(pieces)
        slab = _concatenate([layer, reflect_z(layer, plane=1.0, copy_id=stride)])
        slabs = [translate_period(slab, m, copy_id=2 * stride * m) for m in range(copies_z)]
        layer = _concatenate(slabs)

    extended = weld(layer)

    if extended.n_triangles:
        n = extended.n_vertices
        tri = extended.triangles
        rows = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
        cols = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
        adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        components, _ = connected_components(adjacency, directed=False)
        if components > 1:
            raise WeldMismatchError(f"extended mesh falls apart into {components} pieces after welding")

    logger.info("extended mesh: %d vertices, %d triangles (%d -> %d after welding)",
                extended.n_vertices, extended.n_triangles, layer.n_vertices, extended.n_vertices)
    return extended


@dataclass
class EmbeddednessReport:
    negative_x1: List[int] = field(default_factory=list)
    column_collisions: List[Tuple[int, int]] = field(default_factory=list)
    near_pairs: List[Tuple[int, int]] = field(default_factory=list)
    checked_vertices: int = 0

    @property
    def violations(self) -> int:
        return len(self.negative_x1) + len(self.column_collisions) + len(self.near_pairs)

    def __bool__(self) -> bool:
        return self.violations == 0

    def describe(self) -> str:
        return (f"{len(self.negative_x1)} interior vertices with X1 <= 0, "
                f"{len(self.column_collisions)} column collisions, {len(self.near_pairs)} near pairs")


def embeddedness_probe(mesh: SurfaceMesh, provenance_gap: int = 2,
                       collision_tol: float = 1e-10) -> EmbeddednessReport:
    piece = np.flatnonzero(mesh.copy_ids == 0)
    report = EmbeddednessReport(checked_vertices=int(piece.size))
    if piece.size == 0:
        return report

    interior = piece[mesh.tags[piece] == TAG_CODES["interior"]]
    report.negative_x1 = [int(v) for v in interior[mesh.vertices[interior, 0] <= 0.0]]

    columns = mesh.provenance[piece, 0]
    for column in np.unique(columns):
        members = piece[columns == column]
        projection = mesh.vertices[members][:, 1:]
        for a, b in cKDTree(projection).query_pairs(collision_tol):
            report.column_collisions.append((int(members[a]), int(members[b])))

    tree = cKDTree(mesh.vertices[piece])
    for a, b in tree.query_pairs(mesh.mesh_tol):
        ga, gb = mesh.provenance[piece[a], :2], mesh.provenance[piece[b], :2]
        if np.abs(ga - gb).max() > provenance_gap:
            report.near_pairs.append((int(piece[a]), int(piece[b])))

    if report:
        logger.info("embeddedness probe: no violations over %d vertices", report.checked_vertices)
    else:
        logger.warning("embeddedness probe: %s", report.describe())
    return report


def _gram(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    e1 = points[triangles[:, 1]] - points[triangles[:, 0]]
    e2 = points[triangles[:, 2]] - points[triangles[:, 0]]
    return np.stack([
        np.einsum("ij,ij->i", e1, e1),
        np.einsum("ij,ij->i", e1, e2),
        np.einsum("ij,ij->i", e2, e2),
    ], axis=-1)


def isometry_deviation(mesh: SurfaceMesh, u_field: ScalarField, margin_cells: int = 4) -> float:
    """Largest relative difference between the first fundamental forms of the
    fundamental piece and of the graph of u, on triangles away from pinned
    nodes, the vertices a_k and the truncated boundary."""
    grid = u_field.grid
    if mesh.n_vertices != grid.n_nodes:
        raise MeshError("isometry check needs the unextended fundamental piece")

    graph = np.stack([mesh.domain_points[:, 0], mesh.domain_points[:, 1], u_field.values.reshape(-1)], axis=-1)
    g_mesh = _gram(mesh.vertices, mesh.triangles)
    g_graph = _gram(graph, mesh.triangles)

    margin = margin_cells * grid.hx
    centroids = mesh.domain_points[mesh.triangles].mean(axis=1)
    special = [(grid.x[c], 0.0) for c in u_field.singular_columns]
    top = grid.y[-1]
    special += [(x, top) for x in grid.x if abs(x - round(x)) < GRID_ALIGNMENT_TOL]
    keep = np.ones(len(centroids), dtype=bool)
    if special:
        distance, _ = cKDTree(np.asarray(special)).query(centroids)
        keep &= distance >= margin
    left, right = grid.window
    keep &= (centroids[:, 0] - left >= margin) & (right - centroids[:, 0] >= margin)
    keep &= top - centroids[:, 1] >= margin
    if not keep.any():
        raise MeshError("no triangles left for the isometry check; the window is too small")

    scale = np.linalg.norm(g_graph[keep], axis=1)
    deviation = np.linalg.norm(g_mesh[keep] - g_graph[keep], axis=1) / scale
    return float(deviation.max())


def symmetry_curve_planarity(mesh: SurfaceMesh) -> Dict[int, float]:
    """max |X1| over the axis vertices between consecutive singular columns."""
    piece = mesh.copy_ids == 0
    axis = np.flatnonzero(piece & (mesh.tags == TAG_CODES["plane_x0"]))
    singular = np.sort(mesh.provenance[np.flatnonzero(piece & (mesh.tags == TAG_CODES["plane_z0"])), 0])
    columns = mesh.provenance[axis, 0]
    segment = np.searchsorted(singular, columns)
    return {
        int(k): float(np.abs(mesh.vertices[axis[segment == k], 0]).max())
        for k in np.unique(segment)
    }
