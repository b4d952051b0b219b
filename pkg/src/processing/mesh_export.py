"""OBJ and PLY (ascii) writers and readers for tagged surface meshes."""

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..config.defaults import CSV_FLOAT_FORMAT, MESH_FORMATS, MESH_TAGS
from ..core.exceptions import MeshExportError
from .surface_builder import TAG_CODES, SurfaceMesh

logger = logging.getLogger(__name__)

HEADER_TITLE = "quasi-periodic maximal-graph conjugate surface"
POINTS_PER_LINE = 16
_TAG_LEGEND = "tags " + " ".join(f"{code}={name}" for code, name in enumerate(MESH_TAGS))


def _fmt(value: float) -> str:
    return CSV_FLOAT_FORMAT.format(float(value))


def _metadata_lines(mesh: SurfaceMesh) -> List[str]:
    lines = [HEADER_TITLE, f"period 0 0 {_fmt(2.0)}"]
    lines += [f"{key}: {value}" for key, value in mesh.metadata.items()]
    return lines


def _parse_metadata(comments: List[str]) -> Dict[str, str]:
    metadata: Dict[str, str] = {}
    for line in comments:
        if ": " in line:
            key, value = line.split(": ", 1)
            metadata[key] = value
    return metadata


def obj_text(mesh: SurfaceMesh) -> str:
    out = [f"# {line}" for line in _metadata_lines(mesh)]
    for x, y, z in mesh.vertices:
        out.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    for code, name in enumerate(MESH_TAGS):
        members = np.flatnonzero(mesh.tags == code) + 1
        if members.size == 0:
            continue
        out.append(f"g {name}")
        for start in range(0, members.size, POINTS_PER_LINE):
            out.append("p " + " ".join(str(v) for v in members[start:start + POINTS_PER_LINE]))
    if mesh.n_triangles:
        out.append("g surface")
        for a, b, c in mesh.triangles + 1:
            out.append(f"f {a} {b} {c}")
    return "\n".join(out) + "\n"


def ply_text(mesh: SurfaceMesh) -> str:
    out = ["ply", "format ascii 1.0"]
    out += [f"comment {line}" for line in _metadata_lines(mesh)]
    out += [
        f"comment {_TAG_LEGEND}",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        "property int tag",
        f"element face {mesh.n_triangles}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for (x, y, z), tag in zip(mesh.vertices, mesh.tags):
        out.append(f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {int(tag)}")
    for a, b, c in mesh.triangles:
        out.append(f"3 {a} {b} {c}")
    return "\n".join(out) + "\n"


def export_mesh(mesh: SurfaceMesh, path: Union[str, Path], fmt: str = "obj") -> Path:
    fmt = fmt.lower()
    if fmt not in MESH_FORMATS:
        raise MeshExportError(f"unknown mesh format '{fmt}', expected one of {MESH_FORMATS}")
    path = Path(path)
    text = obj_text(mesh) if fmt == "obj" else ply_text(mesh)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise MeshExportError(f"cannot write {path}: {e}") from e
    logger.info("wrote %s mesh with %d vertices to %s", fmt, mesh.n_vertices, path)
    return path


def _assemble(vertices: List[Tuple[float, float, float]], triangles: List[Tuple[int, int, int]],
              tags: np.ndarray, comments: List[str]) -> SurfaceMesh:
    n = len(vertices)
    metadata = _parse_metadata(comments[2:])
    return SurfaceMesh(
        vertices=np.asarray(vertices, dtype=float).reshape(n, 3),
        triangles=np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
        tags=tags,
        provenance=np.zeros((n, 3), dtype=np.int64),
        domain_points=np.zeros((n, 2)),
        metadata=metadata,
    )


def load_obj(path: Union[str, Path]) -> SurfaceMesh:
    comments: List[str] = []
    vertices: List[Tuple[float, float, float]] = []
    triangles: List[Tuple[int, int, int]] = []
    groups: Dict[str, List[int]] = {}
    group = "surface"
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise MeshExportError(f"cannot read {path}: {e}") from e

    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "#":
                comments.append(rest)
            elif head == "v":
                x, y, z = (float(t) for t in rest.split())
                vertices.append((x, y, z))
            elif head == "g":
                group = rest.strip()
            elif head == "p":
                groups.setdefault(group, []).extend(int(t) - 1 for t in rest.split())
            elif head == "f":
                a, b, c = (int(t.split("/")[0]) - 1 for t in rest.split())
                triangles.append((a, b, c))
            else:
                raise ValueError(f"unsupported record '{head}'")
        except ValueError as e:
            raise MeshExportError(f"{path}:{number}: {e}") from e

    tags = np.full(len(vertices), TAG_CODES["interior"], dtype=np.int64)
    for name, members in groups.items():
        if name not in TAG_CODES:
            raise MeshExportError(f"{path}: unknown vertex group '{name}'")
        tags[members] = TAG_CODES[name]
    return _assemble(vertices, triangles, tags, comments)


def load_ply(path: Union[str, Path]) -> SurfaceMesh:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise MeshExportError(f"cannot read {path}: {e}") from e
    if not lines or lines[0] != "ply":
        raise MeshExportError(f"{path}: not a PLY file")

    comments: List[str] = []
    counts: Dict[str, int] = {}
    body = 0
    for body, line in enumerate(lines[1:], 2):
        if line == "end_header":
            break
        words = line.split(" ", 1)
        if words[0] == "comment":
            if not words[1].startswith("tags "):
                comments.append(words[1])
        elif words[0] == "element":
            name, count = words[1].split()
            counts[name] = int(count)
    else:
        raise MeshExportError(f"{path}: missing end_header")

    n_v, n_f = counts.get("vertex", 0), counts.get("face", 0)
    rows = lines[body:body + n_v + n_f]
    if len(rows) != n_v + n_f:
        raise MeshExportError(f"{path}: expected {n_v} vertices and {n_f} faces, file is truncated")
    try:
        vertex_rows = [r.split() for r in rows[:n_v]]
        vertices = [(float(a), float(b), float(c)) for a, b, c, _ in vertex_rows]
        tags = np.asarray([int(t) for *_, t in vertex_rows], dtype=np.int64)
        triangles = []
        for r in rows[n_v:]:
            count, a, b, c = (int(t) for t in r.split())
            if count != 3:
                raise ValueError(f"face with {count} vertices")
            triangles.append((a, b, c))
    except ValueError as e:
        raise MeshExportError(f"{path}: {e}") from e
    return _assemble(vertices, triangles, tags, comments)


def load_mesh(path: Union[str, Path]) -> SurfaceMesh:
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix == "obj":
        return load_obj(path)
    if suffix == "ply":
        return load_ply(path)
    raise MeshExportError(f"cannot infer the mesh format of {path}")
