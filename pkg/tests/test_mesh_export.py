import numpy as np
import pytest

from src.core.exceptions import MeshExportError
from src.core.strip_domain import SingularSet
from src.processing.mesh_export import export_mesh, load_mesh, load_obj, load_ply, obj_text, ply_text
from src.processing.surface_builder import SurfaceMesh, build_fundamental_piece


@pytest.fixture(scope="module")
def piece(cfg, single_forms):
    return build_fundamental_piece(cfg, SingularSet.centred([0]), single_forms, metadata={"run": "test"})


@pytest.mark.parametrize("fmt, render", [("obj", obj_text), ("ply", ply_text)])
def test_reexport_is_identical(tmp_path, piece, fmt, render):
    path = export_mesh(piece, tmp_path / f"mesh.{fmt}", fmt)
    loaded = load_mesh(path)
    assert render(loaded) == path.read_text()
    np.testing.assert_array_equal(loaded.tags, piece.tags)
    np.testing.assert_array_equal(loaded.triangles, piece.triangles)
    np.testing.assert_allclose(loaded.vertices, piece.vertices, rtol=1e-11, atol=1e-14)
    assert loaded.metadata["run"] == "test"
    assert loaded.metadata["p"] == "0"


def test_obj_layout(piece):
    text = obj_text(piece)
    assert text.startswith("# quasi-periodic maximal-graph conjugate surface\n")
    assert "\ng plane_z0\n" in text
    assert text.count("\nv ") == piece.n_vertices
    assert text.count("\nf ") == piece.n_triangles


def test_ply_header(piece):
    lines = ply_text(piece).splitlines()
    assert lines[:2] == ["ply", "format ascii 1.0"]
    assert f"element vertex {piece.n_vertices}" in lines
    assert f"element face {piece.n_triangles}" in lines


@pytest.mark.parametrize("suffix", ["obj", "ply"])
def test_empty_mesh_round_trip(tmp_path, suffix):
    path = export_mesh(SurfaceMesh.empty(), tmp_path / f"empty.{suffix}", suffix)
    loaded = load_mesh(path)
    assert loaded.n_vertices == 0
    assert loaded.n_triangles == 0


def test_unknown_format(tmp_path, piece):
    with pytest.raises(MeshExportError):
        export_mesh(piece, tmp_path / "mesh.stl", "stl")
    (tmp_path / "mesh.stl").write_text("solid\n")
    with pytest.raises(MeshExportError):
        load_mesh(tmp_path / "mesh.stl")


def test_corrupt_files(tmp_path):
    bad_obj = tmp_path / "bad.obj"
    bad_obj.write_text("v 1 2\n")
    with pytest.raises(MeshExportError):
        load_obj(bad_obj)

    bad_group = tmp_path / "group.obj"
    bad_group.write_text("v 0 0 0\ng nowhere\np 1\n")
    with pytest.raises(MeshExportError):
        load_obj(bad_group)

    truncated = tmp_path / "short.ply"
    truncated.write_text("ply\nformat ascii 1.0\nelement vertex 2\nelement face 0\nend_header\n0 0 0 0\n")
    with pytest.raises(MeshExportError):
        load_ply(truncated)

    not_ply = tmp_path / "other.ply"
    not_ply.write_text("solid\n")
    with pytest.raises(MeshExportError):
        load_ply(not_ply)


def test_missing_file(tmp_path):
    with pytest.raises(MeshExportError):
        load_obj(tmp_path / "absent.obj")
