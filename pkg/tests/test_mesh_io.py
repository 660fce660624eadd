import logging
import struct

import numpy as np
import pytest

from overhang_forge.mesh import (Contour2D, MeshParseError, TriangleMesh, box_mesh, icosphere, load_mesh,
                                 read_mesh, sniff_format, stl_ascii_bytes, stl_binary_bytes, write_obj,
                                 write_stl, write_svg)


def _soup_stl(corners) -> bytes:
    # independent binary STL encoder: header, count, then 50-byte records
    out = bytearray(b"\0" * 80 + struct.pack("<I", len(corners)))
    for tri in corners:
        out += struct.pack("<3f", 0, 0, 0)
        for v in tri:
            out += struct.pack("<3f", *v)
        out += struct.pack("<H", 0)
    return bytes(out)


def test_cube_binary_stl_welds_to_eight_vertices():
    cube = box_mesh((0, 0, 0), (1, 2, 3))
    data = _soup_stl(cube.corners())
    assert len(data) == 84 + 50 * 12
    mesh = load_mesh(data, "stl-binary")
    assert len(mesh) == 12 and len(mesh.vertices) == 8
    assert mesh.volume() == pytest.approx(6.0)
    lo, hi = mesh.bounds()
    np.testing.assert_allclose(lo, 0) and np.testing.assert_allclose(hi, (1, 2, 3))


def test_ascii_zero_area_triangle_dropped_with_warning(caplog):
    cube = box_mesh()
    text = stl_ascii_bytes(cube).decode()
    sliver = ("  facet normal 0 0 0\n    outer loop\n      vertex 0 0 0\n      vertex 1 0 0\n"
              "      vertex 2 0 0\n    endloop\n  endfacet\n")
    text = text.replace("endsolid", sliver + "endsolid")
    with caplog.at_level(logging.WARNING):
        mesh = load_mesh(text.encode(), "stl-ascii")
    assert len(mesh) == 12 and mesh.dropped_degenerate == 1
    assert "degenerate" in caplog.text


def test_truncated_binary_names_offset():
    data = stl_binary_bytes(box_mesh())
    with pytest.raises(MeshParseError, match=r"byte offset 500"):
        load_mesh(data[:500], "stl-binary")
    with pytest.raises(MeshParseError, match=r"byte offset 40"):
        load_mesh(data[:40], "stl-binary")


@pytest.mark.parametrize("text, msg", [
    ("solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0\n", "line 4"),
    ("solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0 0\n vertex 1 0 0\n endloop\n", "2 vertices"),
    ("solid x\n bogus\n", "unexpected token"),
    ("solid x\nendsolid x\n", "no facets"),
])
def test_ascii_errors(text, msg):
    with pytest.raises(MeshParseError, match=msg):
        load_mesh(text.encode(), "stl-ascii")


def test_obj_quads_and_negative_indices():
    text = b"""# unit square pyramid
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0.5 0.5 1
f 4 3 2 1
f 1 2 -1
f 2/7/1 3 5
f 3 4 5
f 4 1 5
"""
    mesh = load_mesh(text, "obj")
    assert len(mesh) == 6
    assert mesh.volume() == pytest.approx(1.0 / 3.0)


def test_obj_errors():
    with pytest.raises(MeshParseError, match="out of range"):
        load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", "obj")
    with pytest.raises(MeshParseError, match="no faces"):
        load_mesh(b"v 0 0 0\n", "obj")
    with pytest.raises(ValueError):
        load_mesh(b"", "ply")


def test_round_trips(tmp_path):
    sphere = icosphere(2)
    assert len(sphere) == 320
    for name, data in [("a.stl", stl_binary_bytes(sphere)), ("b.stl", stl_ascii_bytes(sphere))]:
        (tmp_path / name).write_bytes(data)
        back = read_mesh(tmp_path / name)
        assert len(back) == 320 and back.volume() == pytest.approx(sphere.volume(), rel=1e-6)
    write_stl(sphere, tmp_path / "c.stl")
    assert sniff_format((tmp_path / "c.stl").read_bytes()) == "stl-binary"
    write_obj(tmp_path / "d.obj", {"model": sphere})
    back = read_mesh(tmp_path / "d.obj")
    assert len(back) == 320 and back.volume() == pytest.approx(sphere.volume(), rel=1e-6)


def test_icosphere_is_outward_and_converges():
    for k in (1, 3):
        m = icosphere(k)
        assert m.volume() > 0
        assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0)
    assert icosphere(4).volume() == pytest.approx(4 * np.pi / 3, rel=0.01)


def test_contour_measures_and_svg(tmp_path):
    sq = np.array([[0, 0], [2, 0], [2, 1], [0, 1], [0, 0]], dtype=float)
    c = Contour2D([sq])
    assert c.perimeter() == pytest.approx(6.0)
    assert abs(c.area()) == pytest.approx(2.0)
    write_svg(tmp_path / "c.svg", {"model": (c, "black")}, ((0, 0), (2, 1)))
    assert (tmp_path / "c.svg").read_text().count("<polyline") == 1
    write_obj(tmp_path / "c.obj", {"model": c})
    assert (tmp_path / "c.obj").read_text().count("\nl ") == 1


def test_empty_mesh():
    m = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    assert m.is_empty and len(m) == 0
