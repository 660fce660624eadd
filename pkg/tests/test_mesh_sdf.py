import numpy as np
import pytest
from hypothesis import given, strategies as st

from overhang_forge.bvh import TriangleBVH, brute_force_distance, point_triangle_dist2
from overhang_forge.grid import GridSpec
from overhang_forge.mesh import TriangleMesh, box_mesh, icosphere
from overhang_forge.mesh_sdf import WatertightError, inside_by_parity, mesh_to_sdf

coord = st.floats(-2, 2, allow_nan=False)


def test_icosphere_sdf_close_to_sphere():
    mesh = icosphere(4)
    g = GridSpec.from_box((-1.5,) * 3, (1.5,) * 3, (48,) * 3)
    f = mesh_to_sdf(mesh, g)
    r = np.linalg.norm(g.positions(), axis=-1)
    # chordal error of the polyhedron is below 0.002 at this subdivision
    assert np.abs(f.values - (r - 1.0)).max() < max(0.02, g.h_min)


def test_cube_center_and_corner():
    g = GridSpec.from_box((-1,) * 3, (2,) * 3, (31,) * 3)
    f = mesh_to_sdf(box_mesh((0, 0, 0), (1, 1, 1)), g)
    center = g.node_position((15, 15, 15))
    assert np.allclose(center, 0.5)
    assert f.values[15, 15, 15] == pytest.approx(-0.5, abs=1e-12)
    # corner node of the grid: distance to the cube corner at the origin
    assert f.values[0, 0, 0] == pytest.approx(np.sqrt(3.0), rel=0.05)


def test_open_cube_rejected():
    cube = box_mesh()
    opened = TriangleMesh(cube.vertices, cube.triangles[2:])
    g = GridSpec.from_box((-0.5,) * 3, (1.5,) * 3, (24,) * 3)
    with pytest.raises(WatertightError):
        inside_by_parity(opened, g)


def test_grid_must_enclose_mesh():
    g = GridSpec.from_box((-0.5,) * 3, (0.8,) * 3, (10,) * 3)
    with pytest.raises(ValueError, match="enclose"):
        mesh_to_sdf(box_mesh(), g)
    with pytest.raises(ValueError):
        mesh_to_sdf(box_mesh(), GridSpec.from_box((-1, -1), (2, 2), (10, 10)))


def test_parity_through_shared_edges():
    # the (0, 0) column hits the top and bottom faces at their centres, on the
    # diagonal shared by the two face triangles; no node lies on the surface
    g = GridSpec.from_box((-1, -1, -1.1), (1, 1, 1.1), (3, 3, 13))
    inside, diag = inside_by_parity(box_mesh((-0.5,) * 3, (0.5,) * 3), g)
    pos = g.positions()
    expected = np.all(np.abs(pos) < 0.5, axis=-1)
    assert expected.sum() == 5
    np.testing.assert_array_equal(inside, expected)


def test_bvh_matches_brute_force(rng):
    mesh = icosphere(2, radius=0.8, center=(0.1, -0.2, 0.3))
    pts = rng.uniform(-2, 2, size=(500, 3))
    tree = TriangleBVH(mesh.corners())
    np.testing.assert_allclose(tree.distance(pts), brute_force_distance(pts, mesh.corners()), atol=1e-12)
    capped = tree.distance(pts, max_distance=0.3)
    exact = brute_force_distance(pts, mesh.corners())
    assert np.all(np.isinf(capped[exact > 0.3]))
    np.testing.assert_allclose(capped[exact < 0.29], exact[exact < 0.29], atol=1e-12)


@given(coord, coord, coord)
def test_point_triangle_distance_matches_dense_sampling(x, y, z):
    tri = np.array([[0.0, 0.0, 0.0], [1.0, 0.2, 0.0], [0.3, 1.1, 0.4]])
    d = np.sqrt(point_triangle_dist2(x, y, z, tri))
    # barycentric sampling gives an upper bound that converges from above
    s, t = np.meshgrid(np.linspace(0, 1, 201), np.linspace(0, 1, 201))
    keep = s + t <= 1
    q = tri[0] + s[keep, None] * (tri[1] - tri[0]) + t[keep, None] * (tri[2] - tri[0])
    sampled = np.linalg.norm(q - np.array([x, y, z]), axis=1).min()
    assert d <= sampled + 1e-12
    assert sampled - d < 0.02


def test_zero_area_triangles_measure_to_their_edges():
    tris = np.array([[[0, 0, 0], [1, 0, 0], [2, 0, 0]],
                     [[0, 1, 0], [0, 1, 0], [0, 1, 0]]], dtype=float)
    pts = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 3.0], [3.0, 0.0, 0.0]])
    expected = [0.5, 3.0, 1.0]
    np.testing.assert_allclose(TriangleBVH(tris).distance(pts), expected, atol=1e-12)
    np.testing.assert_allclose(brute_force_distance(pts, tris), expected, atol=1e-12)
