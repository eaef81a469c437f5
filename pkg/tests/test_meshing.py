import numpy as np
import pytest

import toposdf.meshing as meshing
from toposdf.accel import python_impl
from toposdf.errors import DegenerateInputError, EmptyMeshError
from toposdf.filtration import grid_points
from toposdf.meshing import (TriangleMesh, marching_cubes,
                             marching_cubes_grid, mesh_components,
                             sample_surface)
from toposdf.mlp import Architecture, SdfModel

from _oracles import mesh_component_count_bfs


def linear_x0_model():
    arch = Architecture(2, 4, 1)
    w0 = np.zeros((3, 4))
    w0[0, 0] = 1.0
    w0[0, 1] = -1.0
    w1 = np.zeros((7, 1))
    w1[0, 0] = 1.0
    w1[1, 0] = -1.0
    return SdfModel(arch, [w0, w1], [np.zeros(4), np.zeros(1)])


def sphere_grid(res=64, radius=0.5):
    return np.linalg.norm(grid_points(res), axis=1) - radius


def tetrahedron(offset=0.0):
    verts = np.array(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.float64
    ) + offset
    tris = np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]], np.int32)
    return verts, tris


def test_sphere_area_and_closedness():
    mesh = marching_cubes_grid(sphere_grid(), 64)
    target = 4.0 * np.pi * 0.25
    assert abs(mesh.area() - target) / target < 0.03
    # every vertex sits near the analytic surface
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(r - 0.5).max() < 2.0 / 63.0
    # watertight genus-0: F = 2V - 4 exactly
    assert len(mesh.triangles) == 2 * len(mesh.vertices) - 4
    # no triangle repeats a vertex index
    t = mesh.triangles
    assert not np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2]))


def test_plane_is_reproduced_exactly():
    values = grid_points(16)[:, 0] - 0.123
    mesh = marching_cubes_grid(values, 16)
    assert np.abs(mesh.vertices[:, 0] - 0.123).max() < 1e-12
    assert mesh.area() == pytest.approx(4.0, rel=1e-12)


def test_model_path_matches_grid_path():
    model = linear_x0_model()
    from_model = marching_cubes(model, resolution=8)
    values = grid_points(8)[:, 0]
    from_grid = marching_cubes_grid(values, 8)
    np.testing.assert_array_equal(from_model.vertices, from_grid.vertices)
    np.testing.assert_array_equal(from_model.triangles, from_grid.triangles)
    assert np.abs(from_model.vertices[:, 0]).max() < 1e-12


def test_resolution_floor():
    with pytest.raises(ValueError):
        marching_cubes(linear_x0_model(), resolution=4)


def test_no_crossing_raises_empty_mesh():
    values = sphere_grid(16) + 2.0   # strictly positive
    with pytest.raises(EmptyMeshError) as exc:
        marching_cubes_grid(values, 16)
    assert exc.value.min_value > 0.0
    assert "iso" in str(exc.value)
    with pytest.raises(EmptyMeshError):
        marching_cubes_grid(-np.abs(values), 16)   # strictly below iso


def test_iso_offset_shifts_the_surface():
    values = sphere_grid(64)
    mesh = marching_cubes_grid(values, 64, iso=-0.1)
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(r - 0.4).max() < 2.0 / 63.0


def test_components_tetrahedra():
    verts, tris = tetrahedron()
    mesh = TriangleMesh(verts, tris)
    assert mesh_components(mesh) == (1, [4])
    np.testing.assert_array_equal(mesh.component_labels, np.zeros(4))

    v2, t2 = tetrahedron(offset=5.0)
    both = TriangleMesh(np.vstack([verts, v2]), np.vstack([tris, t2 + 4]))
    count, sizes = mesh_components(both)
    assert (count, sizes) == (2, [4, 4])
    np.testing.assert_array_equal(both.component_labels, [0, 0, 0, 0, 1, 1, 1, 1])


def test_components_match_bfs_oracle_on_random_soup():
    rng = np.random.default_rng(4)
    for trial in range(20):
        nv = int(rng.integers(6, 40))
        nt = int(rng.integers(1, 60))
        tris = np.empty((nt, 3), dtype=np.int32)
        for i in range(nt):
            tris[i] = rng.choice(nv, size=3, replace=False)
        mesh = TriangleMesh(rng.normal(size=(nv, 3)), tris)
        count, sizes = mesh_components(mesh)
        oracle_count, oracle_labels = mesh_component_count_bfs(tris, nv)
        assert count == oracle_count
        assert sum(sizes) == nt
        assert sorted(set(mesh.component_labels)) == list(range(count))
        # same partition of triangles, label names aside
        for comp in range(count):
            members = np.flatnonzero(mesh.component_labels == comp)
            assert len(set(oracle_labels[members])) == 1


def test_sphere_mesh_is_one_component():
    mesh = marching_cubes_grid(sphere_grid(32), 32)
    count, _ = mesh_components(mesh)
    assert count == 1


def test_sampling_stays_inside_triangle():
    verts = np.array([[0, 0, 0], [2, 0, 0], [0, 3, 0]], dtype=np.float64)
    mesh = TriangleMesh(verts, np.array([[0, 1, 2]], np.int32))
    s = sample_surface(mesh, 500, seed=1)
    # in-plane, nonnegative barycentrics
    assert np.abs(s[:, 2]).max() == 0.0
    u = s[:, 0] / 2.0
    v = s[:, 1] / 3.0
    assert u.min() >= 0.0 and v.min() >= 0.0
    assert (u + v).max() <= 1.0 + 1e-12


def test_sampling_respects_area_weights():
    verts = np.array(
        [[0, 0, 0], [6, 0, 0], [0, 3, 0], [10, 0, 0], [12, 0, 0], [10, 1, 0]],
        dtype=np.float64,
    )
    mesh = TriangleMesh(verts, np.array([[0, 1, 2], [3, 4, 5]], np.int32))
    s = sample_surface(mesh, 10000, seed=5)
    big = np.sum(s[:, 0] < 8.0)
    # binomial 3-sigma band around 9000
    assert abs(big - 9000) <= 3 * np.sqrt(10000 * 0.9 * 0.1)


def test_sampling_determinism_and_zero_area():
    verts, tris = tetrahedron()
    mesh = TriangleMesh(verts, tris)
    np.testing.assert_array_equal(
        sample_surface(mesh, 64, seed=9), sample_surface(mesh, 64, seed=9)
    )
    flat = TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 2]], np.int32))
    with pytest.raises(DegenerateInputError):
        sample_surface(flat, 10)


def test_triangle_index_validation():
    with pytest.raises(ValueError):
        TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 5]], np.int32))


def test_python_kernel_matches_accelerated_path():
    values = sphere_grid(20)
    mesh = marching_cubes_grid(values, 20)
    emit = python_impl(meshing._emit_triangles)
    inside = values.reshape(20, 20, 20) < 0.0
    origin = np.array([-1.0, -1.0, -1.0])
    spacing = np.full(3, 2.0 / 19.0)
    (vx, vy, vz), verts = meshing._weld_vertices(
        inside, origin, spacing, values.reshape(20, 20, 20).astype(float), 0.0
    )
    tris = np.empty_like(mesh.triangles)
    filled = emit(inside, vx, vy, vz, meshing._TRI_ARRAY, meshing._TRI_LEN,
                  meshing._EDGE_AXIS, meshing._EDGE_BASE, tris)
    assert filled == len(mesh.triangles)
    np.testing.assert_array_equal(tris, mesh.triangles)
    np.testing.assert_array_equal(verts, mesh.vertices)
