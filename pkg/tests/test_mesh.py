import numpy as np
import pytest

from courtpose.errors import ValidationError
from courtpose.mesh import (BodyMesh, PartMesh, adjacency_lists, load_obj,
                            mesh_edges, save_obj, uniform_laplacian,
                            vertex_normals)
from courtpose.primitives import icosphere, plane_grid, tri_grid


def test_vertex_normals_sphere_radial_within_2_degrees():
    sphere = icosphere(1.0, 3, part="head")
    n = vertex_normals(sphere)
    radial = sphere.vertices / np.linalg.norm(sphere.vertices, axis=1, keepdims=True)
    cos = np.sum(n * radial, axis=1)
    angles = np.degrees(np.arccos(np.clip(cos, -1, 1)))
    assert angles.max() < 2.0


def test_vertex_normals_flat_quad_and_winding_flip():
    quad = PartMesh(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]],
        [[0, 1, 2], [0, 2, 3]], "shirt")
    n = vertex_normals(quad)
    assert np.allclose(n, [[0, 0, 1]] * 4)
    flipped = PartMesh(quad.vertices, quad.faces[:, ::-1], "shirt")
    assert np.allclose(vertex_normals(flipped), -n)


def test_vertex_normals_isolated_vertex_zero():
    m = PartMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]],
                 [[0, 1, 2]], "shirt")
    n = vertex_normals(m)
    assert np.linalg.norm(n[3]) == 0.0


def test_laplacian_interior_grid_vertex_zero():
    g = plane_grid(5, 5)
    L = uniform_laplacian(g)
    out = L @ g.vertices
    interior = 2 * 5 + 2  # (2,2) in a 5x5 grid
    assert np.abs(out[interior]).max() < 1e-12


def test_laplacian_constant_function_zero():
    g = tri_grid(5, 6)
    L = uniform_laplacian(g)
    const = np.ones((g.num_vertices, 1)) * 3.7
    assert np.abs(L @ const).max() < 1e-12


def test_laplacian_matches_neighbor_average_oracle():
    sphere = icosphere(1.0, 1, part="legs")
    L = uniform_laplacian(sphere)
    out = L @ sphere.vertices
    adj = adjacency_lists(sphere.num_vertices, sphere.faces)
    for i in range(sphere.num_vertices):
        expect = np.mean(sphere.vertices[adj[i]], axis=0) - sphere.vertices[i]
        assert np.abs(out[i] - expect).max() < 1e-12


def test_laplacian_isolated_vertex_zero_row():
    m = PartMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9]],
                 [[0, 1, 2]], "shirt")
    L = uniform_laplacian(m).toarray()
    assert np.abs(L[3]).max() == 0.0


def test_affine_function_zero_at_interior_vertices():
    g = tri_grid(6, 7)
    L = uniform_laplacian(g)
    A = np.array([[1.0, 2.0, 0.0], [0.5, -1.0, 0.0], [0.0, 0.0, 1.0]])
    f = g.vertices @ A.T + np.array([0.3, -0.7, 2.0])
    out = L @ f
    interior = [r * 7 + c for r in range(2, 4) for c in range(2, 5)]
    assert np.abs(out[interior]).max() < 1e-12


def test_obj_round_trip(tmp_path):
    body = BodyMesh((
        icosphere(0.5, 1, part="head"),
        plane_grid(3, 3, part="shirt"),
    ))
    path = tmp_path / "body.obj"
    save_obj(path, body)
    back = load_obj(path)
    assert isinstance(back, BodyMesh)
    assert [p.part for p in back.parts] == ["head", "shirt"]
    for a, b in zip(body.parts, back.parts):
        assert np.abs(a.vertices - b.vertices).max() < 1e-6
        assert np.array_equal(a.faces, b.faces)


def test_obj_rejects_degenerate_faces(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
    with pytest.raises(ValidationError):
        load_obj(path)


def test_part_name_validation():
    with pytest.raises(ValidationError):
        PartMesh(np.zeros((3, 3)), [[0, 1, 2]], "torso")


def test_face_index_validation():
    with pytest.raises(ValidationError):
        PartMesh(np.zeros((3, 3)), [[0, 1, 7]], "head")


def test_mesh_edges_unique_sorted():
    g = plane_grid(3, 3)
    e = mesh_edges(g.faces)
    assert np.all(e[:, 0] < e[:, 1])
    assert len(np.unique(e, axis=0)) == len(e)
