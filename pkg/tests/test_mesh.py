import numpy as np
import pytest

from eafe_control.mesh import (
    DIAGONAL_CONVENTIONS,
    MeshCapacityError,
    TriMesh,
    build_unit_square,
    delaunay_check,
    read_node_ele,
    signed_areas,
    uniform_refine,
    write_node_ele,
    write_vtk,
)


def test_level1_counts():
    mesh = build_unit_square(1)
    assert mesh.num_vertices == 9
    assert mesh.num_triangles == 8
    assert mesh.h == pytest.approx(np.sqrt(2.0) / 2.0, rel=1e-15)


def test_level3_counts():
    mesh = build_unit_square(3)
    assert mesh.num_vertices == 81
    assert mesh.num_triangles == 128


def test_level8_counts_match_formula():
    # formula (2^k+1)^2 and 2*4^k, cross-checked by explicit construction
    mesh = build_unit_square(8)
    assert mesh.num_vertices == (2**8 + 1) ** 2 == 66049
    assert mesh.num_triangles == 2 * 4**8 == 131072


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_areas_positive_and_sum_to_one(level):
    mesh = build_unit_square(level)
    areas = signed_areas(mesh)
    assert np.all(areas > 0.0)
    assert abs(areas.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("level", [1, 2, 3])
def test_euler_formula(level):
    mesh = build_unit_square(level)
    assert mesh.num_vertices - mesh.num_edges + mesh.num_triangles == 1


@pytest.mark.parametrize("level", [1, 2, 3])
def test_edge_triangle_adjacency(level):
    mesh = build_unit_square(level)
    boundary = mesh.edge_tris[:, 1] < 0
    # interior edges touch exactly 2 triangles, boundary edges exactly 1
    assert np.all(mesh.edge_tris[:, 0] >= 0)
    n = 2**level
    assert boundary.sum() == 4 * n


def test_mesh_size_halves_per_level():
    h1 = build_unit_square(1).h
    for level in [2, 3, 4]:
        assert build_unit_square(level).h == pytest.approx(
            2.0 ** (1 - level) * h1, rel=1e-14
        )


def test_conforming_no_hanging_vertices():
    mesh = build_unit_square(3)
    # every vertex of an edge belongs to each adjacent triangle's vertex set
    for e in range(mesh.num_edges):
        i, j = mesh.edges[e]
        for t in mesh.edge_tris[e]:
            if t >= 0:
                tri = set(mesh.triangles[t])
                assert i in tri and j in tri


def test_capacity_errors():
    with pytest.raises(MeshCapacityError):
        build_unit_square(0)
    with pytest.raises(MeshCapacityError):
        build_unit_square(12)  # (2^12+1)^2 > 10^6


def test_refine_counts_and_boundary():
    fine = uniform_refine(build_unit_square(1))
    assert fine.level == 2
    assert fine.num_vertices == 25
    assert fine.num_triangles == 32
    assert fine.boundary_vertex.sum() == 4 * 2**2
    coarse = build_unit_square(1)
    assert coarse.boundary_vertex.sum() == 4 * 2**1


def test_refine_matches_direct_build():
    refined = uniform_refine(build_unit_square(2))
    direct = build_unit_square(3)
    # vertex coordinate sets coincide exactly (dyadic midpoints)
    assert set(map(tuple, refined.vertices)) == set(map(tuple, direct.vertices))
    assert refined.num_triangles == direct.num_triangles


def test_refine_capacity_error():
    mesh = build_unit_square(3)
    with pytest.raises(MeshCapacityError):
        uniform_refine(mesh, vertex_cap=100)


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_delaunay_structured(level):
    report = delaunay_check(build_unit_square(level))
    assert report.ok
    assert report.violating_edges == []


def test_delaunay_refined():
    assert delaunay_check(uniform_refine(build_unit_square(2))).ok


def test_delaunay_equilateral():
    mesh = TriMesh(
        [[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]], [[0, 1, 2]]
    )
    assert delaunay_check(mesh).ok


def test_delaunay_violation_detected():
    # two obtuse triangles across the shared edge (opposite angles > 90 deg)
    verts = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.12], [0.5, -0.12]]
    tris = [[0, 1, 2], [0, 3, 1]]
    mesh = TriMesh(verts, tris)
    report = delaunay_check(mesh)
    assert not report.ok
    (bad,) = report.violating_edges
    assert sorted(mesh.edges[bad]) == [0, 1]


def test_other_diagonal_convention():
    mesh = build_unit_square(2, diagonal=DIAGONAL_CONVENTIONS[1])
    assert mesh.num_triangles == 32
    assert np.all(signed_areas(mesh) > 0.0)
    assert delaunay_check(mesh).ok


def test_node_ele_round_trip(tmp_path):
    mesh = build_unit_square(2)
    path = tmp_path / "mesh.txt"
    write_node_ele(mesh, path)
    back = read_node_ele(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.boundary_vertex, mesh.boundary_vertex)


def test_vtk_export(tmp_path):
    mesh = build_unit_square(1)
    path = tmp_path / "mesh.vtk"
    write_vtk(mesh, path, point_data={"field": np.arange(9.0)})
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 2.0"
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "POINTS 9 double" in text
    assert "CELLS 8 32" in text
    assert "SCALARS field double" in text
    with pytest.raises(ValueError):
        write_vtk(mesh, path, point_data={"bad": np.zeros(3)})
