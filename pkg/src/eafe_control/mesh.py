"""
Structured conforming triangulations of the unit square.

Meshes are stored as flat numpy arrays (vertices, triangles, edges) with
full edge-to-triangle connectivity, so that edge-based schemes and the
Delaunay/monotonicity checks can run without touching any geometry code
again.  All cells of the structured family are split along the
lower-left-to-upper-right diagonal; the convention is recorded on the mesh
(``diagonal`` attribute) because layer-resolution behavior depends on it.

A built mesh is immutable by convention: no function in this package
mutates a TriMesh after construction.
"""

import numpy as np

DIAGONAL_CONVENTION = "lowerleft-upperright"

#: both cell-splitting conventions the structured builder supports
DIAGONAL_CONVENTIONS = ("lowerleft-upperright", "upperleft-lowerright")

DEFAULT_VERTEX_CAP = 1_000_000

#: local edges of a triangle (v0,v1,v2), each ordered tail -> head
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


class MeshCapacityError(ValueError):
    """Requested mesh exceeds the configured vertex budget."""


class GeometryError(ValueError):
    """Degenerate or inverted element encountered."""


class TriMesh:
    """
    Conforming triangle mesh of a planar domain.

    Attributes
    ----------
    vertices : (N, 2) float array
        Vertex coordinates.
    triangles : (M, 3) int array
        Vertex indices per triangle, counterclockwise.
    edges : (E, 2) int array
        Unique edges as (i, j) with i < j.
    edge_tris : (E, 2) int array
        Adjacent triangle indices per edge; second entry is -1 for
        boundary edges.
    tri_edges : (M, 3) int array
        Edge index of each local edge (LOCAL_EDGES order).
    boundary_vertex : (N,) bool array
        True for vertices lying on the domain boundary.
    level : int
        Refinement level (>= 1 for the structured family).
    h : float
        Mesh size, max over triangles of their diameter.
    diagonal : str
        Cell-splitting convention tag.
    """

    def __init__(self, vertices, triangles, level=1, diagonal=DIAGONAL_CONVENTION):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.level = int(level)
        self.diagonal = diagonal

        areas = signed_areas(self)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise GeometryError(
                "triangle %d has non-positive signed area %g" % (bad, areas[bad])
            )

        self.edges, self.edge_tris, self.tri_edges = _edge_connectivity(self.triangles)
        boundary_edges = self.edge_tris[:, 1] < 0
        flag = np.zeros(self.num_vertices, dtype=bool)
        flag[self.edges[boundary_edges].ravel()] = True
        self.boundary_vertex = flag

        p = self.vertices[self.triangles]
        side = np.stack(
            [
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            ],
            axis=1,
        )
        self.h = float(side.max())

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def interior_vertices(self):
        """Indices of non-boundary vertices."""
        return np.flatnonzero(~self.boundary_vertex)

    def __repr__(self):
        return "TriMesh(level=%d, vertices=%d, triangles=%d, h=%.4g)" % (
            self.level,
            self.num_vertices,
            self.num_triangles,
            self.h,
        )


def _edge_connectivity(triangles):
    """Unique (i<j) edges, their adjacent triangles, and the tri->edge map."""
    m = triangles.shape[0]
    pairs = np.concatenate(
        [triangles[:, (a, b)] for a, b in LOCAL_EDGES], axis=0
    )
    pairs_sorted = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs_sorted, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(3, m).T.copy()

    counts = np.bincount(inverse, minlength=edges.shape[0])
    if counts.max() > 2:
        raise GeometryError("non-manifold edge: more than two adjacent triangles")
    edge_tris = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    tri_of_pair = np.tile(np.arange(m, dtype=np.int64), 3)
    # first pass fills slot 0, second fills slot 1
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    sorted_tris = tri_of_pair[order]
    first = np.ones(len(sorted_edges), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_tris[sorted_edges[first], 0] = sorted_tris[first]
    second = ~first
    edge_tris[sorted_edges[second], 1] = sorted_tris[second]
    return edges, edge_tris, tri_edges


def signed_areas(mesh):
    """Signed area of every triangle (positive for counterclockwise)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_unit_square(level, vertex_cap=DEFAULT_VERTEX_CAP,
                      diagonal=DIAGONAL_CONVENTION):
    """
    Structured triangulation of [0,1]^2 at the given refinement level.

    Level k uses n = 2^k segments per side; every grid cell is split into
    two triangles along the chosen diagonal (lower-left to upper-right by
    default).  The resulting mesh has (n+1)^2 vertices and 2 n^2
    triangles.

    Raises
    ------
    MeshCapacityError
        If level < 1 or the vertex count would exceed ``vertex_cap``.
    """
    level = int(level)
    if level < 1:
        raise MeshCapacityError("level must be >= 1, got %d" % level)
    if diagonal not in DIAGONAL_CONVENTIONS:
        raise ValueError("unknown diagonal convention %r" % diagonal)
    n = 2**level
    nv = (n + 1) ** 2
    if nv > vertex_cap:
        raise MeshCapacityError(
            "level %d needs %d vertices, exceeding the cap of %d"
            % (level, nv, vertex_cap)
        )

    t = np.linspace(0.0, 1.0, n + 1)
    xg, yg = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ii = ii.ravel()
    jj = jj.ravel()
    v00 = vid(ii, jj)
    v10 = vid(ii + 1, jj)
    v11 = vid(ii + 1, jj + 1)
    v01 = vid(ii, jj + 1)
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    if diagonal == "lowerleft-upperright":
        triangles[0::2] = np.column_stack([v00, v10, v11])
        triangles[1::2] = np.column_stack([v00, v11, v01])
    else:
        triangles[0::2] = np.column_stack([v00, v10, v01])
        triangles[1::2] = np.column_stack([v10, v11, v01])
    return TriMesh(vertices, triangles, level=level, diagonal=diagonal)


def uniform_refine(mesh, vertex_cap=DEFAULT_VERTEX_CAP):
    """
    Split every triangle into four congruent children by edge midpoints.

    The refined mesh of the structured unit-square family coincides with
    ``build_unit_square(level + 1)`` up to vertex ordering.
    """
    nv = mesh.num_vertices
    new_nv = nv + mesh.num_edges
    if new_nv > vertex_cap:
        raise MeshCapacityError(
            "refinement needs %d vertices, exceeding the cap of %d"
            % (new_nv, vertex_cap)
        )
    midpoints = 0.5 * (
        mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]
    )
    vertices = np.vstack([mesh.vertices, midpoints])

    t = mesh.triangles
    m01 = nv + mesh.tri_edges[:, 0]
    m12 = nv + mesh.tri_edges[:, 1]
    m20 = nv + mesh.tri_edges[:, 2]
    children = np.empty((4 * mesh.num_triangles, 3), dtype=np.int64)
    children[0::4] = np.column_stack([t[:, 0], m01, m20])
    children[1::4] = np.column_stack([m01, t[:, 1], m12])
    children[2::4] = np.column_stack([m20, m12, t[:, 2]])
    children[3::4] = np.column_stack([m01, m12, m20])
    return TriMesh(vertices, children, level=mesh.level + 1, diagonal=mesh.diagonal)


class DelaunayReport:
    """Outcome of the edge-weight (Delaunay) check."""

    def __init__(self, ok, violating_edges, tol):
        self.ok = bool(ok)
        self.violating_edges = list(violating_edges)
        self.tol = float(tol)

    def __repr__(self):
        return "DelaunayReport(ok=%s, violations=%d, tol=%.3g)" % (
            self.ok,
            len(self.violating_edges),
            self.tol,
        )


def delaunay_check(mesh):
    """
    Check nonnegativity of the summed edge weights.

    For every interior edge shared by triangles T and T' the combined
    weight w_E^T + w_E^T' must be >= -tol, and for boundary edges the
    single weight must be >= -tol, with tol = 1e-12 times the largest
    weight magnitude.  This is exactly the condition under which the
    edge-averaged stiffness matrix keeps nonpositive off-diagonal entries.
    """
    from .eafe import triangle_edge_weights

    w = triangle_edge_weights(mesh)  # (M, 3), LOCAL_EDGES order
    sums = np.zeros(mesh.num_edges)
    np.add.at(sums, mesh.tri_edges.ravel(), w.ravel())
    tol = 1e-12 * max(np.abs(w).max(), 1e-300)
    bad = np.flatnonzero(sums < -tol)
    return DelaunayReport(bad.size == 0, bad.tolist(), tol)


def write_node_ele(mesh, path):
    """
    Dump the mesh as plain text: one "x y bflag" line per vertex, then one
    "i j k" line per triangle.
    """
    with open(path, "w") as fh:
        fh.write("%d %d\n" % (mesh.num_vertices, mesh.num_triangles))
        for (x, y), b in zip(mesh.vertices, mesh.boundary_vertex):
            fh.write("%r %r %d\n" % (float(x), float(y), int(b)))
        for i, j, k in mesh.triangles:
            fh.write("%d %d %d\n" % (i, j, k))


def read_node_ele(path):
    """Read a mesh written by :func:`write_node_ele`."""
    with open(path) as fh:
        nv, nt = (int(s) for s in fh.readline().split())
        vertices = np.empty((nv, 2))
        for i in range(nv):
            x, y, _ = fh.readline().split()
            vertices[i] = (float(x), float(y))
        triangles = np.empty((nt, 3), dtype=np.int64)
        for i in range(nt):
            triangles[i] = [int(s) for s in fh.readline().split()]
    return TriMesh(vertices, triangles)


def write_vtk(mesh, path, point_data=None, title="unstructured grid"):
    """
    Write the mesh (and optional per-vertex scalar fields) as a legacy
    ASCII VTK unstructured grid.

    Parameters
    ----------
    point_data : dict of name -> (N,) array, optional
        Nodal scalar fields attached as POINT_DATA.
    """
    nv = mesh.num_vertices
    nt = mesh.num_triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write("%s\n" % title)
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write("POINTS %d double\n" % nv)
        for x, y in mesh.vertices:
            fh.write("%r %r 0.0\n" % (float(x), float(y)))
        fh.write("CELLS %d %d\n" % (nt, 4 * nt))
        for i, j, k in mesh.triangles:
            fh.write("3 %d %d %d\n" % (i, j, k))
        fh.write("CELL_TYPES %d\n" % nt)
        fh.write("5\n" * nt)
        if point_data:
            fh.write("POINT_DATA %d\n" % nv)
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                if values.shape != (nv,):
                    raise ValueError(
                        "point data %r has shape %s, expected (%d,)"
                        % (name, values.shape, nv)
                    )
                fh.write("SCALARS %s double\n" % name)
                fh.write("LOOKUP_TABLE default\n")
                for v in values:
                    fh.write("%r\n" % float(v))
