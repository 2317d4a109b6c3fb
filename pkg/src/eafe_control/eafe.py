"""
Edge-averaged finite element (EAFE) discretization of the
convection-diffusion(-reaction) operator.

The elementwise flux integral of the standard P1 method is replaced by
exponentially fitted two-point fluxes on the element edges.  Per edge E
with endpoints x_i -> x_j, edge-averaged coefficients eps_E, zeta_E (the
arithmetic mean of the endpoint values) define the flux degree of freedom

    c_ij * y(x_j) - c_ji * y(x_i),

where c_ij = eps_E * B(zeta_E . (x_i - x_j) / eps_E) and
c_ji = eps_E * B(zeta_E . (x_j - x_i) / eps_E), with B the Bernoulli
function B(x) = x / (e^x - 1), B(0) = 1.  Both coefficients are strictly
positive, so the assembled matrix keeps nonpositive off-diagonal entries
exactly when the summed edge weights are nonnegative (the Delaunay
condition); the scheme is then an M-matrix and inherits the discrete
maximum principle.
"""

import warnings

import numpy as np

from .fem_core import (
    CoefficientError,
    DataError,
    as_scalar_field,
    barycentric_gradient_table,
    barycentric_gradients,
    default_quadrature,
    lumped_mass_diagonal,
)
from .mesh import LOCAL_EDGES, signed_areas
from .sparse_linalg import from_triplets

#: switch-over into the overflow-safe evaluation branch
_BIG_ARG = 700.0


class MonotonicityLossWarning(UserWarning):
    """Edge-weight (Delaunay) condition failed; off-diagonal signs may flip."""


def bernoulli(x):
    """
    Bernoulli function B(x) = x / (e^x - 1), continuously extended with
    B(0) = 1.

    Stable over the whole double range: for x > 700 the equivalent form
    x e^{-x} / (1 - e^{-x}) is used (underflows gracefully to 0), and for
    large negative x the direct formula already yields -x since
    expm1(x) -> -1.  Scalar input gives scalar output.

    Raises
    ------
    DataError
        If any input is NaN or infinite.
    """
    arr = np.asarray(x, dtype=float)
    if not np.isfinite(arr).all():
        raise DataError("Bernoulli function requires finite input")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.ones_like(arr)
    moderate = (arr != 0.0) & (arr <= _BIG_ARG)
    xm = arr[moderate]
    out[moderate] = xm / np.expm1(xm)
    big = arr > _BIG_ARG
    if np.any(big):
        e = np.exp(-arr[big])
        out[big] = arr[big] * e / (1.0 - e)
    return out[0] if scalar else out


def triangle_edge_weights(mesh):
    """
    Edge weights of every triangle, shape (M, 3) in LOCAL_EDGES order.

    The weight of edge (i, j) in triangle T is -area * grad(lambda_i) .
    grad(lambda_j), equal to half the cotangent of the angle opposite the
    edge.  Summed over the one or two adjacent triangles these weights
    reproduce the P1 Laplacian exactly on piecewise linears.
    """
    grads = barycentric_gradient_table(mesh)
    areas = signed_areas(mesh)
    w = np.empty((mesh.num_triangles, 3))
    for k, (a, b) in enumerate(LOCAL_EDGES):
        w[:, k] = -areas * np.einsum("md,md->m", grads[:, a, :], grads[:, b, :])
    return w


def edge_weight(mesh, t, local_edge):
    """Weight of one local edge of triangle ``t`` (LOCAL_EDGES indexing)."""
    a, b = LOCAL_EDGES[local_edge]
    grads = barycentric_gradients(mesh, t)
    p = mesh.vertices[mesh.triangles[t]]
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    return float(-area * np.dot(grads[a], grads[b]))


def edge_flux_coefficients(eps_e, zeta_e, x_i, x_j):
    """
    Exponentially fitted two-point flux coefficients of one edge.

    Returns (c_ij, c_ji) where the flux degree of freedom along the edge
    from x_i to x_j is c_ij * y(x_j) - c_ji * y(x_i).  Both are positive
    (the downwind one underflows to exactly 0 once the edge Peclet number
    leaves the representable exponential range) and they satisfy
    c_ij - c_ji = zeta_e . (x_j - x_i).
    """
    eps_e = np.asarray(eps_e, dtype=float)
    if np.any(eps_e <= 0.0):
        raise ValueError("edge diffusion must be positive")
    zeta_e = np.asarray(zeta_e, dtype=float)
    tau = np.asarray(x_j, dtype=float) - np.asarray(x_i, dtype=float)
    s = (zeta_e * tau).sum(axis=-1) / eps_e
    c_ij = eps_e * bernoulli(-s)
    c_ji = eps_e * bernoulli(s)
    return c_ij, c_ji


class EdgeData:
    """
    Per-edge quantities of a mesh/coefficient pair, canonical orientation
    i < j with tau = x_j - x_i.

    Attributes
    ----------
    eps_e, zeta_e : midpoint-averaged diffusion / convection per edge
    tau : (E, 2) scaled tangent vectors
    weights : (E,) edge weights summed over adjacent triangles
    c_ij, c_ji : flux coefficients (c_ij multiplies the head value)
    """

    def __init__(self, mesh, coeff):
        xv = mesh.vertices[:, 0]
        yv = mesh.vertices[:, 1]
        eps_v = np.broadcast_to(coeff.eps(xv, yv), xv.shape)
        zx_v, zy_v = (np.broadcast_to(c, xv.shape) for c in coeff.zeta(xv, yv))
        if np.any(eps_v <= 0.0):
            raise ValueError("diffusion must be positive at every vertex")
        i = mesh.edges[:, 0]
        j = mesh.edges[:, 1]
        self.eps_e = 0.5 * (eps_v[i] + eps_v[j])
        self.zeta_e = np.column_stack(
            [0.5 * (zx_v[i] + zx_v[j]), 0.5 * (zy_v[i] + zy_v[j])]
        )
        self.tau = mesh.vertices[j] - mesh.vertices[i]
        w = triangle_edge_weights(mesh)
        self.weights = np.zeros(mesh.num_edges)
        np.add.at(self.weights, mesh.tri_edges.ravel(), w.ravel())
        self.c_ij, self.c_ji = edge_flux_coefficients(
            self.eps_e, self.zeta_e, mesh.vertices[i], mesh.vertices[j]
        )


def assemble_eafe_stiffness(mesh, coeff, lump_reaction=True, quad=None):
    """
    Edge-averaged stiffness matrix over all dofs.

    The flux part is assembled per triangle edge with weights
    -area * grad(lambda_i) . grad(lambda_j) and the Bernoulli flux pair of
    :func:`edge_flux_coefficients`.  The reaction term enters as a lumped
    diagonal gamma(x_i) * patch_area / 3 by default (preserving the
    M-matrix sign pattern); ``lump_reaction=False`` uses the consistent
    mass weighted by gamma instead.

    A failed edge-weight (Delaunay) check does not abort assembly; it is
    recorded in ``meta['delaunay_ok']`` and raised as a
    MonotonicityLossWarning so the verification layer can decide.
    """
    from .mesh import delaunay_check

    xv = mesh.vertices[:, 0]
    yv = mesh.vertices[:, 1]
    eps_v = np.broadcast_to(np.asarray(coeff.eps(xv, yv), dtype=float), xv.shape)
    coeff.check_samples(xv, yv, eps_values=eps_v)
    if np.min(eps_v) <= 0.0:
        # the exponential fitting divides by the edge-averaged diffusion
        raise CoefficientError("edge-averaged assembly needs positive diffusion")
    zx_v, zy_v = (
        np.broadcast_to(np.asarray(c, dtype=float), xv.shape)
        for c in coeff.zeta(xv, yv)
    )

    grads = barycentric_gradient_table(mesh)
    areas = signed_areas(mesh)
    t = mesh.triangles
    rows, cols, vals = [], [], []
    for a, b in LOCAL_EDGES:
        i = t[:, a]
        j = t[:, b]
        omega = -areas * np.einsum("md,md->m", grads[:, a, :], grads[:, b, :])
        eps_e = 0.5 * (eps_v[i] + eps_v[j])
        zex = 0.5 * (zx_v[i] + zx_v[j])
        zey = 0.5 * (zy_v[i] + zy_v[j])
        s = (zex * (xv[j] - xv[i]) + zey * (yv[j] - yv[i])) / eps_e
        c_ij = eps_e * bernoulli(-s)
        c_ji = eps_e * bernoulli(s)
        rows += [j, j, i, i]
        cols += [j, i, j, i]
        vals += [omega * c_ij, -omega * c_ji, -omega * c_ij, omega * c_ji]

    gam_v = np.broadcast_to(np.asarray(coeff.gamma(xv, yv), dtype=float), xv.shape)
    if lump_reaction:
        diag = gam_v * lumped_mass_diagonal(mesh)
        idx = np.arange(mesh.num_vertices)
        rows.append(idx)
        cols.append(idx)
        vals.append(diag)
    else:
        quad = quad or default_quadrature()
        gamma = as_scalar_field(coeff.gamma)
        p = mesh.vertices[t]
        local = np.zeros((mesh.num_triangles, 3, 3))
        for q in range(len(quad)):
            lam = quad.points[q]
            xq = lam @ p[:, :, 0].swapaxes(0, 1)
            yq = lam @ p[:, :, 1].swapaxes(0, 1)
            gq = np.broadcast_to(np.asarray(gamma(xq, yq), dtype=float), xq.shape)
            scale = quad.weights[q] * areas * gq
            for a in range(3):
                for b in range(3):
                    local[:, a, b] += scale * lam[a] * lam[b]
        for a in range(3):
            for b in range(3):
                rows.append(t[:, a])
                cols.append(t[:, b])
                vals.append(local[:, a, b])

    n = mesh.num_vertices
    mat = from_triplets(
        n, n, (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    )
    report = delaunay_check(mesh)
    mat.meta["delaunay_ok"] = report.ok
    mat.meta["lump_reaction"] = bool(lump_reaction)
    if not report.ok:
        warnings.warn(
            "edge-weight condition violated on %d edge(s); the assembled "
            "matrix may lose the M-matrix sign pattern"
            % len(report.violating_edges),
            MonotonicityLossWarning,
            stacklevel=2,
        )
    return mat
