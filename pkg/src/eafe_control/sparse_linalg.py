"""
CSR sparse matrices, the 2x2 saddle-point block system, and a certified
direct solver.

Storage and factorization are delegated to scipy.sparse / SuperLU; this
module pins down the exact contracts the rest of the package relies on:
duplicate-summing triplet assembly, strictly increasing column indices,
and a residual certificate on every returned solution.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_SOLVE_RTOL = 1e-10
DEFAULT_INVERSE_CAP = 5000


class SingularMatrixError(RuntimeError):
    """Factorization hit a zero (or working-precision) pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ResidualCertificationError(RuntimeError):
    """Computed solution failed the relative-residual certificate."""


class SparseMatrix:
    """
    CSR matrix with canonical structure: column indices strictly
    increasing within each row, duplicates summed at assembly.

    ``meta`` carries assembly-side annotations (e.g. a monotonicity-loss
    flag from the edge-averaged assembly); it never affects the values.
    """

    def __init__(self, nrows, ncols, indptr, indices, data, meta=None):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=float)
        self.meta = dict(meta) if meta else {}
        if self.indptr.shape != (self.nrows + 1,):
            raise ValueError("row offset array has inconsistent length")

    @classmethod
    def from_scipy(cls, mat, meta=None):
        csr = sp.csr_matrix(mat)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data,
                   meta=meta)

    def to_scipy(self):
        return sp.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.nrows, self.ncols)
        )

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return self.data.size

    def matvec(self, x):
        return self.to_scipy() @ np.asarray(x, dtype=float)

    def __matmul__(self, x):
        return self.matvec(x)

    def diagonal(self):
        return self.to_scipy().diagonal()

    def toarray(self):
        return self.to_scipy().toarray()

    def submatrix(self, row_idx, col_idx):
        """Row/column extraction (used for interior-dof elimination)."""
        return SparseMatrix.from_scipy(self.to_scipy()[np.ix_(row_idx, col_idx)])

    def __repr__(self):
        return "SparseMatrix(%d x %d, nnz=%d)" % (self.nrows, self.ncols, self.nnz)


def from_triplets(nrows, ncols, triplets):
    """
    Assemble a SparseMatrix from (row, col, value) contributions.

    ``triplets`` is either an iterable of (row, col, value) triples or a
    (rows, cols, values) tuple of arrays.  Duplicate positions are summed.

    Raises
    ------
    IndexError
        If any index lies outside [0, nrows) x [0, ncols).
    """
    if isinstance(triplets, tuple) and len(triplets) == 3:
        rows, cols, vals = triplets
    else:
        triplets = list(triplets)
        if triplets:
            rows, cols, vals = zip(*triplets)
        else:
            rows, cols, vals = (), (), ()
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if rows.size and (rows.min() < 0 or rows.max() >= nrows):
        raise IndexError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= ncols):
        raise IndexError("column index out of range")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return SparseMatrix.from_scipy(coo)


def transpose(a):
    """Transpose, preserving canonical CSR structure."""
    return SparseMatrix.from_scipy(a.to_scipy().T)


def _factorize(mat):
    csc = mat.to_scipy().tocsc()
    try:
        lu = spla.splu(csc)
    except RuntimeError as exc:  # SuperLU signals exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    udiag = lu.U.diagonal()
    zero = np.flatnonzero(udiag == 0.0)
    if zero.size:
        raise SingularMatrixError(
            "zero pivot at elimination step %d" % zero[0], pivot=int(zero[0])
        )
    return lu


def solve_direct(mat, b, rtol=DEFAULT_SOLVE_RTOL, return_residual=False,
                 max_refine=2):
    """
    Solve ``mat @ x = b`` by sparse LU with partial pivoting and certify
    the result: the relative residual ||Ax-b||_2 / ||b||_2 must not exceed
    ``rtol``.  A couple of iterative-refinement sweeps are applied if the
    first solve misses the certificate.

    Raises
    ------
    SingularMatrixError
        If the factorization encounters a zero pivot.
    ResidualCertificationError
        If the residual certificate cannot be met.
    """
    if mat.nrows != mat.ncols:
        raise ValueError("solve_direct needs a square matrix")
    b = np.asarray(b, dtype=float)
    if b.shape != (mat.nrows,):
        raise ValueError("right-hand side has wrong length")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros_like(b)
        return (x, 0.0) if return_residual else x

    csr = mat.to_scipy()
    lu = _factorize(mat)
    x = lu.solve(b)
    res = np.linalg.norm(csr @ x - b) / bnorm
    for _ in range(max_refine):
        if res <= rtol:
            break
        x = x + lu.solve(b - csr @ x)
        res = np.linalg.norm(csr @ x - b) / bnorm
    if res > rtol:
        raise ResidualCertificationError(
            "relative residual %.3g exceeds certificate %.3g" % (res, rtol)
        )
    return (x, float(res)) if return_residual else x


class InverseNonnegReport:
    """Result of the column-by-column inverse nonnegativity scan."""

    def __init__(self, ok, min_entry, argmin, tol):
        self.ok = bool(ok)
        self.min_entry = float(min_entry)
        self.argmin = argmin  # (row, column) of the most negative inverse entry
        self.tol = float(tol)

    def __repr__(self):
        return "InverseNonnegReport(ok=%s, min_entry=%.3g at %s)" % (
            self.ok,
            self.min_entry,
            self.argmin,
        )


def inverse_nonneg_check(a, tol=1e-12, cap=DEFAULT_INVERSE_CAP, block=512):
    """
    Verify that A^{-1} is (numerically) entrywise nonnegative by solving
    A x = e_i for every unit vector.  Column i passes when every entry of
    x satisfies x >= -tol * max|x|.  Desk-scale tool: refuses n > cap.
    """
    n = a.nrows
    if a.ncols != n:
        raise ValueError("inverse check needs a square matrix")
    if n > cap:
        raise ValueError("matrix order %d exceeds inverse-check cap %d" % (n, cap))
    lu = _factorize(a)
    ok = True
    min_entry = np.inf
    argmin = (0, 0)
    for start in range(0, n, block):
        stop = min(start + block, n)
        rhs = np.zeros((n, stop - start))
        rhs[np.arange(start, stop), np.arange(stop - start)] = 1.0
        cols = lu.solve(rhs)
        scale = np.abs(cols).max(axis=0)
        scale[scale == 0.0] = 1.0
        rel = cols / scale
        j = int(np.argmin(rel.min(axis=0)))
        i = int(np.argmin(rel[:, j]))
        if rel[i, j] < -tol:
            ok = False
        if cols[i, j] < min_entry:
            min_entry = cols[i, j]
            argmin = (i, start + j)
    return InverseNonnegReport(ok, min_entry, argmin, tol)


class BlockSaddleSystem:
    """
    Discrete first-order optimality system over interior dofs:

        [ A^T  -M      ] [p]   [rhs_top   ]
        [ -M   -beta A ] [y] = [rhs_bottom]

    A is the (convection-diffusion-reaction) stiffness matrix, M the
    consistent mass matrix; beta defaults to 1, matching the normalized
    control-cost weight used throughout.
    """

    def __init__(self, a, m, rhs_top, rhs_bottom, beta=1.0, sym_rtol=1e-14):
        n = a.nrows
        if a.ncols != n or m.shape != (n, n):
            raise ValueError("block system needs square A, M of equal order")
        self.A = a
        self.M = m
        self.rhs_top = np.asarray(rhs_top, dtype=float)
        self.rhs_bottom = np.asarray(rhs_bottom, dtype=float)
        self.beta = float(beta)
        if self.rhs_top.shape != (n,) or self.rhs_bottom.shape != (n,):
            raise ValueError("right-hand side blocks have wrong length")
        msp = m.to_scipy()
        asym = sp.linalg.norm(msp - msp.T) if msp.nnz else 0.0
        scale = max(np.abs(m.data).max() if m.nnz else 0.0, 1e-300)
        if asym > sym_rtol * scale * np.sqrt(max(m.nnz, 1)):
            raise ValueError("mass matrix is not symmetric to working precision")

    @property
    def n(self):
        return self.A.nrows

    def operator(self):
        """Monolithic 2n x 2n block operator [[A^T, -M], [-M, -beta*A]]."""
        at = self.A.to_scipy().T
        m = self.M.to_scipy()
        a = self.A.to_scipy()
        k = sp.bmat([[at, -m], [-m, -self.beta * a]], format="csr")
        return SparseMatrix.from_scipy(k)

    def rhs(self):
        return np.concatenate([self.rhs_top, self.rhs_bottom])

    def solve(self, rtol=DEFAULT_SOLVE_RTOL):
        """Returns (p, y, certified relative residual)."""
        x, res = solve_direct(self.operator(), self.rhs(), rtol=rtol,
                              return_residual=True)
        return x[: self.n], x[self.n:], res


def write_matrix_market(a, path, comment=""):
    """Dump in MatrixMarket coordinate format for external cross-checks."""
    from scipy.io import mmwrite

    mmwrite(str(path), a.to_scipy(), comment=comment)
