"""Sparse storage and direct solves for subdomain and coarse problems.

Subdomain matrices are narrow slabs, so SuperLU with its default
fill-reducing ordering is plenty at desk scale.  A dense LU path doubles as
the brute-force oracle for small instances.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import StencilOperator

_DENSE_CAP = 10_000


def to_csr(op: StencilOperator) -> sp.csr_matrix:
    """CSR matrix of a stencil operator (row-major unknown ordering)."""
    shape = op.shape
    n = op.n
    flat = np.arange(n).reshape(shape)
    rows, cols, vals = [], [], []
    for off, c in op.coeffs.items():
        dst = tuple(slice(max(0, -o), m + min(0, -o)) for o, m in zip(off, shape))
        src = tuple(slice(max(0, o), m + min(0, o)) for o, m in zip(off, shape))
        rows.append(flat[dst].ravel())
        cols.append(flat[src].ravel())
        vals.append(c[dst].ravel())
    a = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n), dtype=complex)
    a = a.tocsr()
    a.sort_indices()
    return a


class Factorization:
    """LU factors of a sparse complex matrix; reusable for many right-hand sides."""

    def __init__(self, matrix: sp.spmatrix):
        matrix = sp.csc_matrix(matrix, dtype=complex)
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError("matrix must be square")
        self.n = matrix.shape[0]
        try:
            self._lu = spla.splu(matrix)
        except RuntimeError as exc:
            raise ZeroDivisionError(f"singular matrix: {exc}") from exc
        # SuperLU reports exactly singular matrices; trap near-singular pivots too
        diag_u = self._lu.U.diagonal()
        bad = np.flatnonzero(diag_u == 0.0)
        if bad.size:
            raise ZeroDivisionError(f"zero pivot at row {bad[0]}")

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.n}")
        return self._lu.solve(rhs)


def factorize(matrix) -> Factorization:
    if isinstance(matrix, StencilOperator):
        matrix = to_csr(matrix)
    return Factorization(matrix)


def solve_factored(factor: Factorization, rhs):
    """Solve for one vector or a block of up to a few right-hand sides."""
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.ndim == 1:
        return factor.solve(rhs)
    return np.column_stack([factor.solve(rhs[:, j]) for j in range(rhs.shape[1])])


def dense_solve(op: StencilOperator, rhs):
    """Ground-truth dense LU solve; capped to keep it an oracle, not a solver."""
    if op.n > _DENSE_CAP:
        raise ValueError(f"dense oracle capped at {_DENSE_CAP} unknowns, got {op.n}")
    a = to_csr(op).toarray()
    rhs = np.asarray(rhs, dtype=complex).reshape(op.n, -1)
    x = scipy.linalg.solve(a, rhs)
    return x[:, 0] if rhs.shape[1] == 1 else x


def write_matrix_market(path, matrix):
    """Dump as Matrix Market coordinate, complex general, 1-based indices."""
    if isinstance(matrix, StencilOperator):
        matrix = to_csr(matrix)
    scipy.io.mmwrite(path, matrix, field="complex")
