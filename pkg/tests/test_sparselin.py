import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

import helmsweep as hs
from helmsweep.sparselin import write_matrix_market

from conftest import constant_problem


def _tridiag_op(n, h=1.0, ksq=0.0):
    diag = np.full(n, (2 - ksq * h * h) / h**2, complex)
    off = np.full(n, -1 / h**2, complex)
    return hs.StencilOperator((n,), {(0,): diag, (-1,): off, (1,): off})


def test_to_csr_tridiagonal():
    a = hs.to_csr(_tridiag_op(3)).toarray()
    assert np.array_equal(a, np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]], dtype=complex))


def test_to_csr_identity():
    op = hs.StencilOperator((2, 2), {(0, 0): np.ones((2, 2))})
    assert np.array_equal(hs.to_csr(op).toarray(), np.eye(4))


def test_csr_matches_stencil_apply(rng):
    shape = (11, 13)
    coeffs = {off: rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
              for off in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)]}
    op = hs.StencilOperator(shape, coeffs)
    a = hs.to_csr(op)
    x = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
    ref = op.apply(x.reshape(shape)).ravel()
    assert np.linalg.norm(a @ x - ref) / np.linalg.norm(x) < 1e-14


def test_factorize_scalar():
    f = hs.factorize(sp.csc_matrix(np.array([[2.0 + 0j]])))
    assert f.solve(np.array([4.0 + 0j]))[0] == pytest.approx(2.0)


def test_factorize_tridiagonal_hand_solve():
    f = hs.factorize(_tridiag_op(3))
    x = f.solve(np.ones(3, complex))
    assert np.allclose(x, [1.5, 2.0, 1.5])


def test_factor_solve_residual(rng):
    mesh, model = constant_problem(2, 16, ppw=8)
    op = hs.assemble_fine(mesh, model)
    a = hs.to_csr(op)
    f = hs.factorize(a)
    b = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
    x = f.solve(b)
    assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) < 1e-10


def test_singular_matrix_reports_pivot():
    a = sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex))
    with pytest.raises(ZeroDivisionError):
        hs.factorize(a)


def test_multi_rhs_matches_sequential(rng):
    op = _tridiag_op(20, ksq=-1.0)
    f = hs.factorize(op)
    b = rng.standard_normal((20, 8)) + 1j * rng.standard_normal((20, 8))
    block = hs.solve_factored(f, b)
    for j in range(8):
        assert np.linalg.norm(block[:, j] - f.solve(b[:, j])) < 1e-15


def test_multi_rhs_trivial_cases():
    f = hs.factorize(_tridiag_op(5))
    b = np.ones((5, 2), complex)
    x = hs.solve_factored(f, b)
    assert np.array_equal(x[:, 0], x[:, 1])
    assert not hs.solve_factored(f, np.zeros(5, complex)).any()
    with pytest.raises(ValueError):
        f.solve(np.ones(4, complex))


def test_factorization_reproducible(rng):
    op = _tridiag_op(30, ksq=2.0)
    b = rng.standard_normal(30) + 0j
    x1 = hs.factorize(op).solve(b)
    x2 = hs.factorize(op).solve(b)
    assert np.array_equal(x1, x2)


def test_dense_solve_agrees_with_sparse(rng):
    mesh, model = constant_problem(2, 8, ppw=6)
    op = hs.assemble_fine(mesh, model)
    b = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
    xd = hs.dense_solve(op, b)
    xs = hs.factorize(op).solve(b)
    assert np.linalg.norm(xd - xs) / np.linalg.norm(xd) < 1e-10


def test_dense_solve_identity_and_cap():
    op = hs.StencilOperator((3,), {(0,): np.ones(3)})
    b = np.arange(3.0) + 0j
    assert np.allclose(hs.dense_solve(op, b), b)
    big = hs.StencilOperator((101, 101), {(0, 0): np.ones((101, 101))})
    with pytest.raises(ValueError, match="capped"):
        hs.dense_solve(big, np.zeros(big.n))


def test_matrix_market_round_trip(tmp_path):
    op = _tridiag_op(4, ksq=1.5)
    path = tmp_path / "op.mtx"
    write_matrix_market(path, op)
    back = scipy.io.mmread(path)
    assert np.allclose(back.toarray(), hs.to_csr(op).toarray())
