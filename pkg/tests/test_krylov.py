import numpy as np
import pytest

import helmsweep as hs

from conftest import constant_problem


def test_identity_converges_immediately(rng):
    b = rng.standard_normal(20) + 0j
    u, rep = hs.gmres(lambda v: v, None, b, hs.GmresConfig(tol=1e-10))
    assert rep.iterations == 1 and rep.converged
    assert np.allclose(u, b)
    assert len(rep.residual_history) == rep.iterations + 1


def test_two_distinct_eigenvalues_two_iterations(rng):
    d = np.array([1.0] * 10 + [3.0] * 10, dtype=complex)
    b = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    u, rep = hs.gmres(lambda v: d * v, None, b, hs.GmresConfig(tol=1e-12))
    assert rep.iterations == 2 and rep.converged


def test_exact_inverse_preconditioner_one_iteration(rng):
    mesh, model = constant_problem(2, 8, ppw=6)
    op = hs.assemble_fine(mesh, model)
    a = hs.to_csr(op)
    lu = hs.factorize(a)
    b = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
    u, rep = hs.gmres(lambda v: a @ v, lu.solve, b, hs.GmresConfig(tol=1e-10))
    assert rep.iterations == 1 and rep.converged
    assert np.linalg.norm(a @ u - b) / np.linalg.norm(b) < 1e-10


def test_history_monotone(rng):
    n = 60
    a = np.diag(np.linspace(1, 4, n)) + 0.1 * rng.standard_normal((n, n))
    b = rng.standard_normal(n) + 0j
    _, rep = hs.gmres(lambda v: a @ v, None, b, hs.GmresConfig(tol=1e-12, max_iter=n))
    h = rep.residual_history
    assert all(h[i + 1] <= h[i] + 1e-12 for i in range(len(h) - 1))


def test_scaled_preconditioner_same_iterations(rng):
    n = 40
    a = np.diag(np.linspace(1, 6, n)) + 0j
    m = np.diag(1.0 / np.sqrt(np.linspace(1, 6, n)))
    b = rng.standard_normal(n) + 0j
    _, rep1 = hs.gmres(lambda v: a @ v, lambda v: m @ v, b, hs.GmresConfig(tol=1e-9, max_iter=n))
    _, rep2 = hs.gmres(lambda v: a @ v, lambda v: 3.7 * (m @ v), b,
                       hs.GmresConfig(tol=1e-9, max_iter=n))
    assert rep1.iterations == rep2.iterations


def test_zero_rhs():
    u, rep = hs.gmres(lambda v: v, None, np.zeros(5, complex))
    assert not u.any() and rep.converged and rep.iterations == 0


def test_nan_detection(rng):
    b = rng.standard_normal(5) + 0j

    def bad(v):
        return v * np.nan

    with pytest.raises(FloatingPointError):
        hs.gmres(bad, None, b)
    with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
        hs.gmres(lambda v: v, None, b * np.inf)


def test_restarted_gmres_converges(rng):
    n = 50
    a = np.diag(np.linspace(1, 3, n)) + 0.05 * rng.standard_normal((n, n))
    b = rng.standard_normal(n) + 0j
    u, rep = hs.gmres(lambda v: a @ v, None, b,
                      hs.GmresConfig(tol=1e-8, max_iter=200, restart=10))
    assert rep.converged
    assert np.linalg.norm(a @ u - b) / np.linalg.norm(b) < 1e-8


def test_max_iter_reports_not_converged(rng):
    n = 40
    a = np.diag(np.linspace(1, 100, n)) + 0j
    b = rng.standard_normal(n) + 0j
    _, rep = hs.gmres(lambda v: a @ v, None, b, hs.GmresConfig(tol=1e-14, max_iter=3))
    assert not rep.converged and rep.iterations == 3


def test_config_validation():
    with pytest.raises(ValueError):
        hs.GmresConfig(tol=0.0)
    with pytest.raises(ValueError):
        hs.GmresConfig(max_iter=0)
    with pytest.raises(ValueError):
        hs.GmresConfig(restart=0)
