import numpy as np
import pytest

import helmsweep as hs
from helmsweep.oracles import StripMode, dtn_closure_factor


# ---------------------------------------------------------------------------
# 1-D analytic solution

def test_left_boundary_wave():
    k = 2 * np.pi * 3
    prob = hs.RobinProblem1D(k, 1.0, h1=1.3 - 0.4j)
    x = np.linspace(0, 1, 11)
    u = hs.solve_1d_analytic(prob, x)
    assert np.allclose(u, np.exp(1j * k * x) * prob.h1 / (2j * k))


def test_point_source_value():
    k = 2 * np.pi
    prob = hs.RobinProblem1D(k, 1.0, point_sources=((0.5, 1.0),))
    u = hs.solve_1d_analytic(prob, np.array([0.5]))
    assert u[0] == pytest.approx(1j / (4 * np.pi))


def test_zero_data_gives_zero():
    prob = hs.RobinProblem1D(5.0, 2.0)
    assert not hs.solve_1d_analytic(prob, np.linspace(0, 2, 7)).any()


def test_solution_satisfies_ode():
    k = 2 * np.pi * 4
    errs = []
    for n in (200, 400):
        x = np.linspace(0, 1, n + 1)
        f = np.exp(-200 * (x - 0.47) ** 2)
        prob = hs.RobinProblem1D(k, 1.0, x=x, f=f, h1=0.2, h2=-0.1j)
        u = hs.solve_1d_analytic(prob, x)
        h = x[1] - x[0]
        lap = (u[:-2] - 2 * u[1:-1] + u[2:]) / h**2
        res = -lap - k**2 * u[1:-1] - f[1:-1]
        errs.append(np.abs(res).max())
    assert errs[0] / errs[1] > 3.0  # O(h^2)


def test_domain_enlargement_invariance():
    k = 2 * np.pi * 3
    x = np.linspace(0, 1, 401)
    f = np.sin(np.pi * x) ** 2 * np.exp(-30 * (x - 0.5) ** 2)
    u_small = hs.solve_1d_analytic(hs.RobinProblem1D(k, 1.0, x=x, f=f), x)
    x_big = np.linspace(-0.5, 1.5, 801)
    f_big = np.where((x_big >= 0) & (x_big <= 1),
                     np.interp(x_big, x, f) * ((x_big >= 0) & (x_big <= 1)), 0.0)
    u_big = hs.solve_1d_analytic(hs.RobinProblem1D(k, 2.0, x=x_big, f=f_big), x)
    assert np.abs(u_small - u_big).max() < 1e-4 * np.abs(u_small).max()


# ---------------------------------------------------------------------------
# reflection extraction

def test_reflection_of_plane_waves():
    k = 2 * np.pi * 5
    n = 400
    h = 1.0 / n
    x = np.arange(n + 1) * h
    tol = (k * h) ** 2
    r_plus, r_minus = hs.reflection_coeffs(np.exp(1j * k * x), h, k, 200)
    assert abs(r_plus - np.exp(1j * k * x[200])) < tol
    assert abs(r_minus) < tol
    r_plus, r_minus = hs.reflection_coeffs(np.exp(-1j * k * x), h, k, 200)
    assert abs(r_plus) < tol
    r_plus, r_minus = hs.reflection_coeffs(np.zeros(n + 1), h, k, 200)
    assert r_plus == 0 and r_minus == 0


# ---------------------------------------------------------------------------
# strip modes

def test_strip_lambda_propagating():
    lam = StripMode(1, 10.0).lam
    assert lam == pytest.approx(1j * np.sqrt(100 - 4 * np.pi**2))
    assert lam.imag == pytest.approx(7.77957, abs=1e-5)


def test_strip_lambda_evanescent():
    lam = StripMode(2, 10.0).lam
    assert lam == pytest.approx(-np.sqrt(16 * np.pi**2 - 100))
    assert lam.imag == 0 and lam.real < 0


def test_strip_mode_resonance_rejected():
    with pytest.raises(ValueError, match="resonant"):
        StripMode(1, 2 * np.pi)


def test_strip_single_mode_stays_single(rng):
    k, length = 10.0, 2.0
    x = np.linspace(0, length, 101)
    y = np.linspace(0, 1, 33)[1:-1]
    f = np.exp(-5 * (x - 1.0) ** 2)[:, None] * np.sin(2 * np.pi * y)[None, :]
    u = hs.solve_strip_fourier(k, length, [1, 2, 3], f, x, y)
    # mode-2 and mode-3 content must vanish (discrete sine projection)
    hy = y[1] - y[0]
    for l in (2, 3):
        proj = np.abs(2 * hy * np.sum(u * np.sin(2 * np.pi * l * y)[None, :], axis=1))
        assert proj.max() < 1e-12 * np.abs(u).max()


def test_dtn_closure_branches():
    z = dtn_closure_factor(4.0, 0.1)        # propagating
    assert abs(abs(z) - 1.0) < 1e-14
    z = dtn_closure_factor(-25.0, 0.1)      # evanescent
    assert 0 < z < 1
    z = dtn_closure_factor(4.0 + 1.0j, 0.1)  # damped
    assert abs(z) < 1.0


# ---------------------------------------------------------------------------
# dispersion

def test_standard_fd_error_matches_taylor():
    err = hs.phase_speed_error_std_1d(0.1)
    ref = (2 * np.pi * 0.1) ** 2 / 24
    assert abs(err - ref) / ref < 0.1


def test_optimized_2d_curve_small():
    curve = hs.dispersion_error("opt-2d", [0.08, 0.20], n_angles=32)
    assert (curve[:, 1] < 5e-4).all()


def test_degenerate_3d_table_reproduces_standard_fd():
    row = [1.0, 0.0, 0.0, 1.0, 0.0]
    table = hs.OptCoeffTable(np.array([0.0, 0.4]), np.array([row, row]))
    inv_g = 0.15
    curve = hs.dispersion_error("opt-3d", [inv_g], table=table, n_angles=16)
    # reference: standard stencils at both levels, computed from scratch
    k = 1.0
    h_c = 2 * np.pi * inv_g
    h_f = h_c / 2
    from helmsweep.oracles import _directions, _symbol_std, numerical_wavenumber
    ref = 0.0
    for d in _directions(3, 16):
        rho_f = numerical_wavenumber(lambda xi: _symbol_std(xi, h_f, k), k, d)
        rho_c = numerical_wavenumber(lambda xi: _symbol_std(xi, h_c, k), k, d)
        ref = max(ref, abs(k / rho_f - k / rho_c))
    assert curve[0, 1] == pytest.approx(ref, rel=1e-10)


def test_dispersion_rejects_unknown_family():
    with pytest.raises(ValueError):
        hs.dispersion_error("opt-4d", [0.1])
