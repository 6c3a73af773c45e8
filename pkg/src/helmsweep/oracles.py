"""Analytic and semi-analytic references used to validate the solver stack.

The 1-D Helmholtz problem with radiating (Robin) ends has a closed-form
solution built from exponential convolutions of the source; on the 2-D strip
with Dirichlet walls a sine expansion reduces the problem to a family of such
1-D problems with mode-dependent decay rates.  Dispersion curves compare the
numerical phase speeds of the fine standard stencil and the coarse optimized
one through their discrete symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .discretize import OptCoeffTable, default_table, opt_coeffs

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RobinProblem1D:
    """-u'' - k^2 u = f on ]0,L[ with u'(0) + i k u(0) = h1, -u'(L) + i k u(L) = h2."""

    k: float
    length: float
    x: np.ndarray | None = None          # sample grid for the distributed source
    f: np.ndarray | None = None
    h1: complex = 0.0
    h2: complex = 0.0
    point_sources: tuple = ()            # (position, amplitude) pairs

    def __post_init__(self):
        if self.k <= 0 or self.length <= 0:
            raise ValueError("need k > 0 and length > 0")


def solve_1d_analytic(prob: RobinProblem1D, x):
    """Closed-form solution: exponential convolutions of f (trapezoid on the
    sample grid) plus boundary-wave and point-source terms."""
    x = np.asarray(x, dtype=float)
    k = prob.k
    u = np.zeros(x.shape, dtype=complex)
    if prob.f is not None:
        xs = np.asarray(prob.x, dtype=float)
        fs = np.asarray(prob.f, dtype=complex)
        # I1(t) = int_0^t e^{-iks} f ds,  I2(t) = int_t^L e^{iks} f ds
        g1 = np.exp(-1j * k * xs) * fs
        g2 = np.exp(1j * k * xs) * fs
        c1 = cumulative_trapezoid(g1, xs, initial=0.0)
        c2 = cumulative_trapezoid(g2, xs, initial=0.0)
        i1 = _interp_c(x, xs, c1)
        i2 = _interp_c(x, xs, c2[-1] - c2)
        u += (1j / (2 * k)) * (np.exp(1j * k * x) * i1 + np.exp(-1j * k * x) * i2)
    u += np.exp(1j * k * x) * prob.h1 / (2j * k)
    u += np.exp(-1j * k * (x - prob.length)) * prob.h2 / (2j * k)
    for x0, amp in prob.point_sources:
        u += amp * (1j / (2 * k)) * np.exp(1j * k * np.abs(x - x0))
    return u


def _interp_c(x, xs, values):
    return np.interp(x, xs, values.real) + 1j * np.interp(x, xs, values.imag)


def reflection_coeffs(u_samples, h, k, index):
    """Outgoing-wave extractions at a sample point (centered differencing):
    R+ = (u' + iku)/(2ik) picks the right-going amplitude, R- = (-u' + iku)/(2ik)
    the left-going one."""
    u = np.asarray(u_samples)
    if not 1 <= index <= len(u) - 2:
        raise ValueError("index must allow a centered difference")
    du = (u[index + 1] - u[index - 1]) / (2 * h)
    r_plus = (du + 1j * k * u[index]) / (2j * k)
    r_minus = (-du + 1j * k * u[index]) / (2j * k)
    return r_plus, r_minus


# ---------------------------------------------------------------------------
# strip with Dirichlet walls: sine modes in y

@dataclass(frozen=True)
class StripMode:
    """One transverse mode sin(eta y) with eta = 2 pi l."""

    index: int
    k: float

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("mode index starts at 1")
        if abs(self.k - self.eta) < 1e-12 * max(1.0, self.k):
            raise ValueError(f"mode {self.index} is resonant: k = 2 pi l")

    @property
    def eta(self):
        return _TWO_PI * self.index

    @property
    def lam(self):
        ksq = self.k**2 - self.eta**2
        return 1j * np.sqrt(ksq) if ksq > 0 else -np.sqrt(-ksq)


def solve_strip_fourier(k, length, modes, f, x, y):
    """Strip solution by sine expansion: f sampled on the (x, y) grid (y are
    the interior transverse points of ]0,1[), modes as indices l."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=complex)
    if f.shape != (len(x), len(y)):
        raise ValueError(f"f shape {f.shape} != grid {(len(x), len(y))}")
    hy = y[1] - y[0]
    if np.ptp(np.diff(y)) > 1e-12 * hy:
        raise ValueError("transverse grid must be uniform (interior sine lattice)")
    u = np.zeros_like(f)
    for l in modes:
        mode = StripMode(l, k)
        basis = np.sin(mode.eta * y)
        # discrete sine projection: exactly orthogonal on the interior lattice
        fhat = 2.0 * hy * np.sum(f * basis, axis=1)
        uhat = _mode_solution(mode.lam, x, length, fhat)
        u += uhat[:, None] * basis[None, :]
    return u


def _mode_solution(lam, x, length, fhat):
    """-u'' - lam^2-style mode problem via the same convolution formula,
    with decay rate lam in place of ik."""
    g1 = np.exp(-lam * x) * fhat
    g2 = np.exp(lam * x) * fhat
    c1 = cumulative_trapezoid(g1, x, initial=0.0)
    c2 = cumulative_trapezoid(g2, x, initial=0.0)
    i2 = c2[-1] - c2
    return (-1.0 / (2 * lam)) * (np.exp(lam * x) * c1 + np.exp(-lam * x) * i2)


def dtn_closure_factor(ksq_eff, h):
    """Multiplier z of the outgoing discrete wave: 2 - 2 cos(kappa h) =
    ksq_eff h^2 with the |z| <= 1 (radiating or decaying) branch."""
    c = 1.0 - ksq_eff * h * h / 2.0
    if np.iscomplexobj(np.asarray(ksq_eff)) or abs(c) <= 1.0:
        root = np.sqrt(complex(1.0 - c * c))
        z = complex(c) + 1j * root
        if abs(z) > 1.0 + 1e-12:
            z = complex(c) - 1j * root
        return z
    s = np.sqrt(c * c - 1.0)
    return c - s if c > 1.0 else c + s


# ---------------------------------------------------------------------------
# dispersion (phase speed) analysis via discrete symbols

def _symbol_std(xi, h, k):
    return sum((2.0 - 2.0 * np.cos(x * h)) / h**2 for x in xi) - k**2


def _symbol_opt_2d(xi, h, k, c):
    c1, c2, c3 = c
    cx, cy = np.cos(xi[0] * h), np.cos(xi[1] * h)
    mass = c1 + c2 * (cx + cy) / 2.0 + (1.0 - c1 - c2) * cx * cy
    d2x = (2.0 * cx - 2.0) / h**2
    d2y = (2.0 * cy - 2.0) / h**2
    ntx = c3 + (1.0 - c3) * cy
    nty = c3 + (1.0 - c3) * cx
    return -(k**2) * mass - d2x * ntx - d2y * nty


def _symbol_opt_3d(xi, h, k, c):
    c1, c2, c3, c4, c5 = c
    cx, cy, cz = (np.cos(x * h) for x in xi)
    mass = (c1 + c2 * (cx + cy + cz) / 3.0
            + c3 * (cx * cy + cx * cz + cy * cz) / 3.0
            + (1.0 - c1 - c2 - c3) * cx * cy * cz)
    out = -(k**2) * mass
    cos = [cx, cy, cz]
    for l in range(3):
        d2 = (2.0 * cos[l] - 2.0) / h**2
        cm, cn = (cos[m] for m in range(3) if m != l)
        ntil = c4 + c5 * (cm + cn) / 2.0 + (1.0 - c4 - c5) * cm * cn
        out -= d2 * ntil
    return out


def numerical_wavenumber(symbol, k, direction):
    """Radial root of the symbol along a direction (the plane-wave wavenumber
    the scheme actually propagates)."""
    def fun(rho):
        return np.real(symbol(tuple(rho * d for d in direction)))

    lo, hi = 0.5 * k, 1.5 * k
    flo, fhi = fun(lo), fun(hi)
    grow = 0
    while flo * fhi > 0 and grow < 20:
        lo *= 0.8
        hi *= 1.2
        flo, fhi = fun(lo), fun(hi)
        grow += 1
    if flo * fhi > 0:
        raise ValueError("could not bracket the dispersion root")
    return brentq(fun, lo, hi, xtol=1e-14, rtol=1e-15)


def _directions(dim, n_angles):
    if dim == 2:
        th = np.linspace(0.0, np.pi / 2, n_angles)
        return [(np.cos(t), np.sin(t)) for t in th]
    m = max(2, int(round(np.sqrt(n_angles))))
    th = np.linspace(0.0, np.pi / 2, m)
    ph = np.linspace(0.0, np.pi / 2, m)
    return [(np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t))
            for t in th for p in ph]


def dispersion_error(stencil_family, inv_g_values, table: OptCoeffTable | None = None,
                     n_angles: int = 64):
    """Max-over-angle phase-speed mismatch of the optimized coarse operator
    against the standard fine operator at half the spacing.

    ``inv_g_values`` are coarse-grid 1/G values (the table's index); rows of
    the returned array are (1/G, max relative phase-speed difference).
    """
    if stencil_family not in ("opt-2d", "opt-3d"):
        raise ValueError(f"unknown stencil family {stencil_family!r}")
    dim = 2 if stencil_family == "opt-2d" else 3
    if table is None:
        table = default_table(dim)
    sym_opt = _symbol_opt_2d if dim == 2 else _symbol_opt_3d
    k = 1.0
    out = []
    for inv_g in np.atleast_1d(np.asarray(inv_g_values, dtype=float)):
        h_c = _TWO_PI * inv_g / k
        h_f = h_c / 2.0
        c = opt_coeffs(table, inv_g)
        err = 0.0
        for direction in _directions(dim, n_angles):
            rho_f = numerical_wavenumber(lambda xi: _symbol_std(xi, h_f, k), k, direction)
            rho_c = numerical_wavenumber(lambda xi: sym_opt(xi, h_c, k, c), k, direction)
            err = max(err, abs(k / rho_f - k / rho_c))
        out.append((inv_g, err))
    return np.asarray(out)


def phase_speed_error_std_1d(inv_g):
    """Relative phase-speed error of plain second-order FD in 1-D; about
    (kh)^2/24 for small kh."""
    k = 1.0
    h = _TWO_PI * float(inv_g) / k
    rho = np.arccos(1.0 - (k * h) ** 2 / 2.0) / h
    return abs(k / rho - 1.0)


def write_dispersion_csv(path, curve):
    rows = np.asarray(curve)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("invG,max_error\n")
        for inv_g, err in rows:
            fh.write(f"{inv_g:.6g},{err:.10e}\n")
