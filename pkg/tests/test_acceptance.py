"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the lines live;
the heavier cases (iteration tables, the 3-D smoke test) dominate the runtime
at a few minutes total.
"""

import time

import numpy as np

import helmsweep as hs
from helmsweep.discretize import interior_spacing
from helmsweep.sweepdd import default_subdomain_count
from helmsweep.twogrid import SmootherConfig, prolongation_matrix

from conftest import constant_problem, pml, sponge, wedge_velocity_on

RNG = np.random.default_rng(2024)


def _report(num, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def _rand(shape):
    return RNG.standard_normal(shape) + 1j * RNG.standard_normal(shape)


def _point_rhs(mesh):
    f = np.zeros(mesh.unknowns, complex)
    idx = tuple(mesh.layers[a][0].width + mesh.interior_cells(a) // 2
                for a in range(mesh.dim))
    f[idx] = (1.0 / mesh.spacing[0][0]) ** mesh.dim
    return f


def _tgsp_iterations(mesh, model, kind, w_dd, smoother=None, coarse="sweep",
                     variant="ud", n_cell=None, subdomains=None, tol=1e-6):
    s_dd = {3: 15.0, 4: 20.0, 5: 25.0}[w_dd]
    cycle, _ = hs.build_two_grid(mesh, model, smoother=smoother, coarse=coarse,
                                 sweep=hs.SweepOptions(w_dd, s_dd, variant,
                                                       n_cell, subdomains))
    f = _point_rhs(mesh)
    _, rep = hs.gmres(lambda v: cycle.fine_csr @ v, cycle.as_preconditioner(),
                      f.ravel(), hs.GmresConfig(tol=tol, max_iter=99))
    return rep


def test_criterion_1_line_exactness():
    """Constant-k 1-D: UD and X sweeps solve exactly (residual < 1e-10)."""
    t0 = time.perf_counter()
    worst = 0.0
    for n in (200, 1000):
        h = 1.0 / n
        k = 2 * np.pi * (n / 10.0)
        level = hs.robin_level_1d(k, h, n)
        a = hs.to_csr(level.op)
        f = _rand((n - 1,))
        for j_count in (2, 4, 8, 16):
            part = hs.build_partition(level, J=j_count)
            for variant in ("ud", "x"):
                u = hs.SweepingPreconditioner(part, variant)(f)
                res = np.linalg.norm(f - a @ u) / np.linalg.norm(f)
                worst = max(worst, res)
    elapsed = time.perf_counter() - t0
    _report(1, worst < 1e-10 and elapsed < 5.0,
            f"1-D exactness worst residual {worst:.2e} (N in 200/1000, "
            f"J in 2..16, UD and X) in {elapsed:.1f}s")


def test_criterion_2_iteration_table():
    """Constant 2-D TGSP at 256^2 and 512^2 tracks the reported iterations."""
    expected = {
        ("pml", 256): ((10, 10, 10), 3),
        ("pml", 512): ((11, 10, 10), 3),
        ("sponge", 256): ((5, 5, 5), 2),
        ("sponge", 512): ((6, 5, 5), 2),
    }
    lines = []
    ok = True
    for (kind, n), (targets, band) in expected.items():
        layer = pml(4, 20.0) if kind == "pml" else sponge(36, 1.0)
        mesh, model = constant_problem(2, n, layer)
        got = []
        for w_dd, target in zip((3, 4, 5), targets):
            rep = _tgsp_iterations(mesh, model, kind, w_dd)
            got.append(rep.iterations)
            ok &= rep.converged and abs(rep.iterations - target) <= band
        lines.append(f"{kind}@{n}: {got} vs {list(targets)} (±{band})")
    _report(2, ok, "; ".join(lines))


def test_criterion_3_smoother_trend():
    """Exact-coarse two-grid at 512^2: (nu=3, w=0.8) beats (nu=1, w=0.5) by 3x."""
    ok = True
    lines = []
    for kind in ("sponge", "pml"):
        layer = pml(4, 20.0) if kind == "pml" else sponge(36, 1.0)
        mesh, model = constant_problem(2, 512, layer)
        weak = _tgsp_iterations(mesh, model, kind, 4, coarse="exact",
                                smoother=SmootherConfig(0.5, 1))
        strong = _tgsp_iterations(mesh, model, kind, 4, coarse="exact",
                                  smoother=SmootherConfig(0.8, 3))
        ratio = weak.iterations / strong.iterations
        ok &= strong.converged and ratio >= 3.0
        if kind == "sponge":
            ok &= strong.iterations <= 9
        lines.append(f"{kind}: {weak.iterations} vs {strong.iterations} "
                     f"(x{ratio:.1f})")
    _report(3, ok, "; ".join(lines))


def test_criterion_4_sweep_patterns():
    """Pure sweeping on a 512^2 heterogeneous model: X tracks UD, NX(2) pays."""
    n = 512
    mesh = hs.build_mesh(2, n, 1.0 / n, pml(4, 20.0))
    c = wedge_velocity_on(mesh)
    model = hs.WaveModel(2 * np.pi * (n / 10.0), 2 * np.pi * (n / 10.0) / c)
    level = hs.fine_level(mesh, model)
    j_count = default_subdomain_count(level.op.shape[0], 4) // 2 * 2
    part = hs.build_partition(level, w_dd=4, s_dd=20.0, J=j_count)
    f = _rand(mesh.unknowns)
    iters = {}
    for variant, n_cell in (("ud", None), ("x", None), ("nx", 2)):
        prec = hs.SweepingPreconditioner(part, variant, cells=n_cell)
        _, rep = hs.gmres(lambda v: part.csr @ v, prec, f.ravel(),
                          hs.GmresConfig(tol=1e-6, max_iter=99))
        iters[variant] = rep.iterations
    ok = abs(iters["x"] - iters["ud"]) <= 2 and iters["nx"] >= 2 * iters["ud"]
    _report(4, ok, f"wedge 512^2 (J={j_count}): UD={iters['ud']} X={iters['x']} "
                   f"NX(2)={iters['nx']}")


def test_criterion_5_dispersion():
    """Optimized coarse operator: phase-speed error <= 5e-4 for G >= 4."""
    points = [float(p) for p in hs.OPT_FD_2D.inv_g if 0 < p <= 0.25]
    curve = hs.dispersion_error("opt-2d", points)
    worst = float(np.max(curve[:, 1]))
    std_err = hs.phase_speed_error_std_1d(0.1)
    taylor = (2 * np.pi * 0.1) ** 2 / 24
    rel = abs(std_err - taylor) / taylor
    ok = worst <= 5e-4 and rel <= 0.1
    _report(5, ok, f"optimized 2-D worst error {worst:.2e} over 1/G {points}; "
                   f"standard FD at G=10: {std_err:.4e} vs (kh)^2/24 "
                   f"{taylor:.4e} ({rel:.1%} off)")


def test_criterion_6_fe_fd_row_equality():
    """FE rows over the coarsened interior equal h^d times the optimized-FD rows."""
    worst = 0.0
    for dim, interior in ((2, 24), (3, 12)):
        mesh, model = constant_problem(dim, interior, pml(3, 15.0))
        mesh_c, cmap = hs.coarsen_mesh(mesh)
        model_c = hs.WaveModel(model.omega, hs.coarsen_wavenumber(model.k, cmap))
        k_cells = hs.wavenumber_cell_midpoints(model.k, cmap)
        fe = hs.assemble_fe_pml_coarse(mesh_c, cmap, model_c, k_cells)
        mesh_u = hs.build_mesh(dim, mesh_c.cells[0], interior_spacing(mesh_c))
        model_u = hs.WaveModel.constant(mesh_u, model.omega)
        fd = hs.assemble_opt_fd_coarse(mesh_u, model_u)
        hd = interior_spacing(mesh_c) ** dim
        margin = 3 + 2  # PML strip plus the transition cells
        box = tuple(slice(margin, n - margin) for n in fe.shape)
        for off, c_fd in fd.coeffs.items():
            scale = np.abs(hd * c_fd[box]).max()
            diff = np.abs(fe.coeffs[off][box] - hd * c_fd[box]).max()
            worst = max(worst, diff / scale)
    _report(6, worst <= 1e-12, f"max interior row deviation {worst:.2e} (2-D and 3-D)")


def test_criterion_7_oracle_equivalences():
    """Dense vs sparse solves agree; strip Fourier oracle converges at O(h^2)."""
    mesh, model = constant_problem(2, 32, pml(3, 15.0), ppw=12)
    op = hs.assemble_fine(mesh, model)
    b = _rand((op.n,))
    xd = hs.dense_solve(op, b)
    xs = hs.factorize(op).solve(b)
    agree = np.linalg.norm(xd - xs) / np.linalg.norm(xd)

    errs = []
    for nc in (24, 48):
        errs.append(_strip_vs_dense_error(nc))
    order = float(np.log2(errs[0] / errs[1]))
    ok = agree <= 1e-10 and order >= 1.8
    _report(7, ok, f"dense/sparse agreement {agree:.2e}; strip refinement "
                   f"errors {errs[0]:.2e} -> {errs[1]:.2e}, order {order:.2f}")


def _strip_vs_dense_error(nc):
    h = 1.0 / nc
    length = 2.0
    nx = int(round(length / h)) - 1
    ny = nc - 1
    k = 10.0
    x = np.arange(1, nx + 1) * h
    y = np.arange(1, ny + 1) * h
    gx = np.exp(-40 * (x - 0.9) ** 2)
    f = gx[:, None] * (np.sin(2 * np.pi * y) + 0.5 * np.sin(4 * np.pi * y))[None, :]
    u_ref = hs.solve_strip_fourier(k, length, [1, 2], f, x, y)

    m = np.arange(1, ny + 1)
    mu = (2 - 2 * np.cos(m * np.pi * h)) / h**2
    z = np.array([hs.dtn_closure_factor(k**2 - mui, h) for mui in mu])
    basis = np.sin(np.pi * np.outer(m, y))
    closure = (basis.T * z) @ basis * (2.0 / nc) / h**2
    n = nx * ny
    main = np.full(n, 4 / h**2 - k**2, complex)
    a = np.diag(main)
    off_y = np.full(ny - 1, -1 / h**2)
    for i in range(nx):
        sl = slice(i * ny, (i + 1) * ny)
        a[sl, sl] += np.diag(off_y, 1) + np.diag(off_y, -1)
    off_x = np.full(n - ny, -1 / h**2)
    a += np.diag(off_x, ny) + np.diag(off_x, -ny)
    a[:ny, :ny] -= closure
    a[-ny:, -ny:] -= closure
    u = np.linalg.solve(a, f.ravel()).reshape(nx, ny)
    return np.max(np.abs(u - u_ref)) / np.max(np.abs(u_ref))


def test_criterion_8_transfer_properties():
    """Restriction is exactly the prolongation transpose; constants survive."""
    mesh, _ = constant_problem(2, 32, pml(4, 20.0))
    _, cmap = hs.coarsen_mesh(mesh)
    p = prolongation_matrix(cmap)
    u = _rand((p.shape[1],))
    r = _rand((p.shape[0],))
    mismatch = abs(np.vdot(r, p @ u) - np.vdot(p.T @ r, u)) / abs(np.vdot(r, p @ u))

    mesh_plain, _ = constant_problem(2, 32)
    _, cmap_plain = hs.coarsen_mesh(mesh_plain)
    shape_c = tuple(len(w) - 1 for w in cmap_plain.coarse_widths)
    fine = hs.prolongate(cmap_plain, np.ones(shape_c))
    const_dev = np.abs(fine[1:-1, 1:-1] - 1.0).max()
    ok = mismatch <= 1e-14 and const_dev <= 1e-14
    _report(8, ok, f"transpose identity off by {mismatch:.2e}; "
                   f"constant preservation off by {const_dev:.2e}")


def test_criterion_9_3d_smoke():
    """64^3 constant medium, 3-D TGSP with the tabulated coefficients."""
    t0 = time.perf_counter()
    mesh, model = constant_problem(3, 64, pml(3, 15.0))
    rep = _tgsp_iterations(mesh, model, "pml", 3,
                           smoother=SmootherConfig(0.6, 3))
    elapsed = time.perf_counter() - t0
    ok = rep.converged and rep.iterations <= 20 and elapsed <= 600
    _report(9, ok, f"64^3 TGSP: {rep.iterations} iterations, "
                   f"residual {rep.residual_history[-1]:.1e}, {elapsed:.0f}s")
