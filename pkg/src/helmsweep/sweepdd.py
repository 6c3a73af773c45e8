"""Modified double-sweep domain decomposition preconditioner.

The domain is cut along the first axis into J slabs at half-point interfaces
beta_j + 1/2, with a second staggered family beta~_j = beta_j - 1 used by the
backward sweep.  Each slab gets its own operator, truncated by added PML (or
the exact 1-D radiating closure), factorized once.  Outgoing traces at the
two layers around an interface turn into equivalent sources for the next
slab through sparse transmission blocks read off the global operator, and
the UD/X/NX schedules run the slab solves forward, backward, or from both
ends at once.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discretize import (StencilOperator, WaveModel, assemble_fine,
                         assemble_fe_pml_coarse, assemble_opt_fd_coarse,
                         assemble_sponge, default_table, interior_spacing,
                         robin1d_operator, stencil_apply,
                         subdomain_fd_operator, subdomain_fe_operator,
                         subdomain_robin1d_operator, _nodes_to_cells)
from .mesh import PML, SPONGE, CoarseningMap, Mesh
from .sparselin import Factorization, factorize, to_csr


# ---------------------------------------------------------------------------
# problem levels: what the partition needs to know to build slab operators

@dataclass
class HelmholtzLevel:
    """A discretized problem the sweep can be built on."""

    op: StencilOperator
    kind: str                      # "fd" | "fe" | "robin1d"
    mesh: Mesh | None = None
    model: WaveModel | None = None
    cmap: CoarseningMap | None = None
    k_cells: np.ndarray | None = None
    table: object = None
    k1d: float = 0.0
    h1d: float = 0.0

    def subdomain_operator(self, core_lo, core_hi, w_dd, s_dd, open_left, open_right):
        if self.kind == "fd":
            return subdomain_fd_operator(self.mesh, self.model, core_lo, core_hi,
                                         w_dd, s_dd, open_left, open_right)
        if self.kind == "fe":
            return subdomain_fe_operator(self.mesh, self.model, self.k_cells,
                                         self.table, core_lo, core_hi,
                                         w_dd, s_dd, open_left, open_right)
        if self.kind == "robin1d":
            return subdomain_robin1d_operator(self.k1d, self.h1d, core_lo, core_hi,
                                              open_left, open_right)
        raise ValueError(f"unknown level kind {self.kind!r}")


def fine_level(mesh: Mesh, model: WaveModel, op: StencilOperator | None = None) -> HelmholtzLevel:
    if op is None:
        sponge = any(s.kind == SPONGE for pair in mesh.layers for s in pair)
        op = assemble_sponge(mesh, model) if sponge else assemble_fine(mesh, model)
    return HelmholtzLevel(op, "fd", mesh=mesh, model=model)


def coarse_level(mesh_c: Mesh, cmap: CoarseningMap, model_c: WaveModel,
                 op: StencilOperator | None = None, k_cells: np.ndarray | None = None,
                 table=None) -> HelmholtzLevel:
    """Coarse problem: FE rows on PML-coarsened meshes, else volume-scaled
    optimized FD (whose rows the FE slab assembly reproduces exactly)."""
    has_pml = any(s.kind == PML for pair in mesh_c.layers for s in pair)
    if table is None:
        table = default_table(mesh_c.dim)
    if has_pml:
        if k_cells is None:
            k_cells = _nodes_to_cells(model_c.k)
        if op is None:
            op = assemble_fe_pml_coarse(mesh_c, cmap, model_c, k_cells, table)
    else:
        k_cells = None  # node sampling keeps slab rows equal to the scaled global rows
        if op is None:
            op = assemble_opt_fd_coarse(mesh_c, model_c, table).scaled(
                interior_spacing(mesh_c) ** mesh_c.dim, fe_scaled=True)
    return HelmholtzLevel(op, "fe", mesh=mesh_c, model=model_c, cmap=cmap,
                          k_cells=k_cells, table=table)


def robin_level_1d(k: float, h: float, n_cells: int) -> HelmholtzLevel:
    op = robin1d_operator(k, h, n_cells - 1)
    return HelmholtzLevel(op, "robin1d", k1d=k, h1d=h)


# ---------------------------------------------------------------------------
# transmission

@dataclass
class TransmissionMatrix:
    """Two-layer to two-layer interface map built from operator couplings.

    For layers (b, b+1): the source on layer b is +/- A[b,:;b+1,:] applied to
    the trace on layer b+1 and the source on layer b+1 is -/+ A[b+1,:;b,:]
    applied to the trace on layer b (upper signs forward, lower backward);
    same-layer blocks vanish.
    """

    point: int
    block01: dict
    block10: dict
    sign: int

    def apply(self, buf):
        buf = np.asarray(buf, dtype=complex)
        out = np.empty_like(buf)
        out[0] = self.sign * stencil_apply(self.block01, buf[1])
        out[1] = -self.sign * stencil_apply(self.block10, buf[0])
        return out

    def dense(self):
        """The full 2m x 2m matrix (m = cross-section unknowns); small sizes only."""
        m = int(np.prod(self.block01[next(iter(self.block01))].shape)) if self.block01 else 1
        t = np.zeros((2 * m, 2 * m), dtype=complex)
        eye = np.eye(m)
        for j in range(m):
            shape = self.block01[next(iter(self.block01))].shape if self.block01 else ()
            e = eye[:, j].reshape(shape)
            t[:m, m + j] = self.sign * stencil_apply(self.block01, e).ravel()
            t[m:, j] = -self.sign * stencil_apply(self.block10, e).ravel()
        return t


def _extract(op: StencilOperator, b: int, sign: int) -> TransmissionMatrix:
    x0 = b - 1  # 0-based row of grid point b
    block01, block10 = {}, {}
    for off, c in op.coeffs.items():
        if off[0] == 1:
            block01[off[1:]] = c[x0]
        elif off[0] == -1:
            block10[off[1:]] = c[x0 + 1]
    return TransmissionMatrix(b, block01, block10, sign)


# ---------------------------------------------------------------------------
# partition

@dataclass
class Subdomain:
    j: int
    pt_lo: int
    pt_hi: int
    core_lo: int
    core_hi: int
    op: StencilOperator
    factor: Factorization


@dataclass
class Partition:
    level: HelmholtzLevel
    J: int
    beta: np.ndarray
    beta_tilde: np.ndarray
    w_dd: int
    s_dd: float
    subs: list[Subdomain]
    t_fwd: dict[int, TransmissionMatrix]
    t_bwd: dict[int, TransmissionMatrix]
    csr: object = None

    @property
    def shape(self):
        return self.level.op.shape

    def apply_global(self, u):
        return (self.csr @ u.ravel()).reshape(self.shape)


def default_subdomain_count(n_unknowns: int, w_dd: int) -> int:
    return n_unknowns // (2 * w_dd + 1)


def spaced_interfaces(n_unknowns: int, J: int) -> np.ndarray:
    """Interfaces as even as possible; remainders go one cell per leading slab."""
    w, r = divmod(n_unknowns, J)
    beta = np.zeros(J + 1, dtype=int)
    for j in range(1, J + 1):
        beta[j] = beta[j - 1] + w + (1 if j <= r else 0)
    return beta


def build_partition(level: HelmholtzLevel, w_dd: int = 4, s_dd: float = 20.0,
                    J: int | None = None, tilde_right: bool = False) -> Partition:
    """Partition with staggered interfaces, slab factorizations and
    transmission blocks, all built eagerly."""
    n1 = level.op.shape[0]
    if J is None:
        J = default_subdomain_count(n1, w_dd)
    if J < 2:
        raise ValueError(f"{J} subdomains: the sweep needs at least 2")
    beta = spaced_interfaces(n1, J)
    if np.any(np.diff(beta) < 2):
        raise ValueError("subdomain thinner than 2 cells")
    bt = beta.copy()
    bt[1:J] = beta[1:J] + (1 if tilde_right else -1)

    subs = []
    for j in range(1, J + 1):
        core_lo = min(beta[j - 1], bt[j - 1]) + 1
        core_hi = max(beta[j], bt[j])
        op_j, lo, hi = level.subdomain_operator(core_lo, core_hi, w_dd, s_dd,
                                                j > 1, j < J)
        subs.append(Subdomain(j, lo, hi, core_lo, core_hi, op_j, factorize(op_j)))

    t_fwd = {j: _extract(level.op, beta[j - 1], +1) for j in range(2, J + 1)}
    t_bwd = {j: _extract(level.op, bt[j], -1) for j in range(1, J)}
    return Partition(level, J, beta, bt, w_dd, s_dd, subs, t_fwd, t_bwd,
                     csr=to_csr(level.op))


def extract_transmission(part: Partition, j: int, direction: str) -> TransmissionMatrix:
    if direction == "forward":
        if not 1 < j <= part.J:
            raise ValueError(f"forward transmission needs 1 < j <= J, got {j}")
        return part.t_fwd[j]
    if direction == "backward":
        if not 1 <= j < part.J:
            raise ValueError(f"backward transmission needs 1 <= j < J, got {j}")
        return part.t_bwd[j]
    raise ValueError(f"direction must be forward or backward, got {direction!r}")


# ---------------------------------------------------------------------------
# slab solves and sweeps

def subdom_solve(part: Partition, u, f, j, a, b, ta, tb,
                 tau1=False, B1=None, tau2=False, tau3=False, B3=None, tau4=False):
    """Generic slab solve: restrict the right-hand side to layers a+1..b, add
    transmission sources, solve, scatter layers ta+1..tb into u, and extract
    the outgoing traces that were asked for."""
    sd = part.subs[j - 1]
    lo = sd.pt_lo
    fd = np.zeros(sd.op.shape, dtype=complex)
    fd[a + 1 - lo:b + 1 - lo] = f[a:b]
    if tau1 and j > 1:
        if B1 is None:
            raise RuntimeError(f"forward transmission buffer for slab {j} not populated")
        t = part.t_fwd[j]
        src = t.apply(B1)
        fd[t.point - lo] += src[0]
        fd[t.point + 1 - lo] += src[1]
    if tau3 and j < part.J:
        if B3 is None:
            raise RuntimeError(f"backward transmission buffer for slab {j} not populated")
        t = part.t_bwd[j]
        src = t.apply(B3)
        fd[t.point - lo] += src[0]
        fd[t.point + 1 - lo] += src[1]
    ud = sd.factor.solve(fd.ravel()).reshape(sd.op.shape)
    u[ta:tb] += ud[ta + 1 - lo:tb + 1 - lo]
    out2 = out4 = None
    if tau2 and j < part.J:
        p = part.beta[j]
        out2 = ud[p - lo:p - lo + 2].copy()
    if tau4 and j > 1:
        p = part.beta_tilde[j - 1]
        out4 = ud[p - lo:p - lo + 2].copy()
    return out2, out4


def forward_sweep(part, u, f, j0, j1, B=None):
    """Slab solves j0..j1 ascending with forward transmission; out-of-range
    slab numbers are skipped (sentinel-friendly)."""
    for j in range(j0, j1 + 1):
        if j < 1 or j > part.J:
            continue
        out, _ = subdom_solve(part, u, f, j, part.beta[j - 1], part.beta[j],
                              part.beta[j - 1], part.beta[j],
                              tau1=j > 1, B1=B, tau2=j < part.J)
        if out is not None:
            B = out
    return B


def backward_sweep(part, u, f, j0, j1, B=None):
    for j in range(j0, j1 - 1, -1):
        if j < 1 or j > part.J:
            continue
        _, out = subdom_solve(part, u, f, j, part.beta_tilde[j - 1], part.beta_tilde[j],
                              part.beta_tilde[j - 1], part.beta_tilde[j],
                              tau3=j < part.J, B3=B, tau4=j > 1)
        if out is not None:
            B = out
    return B


def midsolve_in(part, u, f, j, B1, B3):
    subdom_solve(part, u, f, j, part.beta[j - 1], part.beta_tilde[j],
                 part.beta[j - 1], part.beta_tilde[j],
                 tau1=True, B1=B1, tau3=True, B3=B3)


def midsolve_out(part, u, f, j):
    return subdom_solve(part, u, f, j, part.beta_tilde[j - 1], part.beta[j],
                        part.beta_tilde[j - 1], part.beta[j],
                        tau2=True, tau4=True)


# ---------------------------------------------------------------------------
# preconditioner variants

def prec_ud(part: Partition, f) -> np.ndarray:
    """Forward sweep on f, residual, backward sweep on the residual."""
    f = np.asarray(f, dtype=complex).reshape(part.shape)
    u = np.zeros(part.shape, dtype=complex)
    B = forward_sweep(part, u, f, 1, part.J)
    g = f - part.apply_global(u)
    backward_sweep(part, u, g, part.J, 1, B)
    return u


def prec_x(part: Partition, f, parallel: bool = False) -> np.ndarray:
    """Simultaneous sweeps meeting at j_mid = J/2 + 1 and re-emerging."""
    if part.J % 2 != 0:
        raise ValueError(f"X-sweep needs an even subdomain count, got {part.J}")
    f = np.asarray(f, dtype=complex).reshape(part.shape)
    u = np.zeros(part.shape, dtype=complex)
    jm = part.J // 2 + 1

    def half_in():
        return forward_sweep(part, u, f, 1, jm - 1)

    def half_in_b():
        return backward_sweep(part, u, f, part.J, jm + 1)

    if parallel:
        with ThreadPoolExecutor(2) as pool:
            fut1, fut2 = pool.submit(half_in), pool.submit(half_in_b)
            B1, B2 = fut1.result(), fut2.result()
    else:
        B1, B2 = half_in(), half_in_b()
    midsolve_in(part, u, f, jm, B1, B2)
    g = f - part.apply_global(u)
    B2, B1 = midsolve_out(part, u, g, jm)

    def half_out():
        backward_sweep(part, u, g, jm - 1, 1, B1)

    def half_out_f():
        forward_sweep(part, u, g, jm + 1, part.J, B2)

    if parallel:
        with ThreadPoolExecutor(2) as pool:
            fut1, fut2 = pool.submit(half_out), pool.submit(half_out_f)
            fut1.result(), fut2.result()
    else:
        half_out()
        half_out_f()
    return u


@dataclass(frozen=True)
class NxCells:
    """Grouping for partial intersecting sweeps: cell boundaries (with -1 and
    J+1 sentinels) and the slab where each cell's sweeps meet."""

    j_cell: tuple[int, ...]
    j_mid: tuple[int, ...]

    @property
    def n_cell(self):
        return len(self.j_cell) - 1

    def validate(self, J):
        jc, jm = self.j_cell, self.j_mid
        if jc[0] != -1 or jc[-1] != J + 1:
            raise ValueError("cell boundaries must start at -1 and end at J+1")
        if len(jm) != self.n_cell:
            raise ValueError("one meeting slab per cell required")
        if any(jc[i] >= jc[i + 1] for i in range(len(jc) - 1)):
            raise ValueError("cell boundaries must be strictly increasing")
        for m in range(1, self.n_cell + 1):
            lo = max(1, jc[m - 1] + 1)
            hi = min(J, jc[m] - 1)
            if not lo <= jm[m - 1] <= hi:
                raise ValueError(f"cell {m}: meeting slab {jm[m - 1]} outside [{lo},{hi}]")


def make_nx_cells(J: int, n_cell: int) -> NxCells:
    if not 1 <= n_cell <= J // 2:
        raise ValueError(f"need 1 <= n_cell <= J/2, got {n_cell} for J={J}")
    bounds = [-1] + [round(m * J / n_cell) for m in range(1, n_cell)] + [J + 1]
    mids = []
    for m in range(1, n_cell + 1):
        lo = max(1, bounds[m - 1] + 1)
        hi = min(J, bounds[m] - 1)
        mids.append((lo + hi + 1) // 2)
    cells = NxCells(tuple(bounds), tuple(mids))
    cells.validate(J)
    return cells


def prec_nx(part: Partition, f, cells: NxCells) -> np.ndarray:
    """Partial intersecting sweeps over slab groups.

    The published NX schedule hands the group-boundary input solve a buffer
    that is only produced by the following group's outgoing sweep, so that
    solve is run one group later here, once both of its traces exist.
    """
    cells.validate(part.J)
    f = np.asarray(f, dtype=complex).reshape(part.shape)
    u = np.zeros(part.shape, dtype=complex)
    nc = cells.n_cell
    jc, jm = cells.j_cell, cells.j_mid
    buf = {i: None for i in range(1, 2 * nc + 2)}

    for m in range(1, nc + 1):
        if m < nc:
            bf, bb = midsolve_out(part, u, f, jc[m])
            buf[2 * m + 1], buf[2 * m] = bf, bb
        buf[2 * m - 1] = forward_sweep(part, u, f, jc[m - 1] + 1, jm[m - 1] - 1, buf[2 * m - 1])
        buf[2 * m] = backward_sweep(part, u, f, jc[m] - 1, jm[m - 1] + 1, buf[2 * m])
        midsolve_in(part, u, f, jm[m - 1], buf[2 * m - 1], buf[2 * m])

    g = f - part.apply_global(u)

    for m in range(1, nc + 1):
        bf, bb = midsolve_out(part, u, g, jm[m - 1])
        buf[2 * m], buf[2 * m - 1] = bf, bb
        buf[2 * m - 1] = backward_sweep(part, u, g, jm[m - 1] - 1, jc[m - 1] + 1, buf[2 * m - 1])
        buf[2 * m] = forward_sweep(part, u, g, jm[m - 1] + 1, jc[m] - 1, buf[2 * m])
        if m > 1:
            midsolve_in(part, u, g, jc[m - 1], buf[2 * m - 2], buf[2 * m - 1])
    return u


@dataclass
class SweepingPreconditioner:
    """One sweep application as a fixed linear map, usable inside GMRES."""

    part: Partition
    variant: str = "ud"
    cells: NxCells | None = None
    parallel: bool = False

    def __post_init__(self):
        if self.variant not in ("ud", "x", "nx"):
            raise ValueError(f"unknown sweep variant {self.variant!r}")
        if self.variant == "x" and self.part.J % 2 != 0:
            raise ValueError(f"X-sweep needs an even subdomain count, got {self.part.J}")
        if self.variant == "nx":
            if isinstance(self.cells, int):
                self.cells = make_nx_cells(self.part.J, self.cells)
            if self.cells is None:
                raise ValueError("NX-sweep needs its cell grouping")
            self.cells.validate(self.part.J)

    def __call__(self, f):
        f = np.asarray(f)
        flat = f.ndim == 1
        if self.variant == "ud":
            u = prec_ud(self.part, f)
        elif self.variant == "x":
            u = prec_x(self.part, f, parallel=self.parallel)
        else:
            u = prec_nx(self.part, f, self.cells)
        return u.ravel() if flat else u
