"""Discrete Helmholtz operators on rectilinear meshes.

Fine level: 5/7-point second-order finite differences, with complex
coordinate stretching (PML) or damping terms (sponge) near the boundary.
The PML replaces d/dx by (1/(1+i sigma(x)/omega)) d/dx, with a quadratic
sigma ramp inside each layer.

Coarse level: a compact-stencil family whose weighted identity/derivative
averages are tuned so that coarse phase speeds track the fine operator
(coefficients tabulated against 1/G, G = points per wavelength), plus the
matching finite-element form that stays valid on the mixed-width meshes
produced by PML-aware coarsening.  With the tabulated weights the interior
rows of the FE form equal the optimized-FD rows times the cell volume.

All operators act on complex fields shaped like the mesh unknowns and are
immutable after assembly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .mesh import PML, SPONGE, CoarseningMap, Mesh

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WaveModel:
    """Angular frequency plus a wavenumber field sampled at mesh unknowns."""

    omega: float
    k: np.ndarray

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if np.any(np.asarray(self.k) <= 0):
            raise ValueError("wavenumber field must be positive everywhere")

    @classmethod
    def constant(cls, mesh: Mesh, omega: float, velocity: float = 1.0) -> "WaveModel":
        k = np.full(mesh.unknowns, omega / velocity)
        return cls(omega, k)

    @classmethod
    def from_velocity(cls, mesh: Mesh, omega: float, c: np.ndarray) -> "WaveModel":
        c = np.asarray(c, dtype=float)
        if c.shape != mesh.unknowns:
            raise ValueError(f"velocity shape {c.shape} != unknowns {mesh.unknowns}")
        return cls(omega, omega / c)


class StencilOperator:
    """Compact-stencil operator: one complex coefficient array per offset.

    ``coeffs[off]`` holds the coupling from each unknown to its neighbour at
    ``off`` (entries reaching outside the unknown box are dropped: Dirichlet).
    ``fe_scaled`` marks rows carrying the cell-volume factor h^d.
    """

    def __init__(self, shape, coeffs, fe_scaled=False):
        self.shape = tuple(shape)
        self.fe_scaled = fe_scaled
        self.coeffs = {}
        for off, c in coeffs.items():
            off = tuple(int(o) for o in off)
            if len(off) != len(self.shape) or any(abs(o) > 1 for o in off):
                raise ValueError(f"offset {off} breaks the compact-stencil contract")
            self.coeffs[off] = np.ascontiguousarray(np.broadcast_to(
                np.asarray(c, dtype=complex), self.shape))

    @property
    def dim(self):
        return len(self.shape)

    @property
    def n(self):
        return int(np.prod(self.shape))

    def apply(self, u):
        """Matrix-free action on a field shaped like the unknowns."""
        u = np.asarray(u).reshape(self.shape)
        return stencil_apply(self.coeffs, u)

    def diagonal(self):
        return self.coeffs[(0,) * self.dim]

    def row(self, index):
        """Nonzero couplings of one row, as {offset: value} for in-box neighbours."""
        index = tuple(index)
        out = {}
        for off, c in self.coeffs.items():
            nb = tuple(i + o for i, o in zip(index, off))
            if all(0 <= j < n for j, n in zip(nb, self.shape)):
                out[off] = complex(c[index])
        return out

    def scaled(self, factor, fe_scaled=None):
        if fe_scaled is None:
            fe_scaled = self.fe_scaled
        return StencilOperator(self.shape,
                               {o: c * factor for o, c in self.coeffs.items()},
                               fe_scaled=fe_scaled)


def stencil_apply(coeffs, u):
    """out[i] = sum_off coeffs[off][i] * u[i + off], zero outside the box."""
    out = np.zeros(u.shape, dtype=complex)
    for off, c in coeffs.items():
        dst = tuple(slice(max(0, -o), n + min(0, -o)) for o, n in zip(off, u.shape))
        src = tuple(slice(max(0, o), n + min(0, o)) for o, n in zip(off, u.shape))
        out[dst] += c[dst] * u[src]
    return out


# ---------------------------------------------------------------------------
# absorbing-layer profiles

def sigma_profile(layer, depth, thickness):
    """Quadratic PML profile S*c_ref/d^3 * depth^2 at given depth into the layer."""
    if layer.kind != PML:
        raise ValueError(f"sigma_profile needs a PML layer, got {layer.kind!r}")
    depth = np.asarray(depth, dtype=float)
    if np.any(depth < 0):
        raise ValueError("depth into the layer must be >= 0")
    c_pml = layer.strength * layer.ref_speed / thickness**3
    return c_pml * depth**2


def axis_sigma_fn(mesh: Mesh, axis: int):
    """sigma_a(x) combining both PML layers of an axis; None when there are none."""
    left, right = mesh.layers[axis]
    if left.kind != PML and right.kind != PML:
        return None
    length = mesh.length(axis)
    d_l = mesh.layer_extent(axis, 0)
    d_r = mesh.layer_extent(axis, 1)

    def sigma(x):
        x = np.asarray(x, dtype=float)
        s = np.zeros_like(x)
        if left.kind == PML:
            s = s + sigma_profile(left, np.clip(d_l - x, 0.0, None), d_l)
        if right.kind == PML:
            s = s + sigma_profile(right, np.clip(x - (length - d_r), 0.0, None), d_r)
        return s

    return sigma


def axis_gamma_fn(mesh: Mesh, axis: int):
    """Sponge damping gamma_a(x) = gamma_max*(depth/d)^2; None without sponge layers."""
    left, right = mesh.layers[axis]
    if left.kind != SPONGE and right.kind != SPONGE:
        return None
    length = mesh.length(axis)
    d_l = mesh.layer_extent(axis, 0)
    d_r = mesh.layer_extent(axis, 1)

    def gamma(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        if left.kind == SPONGE:
            g = g + left.strength * (np.clip(d_l - x, 0.0, None) / d_l) ** 2
        if right.kind == SPONGE:
            g = g + right.strength * (np.clip(x - (length - d_r), 0.0, None) / d_r) ** 2
        return g

    return gamma


def _alpha(sigma_fn, x, omega):
    if sigma_fn is None:
        return np.ones(np.shape(x), dtype=complex)
    return 1.0 / (1.0 + 1j * sigma_fn(np.asarray(x)) / omega)


def _bcast(arr, axis, dim):
    shape = [1] * dim
    shape[axis] = -1
    return np.asarray(arr).reshape(shape)


# ---------------------------------------------------------------------------
# fine-level finite differences

def _assemble_fd(shape, h, alpha_half, alpha_int, k2_eff):
    """Second-order FD rows with per-axis stretching factors.

    alpha_half[a]: factors at cell midpoints (len N_a); alpha_int[a]: factors
    at unknown points (len N_a - 1); k2_eff: (possibly damped) k^2 field.
    """
    dim = len(shape)
    prod_int = np.ones((1,) * dim, dtype=complex)
    for a in range(dim):
        prod_int = prod_int * _bcast(alpha_int[a], a, dim)
    coeffs = {}
    diag = -np.asarray(k2_eff, dtype=complex) / prod_int
    h2 = h * h
    for a in range(dim):
        scale = prod_int / _bcast(alpha_int[a], a, dim)
        lo = _bcast(alpha_half[a][:-1], a, dim)
        hi = _bcast(alpha_half[a][1:], a, dim)
        off_m = tuple(-1 if m == a else 0 for m in range(dim))
        off_p = tuple(+1 if m == a else 0 for m in range(dim))
        coeffs[off_m] = -lo / (h2 * scale)
        coeffs[off_p] = -hi / (h2 * scale)
        diag = diag + (lo + hi) / (h2 * scale)
    coeffs[(0,) * dim] = diag
    return StencilOperator(shape, coeffs)


def assemble_fine(mesh: Mesh, model: WaveModel) -> StencilOperator:
    """Fine-level operator with PML stretching (or plain FD without layers)."""
    _check_model(mesh, model)
    if not mesh.is_uniform():
        raise ValueError("fine assembly expects uniform spacing")
    if any(s.kind == SPONGE for pair in mesh.layers for s in pair):
        raise ValueError("mesh has sponge layers; use assemble_sponge")
    h = float(mesh.spacing[0][0])
    alpha_half, alpha_int = [], []
    for a in range(mesh.dim):
        pts = mesh.points(a)
        sig = axis_sigma_fn(mesh, a)
        alpha_half.append(_alpha(sig, 0.5 * (pts[:-1] + pts[1:]), model.omega))
        alpha_int.append(_alpha(sig, pts[1:-1], model.omega))
    k2 = np.asarray(model.k, dtype=complex) ** 2
    return _assemble_fd(mesh.unknowns, h, alpha_half, alpha_int, k2)


def assemble_sponge(mesh: Mesh, model: WaveModel) -> StencilOperator:
    """Fine-level operator with damping layers: k^2 -> k^2 (1 + i gamma)."""
    _check_model(mesh, model)
    if not mesh.is_uniform():
        raise ValueError("fine assembly expects uniform spacing")
    if any(s.kind == PML for pair in mesh.layers for s in pair):
        raise ValueError("mesh has PML layers; use assemble_fine")
    h = float(mesh.spacing[0][0])
    dim = mesh.dim
    ones = [np.ones(mesh.cells[a] + 1, dtype=complex) for a in range(dim)]
    alpha_half = [o[:-1] for o in ones]
    alpha_int = [o[:-2] for o in ones]
    gam = np.zeros((1,) * dim)
    for a in range(dim):
        g = axis_gamma_fn(mesh, a)
        if g is not None:
            gam = gam + _bcast(g(mesh.points(a)[1:-1]), a, dim)
    k2 = model.k**2 * (1.0 + 1j * gam)
    return _assemble_fd(mesh.unknowns, h, alpha_half, alpha_int, k2)


def _check_model(mesh, model):
    if np.shape(model.k) != mesh.unknowns:
        raise ValueError(f"model k shape {np.shape(model.k)} != mesh unknowns {mesh.unknowns}")


# ---------------------------------------------------------------------------
# optimized compact-stencil coefficients

@dataclass(frozen=True)
class OptCoeffTable:
    """Dispersion-tuned stencil weights at 1/G support points."""

    inv_g: np.ndarray
    coeffs: np.ndarray  # (npoints, 3) in 2-D, (npoints, 5) in 3-D

    @property
    def ncoef(self):
        return self.coeffs.shape[1]


OPT_FD_2D = OptCoeffTable(
    inv_g=np.array([0.00, 0.04, 0.08, 0.12, 0.16, 0.20, 0.24, 0.28, 0.32, 0.36, 0.40]),
    coeffs=np.array([
        [0.61953, 0.45295, 0.77363],
        [0.63691, 0.47535, 0.87242],
        [0.62988, 0.48633, 0.86400],
        [0.62610, 0.48880, 0.84984],
        [0.62289, 0.48759, 0.83017],
        [0.62596, 0.47106, 0.80852],
        [0.62213, 0.46478, 0.78215],
        [0.61036, 0.47016, 0.74857],
        [0.59107, 0.48468, 0.70553],
        [0.56369, 0.50746, 0.65062],
        [0.52412, 0.54163, 0.57676],
    ]),
)

OPT_FD_3D = OptCoeffTable(
    inv_g=np.array([0.00, 0.04, 0.08, 0.12, 0.16, 0.20, 0.24, 0.28, 0.32, 0.36, 0.40]),
    coeffs=np.array([
        [0.56428, 0.35970, 0.20490, 0.77998, 0.17505],
        [0.56571, 0.36071, 0.20541, 0.78635, 0.17442],
        [0.56298, 0.36150, 0.20719, 0.78273, 0.16881],
        [0.56540, 0.35620, 0.20287, 0.76438, 0.18678],
        [0.56370, 0.35299, 0.20299, 0.74684, 0.19603],
        [0.55813, 0.35277, 0.20452, 0.72755, 0.20131],
        [0.54673, 0.35830, 0.20693, 0.70298, 0.20847],
        [0.52423, 0.38368, 0.19633, 0.66863, 0.22424],
        [0.49946, 0.39740, 0.20725, 0.62734, 0.23845],
        [0.47567, 0.40216, 0.22132, 0.58198, 0.25329],
        [0.45011, 0.36784, 0.29962, 0.53417, 0.23589],
    ]),
)


def default_table(dim):
    return OPT_FD_2D if dim == 2 else OPT_FD_3D


def opt_coeffs(table: OptCoeffTable, inv_g):
    """Piecewise-linear weights at 1/G; clamped to the table range."""
    inv_g = np.asarray(inv_g, dtype=float)
    if np.any(inv_g < 0):
        raise ValueError("1/G must be >= 0")
    out = np.empty(inv_g.shape + (table.ncoef,))
    for j in range(table.ncoef):
        out[..., j] = np.interp(inv_g, table.inv_g, table.coeffs[:, j])
    return out


def _mass_weight_2d(off, c1, c2):
    nz = sum(1 for o in off if o != 0)
    if nz == 0:
        return c1
    if nz == 1:
        return c2 / 4.0
    return (1.0 - c1 - c2) / 4.0


def _mass_weight_3d(off, c1, c2, c3):
    nz = sum(1 for o in off if o != 0)
    if nz == 0:
        return c1
    if nz == 1:
        return c2 / 6.0
    if nz == 2:
        return c3 / 12.0
    return (1.0 - c1 - c2 - c3) / 8.0


def assemble_opt_fd_coarse(mesh_c: Mesh, model_c: WaveModel,
                           table: OptCoeffTable | None = None) -> StencilOperator:
    """Optimized compact-stencil operator on a uniformly coarsened mesh.

    Weights come from the 1/G table evaluated per node at the local k, so
    heterogeneous media get spatially varying stencils.  Only sponge or bare
    meshes are valid here; PML-coarsened meshes keep fine cells inside the
    layers and need assemble_fe_pml_coarse instead.
    """
    _check_model(mesh_c, model_c)
    if any(s.kind == PML for pair in mesh_c.layers for s in pair):
        raise ValueError("PML layers present: use assemble_fe_pml_coarse "
                         "for PML-coarsened meshes")
    if not mesh_c.is_uniform():
        raise ValueError("optimized FD needs uniform spacing")
    dim = mesh_c.dim
    if table is None:
        table = default_table(dim)
    h = float(mesh_c.spacing[0][0])
    k = np.asarray(model_c.k)
    c = opt_coeffs(table, h * k / _TWO_PI)

    gam = np.zeros((1,) * dim)
    for a in range(dim):
        g = axis_gamma_fn(mesh_c, a)
        if g is not None:
            gam = gam + _bcast(g(mesh_c.points(a)[1:-1]), a, dim)
    k2_eff = k**2 * (1.0 + 1j * gam)

    h2 = h * h
    d2 = {0: -2.0 / h2, 1: 1.0 / h2, -1: 1.0 / h2}
    coeffs = {}
    if dim == 2:
        c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2]
        ntil = {0: c3, 1: (1.0 - c3) / 2.0, -1: (1.0 - c3) / 2.0}
        for off in itertools.product((-1, 0, 1), repeat=2):
            m = _mass_weight_2d(off, c1, c2)
            entry = -k2_eff * m \
                - d2[off[0]] * ntil[off[1]] \
                - d2[off[1]] * ntil[off[0]]
            coeffs[off] = entry
    elif dim == 3:
        c1, c2, c3, c4, c5 = (c[..., j] for j in range(5))

        def ntil2(oa, ob):
            nz = (oa != 0) + (ob != 0)
            if nz == 0:
                return c4
            if nz == 1:
                return c5 / 4.0
            return (1.0 - c4 - c5) / 4.0

        for off in itertools.product((-1, 0, 1), repeat=3):
            m = _mass_weight_3d(off, c1, c2, c3)
            entry = -k2_eff * m \
                - d2[off[0]] * ntil2(off[1], off[2]) \
                - d2[off[1]] * ntil2(off[0], off[2]) \
                - d2[off[2]] * ntil2(off[0], off[1])
            coeffs[off] = entry
    else:
        raise ValueError("optimized FD is defined for dim 2 and 3")
    return StencilOperator(mesh_c.unknowns, coeffs)


# ---------------------------------------------------------------------------
# finite-element coarse operator (mixed cell widths, PML-capable)

def fe_constants(c, dim):
    """Volume (I) and surface (J) weights matching the optimized FD family."""
    if dim == 2:
        c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2]
        i_w = [c1 / 4.0, c2 / 8.0, (1.0 - c1 - c2) / 4.0]
        j_w = [c3 / 2.0, (1.0 - c3) / 2.0]
    elif dim == 3:
        c1, c2, c3, c4, c5 = (c[..., j] for j in range(5))
        i_w = [c1 / 8.0, c2 / 24.0, c3 / 24.0, (1.0 - c1 - c2 - c3) / 8.0]
        j_w = [c4 / 4.0, c5 / 8.0, (1.0 - c4 - c5) / 4.0]
    else:
        raise ValueError("FE constants defined for dim 2 and 3")
    return i_w, j_w


def _assemble_fe(widths, origins, sigma_fns, gamma_fns, omega,
                 k_nodes, k_cells, table, h_ref):
    """FE rows on a rectilinear grid; k sampled per cell or per row node.

    With k_cells given the mass term uses cellwise-constant k^2 (the FE
    construction proper); with k_cells None it uses the row node's k^2, which
    makes interior rows equal the optimized-FD rows times the cell volume for
    any k field.  Stretching factors alpha are evaluated at cell midpoints.
    """
    dim = len(widths)
    shape = tuple(len(w) - 1 for w in widths)
    pts = [origins[a] + np.concatenate(([0.0], np.cumsum(widths[a])))
           for a in range(dim)]
    mids = [0.5 * (p[:-1] + p[1:]) for p in pts]
    alpha_cell = [_alpha(sigma_fns[a], mids[a], omega) for a in range(dim)]

    k = np.asarray(k_nodes)
    c = opt_coeffs(table, h_ref * k / _TWO_PI)
    i_w, j_w = fe_constants(c, dim)

    # per-axis cell weights h/alpha and their node-indexed sums
    wa = [np.asarray(widths[a], dtype=complex) / alpha_cell[a] for a in range(dim)]

    def node_w(a, o):
        if o == 0:
            return wa[a][:-1] + wa[a][1:]
        return wa[a][:-1] if o == -1 else wa[a][1:]

    # damping: gamma summed across axes, at nodes or cell centers
    def gamma_nd(samples):
        g = np.zeros((1,) * dim)
        for a in range(dim):
            if gamma_fns[a] is not None:
                g = g + _bcast(gamma_fns[a](samples[a]), a, dim)
        return g

    if k_cells is not None:
        k2c = np.asarray(k_cells) ** 2 * (1.0 + 1j * gamma_nd(mids))
        inv_alpha_cell = [1.0 / ac for ac in alpha_cell]
        cell_choice = {-1: (slice(0, -1),), 0: (slice(0, -1), slice(1, None)), 1: (slice(1, None),)}
    else:
        k2n = k**2 * (1.0 + 1j * gamma_nd([p[1:-1] for p in pts]))

    # derivative factors alpha/h per adjacent cell, node-indexed
    da = [alpha_cell[a] / np.asarray(widths[a]) for a in range(dim)]

    def node_d(a, o):
        if o == -1:
            return da[a][:-1]
        if o == +1:
            return da[a][1:]
        return -(da[a][:-1] + da[a][1:])

    coeffs = {}
    for off in itertools.product((-1, 0, 1), repeat=dim):
        nz = sum(1 for o in off if o != 0)
        # mass term
        if k_cells is None:
            mass = k2n * i_w[nz]
            for a in range(dim):
                mass = mass * _bcast(node_w(a, off[a]), a, dim)
        else:
            mass = np.zeros(shape, dtype=complex)
            for combo in itertools.product(*(cell_choice[off[a]] for a in range(dim))):
                term = k2c[tuple(combo)]
                for a in range(dim):
                    term = term * _bcast((np.asarray(widths[a]) * inv_alpha_cell[a])[combo[a]], a, dim)
                mass = mass + term
            mass = mass * i_w[nz]
        entry = -mass
        # stiffness: one derivative axis at a time, FE mass transverse
        for l in range(dim):
            term = _bcast(node_d(l, off[l]), l, dim) * j_w[nz - (off[l] != 0)]
            for m in range(dim):
                if m != l:
                    term = term * _bcast(node_w(m, off[m]), m, dim)
            entry = entry - term
        coeffs[off] = entry
    return StencilOperator(shape, coeffs, fe_scaled=True)


def interior_spacing(mesh_c: Mesh) -> float:
    """Spacing of the coarsened interior cells (the largest width present)."""
    return float(max(np.max(w) for w in mesh_c.spacing))


def assemble_fe_pml_coarse(mesh_c: Mesh, cmap: CoarseningMap, model_c: WaveModel,
                           k_cells: np.ndarray | None = None,
                           table: OptCoeffTable | None = None) -> StencilOperator:
    """FE coarse operator for PML-coarsened meshes (rows carry the h^d factor).

    ``k_cells`` holds k at coarse cell midpoints; without it the coarse node
    field is averaged onto the cells.  Interior rows equal the optimized-FD
    rows times the cell volume when k is constant.
    """
    _check_model(mesh_c, model_c)
    if cmap.dim != mesh_c.dim or any(
            len(cmap.coarse_widths[a]) != mesh_c.cells[a] for a in range(mesh_c.dim)):
        raise ValueError("coarsening map does not match the coarse mesh")
    dim = mesh_c.dim
    if table is None:
        table = default_table(dim)
    if k_cells is None:
        k_cells = _nodes_to_cells(model_c.k)
    if k_cells.shape != mesh_c.cells:
        raise ValueError(f"k_cells shape {k_cells.shape} != cells {mesh_c.cells}")
    sig = [axis_sigma_fn(mesh_c, a) for a in range(dim)]
    gam = [axis_gamma_fn(mesh_c, a) for a in range(dim)]
    return _assemble_fe(mesh_c.spacing, [0.0] * dim, sig, gam, model_c.omega,
                        model_c.k, k_cells, table, interior_spacing(mesh_c))


def _edge_pad(arr, axis):
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (1, 1)
    return np.pad(arr, pad, mode="edge")


def _nodes_to_cells(k_nodes):
    """Cell-midpoint values from node values: (1/2,1/2) per axis, edge-padded."""
    out = np.asarray(k_nodes, dtype=float)
    for a in range(out.ndim):
        ext = _edge_pad(out, a)
        lo = tuple(slice(0, -1) if m == a else slice(None) for m in range(out.ndim))
        hi = tuple(slice(1, None) if m == a else slice(None) for m in range(out.ndim))
        out = 0.5 * (ext[lo] + ext[hi])
    return out


# ---------------------------------------------------------------------------
# wavenumber transfer between levels

def coarsen_wavenumber(k_fine: np.ndarray, cmap: CoarseningMap) -> np.ndarray:
    """k at coarse nodes: (1/4,1/2,1/4) around the fine image where both
    neighbouring cells coarsened, plain injection elsewhere (PML strips)."""
    out = np.asarray(k_fine, dtype=float)
    for a in range(cmap.dim):
        fp = cmap.fine_point_of_coarse[a]
        ref = cmap.refined_cell[a]
        ext = _edge_pad(out, a)  # fine points 0..N
        inner = fp[1:-1]         # coarse unknown points -> fine point index
        take = np.take(ext, inner, axis=a)
        left = np.take(ext, inner - 1, axis=a)
        right = np.take(ext, inner + 1, axis=a)
        smooth = 0.25 * left + 0.5 * take + 0.25 * right
        # coarse unknown point i (1-based) sits between coarse cells i-1 and i
        use = ref[:-1] & ref[1:]
        shape = [1] * out.ndim
        shape[a] = -1
        out = np.where(use.reshape(shape), smooth, take)
    return out


# ---------------------------------------------------------------------------
# 1-D line segment with exact discrete radiating closures

def discrete_wavenumber(k, h):
    """Wavenumber of the discrete plane wave: 2 - 2 cos(kappa h) = k^2 h^2."""
    kh = k * h
    if kh >= 2.0:
        raise ValueError(f"kh = {kh:.3f} >= 2: grid cannot carry the wave")
    return np.arccos(1.0 - kh * kh / 2.0) / h


def robin1d_operator(k, h, n_unknowns) -> StencilOperator:
    """Constant-k 1-D Helmholtz row stencil with radiating ends.

    The end rows eliminate the exterior point through the outgoing discrete
    wave u_{n+1} = e^{i kappa h} u_n, the discrete counterpart of the Robin
    condition; the truncation is exactly transparent for constant k.
    """
    if n_unknowns < 2:
        raise ValueError("need at least 2 unknowns")
    h2 = h * h
    diag = np.full(n_unknowns, (2.0 - (k * h) ** 2) / h2, dtype=complex)
    z = np.exp(1j * discrete_wavenumber(k, h) * h)
    diag[0] -= z / h2
    diag[-1] -= z / h2
    off = np.full(n_unknowns, -1.0 / h2, dtype=complex)
    return StencilOperator((n_unknowns,), {(0,): diag, (-1,): off, (1,): off})


def subdomain_robin1d_operator(k, h, core_lo, core_hi, open_left, open_right):
    """Slab operator for the 1-D line: one extra point carries each open end."""
    lo = core_lo - 1 if open_left else core_lo
    hi = core_hi + 1 if open_right else core_hi
    return robin1d_operator(k, h, hi - lo + 1), lo, hi


# ---------------------------------------------------------------------------
# subdomain slab operators with added absorbing layers along the sweep axis

def _replicate_rows(core, w_left, w_right):
    parts = []
    if w_left:
        parts.append(np.repeat(core[:1], w_left, axis=0))
    parts.append(core)
    if w_right:
        parts.append(np.repeat(core[-1:], w_right, axis=0))
    return np.concatenate(parts, axis=0)


def _added_sigma_fn(base_fn, omega, k_field, core_lo, core_hi, x_if_l, x_if_r,
                    d_l, d_r, s_dd, open_left, open_right):
    """Sweep-axis sigma: the global profile plus quadratic ramps beyond the
    subdomain core, referenced to the wave speed at the interface."""
    c_l = omega / float(np.min(k_field[core_lo - 1])) if open_left else 0.0
    c_r = omega / float(np.min(k_field[core_hi - 1])) if open_right else 0.0

    def sigma(x):
        x = np.asarray(x, dtype=float)
        s = base_fn(x) if base_fn is not None else np.zeros_like(x)
        if open_left:
            s = s + (s_dd * c_l / d_l**3) * np.clip(x_if_l - x, 0.0, None) ** 2
        if open_right:
            s = s + (s_dd * c_r / d_r**3) * np.clip(x - x_if_r, 0.0, None) ** 2
        return s

    return sigma


def subdomain_fd_operator(mesh: Mesh, model: WaveModel, core_lo, core_hi,
                          w_dd, s_dd, open_left, open_right):
    """Fine-level slab: core columns plus w_dd added-PML columns per open side.

    The added wavenumber columns replicate the core edge (constant along the
    sweep axis); outer sides keep the global boundary treatment, which the
    position-based profiles supply automatically.
    """
    h = float(mesh.spacing[0][0])
    wl = w_dd if open_left else 0
    wr = w_dd if open_right else 0
    lo, hi = core_lo - wl, core_hi + wr
    xpts = np.arange(lo - 1, hi + 2) * h
    k_loc = _replicate_rows(model.k[core_lo - 1:core_hi], wl, wr)

    sig1 = _added_sigma_fn(axis_sigma_fn(mesh, 0), model.omega, model.k,
                           core_lo, core_hi, (core_lo - 0.5) * h, (core_hi + 0.5) * h,
                           w_dd * h, w_dd * h, s_dd, open_left, open_right)
    sigma_fns = [sig1] + [axis_sigma_fn(mesh, a) for a in range(1, mesh.dim)]
    alpha_half, alpha_int = [], []
    pts_axis = [xpts] + [mesh.points(a) for a in range(1, mesh.dim)]
    for a in range(mesh.dim):
        p = pts_axis[a]
        alpha_half.append(_alpha(sigma_fns[a], 0.5 * (p[:-1] + p[1:]), model.omega))
        alpha_int.append(_alpha(sigma_fns[a], p[1:-1], model.omega))

    gam = np.zeros((1,) * mesh.dim)
    for a in range(mesh.dim):
        g = axis_gamma_fn(mesh, a)
        if g is not None:
            gam = gam + _bcast(g(pts_axis[a][1:-1]), a, mesh.dim)
    k2 = k_loc**2 * (1.0 + 1j * gam)
    shape = (hi - lo + 1,) + mesh.unknowns[1:]
    return _assemble_fd(shape, h, alpha_half, alpha_int, k2), lo, hi


def subdomain_fe_operator(mesh_c: Mesh, model_c: WaveModel, k_cells, table,
                          core_lo, core_hi, w_dd, s_dd, open_left, open_right):
    """Coarse-level slab assembled with the FE engine on the sliced geometry.

    ``k_cells`` selects cellwise k sampling (the PML-coarsened construction);
    None selects row-node sampling, whose interior rows equal the optimized-FD
    rows times the cell volume, matching a scaled optimized-FD global operator.
    """
    dim = mesh_c.dim
    wl = w_dd if open_left else 0
    wr = w_dd if open_right else 0
    lo, hi = core_lo - wl, core_hi + wr
    wx = mesh_c.spacing[0]
    core_cells = wx[core_lo - 1:core_hi + 1]
    w_edge_l, w_edge_r = float(core_cells[0]), float(core_cells[-1])
    wx_loc = np.concatenate([np.full(wl, w_edge_l), core_cells, np.full(wr, w_edge_r)])
    xg = mesh_c.points(0)
    origin_x = float(xg[core_lo - 1]) - wl * w_edge_l

    sig1 = _added_sigma_fn(axis_sigma_fn(mesh_c, 0), model_c.omega, model_c.k,
                           core_lo, core_hi,
                           0.5 * (xg[core_lo - 1] + xg[core_lo]),
                           0.5 * (xg[core_hi] + xg[core_hi + 1]),
                           w_dd * w_edge_l, w_dd * w_edge_r,
                           s_dd, open_left, open_right)
    sigma_fns = [sig1] + [axis_sigma_fn(mesh_c, a) for a in range(1, dim)]
    gamma_fns = [axis_gamma_fn(mesh_c, a) for a in range(dim)]
    widths_loc = [wx_loc] + [mesh_c.spacing[a] for a in range(1, dim)]
    origins = [origin_x] + [0.0] * (dim - 1)

    k_nodes_loc = _replicate_rows(model_c.k[core_lo - 1:core_hi], wl, wr)
    k_cells_loc = None
    if k_cells is not None:
        k_cells_loc = _replicate_rows(k_cells[core_lo - 1:core_hi + 1], wl, wr)
    if table is None:
        table = default_table(dim)
    op = _assemble_fe(widths_loc, origins, sigma_fns, gamma_fns, model_c.omega,
                      k_nodes_loc, k_cells_loc, table, interior_spacing(mesh_c))
    return op, lo, hi


def wavenumber_cell_midpoints(k_fine: np.ndarray, cmap: CoarseningMap) -> np.ndarray:
    """k at coarse cell midpoints from fine node values: (1/2,1/2) across
    unrefined cells, (1/4,1/2,1/4) across refined (two-cell) ones."""
    out = np.asarray(k_fine, dtype=float)
    for a in range(cmap.dim):
        fp = cmap.fine_point_of_coarse[a]
        ref = cmap.refined_cell[a]
        ext = _edge_pad(out, a)
        lo_pt = fp[:-1]  # fine point at the cell's left edge
        pair = 0.5 * (np.take(ext, lo_pt, axis=a) + np.take(ext, lo_pt + 1, axis=a))
        mid = (0.25 * np.take(ext, lo_pt, axis=a)
               + 0.5 * np.take(ext, np.minimum(lo_pt + 1, ext.shape[a] - 1), axis=a)
               + 0.25 * np.take(ext, np.minimum(lo_pt + 2, ext.shape[a] - 1), axis=a))
        shape = [1] * out.ndim
        shape[a] = -1
        out = np.where(ref.reshape(shape), mid, pair)
    return out
