"""Rectilinear meshes with absorbing-layer bookkeeping and PML-aware coarsening.

An axis with N cells has grid points 0..N; with Dirichlet conditions the
unknowns sit at points 1..N-1.  Absorbing layers occupy whole cells at either
end of an axis.  Coarsening halves cells pairwise except inside PML layers,
whose cells are never coarsened, so a coarse mesh is rectilinear with mixed
cell widths (fine h inside PML strips, 2h elsewhere).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PML = "pml"
SPONGE = "sponge"
NONE = "none"


@dataclass(frozen=True)
class AbsorbingLayerSpec:
    """One absorbing layer on one side of one axis.

    ``strength`` is the dimensionless S_pml for PML layers and gamma_max for
    sponge layers.  ``width`` counts cells of the mesh level the spec lives on.
    """

    kind: str = NONE
    width: int = 0
    strength: float = 0.0
    ref_speed: float = 1.0

    def __post_init__(self):
        if self.kind not in (PML, SPONGE, NONE):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == NONE:
            return
        if self.width < 1:
            raise ValueError(f"{self.kind} layer needs width >= 1 cells, got {self.width}")
        if self.strength <= 0:
            raise ValueError(f"{self.kind} layer needs strength > 0, got {self.strength}")


NO_LAYER = AbsorbingLayerSpec()


@dataclass(frozen=True)
class Mesh:
    """Rectilinear mesh: per-axis cell widths plus layer bookkeeping.

    ``spacing[a]`` holds the cell widths h_{a,i+1/2}; ``layers[a]`` is the
    (left, right) pair of AbsorbingLayerSpec for axis ``a``.
    """

    dim: int
    cells: tuple[int, ...]
    spacing: tuple[np.ndarray, ...]
    layers: tuple[tuple[AbsorbingLayerSpec, AbsorbingLayerSpec], ...]
    level: int = 0

    def __post_init__(self):
        if self.dim != len(self.cells) or self.dim != len(self.spacing):
            raise ValueError("dim inconsistent with per-axis data")
        for a in range(self.dim):
            w = np.asarray(self.spacing[a], dtype=float)
            if len(w) != self.cells[a]:
                raise ValueError(f"axis {a}: {len(w)} widths for {self.cells[a]} cells")
            if np.any(w <= 0):
                raise ValueError(f"axis {a}: nonpositive cell width")
            left, right = self.layers[a]
            if left.width + right.width >= self.cells[a]:
                raise ValueError(f"axis {a}: layer widths {left.width}+{right.width} "
                                 f"leave no interior in {self.cells[a]} cells")
            if self.cells[a] < 2:
                raise ValueError(f"axis {a}: needs at least 2 cells")

    @property
    def unknowns(self) -> tuple[int, ...]:
        """Unknowns per axis (Dirichlet boundary: cells - 1)."""
        return tuple(n - 1 for n in self.cells)

    def points(self, axis: int) -> np.ndarray:
        """Physical coordinates of grid points 0..N along an axis."""
        return np.concatenate(([0.0], np.cumsum(self.spacing[axis])))

    def length(self, axis: int) -> float:
        return float(np.sum(self.spacing[axis]))

    def interior_cells(self, axis: int) -> int:
        left, right = self.layers[axis]
        return self.cells[axis] - left.width - right.width

    def layer_extent(self, axis: int, side: int) -> float:
        """Physical thickness of the layer on side 0 (left) or 1 (right)."""
        spec = self.layers[axis][side]
        if spec.width == 0:
            return 0.0
        w = self.spacing[axis]
        return float(np.sum(w[: spec.width] if side == 0 else w[-spec.width:]))

    def is_uniform(self, axis: int | None = None) -> bool:
        axes = range(self.dim) if axis is None else [axis]
        return all(np.ptp(self.spacing[a]) == 0.0 for a in axes)


@dataclass(frozen=True)
class CoarseningMap:
    """Per-axis mapping between a fine mesh and its coarse counterpart.

    ``fine_point_of_coarse[a]`` maps coarse point indices 0..N_c to fine point
    indices (strictly increasing, endpoints fixed).  ``refined_cell[a]`` marks
    coarse cells that merge two fine cells; unrefined cells are the uncoarsened
    PML-layer cells copied at fine width.
    """

    fine_point_of_coarse: tuple[np.ndarray, ...]
    refined_cell: tuple[np.ndarray, ...]
    coarse_widths: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.fine_point_of_coarse)


def _normalize_layers(dim, layer_specs):
    if layer_specs is None:
        layer_specs = NO_LAYER
    if isinstance(layer_specs, AbsorbingLayerSpec):
        layer_specs = [(layer_specs, layer_specs)] * dim
    out = []
    for entry in layer_specs:
        if isinstance(entry, AbsorbingLayerSpec):
            out.append((entry, entry))
        else:
            left, right = entry
            out.append((left, right))
    if len(out) != dim:
        raise ValueError(f"expected {dim} per-axis layer entries, got {len(out)}")
    return tuple(out)


def build_mesh(dim, interior_cells_per_axis, h, layer_specs=None, level=0) -> Mesh:
    """Uniform mesh of ``interior + layer`` cells per axis with spacing ``h``."""
    if h <= 0:
        raise ValueError(f"cell width must be positive, got {h}")
    if np.isscalar(interior_cells_per_axis):
        interior_cells_per_axis = (int(interior_cells_per_axis),) * dim
    if len(interior_cells_per_axis) != dim:
        raise ValueError("one interior cell count per axis required")
    layers = _normalize_layers(dim, layer_specs)
    cells = []
    spacing = []
    for a in range(dim):
        n_int = int(interior_cells_per_axis[a])
        if n_int < 2:
            raise ValueError(f"axis {a}: need at least 2 interior cells, got {n_int}")
        n = n_int + layers[a][0].width + layers[a][1].width
        cells.append(n)
        spacing.append(np.full(n, float(h)))
    return Mesh(dim, tuple(cells), tuple(spacing), layers, level=level)


def coarsen_mesh(mesh: Mesh) -> tuple[Mesh, CoarseningMap]:
    """Pairwise coarsening outside PML layers; PML cells keep their fine width.

    Sponge layers coarsen like interior cells (the multigrid modification is
    needed for PML only).  The coarsenable span of each axis must contain an
    even number of cells.
    """
    i_fp, refined, widths, cells_c, layers_c = [], [], [], [], []
    for a in range(mesh.dim):
        left, right = mesh.layers[a]
        wl = left.width if left.kind == PML else 0
        wr = right.width if right.kind == PML else 0
        n = mesh.cells[a]
        n_mid = n - wl - wr
        if n_mid % 2 != 0:
            raise ValueError(f"axis {a}: {n_mid} coarsenable cells, pairwise "
                             "coarsening needs an even count")
        w_f = mesh.spacing[a]
        fp = [0]
        ref = []
        w_c = []
        for c in range(wl):
            fp.append(fp[-1] + 1)
            ref.append(False)
            w_c.append(w_f[c])
        for c in range(wl, n - wr, 2):
            fp.append(fp[-1] + 2)
            ref.append(True)
            w_c.append(w_f[c] + w_f[c + 1])
        for c in range(n - wr, n):
            fp.append(fp[-1] + 1)
            ref.append(False)
            w_c.append(w_f[c])
        i_fp.append(np.asarray(fp, dtype=int))
        refined.append(np.asarray(ref, dtype=bool))
        widths.append(np.asarray(w_c, dtype=float))
        cells_c.append(len(w_c))

        def shrink(spec):
            if spec.kind == SPONGE:
                return AbsorbingLayerSpec(SPONGE, max(1, spec.width // 2),
                                          spec.strength, spec.ref_speed)
            return spec

        layers_c.append((shrink(left), shrink(right)))

    mesh_c = Mesh(mesh.dim, tuple(cells_c), tuple(widths), tuple(layers_c),
                  level=mesh.level + 1)
    cmap = CoarseningMap(tuple(i_fp), tuple(refined), tuple(widths))
    return mesh_c, cmap
