"""Helmholtz solver with a two-grid sweeping domain-decomposition preconditioner."""

from .mesh import (NONE, PML, SPONGE, AbsorbingLayerSpec, CoarseningMap, Mesh,
                   build_mesh, coarsen_mesh)
from .discretize import (OPT_FD_2D, OPT_FD_3D, OptCoeffTable, StencilOperator,
                         WaveModel, assemble_fe_pml_coarse, assemble_fine,
                         assemble_opt_fd_coarse, assemble_sponge,
                         coarsen_wavenumber, opt_coeffs, robin1d_operator,
                         sigma_profile, wavenumber_cell_midpoints)
from .sparselin import Factorization, dense_solve, factorize, solve_factored, to_csr
from .sweepdd import (HelmholtzLevel, NxCells, Partition, SweepingPreconditioner,
                      build_partition, coarse_level, extract_transmission,
                      fine_level, make_nx_cells, prec_nx, prec_ud, prec_x,
                      robin_level_1d)
from .twogrid import (SmootherConfig, SweepOptions, TwoGridCycle, build_two_grid,
                      jacobi_smooth, prolongate, prolongation_matrix, restrict,
                      tgsp_apply, vcycle)
from .krylov import GmresConfig, SolveReport, gmres
from .oracles import (RobinProblem1D, StripMode, dispersion_error,
                      dtn_closure_factor, phase_speed_error_std_1d,
                      reflection_coeffs, solve_1d_analytic, solve_strip_fourier)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
