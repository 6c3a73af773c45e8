"""Experiment harness: configuration, velocity-model ingestion, runs, and
result emission.

Each run writes one row of a results CSV (config echo, iteration count,
timings) plus a residual-history figure next to it; batch sweeps reproduce
the iteration tables at desk scale and are resumable row by row.  Velocity
files are raw little-endian float32, x-fastest, sampled on the interior
unknown lattice; field dumps are interleaved (re, im) float64 in the same
layout.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .discretize import WaveModel
from .krylov import GmresConfig, gmres
from .mesh import PML, SPONGE, AbsorbingLayerSpec, build_mesh
from .oracles import dispersion_error, phase_speed_error_std_1d, write_dispersion_csv
from .sweepdd import SweepingPreconditioner, build_partition, fine_level
from .twogrid import SmootherConfig, SweepOptions, build_two_grid

DD_STRENGTH = {3: 15.0, 4: 20.0, 5: 25.0}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: model, discretization, preconditioner, and outputs."""

    model: str = "constant"            # constant | wedge | file:PATH
    model_dims: tuple[int, ...] | None = None
    dim: int = 2
    size: int = 256                    # interior cells per axis
    freq: float | None = None
    ppw: float = 10.0                  # sets freq when freq is not given
    layer: str = "pml"                 # pml | sponge | none
    layer_width: int | None = None
    layer_strength: float | None = None
    two_grid: bool = True
    coarse_solver: str = "sweep"       # exact | sweep
    variant: str = "ud"                # ud | x | nx
    nx_cells: int | None = None
    w_dd: int = 4
    s_dd: float | None = None
    subdomains: int | None = None
    nu: int | None = None
    omega_jac: float | None = None
    tol: float = 1e-6
    max_iter: int = 100
    rhs: str = "point"                 # point | random
    seed: int | None = None
    out_dir: str = "results"
    dump_field: str | None = None
    plot: bool = True
    label: str = ""

    def __post_init__(self):
        if self.rhs == "random" and self.seed is None:
            raise ValueError("--seed is mandatory for a random right-hand side")
        if self.layer not in ("pml", "sponge", "none"):
            raise ValueError(f"unknown layer kind {self.layer!r}")
        if self.variant == "nx" and self.nx_cells is None:
            raise ValueError("NX sweep needs --nx-cells")

    @property
    def key(self) -> str:
        if self.label:
            return self.label
        solver = (f"tg-{self.coarse_solver}" if self.two_grid else "sweep-only")
        return (f"{self.model.replace(':', '_').replace('/', '_')}-{self.dim}d-"
                f"{self.size}-{self.layer}-{solver}-{self.variant}"
                f"{self.nx_cells or ''}-w{self.w_dd}")


@dataclass
class ResultRow:
    key: str
    model: str
    dim: int
    size: int
    freq: float
    layer: str
    solver: str
    variant: str
    w_dd: int
    subdomains: int
    seed: object
    iterations: int
    converged: bool
    final_residual: float
    setup_time: float
    solve_time: float
    residual_file: str = ""

    @staticmethod
    def columns():
        return [f.name for f in fields(ResultRow)]

    def values(self):
        return [getattr(self, name) for name in self.columns()]


# ---------------------------------------------------------------------------
# velocity models and field files

def load_model(path, dims, dtype="<f4") -> np.ndarray:
    """Raw velocities (little-endian float32, x-fastest) on the given lattice."""
    dims = tuple(int(d) for d in dims)
    raw = np.fromfile(path, dtype=dtype)
    expected = int(np.prod(dims))
    if raw.size != expected:
        raise ValueError(f"{path}: {raw.size} samples, expected {expected} "
                         f"({expected * 4} bytes) for dims {dims}")
    bad = np.flatnonzero(raw <= 0.0)
    if bad.size:
        raise ValueError(f"{path}: nonpositive velocity at flat index {bad[0]}")
    return raw.reshape(dims[::-1]).T.astype(float)


def save_field(path, u: np.ndarray):
    """Complex field as interleaved (re, im) float64, x-fastest."""
    flat = np.ascontiguousarray(np.asarray(u, dtype=complex).T)
    inter = np.empty(flat.size * 2)
    inter[0::2] = flat.real.ravel()
    inter[1::2] = flat.imag.ravel()
    inter.astype("<f8").tofile(path)


def load_field(path, dims) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != 2 * int(np.prod(dims)):
        raise ValueError(f"{path}: wrong size for dims {dims}")
    u = raw[0::2] + 1j * raw[1::2]
    return u.reshape(dims[::-1]).T


def wedge_velocity(shape) -> np.ndarray:
    """Three dipping layers at speeds 1 / 1.5 / 2 (depth = last axis)."""
    axes = [np.linspace(0.0, 1.0, n) for n in shape]
    x = axes[0].reshape(-1, *([1] * (len(shape) - 1)))
    depth = axes[-1].reshape(*([1] * (len(shape) - 1)), -1)
    b1 = 0.25 + 0.15 * x
    b2 = 0.60 + 0.10 * x
    c = np.where(depth < b1, 1.0, np.where(depth < b2, 1.5, 2.0))
    return np.broadcast_to(c, shape).copy()


def _interior_velocity(cfg: ExperimentConfig, shape):
    if cfg.model == "constant":
        return np.ones(shape)
    if cfg.model == "wedge":
        return wedge_velocity(shape)
    if cfg.model.startswith("file:"):
        path = cfg.model[5:]
        dims = cfg.model_dims or shape
        c = load_model(path, dims)
        if c.shape != shape:
            raise ValueError(f"model file lattice {c.shape} != interior unknowns {shape}; "
                             "set --size to match the file")
        return c
    raise ValueError(f"unknown model {cfg.model!r}")


def _layer_spec(cfg: ExperimentConfig, ref_speed) -> AbsorbingLayerSpec:
    if cfg.layer == "none":
        return AbsorbingLayerSpec()
    if cfg.layer == "pml":
        width = cfg.layer_width if cfg.layer_width is not None else 4
        strength = cfg.layer_strength if cfg.layer_strength is not None else 20.0
        return AbsorbingLayerSpec(PML, width, strength, ref_speed)
    width = cfg.layer_width if cfg.layer_width is not None else 36
    strength = cfg.layer_strength if cfg.layer_strength is not None else 1.0
    return AbsorbingLayerSpec(SPONGE, width, strength, ref_speed)


def build_problem(cfg: ExperimentConfig):
    """Mesh, wave model and frequency for one experiment."""
    h = 1.0 / cfg.size
    interior_unknowns = (cfg.size - 1,) * cfg.dim
    c_int = _interior_velocity(cfg, interior_unknowns)
    freq = cfg.freq if cfg.freq is not None else float(np.min(c_int)) * cfg.size / cfg.ppw
    mesh = build_mesh(cfg.dim, cfg.size, h, _layer_spec(cfg, float(np.max(c_int))))
    # extend the interior model across the layer nodes by edge replication
    pad = [(spec[0].width, spec[1].width) for spec in mesh.layers]
    c_full = np.pad(c_int, pad, mode="edge")
    model = WaveModel.from_velocity(mesh, 2.0 * np.pi * freq, c_full)
    return mesh, model, freq


def _make_rhs(cfg: ExperimentConfig, mesh):
    shape = mesh.unknowns
    f = np.zeros(shape, dtype=complex)
    if cfg.rhs == "point":
        index = []
        for a in range(mesh.dim):
            left = mesh.layers[a][0].width
            index.append(left + mesh.interior_cells(a) // 2)
        f[tuple(index)] = float(cfg.size) ** mesh.dim
    elif cfg.rhs == "random":
        rng = np.random.default_rng(cfg.seed)
        interior = tuple(slice(spec[0].width, n - spec[1].width)
                         for spec, n in zip(mesh.layers, shape))
        block = rng.standard_normal(f[interior].shape) \
            + 1j * rng.standard_normal(f[interior].shape)
        f[interior] = block
    else:
        raise ValueError(f"unknown rhs kind {cfg.rhs!r}")
    return f


def run_experiment(cfg: ExperimentConfig) -> ResultRow:
    """Build the configured solver stack, run GMRES, and emit the row."""
    stage = "setup"
    try:
        mesh, model, freq = build_problem(cfg)
        f = _make_rhs(cfg, mesh)
        s_dd = cfg.s_dd if cfg.s_dd is not None else DD_STRENGTH.get(cfg.w_dd, 5.0 * cfg.w_dd)
        t0 = time.perf_counter()
        n_sub = 0
        if cfg.two_grid:
            smoother = None
            if cfg.nu is not None or cfg.omega_jac is not None:
                smoother = SmootherConfig(
                    omega_jac=cfg.omega_jac if cfg.omega_jac is not None
                    else (0.8 if cfg.dim == 2 else 0.6),
                    nu=cfg.nu if cfg.nu is not None else 3)
            cycle, clevel = build_two_grid(
                mesh, model, smoother=smoother, coarse=cfg.coarse_solver,
                sweep=SweepOptions(cfg.w_dd, s_dd, cfg.variant, cfg.nx_cells,
                                   cfg.subdomains))
            apply_a = lambda v: cycle.fine_csr @ v
            apply_m = cycle.as_preconditioner()
            if cfg.coarse_solver == "sweep":
                n_sub = cycle.coarse_solver.prec.part.J
            solver_name = f"tg-{cfg.coarse_solver}"
        else:
            level = fine_level(mesh, model)
            part = build_partition(level, cfg.w_dd, s_dd, J=cfg.subdomains)
            prec = SweepingPreconditioner(part, cfg.variant, cells=cfg.nx_cells)
            apply_a = lambda v: part.csr @ v
            apply_m = prec
            n_sub = part.J
            solver_name = "sweep-only"
        setup_time = time.perf_counter() - t0

        stage = "solve"
        t0 = time.perf_counter()
        u, report = gmres(apply_a, apply_m, f.ravel(),
                          GmresConfig(tol=cfg.tol, max_iter=cfg.max_iter))
        solve_time = time.perf_counter() - t0
    except Exception as exc:
        raise RuntimeError(f"experiment {cfg.key} failed during {stage}: {exc}") from exc

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res_file = out_dir / f"{cfg.key}.residuals.csv"
    with open(res_file, "w", encoding="utf-8") as fh:
        fh.write("iteration,relative_residual\n")
        for i, r in enumerate(report.residual_history):
            fh.write(f"{i},{r!r}\n")
    if cfg.plot:
        _plot_residuals(out_dir / f"{cfg.key}.residuals.png", cfg.key,
                        report.residual_history)
    if cfg.dump_field:
        save_field(cfg.dump_field, u.reshape(mesh.unknowns))

    return ResultRow(cfg.key, cfg.model, cfg.dim, cfg.size, freq, cfg.layer,
                     solver_name, cfg.variant, cfg.w_dd, n_sub,
                     cfg.seed if cfg.rhs == "random" else "",
                     report.iterations, report.converged,
                     float(report.residual_history[-1]), setup_time, solve_time,
                     res_file.name)


# ---------------------------------------------------------------------------
# CSV emission

def write_rows(path, rows, append=False):
    mode = "a" if append and Path(path).exists() else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(ResultRow.columns())
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row.values()])


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_rows(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rec["dim"] = int(rec["dim"])
            rec["size"] = int(rec["size"])
            rec["freq"] = float(rec["freq"])
            rec["w_dd"] = int(rec["w_dd"])
            rec["subdomains"] = int(rec["subdomains"])
            rec["iterations"] = int(rec["iterations"])
            rec["converged"] = rec["converged"] == "True"
            rec["final_residual"] = float(rec["final_residual"])
            rec["setup_time"] = float(rec["setup_time"])
            rec["solve_time"] = float(rec["solve_time"])
            out.append(rec)
    return out


def run_table(base: ExperimentConfig, sizes, widths, variants, layers,
              csv_path, echo=print) -> list[ResultRow]:
    """Cartesian sweep with one row per cell; completed keys are skipped so an
    interrupted batch resumes, and a failing cell is recorded, not fatal."""
    done = set()
    path = Path(csv_path)
    if path.exists():
        done = {rec["key"] for rec in read_rows(path)}
    rows = []
    for size, w_dd, variant, layer in itertools.product(sizes, widths, variants, layers):
        cfg = replace(base, size=size, w_dd=w_dd, s_dd=None, variant=variant,
                      layer=layer, label="")
        if cfg.key in done:
            echo(f"skip {cfg.key} (already in {csv_path})")
            continue
        try:
            row = run_experiment(cfg)
        except RuntimeError as exc:
            echo(f"FAIL {cfg.key}: {exc}")
            row = ResultRow(cfg.key, cfg.model, cfg.dim, size, 0.0, layer,
                            "failed", variant, w_dd, 0,
                            cfg.seed if cfg.rhs == "random" else "",
                            0, False, float("nan"), 0.0, 0.0)
        write_rows(path, [row], append=True)
        rows.append(row)
        echo(f"{cfg.key}: {row.iterations} iterations "
             f"({'converged' if row.converged else 'NOT converged'})")
    if base.plot and rows:
        _plot_table(path.with_suffix(".png"), read_rows(path))
    return rows


# ---------------------------------------------------------------------------
# figures (rendered next to the delimited output)

def _matplotlib():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_residuals(path, title, history):
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(range(len(history)), history, "o-", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative residual")
    ax.set_title(title, fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _plot_table(path, recs):
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    series = {}
    for rec in recs:
        label = f"{rec['layer']}/{rec['variant']}/w{rec['w_dd']}"
        series.setdefault(label, []).append((rec["size"], rec["iterations"]))
    for label, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=label)
    ax.set_xlabel("interior cells per axis")
    ax.set_ylabel("GMRES iterations")
    ax.set_xscale("log", base=2)
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _plot_dispersion(path, curves):
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for label, curve in curves.items():
        ax.semilogy(curve[:, 0], curve[:, 1], "o-", label=label)
    ax.set_xlabel("1/G (coarse)")
    ax.set_ylabel("max phase-speed error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


# ---------------------------------------------------------------------------
# argument parsing

def _add_experiment_args(p):
    p.add_argument("--config", help="key=value file read before the flags")
    p.add_argument("--model", help="constant | wedge | file:PATH")
    p.add_argument("--model-dims", help="file lattice, e.g. 511,511")
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--size", type=int, help="interior cells per axis")
    p.add_argument("--freq", type=float)
    p.add_argument("--ppw", type=float, help="points per wavelength (sets freq)")
    p.add_argument("--layer", choices=("pml", "sponge", "none"))
    p.add_argument("--layer-width", type=int)
    p.add_argument("--layer-strength", type=float)
    p.add_argument("--no-two-grid", dest="two_grid", action="store_false", default=None)
    p.add_argument("--coarse-solver", choices=("exact", "sweep"))
    p.add_argument("--variant", choices=("ud", "x", "nx"))
    p.add_argument("--nx-cells", type=int)
    p.add_argument("--wdd", dest="w_dd", type=int, help="added PML width (cells)")
    p.add_argument("--sdd", dest="s_dd", type=float, help="added PML strength")
    p.add_argument("--subdomains", type=int)
    p.add_argument("--nu", type=int)
    p.add_argument("--omega-jac", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--rhs", choices=("point", "random"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--dump-field")
    p.add_argument("--no-plot", dest="plot", action="store_false", default=None)
    p.add_argument("--label")


def _read_config_file(path):
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _coerce(name, raw):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    kind = kinds.get(name)
    if raw in ("true", "True"):
        return True
    if raw in ("false", "False"):
        return False
    if name in ("model_dims",):
        return tuple(int(v) for v in raw.split(","))
    for cast in (int, float):
        try:
            if kind and ("int" in str(kind) or "float" in str(kind)):
                return cast(raw)
        except ValueError:
            continue
    return raw


def config_from_args(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        for key, raw in _read_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    for f in fields(ExperimentConfig):
        cli = getattr(args, f.name, None)
        if cli is not None:
            values[f.name] = cli
    if isinstance(values.get("model_dims"), str):
        values["model_dims"] = tuple(int(v) for v in values["model_dims"].split(","))
    return ExperimentConfig(**values)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="helmsweep",
        description="Helmholtz experiments with the two-grid sweeping preconditioner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one experiment")
    _add_experiment_args(p_solve)
    p_solve.add_argument("--csv", default=None, help="results CSV (default: out_dir/results.csv)")

    p_table = sub.add_parser("table", help="sweep sizes x widths x variants x layers")
    _add_experiment_args(p_table)
    p_table.add_argument("--sizes", default="256,512")
    p_table.add_argument("--widths", default="3,4,5")
    p_table.add_argument("--variants", default="ud")
    p_table.add_argument("--layers", default="pml,sponge")
    p_table.add_argument("--csv", default=None)

    p_disp = sub.add_parser("dispersion", help="coarse/fine phase-speed error curves")
    p_disp.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p_disp.add_argument("--points", default="0.04,0.08,0.12,0.16,0.20,0.24,0.28,0.32,0.36,0.40")
    p_disp.add_argument("--out-dir", default="results")
    p_disp.add_argument("--no-plot", dest="plot", action="store_false", default=True)

    p_oracle = sub.add_parser("oracle-check", help="quick self-verification")
    p_oracle.add_argument("--out-dir", default="results")

    args = parser.parse_args(argv)

    if args.command == "solve":
        cfg = config_from_args(args)
        row = run_experiment(cfg)
        csv_path = args.csv or str(Path(cfg.out_dir) / "results.csv")
        write_rows(csv_path, [row], append=True)
        print(f"{row.key}: {row.iterations} iterations, "
              f"{'converged' if row.converged else 'NOT converged'} "
              f"(setup {row.setup_time:.1f}s, solve {row.solve_time:.1f}s)")
        return 0

    if args.command == "table":
        cfg = config_from_args(args)
        csv_path = args.csv or str(Path(cfg.out_dir) / "table.csv")
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        run_table(cfg,
                  [int(s) for s in args.sizes.split(",")],
                  [int(w) for w in args.widths.split(",")],
                  args.variants.split(","),
                  args.layers.split(","),
                  csv_path)
        print(f"table written to {csv_path}")
        return 0

    if args.command == "dispersion":
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        points = [float(v) for v in args.points.split(",")]
        family = f"opt-{args.dim}d"
        curve = dispersion_error(family, points)
        csv_path = out / f"dispersion_{args.dim}d.csv"
        write_dispersion_csv(csv_path, curve)
        if args.plot:
            _plot_dispersion(out / f"dispersion_{args.dim}d.png", {family: curve})
        worst = float(np.max(curve[:, 1]))
        print(f"dispersion curve written to {csv_path} (worst error {worst:.2e})")
        return 0

    if args.command == "oracle-check":
        return _oracle_check()

    parser.error(f"unknown command {args.command}")


def _oracle_check():
    """Fast end-to-end sanity gates, one line each."""
    from . import (SweepingPreconditioner as Prec, build_partition as bp,
                   robin_level_1d, to_csr)

    rng = np.random.default_rng(0)
    checks = []

    n, k = 400, 2 * np.pi * 40
    level = robin_level_1d(k, 1.0 / n, n)
    part = bp(level, J=8)
    a = to_csr(level.op)
    f = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
    res = max(np.linalg.norm(f - a @ Prec(part, v)(f)) / np.linalg.norm(f)
              for v in ("ud", "x"))
    checks.append(("1-D sweep exactness < 1e-10", res < 1e-10, f"{res:.2e}"))

    err = float(dispersion_error("opt-2d", [0.2])[0, 1])
    checks.append(("optimized 2-D dispersion at G=5 < 5e-4", err < 5e-4, f"{err:.2e}"))

    rel = abs(phase_speed_error_std_1d(0.1) - (2 * np.pi * 0.1) ** 2 / 24) \
        / ((2 * np.pi * 0.1) ** 2 / 24)
    checks.append(("standard FD error at G=10 within 10% of (kh)^2/24", rel < 0.1, f"{rel:.2%}"))

    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  [{detail}]")
        ok &= passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
