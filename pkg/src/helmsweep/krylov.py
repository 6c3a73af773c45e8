"""Right-preconditioned GMRES with true-residual tracking.

Full (non-restarted) by default: the preconditioners here keep iteration
counts in the tens, so the Arnoldi basis stays small.  Right preconditioning
leaves the tracked residual equal to the unpreconditioned one, which is what
the iteration tables report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GmresConfig:
    tol: float = 1e-6
    max_iter: int = 100
    restart: int | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart length must be >= 1")


@dataclass
class SolveReport:
    iterations: int
    residual_history: np.ndarray
    converged: bool
    wall_time: float

    def __str__(self):
        state = "converged" if self.converged else "stalled"
        return (f"{state} in {self.iterations} iterations, "
                f"final residual {self.residual_history[-1]:.3e}, "
                f"{self.wall_time:.2f}s")


def _gmres_cycle(apply_op, x0_res, bnorm, tol, max_steps, history):
    """One (restart) cycle of Arnoldi + Givens; returns the update vector.

    The basis is grown one vector at a time: iteration counts stay in the
    tens here, far below max_iter."""
    n = x0_res.shape[0]
    hess = np.zeros((max_steps + 1, max_steps), dtype=complex)
    cs = np.zeros(max_steps, dtype=complex)
    sn = np.zeros(max_steps, dtype=complex)
    beta = np.linalg.norm(x0_res)
    basis = [x0_res / beta]
    g = np.zeros(max_steps + 1, dtype=complex)
    g[0] = beta

    k = 0
    converged = False
    for k in range(max_steps):
        w = apply_op(basis[k])
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("operator produced non-finite values "
                                     f"at iteration {len(history)}")
        for i in range(k + 1):  # modified Gram-Schmidt
            hess[i, k] = np.vdot(basis[i], w)
            w = w - hess[i, k] * basis[i]
        hess[k + 1, k] = np.linalg.norm(w)
        happy = hess[k + 1, k].real <= 1e-14 * beta
        if not happy:
            basis.append(w / hess[k + 1, k])
        for i in range(k):  # apply stored rotations
            t = cs[i] * hess[i, k] + sn[i] * hess[i + 1, k]
            hess[i + 1, k] = -np.conj(sn[i]) * hess[i, k] + np.conj(cs[i]) * hess[i + 1, k]
            hess[i, k] = t
        denom = np.sqrt(abs(hess[k, k]) ** 2 + abs(hess[k + 1, k]) ** 2)
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k] = np.conj(hess[k, k]) / denom
            sn[k] = np.conj(hess[k + 1, k]) / denom
        hess[k, k] = cs[k] * hess[k, k] + sn[k] * hess[k + 1, k]
        hess[k + 1, k] = 0.0
        g[k + 1] = -np.conj(sn[k]) * g[k]
        g[k] = cs[k] * g[k]
        history.append(abs(g[k + 1]) / bnorm)
        if history[-1] <= tol or happy:
            converged = True
            k += 1
            break
    else:
        k += 1

    if k == 0:
        return np.zeros(n, dtype=complex), converged
    y = np.linalg.solve(hess[:k, :k], g[:k])
    update = np.zeros(n, dtype=complex)
    for i in range(k):
        update += y[i] * basis[i]
    return update, converged


def gmres(apply_a, apply_m, f, config: GmresConfig | None = None):
    """Solve A u = f with right preconditioning: GMRES on A M v = f, u = M v.

    ``apply_a`` and ``apply_m`` act on flat complex vectors (``apply_m`` may
    be None for the unpreconditioned solve).  Stops on the true relative
    residual ||f - A u|| / ||f||.
    """
    if config is None:
        config = GmresConfig()
    f = np.asarray(f, dtype=complex).ravel()
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("right-hand side contains non-finite values")
    if apply_m is None:
        apply_m = lambda v: v
    t0 = time.perf_counter()
    bnorm = np.linalg.norm(f)
    if bnorm == 0.0:
        return np.zeros_like(f), SolveReport(0, np.array([0.0]), True,
                                             time.perf_counter() - t0)

    def op(vec):
        return np.asarray(apply_a(apply_m(vec)), dtype=complex).ravel()

    history = [1.0]
    u = np.zeros_like(f)
    res = f.copy()
    converged = False
    while len(history) - 1 < config.max_iter and not converged:
        steps = config.max_iter - (len(history) - 1)
        if config.restart is not None:
            steps = min(steps, config.restart)
        dv, converged = _gmres_cycle(op, res, bnorm, config.tol, steps, history)
        u = u + np.asarray(apply_m(dv), dtype=complex).ravel()
        res = f - np.asarray(apply_a(u), dtype=complex).ravel()
        if config.restart is None:
            break
        converged = np.linalg.norm(res) / bnorm <= config.tol

    report = SolveReport(len(history) - 1, np.asarray(history),
                         bool(history[-1] <= config.tol),
                         time.perf_counter() - t0)
    return u, report
