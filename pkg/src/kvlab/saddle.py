"""Linear saddle-point solves ``(a I - b Lap + K) w + grad p = rhs``, ``div w = 0``.

``K`` is an optional extra sparse operator (frozen convection, shifts); it is
zero for the plain Stokes-type problems. Two solvers are provided:

* ``schur_cg``: eliminate the velocity with a sparse LU of the momentum block and
  iterate on the pressure Schur complement. Conjugate gradients when the
  momentum block is symmetric, GMRES otherwise. The preconditioner is the
  Cahouet-Chabard combination ``b I + a (div grad)^{-1}``.
* ``direct_sparse``: LU of the bordered KKT matrix (pressure mean fixed by a
  Lagrange multiplier row).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import GridSpec, PressureField, VelocityField, operators


class NonConvergence(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_iter: int = 500
    method: str = "schur_cg"

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must be in (0, 1), got {self.tol}")
        if self.method not in ("schur_cg", "direct_sparse"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True, eq=False)
class SaddleProblem:
    mass_coef: float
    stiffness_coef: float
    rhs: VelocityField
    extra: sp.spmatrix | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mass_coef < 0 or self.stiffness_coef < 0:
            raise ValueError("saddle coefficients must be non-negative")
        if not self.mass_coef + self.stiffness_coef > 0:
            raise ValueError("mass_coef + stiffness_coef must be positive")

    @property
    def grid(self) -> GridSpec:
        return self.rhs.grid


def momentum_matrix(grid: GridSpec, a: float, b: float, extra=None) -> sp.csc_matrix:
    ops = operators(grid)
    m = a * sp.identity(grid.n_vel, format="csr") - b * ops.lap
    if extra is not None:
        m = m + extra
    return m.tocsc()


def kkt_matrix(grid: GridSpec, a: float, b: float, extra=None) -> sp.csc_matrix:
    ops = operators(grid)
    A = momentum_matrix(grid, a, b, extra)
    ones = sp.csr_matrix(np.ones((1, grid.n_p)))
    return sp.bmat(
        [[A, ops.grad, None], [ops.div, None, ones.T], [None, ones, None]],
        format="csc",
    )


class KKTSolver:
    """Factorized direct solver for a fixed saddle operator, reusable across rhs."""

    def __init__(self, grid: GridSpec, a: float, b: float, extra=None):
        self.grid = grid
        self.lu = spla.splu(kkt_matrix(grid, a, b, extra))

    def solve_vectors(self, rhs_vec, rhs_div=None):
        g = self.grid
        full = np.zeros(g.n_vel + g.n_p + 1)
        full[: g.n_vel] = rhs_vec
        if rhs_div is not None:
            full[g.n_vel: g.n_vel + g.n_p] = rhs_div
        sol = self.lu.solve(full)
        return sol[: g.n_vel], sol[g.n_vel: g.n_vel + g.n_p]


def _report(grid, A, w, p, r, iterations, method):
    ops = operators(grid)
    scale = max(np.linalg.norm(r), np.finfo(float).tiny)
    mom = np.linalg.norm(A @ w + ops.grad @ p - r)
    dv = np.linalg.norm(ops.div @ w)
    return {
        "method": method,
        "iterations": int(iterations),
        "momentum_residual": float(mom / scale),
        "divergence_residual": float(dv / scale),
    }


def _schur(grid, A, r, settings, symmetric, a, b):
    ops = operators(grid)
    lu = spla.splu(A)
    D, G = ops.div, ops.grad
    npress = grid.n_p

    def mean_free(q):
        return q - q.mean()

    def schur(q):
        # S q = D A^{-1} D^T q, positive semidefinite with constants in the kernel
        return mean_free(D @ lu.solve(-(G @ mean_free(q))))

    def precond(q):
        q = mean_free(q)
        out = b * q
        if a > 0:
            rhs = q.copy()
            rhs[0] = 0.0
            out = out + a * mean_free(ops.poisson_lu.solve(-rhs))
        return mean_free(out)

    # D A^{-1}(r - G p) = 0  =>  S p = -D A^{-1} r
    g = -mean_free(D @ lu.solve(r))
    gnorm = np.linalg.norm(g)
    iters = 0
    if gnorm == 0.0:
        p = np.zeros(npress)
    else:
        S = spla.LinearOperator((npress, npress), matvec=schur, dtype=float)
        M = spla.LinearOperator((npress, npress), matvec=precond, dtype=float)
        # the Schur residual is measured against the momentum rhs scale
        atol = settings.tol * 1e-2 * max(np.linalg.norm(D @ lu.solve(r)), gnorm)

        def count(_):
            nonlocal iters
            iters += 1

        if symmetric:
            p, info = spla.cg(S, g, rtol=0.0, atol=atol, maxiter=settings.max_iter, M=M, callback=count)
        else:
            p, info = spla.gmres(S, g, rtol=0.0, atol=atol, restart=60, maxiter=settings.max_iter, M=M,
                                 callback=count, callback_type="pr_norm")
        p = mean_free(p)
        if info != 0:
            res = np.linalg.norm(schur(p) - g) / gnorm
            raise NonConvergence(f"Schur iteration stopped after {iters} iterations", res)
    w = lu.solve(r - G @ p)
    return w, p, iters


def solve_saddle(prob: SaddleProblem, settings: SolverSettings = SolverSettings()):
    """Solve the saddle problem; returns ``(velocity, pressure, residual_report)``.

    Raises :class:`NonConvergence` when the requested tolerance is not reached.
    """
    grid = prob.grid
    a, b = float(prob.mass_coef), float(prob.stiffness_coef)
    r = prob.rhs.to_vector()
    A = momentum_matrix(grid, a, b, prob.extra)
    if not np.any(r):
        w, p, iters = np.zeros(grid.n_vel), np.zeros(grid.n_p), 0
    elif settings.method == "direct_sparse":
        w, p = KKTSolver(grid, a, b, prob.extra).solve_vectors(r)
        iters = 1
    else:
        symmetric = prob.extra is None or abs(prob.extra - prob.extra.T).max() == 0
        w, p, iters = _schur(grid, A, r, settings, symmetric, a, b)
    p = p - p.mean()
    report = _report(grid, A, w, p, r, iters, settings.method)
    worst = max(report["momentum_residual"], report["divergence_residual"])
    if worst > settings.tol:
        raise NonConvergence(
            f"saddle residual {worst:.3e} above tolerance {settings.tol:.1e}", worst
        )
    return VelocityField.from_vector(grid, w), PressureField.from_vector(grid, p), report


def inf_sup_spectrum(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of the squared discrete inf-sup constant of the divergence on mean-zero pressures.

    ``c^2`` is the smallest non-zero eigenvalue of ``D (-Lap)^{-1} D^T``; the
    ``h^2`` quadrature weights cancel in the ratio.
    """
    if grid.n > 32:
        raise ValueError("inf_sup_estimate uses dense linear algebra; grid must be <= 32x32")
    ops = operators(grid)
    DT = ops.div.T.toarray()
    X = ops.lap_lu.solve(DT)
    S = ops.div @ X
    S = 0.5 * (S + S.T)
    ev = sla.eigh(S, eigvals_only=True)
    return np.sort(ev)


def inf_sup_estimate(grid: GridSpec) -> float:
    return float(np.sqrt(inf_sup_spectrum(grid)[1]))
