"""Spectral constants consumed by the decay analysis.

* ``lambda1``: smallest eigenvalue of the discrete Dirichlet Laplacian.
* ``lambda0``: smallest eigenvalue of ``-nu Lap + sym(grad u_inf)`` on divergence-free fields.
* ``gamma1``: smallest eigenvalue of the pencil ``(-nu Lap + sym(grad u_inf), -Lap)`` on the same space.
* ``alpha_max``: the admissible-rate bound built from the three.
* ``n_estimate``: sampled trilinear constant (metadata only).

The constrained eigenproblems never build a divergence-free basis: every
linear solve inside the eigen-iterations is a saddle-point solve, so each
iterate is discretely divergence-free by construction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import GridSpec, VelocityField, leray_vector, operators, reaction_matrix
from .saddle import KKTSolver


class EigenNonConvergence(RuntimeError):
    pass


class Gamma1NotPositive(ValueError):
    pass


def lambda1_closed_form(grid: GridSpec) -> float:
    """Exact smallest eigenvalue of the 5-point Dirichlet Laplacian on the square."""
    return 8.0 / grid.h**2 * math.sin(math.pi * grid.h / 2) ** 2


def dirichlet_lambda1(grid: GridSpec, tol: float = 1e-10, max_iter: int = 500, seed: int = 0) -> float:
    """Inverse power iteration on ``-Lap``; stops when the relative eigen-residual is below ``tol``."""
    ops = operators(grid)
    A = -ops.lap
    x = np.random.default_rng(seed).random(grid.n_vel) + 0.5
    x /= np.linalg.norm(x)
    for _ in range(max_iter):
        y = ops.lap_lu.solve(x)
        x = y / np.linalg.norm(y)
        ax = A @ x
        rho = float(x @ ax)
        if np.linalg.norm(ax - rho * x) <= tol * rho:
            return rho
    raise EigenNonConvergence(f"lambda1 iteration did not converge in {max_iter} steps")


def symmetric_deformation(u_inf: VelocityField) -> sp.csr_matrix:
    """Matrix of ``z -> sym(grad u_inf) z`` in the flat face ordering (symmetric)."""
    r = reaction_matrix(u_inf)
    return (0.5 * (r + r.T)).tocsr()


def a1_operator(u_inf: VelocityField, nu: float) -> sp.csr_matrix:
    ops = operators(u_inf.grid)
    return (-nu * ops.lap + symmetric_deformation(u_inf)).tocsr()


def _constrained_min_eig(grid, K, Mmat, sigma, tol, max_iter, block=4, seed=0):
    """Smallest eigenpair of ``K z = theta M z`` on ``ker(div)``.

    Block inverse iteration with shift ``sigma`` (below the spectrum at the
    start) plus Rayleigh-Ritz; the shift is moved towards the lowest Ritz
    value once it has settled.
    """
    rng = np.random.default_rng(seed)
    X = np.column_stack([leray_vector(grid, rng.standard_normal(grid.n_vel)) for _ in range(block)])
    solver = KKTSolver(grid, 0.0, 0.0, (K - sigma * Mmat).tocsr())
    theta_old = np.inf
    shifted = False
    for it in range(1, max_iter + 1):
        Y = np.column_stack([solver.solve_vectors(Mmat @ X[:, k])[0] for k in range(block)])
        Q, _ = np.linalg.qr(Y)
        Kr = Q.T @ (K @ Q)
        Mr = Q.T @ (Mmat @ Q)
        theta, C = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
        X = Q @ C
        z = X[:, 0]
        r = leray_vector(grid, K @ z - theta[0] * (Mmat @ z))
        scale = np.linalg.norm(leray_vector(grid, K @ z)) + abs(theta[0]) * np.linalg.norm(leray_vector(grid, Mmat @ z))
        res = np.linalg.norm(r) / scale if scale > 0 else 0.0
        if res <= tol:
            return float(theta[0]), z, res, it
        gap = theta[1] - theta[0]
        settled = abs(theta[0] - theta_old) <= 1e-3 * max(gap, 1e-300)
        if not shifted and settled and gap > 1e-8 * max(abs(theta[0]), 1.0):
            sigma = theta[0] - 0.25 * gap
            solver = KKTSolver(grid, 0.0, 0.0, (K - sigma * Mmat).tocsr())
            shifted = True
        theta_old = theta[0]
    raise EigenNonConvergence(f"constrained eigen-iteration stalled at residual {res:.2e}")


def _normalize(grid, z):
    z = z / (grid.h * np.linalg.norm(z))
    # fix the sign so results are reproducible
    k = int(np.argmax(np.abs(z)))
    return z if z[k] >= 0 else -z


def a1_eigenvalue(u_inf: VelocityField, nu: float, tol: float = 1e-10, max_iter: int = 300):
    """Minimal eigenvalue of ``-nu Lap z + sym(grad u_inf) z + grad q = lambda z``.

    Returns ``(lambda0, eigenfield)`` with the eigenfield normalized to unit L2
    norm. A negative value is a legitimate answer (the stability hypothesis fails).
    """
    grid = u_inf.grid
    ops = operators(grid)
    B = symmetric_deformation(u_inf)
    K = (-nu * ops.lap + B).tocsr()
    Mmat = sp.identity(grid.n_vel, format="csr")
    bnorm = float(abs(B).sum(axis=1).max()) if B.nnz else 0.0
    # Gershgorin-type lower bound for the spectrum on the constrained space
    sigma = nu * dirichlet_lambda1(grid) - bnorm - 1.0
    lam, z, _, _ = _constrained_min_eig(grid, K, Mmat, sigma, tol, max_iter)
    z = _normalize(grid, z)
    return lam, VelocityField.from_vector(grid, z)


def gamma1_constant(u_inf: VelocityField, nu: float, tol: float = 1e-10, max_iter: int = 300, return_field=False):
    """``inf (nu |grad z|^2 + b(z, u_inf, z)) / |grad z|^2`` over divergence-free ``z``.

    Written as ``nu + mu`` where ``mu`` is the lowest eigenvalue of the bounded
    pencil ``(sym(grad u_inf), -Lap)``. Its spectrum accumulates at zero, so
    Lanczos (ARPACK, with constrained Stokes solves as the mass inverse) is
    used instead of inverse iteration.
    """
    grid = u_inf.grid
    ops = operators(grid)
    B = symmetric_deformation(u_inf)
    A = (-ops.lap).tocsr()
    rng = np.random.default_rng(0)
    v0 = leray_vector(grid, rng.standard_normal(grid.n_vel))
    if B.nnz == 0 or not np.any(B.data):
        # the quotient is identically nu
        g, z = float(nu), v0
    else:
        stokes = KKTSolver(grid, 0.0, 1.0, None)
        N = grid.n_vel
        Bop = spla.LinearOperator((N, N), matvec=lambda x: B @ x, dtype=float)
        Aop = spla.LinearOperator((N, N), matvec=lambda x: A @ x, dtype=float)
        Minv = spla.LinearOperator((N, N), matvec=lambda x: stokes.solve_vectors(x)[0], dtype=float)
        try:
            w, V = spla.eigsh(Bop, k=1, M=Aop, Minv=Minv, which="SA", v0=v0, tol=tol * 1e-3, maxiter=max_iter * 10)
        except spla.ArpackNoConvergence as exc:
            raise EigenNonConvergence(f"gamma1 Lanczos iteration failed: {exc}") from exc
        z = leray_vector(grid, V[:, 0])
        mu = float(z @ (B @ z)) / float(z @ (A @ z))
        r = leray_vector(grid, B @ z - mu * (A @ z))
        scale = nu * np.linalg.norm(leray_vector(grid, A @ z))
        if np.linalg.norm(r) > tol * scale:
            raise EigenNonConvergence(f"gamma1 eigen-residual {np.linalg.norm(r) / scale:.2e} above {tol:.1e}")
        g = float(nu) + mu
    z = _normalize(grid, z)
    if return_field:
        return g, VelocityField.from_vector(grid, z)
    return g


def dense_divfree_basis(grid: GridSpec) -> np.ndarray:
    """Orthonormal basis of the discrete divergence-free subspace (dense; oracle use only)."""
    if grid.n > 24:
        raise ValueError("dense basis is meant for oracle grids up to 24x24")
    return sla.null_space(operators(grid).div.toarray())


def dense_constrained_eigs(grid: GridSpec, K, Mmat=None) -> np.ndarray:
    Q = dense_divfree_basis(grid)
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
    Kr = Q.T @ Kd @ Q
    if Mmat is None:
        return sla.eigh(0.5 * (Kr + Kr.T), eigvals_only=True)
    Md = Mmat.toarray() if sp.issparse(Mmat) else np.asarray(Mmat)
    Mr = Q.T @ Md @ Q
    return sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T), eigvals_only=True)


def alpha_bound_value(lambda1: float, nu: float, gamma1: float, kappa: float) -> float:
    if not gamma1 > 0:
        raise Gamma1NotPositive(f"gamma1 = {gamma1:.6g} is not positive")
    return lambda1 / (4.0 * (1.0 + lambda1 * kappa)) * min(nu, gamma1)


@dataclass(frozen=True)
class SpectralConstants:
    lambda1: float
    lambda0: float
    gamma1: float
    alpha_max: float
    n_estimate: float
    nu: float
    kappa: float

    @property
    def a1_satisfied(self) -> bool:
        return self.lambda0 > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a1_satisfied"] = self.a1_satisfied
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralConstants":
        return cls(**{k: float(d[k]) for k in ("lambda1", "lambda0", "gamma1", "alpha_max", "n_estimate", "nu", "kappa")})


def alpha_bound(c: SpectralConstants, kappa: float) -> float:
    """Strict upper bound for admissible decay rates at retardation ``kappa``."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return alpha_bound_value(c.lambda1, c.nu, c.gamma1, kappa)


def t_bar(delta: float, kappa: float, c: SpectralConstants) -> float | None:
    """Switching time of the weight ``tau(t) = max(t_bar, t)``; ``None`` means ``tau == 1`` (delta = 0)."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0:
        return None
    if not c.gamma1 > 0:
        raise Gamma1NotPositive(f"gamma1 = {c.gamma1:.6g} is not positive")
    return 4.0 * delta * (1.0 + kappa * c.lambda1) / c.lambda1 * max(1.0 / c.nu, 1.0 / c.gamma1)


def _sine_basis(grid: GridSpec, kmax: int):
    """Face samples of ``sin(k pi x) sin(l pi y)`` for ``1 <= k, l <= kmax``: (u-basis, v-basis)."""
    xu, yu = grid.u_coords()
    xv, yv = grid.v_coords()
    xu, yu = xu[1:-1, :].ravel(), yu[1:-1, :].ravel()
    xv, yv = xv[:, 1:-1].ravel(), yv[:, 1:-1].ravel()
    ks = [(k, l) for k in range(1, kmax + 1) for l in range(1, kmax + 1)]
    bu = np.column_stack([np.sin(k * np.pi * xu) * np.sin(l * np.pi * yu) for k, l in ks])
    bv = np.column_stack([np.sin(k * np.pi * xv) * np.sin(l * np.pi * yv) for k, l in ks])
    return bu, bv


def estimate_trilinear_N(grid: GridSpec, samples: int = 2000, seed: int = 0, kmax: int = 3, chunk: int = 500) -> float:
    """Sampled ``max |b(u, v, w)| / (|grad u| |grad v| |grad w|)`` over smooth random fields."""
    if samples < 1:
        raise ValueError("samples must be positive")
    ops = operators(grid)
    bu, bv = _sine_basis(grid, kmax)
    nb = bu.shape[1]
    rng = np.random.default_rng(seed)
    A = -ops.lap
    h = grid.h
    best = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        fields = []
        for _ in range(3):
            cu = rng.standard_normal((nb, m))
            cv = rng.standard_normal((nb, m))
            fields.append(np.vstack([bu @ cu, bv @ cv]))
        U, V, W = fields
        # b(u, v, w) = h^2/2 (w.C(u)v - v.C(u)w) with C(u) = sum diag(P u) D
        val = np.zeros(m)
        for P, D in ops.conv_terms:
            pu = P @ U
            val += np.sum(pu * (W * (D @ V) - V * (D @ W)), axis=0)
        val *= 0.5 * h**2
        g = [h * np.sqrt(np.sum(F * (A @ F), axis=0)) for F in fields]
        best = max(best, float(np.max(np.abs(val) / (g[0] * g[1] * g[2]))))
        done += m
    return best


def compute_constants(u_inf: VelocityField, nu: float, kappa: float, n_samples: int = 2000, seed: int = 0) -> SpectralConstants:
    grid = u_inf.grid
    lam1 = dirichlet_lambda1(grid)
    lam0, _ = a1_eigenvalue(u_inf, nu)
    g1 = gamma1_constant(u_inf, nu)
    amax = alpha_bound_value(lam1, nu, g1, kappa) if g1 > 0 else 0.0
    nest = estimate_trilinear_N(grid, n_samples, seed)
    return SpectralConstants(lam1, lam0, g1, amax, nest, float(nu), float(kappa))
