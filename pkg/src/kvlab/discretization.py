"""MAC (staggered) discretization of vector and scalar fields on the unit square.

Layout for a grid with ``n`` cells per direction and mesh width ``h = 1/n``:

* ``u`` (x-velocity) lives on vertical faces, array shape ``(n+1, n)``;
  ``u[i, j]`` sits at ``(i*h, (j+1/2)*h)``. Faces ``i = 0`` and ``i = n`` are
  on the wall and always zero.
* ``v`` (y-velocity) lives on horizontal faces, array shape ``(n, n+1)``;
  ``v[i, j]`` sits at ``((i+1/2)*h, j*h)``. Faces ``j = 0`` and ``j = n`` are
  zero.
* pressures live at cell centres, array shape ``(n, n)``.

All discrete operators act on the flat vector of interior face values
(``u[1:n, :]`` then ``v[:, 1:n]``, both C-ordered). Every inner product is the
midpoint rule on the native control volumes, which for a uniform grid is
``h**2`` times the Euclidean dot product. Because the weight is uniform, the
Euclidean transpose of a matrix is also its adjoint in the discrete L2 inner
product, and the Leray projection is an orthogonal projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int | None = None

    def __post_init__(self):
        ny = self.nx if self.ny is None else self.ny
        object.__setattr__(self, "ny", ny)
        if self.nx != ny:
            raise ValueError(f"only square grids are supported (nx={self.nx}, ny={ny})")
        if self.nx < 8:
            raise ValueError(f"grid needs at least 8 cells per direction, got {self.nx}")
        if (1.0 / self.nx) * self.nx != 1.0:
            raise ValueError(f"h*nx != 1 in floating point for nx={self.nx}")

    @property
    def n(self) -> int:
        return self.nx

    @property
    def h(self) -> float:
        return 1.0 / self.nx

    @property
    def n_u(self) -> int:
        """Number of interior x-velocity unknowns."""
        return (self.nx - 1) * self.nx

    @property
    def n_vel(self) -> int:
        return 2 * self.n_u

    @property
    def n_p(self) -> int:
        return self.nx * self.nx

    def u_coords(self):
        n, h = self.n, self.h
        x = np.arange(n + 1) * h
        y = (np.arange(n) + 0.5) * h
        return np.meshgrid(x, y, indexing="ij")

    def v_coords(self):
        n, h = self.n, self.h
        x = (np.arange(n) + 0.5) * h
        y = np.arange(n + 1) * h
        return np.meshgrid(x, y, indexing="ij")

    def cell_coords(self):
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    def node_coords(self):
        x = np.arange(self.n + 1) * self.h
        return np.meshgrid(x, x, indexing="ij")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Staggered velocity with homogeneous Dirichlet walls."""

    u: np.ndarray
    v: np.ndarray
    grid: GridSpec = field(repr=False)

    def __post_init__(self):
        n = self.grid.n
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.shape != (n + 1, n) or v.shape != (n, n + 1):
            raise ValueError(f"bad face array shapes {u.shape}, {v.shape} for n={n}")
        u[0, :] = 0.0
        u[n, :] = 0.0
        v[:, 0] = 0.0
        v[:, n] = 0.0
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "v", _frozen(v))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VelocityField":
        n = grid.n
        return cls(np.zeros((n + 1, n)), np.zeros((n, n + 1)), grid)

    @classmethod
    def from_vector(cls, grid: GridSpec, x) -> "VelocityField":
        n = grid.n
        x = np.asarray(x, dtype=float)
        if x.shape != (grid.n_vel,):
            raise ValueError(f"expected vector of length {grid.n_vel}, got {x.shape}")
        u = np.zeros((n + 1, n))
        v = np.zeros((n, n + 1))
        u[1:n, :] = x[: grid.n_u].reshape(n - 1, n)
        v[:, 1:n] = x[grid.n_u:].reshape(n, n - 1)
        return cls(u, v, grid)

    @classmethod
    def from_functions(cls, grid: GridSpec, fu, fv) -> "VelocityField":
        """Sample ``fu(x, y)`` on u-faces and ``fv(x, y)`` on v-faces."""
        xu, yu = grid.u_coords()
        xv, yv = grid.v_coords()
        return cls(np.broadcast_to(fu(xu, yu), xu.shape), np.broadcast_to(fv(xv, yv), xv.shape), grid)

    @classmethod
    def from_stream_function(cls, grid: GridSpec, psi) -> "VelocityField":
        """Discrete curl of a node-based stream function: exactly divergence-free.

        ``psi`` is either a callable ``psi(x, y)`` or an ``(n+1, n+1)`` array of
        node values. Only the interior nodes matter; wall nodes are taken as 0.
        """
        h = grid.h
        if callable(psi):
            xn, yn = grid.node_coords()
            s = np.array(psi(xn, yn), dtype=float)
        else:
            s = np.array(psi, dtype=float)
        s[0, :] = s[-1, :] = s[:, 0] = s[:, -1] = 0.0
        u = (s[:, 1:] - s[:, :-1]) / h
        v = -(s[1:, :] - s[:-1, :]) / h
        return cls(u, v, grid)

    def to_vector(self) -> np.ndarray:
        n = self.grid.n
        return np.concatenate([self.u[1:n, :].ravel(), self.v[:, 1:n].ravel()])

    def _check(self, other):
        if not isinstance(other, VelocityField):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")
        return other

    def __add__(self, other):
        self._check(other)
        return VelocityField(self.u + other.u, self.v + other.v, self.grid)

    def __sub__(self, other):
        self._check(other)
        return VelocityField(self.u - other.u, self.v - other.v, self.grid)

    def __mul__(self, c):
        return VelocityField(self.u * float(c), self.v * float(c), self.grid)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class PressureField:
    p: np.ndarray
    grid: GridSpec = field(repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"bad pressure shape {p.shape}")
        object.__setattr__(self, "p", _frozen(p))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "PressureField":
        return cls(np.zeros((grid.n, grid.n)), grid)

    @classmethod
    def from_vector(cls, grid: GridSpec, x) -> "PressureField":
        return cls(np.asarray(x, dtype=float).reshape(grid.n, grid.n), grid)

    @classmethod
    def from_function(cls, grid: GridSpec, f) -> "PressureField":
        x, y = grid.cell_coords()
        return cls(np.broadcast_to(f(x, y), x.shape), grid)

    def to_vector(self) -> np.ndarray:
        return self.p.ravel().copy()

    def mean_zero(self) -> "PressureField":
        return PressureField(self.p - self.p.mean(), self.grid)

    def _check(self, other):
        if other.grid != self.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check(other)
        return PressureField(self.p + other.p, self.grid)

    def __sub__(self, other):
        self._check(other)
        return PressureField(self.p - other.p, self.grid)

    def __mul__(self, c):
        return PressureField(self.p * float(c), self.grid)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FlowParameters:
    nu: float
    kappa: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")


# ---------------------------------------------------------------------------
# sparse operator assembly


def _tri(m, lo, d, up):
    return sp.diags([np.full(m - 1, lo), np.full(m, d), np.full(m - 1, up)], [-1, 0, 1], format="csr")


class Operators(NamedTuple):
    lap: sp.csr_matrix          # vector Laplacian on interior faces (negative definite)
    div: sp.csr_matrix          # n^2 x n_vel
    grad: sp.csr_matrix         # n_vel x n^2, equals -div.T
    conv_terms: tuple           # ((P_t, D_t), ...) with C(v) = sum diag(P_t v) D_t
    lap_lu: object              # factorization of -lap
    poisson_lu: object          # factorization of pinned -div @ grad... see _leray
    face_to_cell: sp.csr_matrix  # averages faces to cell centres, (2 n^2) x n_vel


@lru_cache(maxsize=16)
def operators(grid: GridSpec) -> Operators:
    n, h = grid.n, grid.h
    I_n = sp.identity(n, format="csr")
    I_m = sp.identity(n - 1, format="csr")

    # second differences: vertex-type (Dirichlet values on the wall) and
    # cell-type (wall halfway between unknown and its reflected ghost)
    t_vert = _tri(n - 1, 1.0, -2.0, 1.0) / h**2
    t_cell = (_tri(n, 1.0, -2.0, 1.0) + sp.diags([np.r_[-1.0, np.zeros(n - 2), -1.0]], [0])) / h**2
    lap_u = sp.kron(t_vert, I_n) + sp.kron(I_m, t_cell)
    lap_v = sp.kron(t_cell, I_m) + sp.kron(I_n, t_vert)
    lap = sp.block_diag([lap_u, lap_v], format="csr")

    # one-sided difference from interior vertices to cells
    d1 = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [0, -1], shape=(n, n - 1), format="csr") / h
    div = sp.hstack([sp.kron(d1, I_n), sp.kron(I_n, d1)], format="csr")
    grad = (-div.T).tocsr()

    # centred first differences
    c_vert = _tri(n - 1, -1.0, 0.0, 1.0) / (2 * h)
    c_cell = (_tri(n, -1.0, 0.0, 1.0) + sp.diags([np.r_[1.0, np.zeros(n - 2), -1.0]], [0])) / (2 * h)
    dx_u = sp.kron(c_vert, I_n)
    dy_u = sp.kron(I_m, c_cell)
    dx_v = sp.kron(c_cell, I_m)
    dy_v = sp.kron(I_n, c_vert)

    # two-point averages: cells -> interior vertices and interior vertices -> cells
    m_cv = sp.diags([np.full(n - 1, 0.5), np.full(n - 1, 0.5)], [0, 1], shape=(n - 1, n), format="csr")
    m_vc = m_cv.T.tocsr()
    p_uv = sp.kron(m_cv, m_vc)  # v interior -> u faces
    p_vu = sp.kron(m_vc, m_cv)  # u interior -> v faces

    nu_ = grid.n_u
    Zuu = sp.csr_matrix((nu_, nu_))

    def blk(a, b, c, d):
        return sp.bmat([[a, b], [c, d]], format="csr")

    I_u = sp.identity(nu_, format="csr")
    terms = (
        (blk(I_u, Zuu, Zuu, Zuu), blk(dx_u, Zuu, Zuu, Zuu)),
        (blk(Zuu, p_uv, Zuu, Zuu), blk(dy_u, Zuu, Zuu, Zuu)),
        (blk(Zuu, Zuu, p_vu, Zuu), blk(Zuu, Zuu, Zuu, dx_v)),
        (blk(Zuu, Zuu, Zuu, I_u), blk(Zuu, Zuu, Zuu, dy_v)),
    )

    lap_lu = spla.splu((-lap).tocsc())
    poisson = (div @ grad).tolil()
    # pin cell 0; compatible right-hand sides make the pinned solve exact
    poisson[0, :] = 0.0
    poisson[0, 0] = 1.0
    poisson_lu = spla.splu(poisson.tocsc())

    # face -> cell centre averaging including the (zero) wall faces
    a_fc = sp.diags([np.full(n, 0.5), np.full(n - 1, 0.5)], [0, -1], shape=(n, n - 1), format="csr")
    face_to_cell = sp.block_diag([sp.kron(a_fc, I_n), sp.kron(I_n, a_fc)], format="csr")

    return Operators(lap, div, grad, terms, lap_lu, poisson_lu, face_to_cell)


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grids differ: {g} vs {f.grid}")
    return g


# ---------------------------------------------------------------------------
# field operators


def inner(f, g) -> float:
    """Midpoint-rule L2 inner product of two velocity or two pressure fields."""
    grid = _same_grid(f, g)
    return grid.h**2 * float(f.to_vector() @ g.to_vector())


def laplacian(f: VelocityField) -> VelocityField:
    ops = operators(f.grid)
    return VelocityField.from_vector(f.grid, ops.lap @ f.to_vector())


def divergence(f: VelocityField) -> PressureField:
    ops = operators(f.grid)
    return PressureField.from_vector(f.grid, ops.div @ f.to_vector())


def gradient(p: PressureField) -> VelocityField:
    ops = operators(p.grid)
    return VelocityField.from_vector(p.grid, ops.grad @ p.to_vector())


def convection_matrix(v: VelocityField) -> sp.csr_matrix:
    """Skew-symmetric matrix S(v) with ``b(v, w, phi) = h^2 phi . S(v) w``."""
    return _conv_matrix_vec(v.grid, v.to_vector())


def _conv_matrix_vec(grid: GridSpec, x) -> sp.csr_matrix:
    ops = operators(grid)
    c = sum(sp.diags(P @ x) @ D for P, D in ops.conv_terms)
    return (0.5 * (c - c.T)).tocsr()


def reaction_matrix(w) -> sp.csr_matrix:
    """Matrix R(w) with ``S(z) w = R(w) z``, so ``b(z, w, phi) = h^2 phi . R(w) z``."""
    grid = w.grid
    ops = operators(grid)
    y = w.to_vector()
    r = None
    for P, D in ops.conv_terms:
        term = sp.diags(D @ y) @ P - D.T @ sp.diags(y) @ P
        r = term if r is None else r + term
    return (0.5 * r).tocsr()


def linearized_convection(grid: GridSpec, frozen, u_inf=None) -> sp.csr_matrix:
    """Matrix of ``w -> b(frozen, w, .) + b(u_inf, w, .) + b(w, u_inf, .)``."""
    m = _conv_matrix_vec(grid, frozen.to_vector()) if frozen is not None else sp.csr_matrix((grid.n_vel, grid.n_vel))
    if u_inf is not None:
        m = m + _conv_matrix_vec(grid, u_inf.to_vector()) + reaction_matrix(u_inf)
    return m.tocsr()


def trilinear_b(vf: VelocityField, wf: VelocityField, phif: VelocityField) -> float:
    """Skew-symmetrized convection form ``(v.grad w, phi)/2 - (v.grad phi, w)/2``."""
    grid = _same_grid(vf, wf, phif)
    s = _conv_matrix_vec(grid, vf.to_vector())
    return grid.h**2 * float(phif.to_vector() @ (s @ wf.to_vector()))


def convection_operator(vf: VelocityField, wf: VelocityField) -> VelocityField:
    grid = _same_grid(vf, wf)
    s = _conv_matrix_vec(grid, vf.to_vector())
    return VelocityField.from_vector(grid, s @ wf.to_vector())


def _leray(grid: GridSpec, x):
    ops = operators(grid)
    rhs = ops.div @ x
    rhs[0] = 0.0
    phi = ops.poisson_lu.solve(rhs)
    phi -= phi.mean()
    return x - ops.grad @ phi, phi


def project(f: VelocityField) -> tuple[VelocityField, PressureField]:
    """Leray projection: ``f = P f + grad(phi)`` with ``div(P f) = 0``."""
    y, phi = _leray(f.grid, f.to_vector())
    return VelocityField.from_vector(f.grid, y), PressureField.from_vector(f.grid, phi)


def leray_vector(grid: GridSpec, x) -> np.ndarray:
    return _leray(grid, np.asarray(x, dtype=float))[0]


def stokes_apply(f: VelocityField) -> VelocityField:
    """``-P Laplacian f``; the minus sign makes the result a positive operator."""
    ops = operators(f.grid)
    y, _ = _leray(f.grid, -(ops.lap @ f.to_vector()))
    return VelocityField.from_vector(f.grid, y)


def stokes_norm(f: VelocityField) -> float:
    """``||P Laplacian f||`` (the discrete norm of the Stokes operator image)."""
    return norms(stokes_apply(f))["l2"]


def norms(f) -> dict:
    grid = f.grid
    h = grid.h
    ops = operators(grid)
    x = f.to_vector()
    if isinstance(f, VelocityField):
        h1 = h * np.sqrt(max(float(x @ -(ops.lap @ x)), 0.0))
    else:
        h1 = h * float(np.linalg.norm(ops.grad @ x))
    return {
        "l2": h * float(np.linalg.norm(x)),
        "h1_semi": h1,
        "max": float(np.max(np.abs(x))) if x.size else 0.0,
    }


def cell_speed(f: VelocityField) -> np.ndarray:
    """Velocity magnitude at cell centres (face averages)."""
    ops = operators(f.grid)
    c = ops.face_to_cell @ f.to_vector()
    m = f.grid.n_p
    return np.sqrt(c[:m] ** 2 + c[m:] ** 2)


def lp_norm(f: VelocityField, p: float) -> float:
    s = cell_speed(f)
    if np.isinf(p):
        return float(s.max())
    return float((f.grid.h**2 * np.sum(s**p)) ** (1.0 / p))


def h_minus1_norm(f: VelocityField) -> float:
    """Dual norm ``<f, (-Laplacian)^{-1} f>^{1/2}`` with the Dirichlet Laplacian."""
    ops = operators(f.grid)
    x = f.to_vector()
    y = ops.lap_lu.solve(x)
    val = f.grid.h**2 * float(x @ y)
    if not np.isfinite(val):
        raise ArithmeticError("H^-1 solve produced non-finite values")
    return float(np.sqrt(max(val, 0.0)))
