"""Named spatial fields used for steady forcing, forcing shapes and initial perturbations."""

from __future__ import annotations

import numpy as np

from .discretization import GridSpec, VelocityField, leray_vector, norms
from .manufactured import manufactured_solution, stream_poly

STEADY_FORCINGS = ("zero", "stream_poly", "vortex", "manufactured", "custom_csv")
FIELD_SHAPES = ("eigenfield", "stream_poly", "vortex", "random", "zero", "custom_csv")


def vortex(grid: GridSpec) -> VelocityField:
    """Single-cell divergence-free vortex ``(-sin^2 pi x sin 2 pi y, sin 2 pi x sin^2 pi y)`` (projected)."""
    f = VelocityField.from_functions(
        grid,
        lambda x, y: -np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y),
        lambda x, y: np.sin(2 * np.pi * x) * np.sin(np.pi * y) ** 2,
    )
    return VelocityField.from_vector(grid, leray_vector(grid, f.to_vector()))


def stream_poly_field(grid: GridSpec) -> VelocityField:
    """Discrete curl of ``x^2 (1-x)^2 y^2 (1-y)^2``; exactly divergence-free."""
    return VelocityField.from_stream_function(grid, stream_poly)


def stokes_eigenfield(grid: GridSpec) -> VelocityField:
    """First discrete Stokes eigenfield, unit L2 norm."""
    from .spectral import a1_eigenvalue

    _, z = a1_eigenvalue(VelocityField.zeros(grid), 1.0)
    return z


def random_smooth(grid: GridSpec, seed: int, kmax: int = 3) -> VelocityField:
    """Projected random combination of low sine modes, unit L2 norm."""
    from .spectral import _sine_basis

    rng = np.random.default_rng(seed)
    bu, bv = _sine_basis(grid, kmax)
    x = np.concatenate([bu @ rng.standard_normal(bu.shape[1]), bv @ rng.standard_normal(bv.shape[1])])
    f = VelocityField.from_vector(grid, leray_vector(grid, x))
    return f / norms(f)["l2"]


def named_field(kind: str, grid: GridSpec, seed: int = 0, path: str | None = None) -> VelocityField:
    if kind == "zero":
        return VelocityField.zeros(grid)
    if kind == "stream_poly":
        return stream_poly_field(grid)
    if kind == "vortex":
        return vortex(grid)
    if kind == "eigenfield":
        return stokes_eigenfield(grid)
    if kind == "random":
        return random_smooth(grid, seed)
    if kind == "custom_csv":
        if not path:
            raise ValueError("custom_csv needs a file path")
        from .io import read_field_csv

        f, _ = read_field_csv(path)
        if f.grid != grid:
            raise ValueError(f"custom field grid {f.grid.n} does not match {grid.n}")
        return f
    raise ValueError(f"unknown field kind {kind!r}")


def steady_forcing(kind: str, grid: GridSpec, amplitude: float, nu: float, path: str | None = None) -> VelocityField:
    """Steady forcing ``f_inf``; ``manufactured`` reproduces the symbolic Navier-Stokes solution."""
    if kind not in STEADY_FORCINGS:
        raise ValueError(f"unknown steady forcing {kind!r}")
    if kind == "manufactured":
        return manufactured_solution(nu, amplitude, True).forcing(grid)
    f = named_field(kind, grid, path=path)
    n = norms(f)["l2"]
    return f * (amplitude / n) if n > 0 else f
