"""Manufactured steady solutions with symbolically derived forcing.

The velocity is the curl of ``psi = x^2 (1-x)^2 y^2 (1-y)^2`` (times an
amplitude), which vanishes with its normal derivative on the walls; the
pressure is a smooth mean-zero function.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import sympy

from .discretization import GridSpec, PressureField, VelocityField


@dataclass(frozen=True)
class Manufactured:
    u: object
    v: object
    p: object
    fx: object
    fy: object
    psi: object

    def velocity(self, grid: GridSpec) -> VelocityField:
        return VelocityField.from_functions(grid, self.u, self.v)

    def pressure(self, grid: GridSpec) -> PressureField:
        return PressureField.from_function(grid, self.p).mean_zero()

    def forcing(self, grid: GridSpec) -> VelocityField:
        return VelocityField.from_functions(grid, self.fx, self.fy)


@lru_cache(maxsize=32)
def manufactured_solution(nu: float, amplitude: float = 1.0, convection: bool = True,
                          pressure_amplitude: float = 1.0) -> Manufactured:
    """Return callables for ``u*, v*, p*`` and ``f = -nu Lap u* + u*.grad u* + grad p*``."""
    x, y = sympy.symbols("x y")
    psi = amplitude * x**2 * (1 - x) ** 2 * y**2 * (1 - y) ** 2
    u = sympy.diff(psi, y)
    v = -sympy.diff(psi, x)
    p = pressure_amplitude * sympy.cos(sympy.pi * x) * sympy.cos(sympy.pi * y)
    lap = lambda f: sympy.diff(f, x, 2) + sympy.diff(f, y, 2)  # noqa: E731
    fx = -nu * lap(u) + sympy.diff(p, x)
    fy = -nu * lap(v) + sympy.diff(p, y)
    if convection:
        fx += u * sympy.diff(u, x) + v * sympy.diff(u, y)
        fy += u * sympy.diff(v, x) + v * sympy.diff(v, y)
    mk = lambda e: sympy.lambdify((x, y), sympy.expand(e), "numpy")  # noqa: E731
    return Manufactured(mk(u), mk(v), mk(p), mk(fx), mk(fy), mk(psi))


def stream_poly(x, y):
    """Node stream function ``x^2 (1-x)^2 y^2 (1-y)^2``."""
    return x**2 * (1 - x) ** 2 * y**2 * (1 - y) ** 2
