"""Separable forcing perturbations ``F(x, t) = g(t) G(x)`` and their decay moduli."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decay import DecayParameters, weight
from .discretization import VelocityField, h_minus1_norm, norms

KINDS = ("zero", "exponential", "power", "power_exponential")


@dataclass(frozen=True, eq=False)
class ForcingProfile:
    spatial_shape: VelocityField
    amplitude: float = 0.0
    kind: str = "zero"
    sigma: float = 0.0
    p: float = 0.0
    normalize: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}; expected one of {KINDS}")
        if self.sigma < 0 or self.p < 0:
            raise ValueError("sigma and p must be non-negative")
        if self.normalize:
            n = norms(self.spatial_shape)["l2"]
            if n > 0:
                object.__setattr__(self, "spatial_shape", self.spatial_shape / n)
            object.__setattr__(self, "normalize", False)

    @property
    def grid(self):
        return self.spatial_shape.grid

    @classmethod
    def zero(cls, grid) -> "ForcingProfile":
        return cls(VelocityField.zeros(grid))

    def g(self, t: float) -> float:
        A = self.amplitude
        if self.kind == "zero" or A == 0:
            return 0.0
        if self.kind == "exponential":
            return A * math.exp(-self.sigma * t)
        if self.kind == "power":
            return A * (1.0 + t) ** (-self.p)
        return A * (1.0 + t) ** (-self.p) * math.exp(-self.sigma * t)

    def g_prime(self, t: float) -> float:
        if self.kind == "zero" or self.amplitude == 0:
            return 0.0
        if self.kind == "exponential":
            return -self.sigma * self.g(t)
        if self.kind == "power":
            return -self.p * self.amplitude * (1.0 + t) ** (-self.p - 1.0)
        return -(self.p / (1.0 + t) + self.sigma) * self.g(t)


def evaluate(profile: ForcingProfile, t: float) -> VelocityField:
    if t < 0:
        raise ValueError("t must be non-negative")
    return profile.spatial_shape * profile.g(t)


def evaluate_dt(profile: ForcingProfile, t: float) -> VelocityField:
    if t < 0:
        raise ValueError("t must be non-negative")
    return profile.spatial_shape * profile.g_prime(t)


@dataclass(frozen=True)
class DecayModuli:
    M: float
    M1: float
    finite_M: bool
    finite_M1: bool
    horizon: float
    dt: float

    @property
    def finite(self) -> bool:
        return self.finite_M and self.finite_M1


def _diverges(series: np.ndarray) -> bool:
    if not np.all(np.isfinite(series)):
        return True
    if series[-1] == 0:
        return False
    return bool(series[-1] > 10.0 * np.median(series))


def moduli_series(profile: ForcingProfile, decay: DecayParameters, times):
    """Weighted ``|F|^2`` and ``|F|^2 + |F_t|_{-1}^2`` along ``times``."""
    G = profile.spatial_shape
    nG2 = norms(G)["l2"] ** 2
    nGm2 = h_minus1_norm(G) ** 2
    g = np.array([profile.g(t) for t in times])
    gp = np.array([profile.g_prime(t) for t in times])
    w = weight(times, decay)
    with np.errstate(over="ignore", invalid="ignore"):
        m = w * g**2 * nG2
        m1 = w * (g**2 * nG2 + gp**2 * nGm2)
    return m, m1


def compute_moduli(profile: ForcingProfile, decay: DecayParameters, horizon: float, dt: float) -> DecayModuli:
    """Sup over ``[0, horizon]`` of the weighted forcing moduli with a divergence flag.

    A modulus is flagged infinite when its value at the horizon exceeds ten
    times the median over the scan.
    """
    if horizon <= 0 or dt <= 0:
        raise ValueError("horizon and dt must be positive")
    times = np.linspace(0.0, horizon, int(round(horizon / dt)) + 1)
    m, m1 = moduli_series(profile, decay, times)
    fin_m, fin_m1 = not _diverges(m), not _diverges(m1)
    M = float(np.max(m)) if fin_m else math.inf
    M1 = float(np.max(m1)) if fin_m1 else math.inf
    return DecayModuli(M, M1, fin_m, fin_m1, float(horizon), float(dt))
