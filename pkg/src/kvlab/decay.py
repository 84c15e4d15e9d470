"""Decay-rate parameters and the time weight ``tau(t)**beta * exp(2 alpha1 t)``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .spectral import SpectralConstants, alpha_bound, t_bar


class InadmissibleRate(ValueError):
    pass


@dataclass(frozen=True)
class DecayParameters:
    """Rates used by the decay claims.

    ``alpha = ratio * alpha_max``; ``alpha1 = alpha - delta0`` is the certified
    exponential rate and ``beta = 2 delta`` the power. ``t_bar is None`` encodes
    ``tau == 1`` (``delta == 0``).
    """

    alpha: float
    delta0: float
    alpha1: float
    delta: float
    beta: float
    t_bar: float | None
    alpha_max: float
    kappa: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InadmissibleRate("alpha must be positive")
        if not self.delta0 > 0:
            raise InadmissibleRate("delta0 must be positive")
        if not self.alpha1 > 0 or abs(self.alpha1 - (self.alpha - self.delta0)) > 1e-14 * self.alpha:
            raise InadmissibleRate("alpha1 must equal alpha - delta0 > 0")
        if self.delta < 0 or self.beta != 2 * self.delta:
            raise InadmissibleRate("beta must equal 2*delta with delta >= 0")

    @property
    def ratio(self) -> float:
        return self.alpha / self.alpha_max if self.alpha_max > 0 else np.inf

    @property
    def admissible(self) -> bool:
        return 0 < self.alpha < self.alpha_max

    @classmethod
    def from_constants(cls, sc: SpectralConstants, kappa: float, ratio: float = 0.9,
                       delta0: float | None = None, delta: float = 0.0) -> "DecayParameters":
        """Build parameters at ``alpha = ratio * alpha_max(kappa)``.

        ``ratio >= 1`` is allowed only so that negative controls can be run;
        the result then reports ``admissible == False``.
        """
        if not ratio > 0:
            raise InadmissibleRate("ratio must be positive")
        amax = alpha_bound(sc, kappa)
        alpha = ratio * amax
        if delta0 is None:
            delta0 = 0.5 * alpha
        return cls(alpha, delta0, alpha - delta0, delta, 2.0 * delta, t_bar(delta, kappa, sc), amax, float(kappa))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["admissible"] = self.admissible
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DecayParameters":
        tb = d.get("t_bar")
        return cls(float(d["alpha"]), float(d["delta0"]), float(d["alpha1"]), float(d["delta"]),
                   float(d["beta"]), None if tb is None else float(tb), float(d["alpha_max"]), float(d["kappa"]))


def tau(t, t_bar_value: float | None):
    t = np.asarray(t, dtype=float)
    if t_bar_value is None:
        return np.ones_like(t)
    return np.maximum(t_bar_value, t)


def tau_weight(t, beta: float, t_bar_value: float | None):
    if beta == 0 or t_bar_value is None:
        return np.ones_like(np.asarray(t, dtype=float))
    return tau(t, t_bar_value) ** beta


def weight(t, dp: DecayParameters):
    """``tau(t)**beta * exp(2 alpha1 t)``."""
    return tau_weight(t, dp.beta, dp.t_bar) * np.exp(2.0 * dp.alpha1 * np.asarray(t, dtype=float))
