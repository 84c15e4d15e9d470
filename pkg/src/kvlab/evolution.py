"""Time integration of the perturbation ``z = u - u_inf``, ``q = p - p_inf``.

Per step one saddle problem is solved. Advection is linearly implicit: the
first argument of ``b(z, z, .)`` is frozen at the previous level (or
extrapolated for Crank-Nicolson) while the linearization terms around
``u_inf`` are fully implicit. The Kelvin-Voigt term enters the operator as
``(I - kappa Lap) / dt``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, field, fields

import numpy as np
import scipy.sparse as sp

from .decay import DecayParameters, weight
from .discretization import (
    FlowParameters,
    GridMismatchError,
    PressureField,
    VelocityField,
    _conv_matrix_vec,
    h_minus1_norm,
    leray_vector,
    operators,
    reaction_matrix,
)
from .forcing import ForcingProfile, evaluate, evaluate_dt
from .saddle import NonConvergence, SaddleProblem, SolverSettings, solve_saddle
from .spectral import SpectralConstants
from .steady import SteadyState

log = logging.getLogger(__name__)

SCHEMES = ("semi_implicit_be", "semi_implicit_cn")

CSV_COLUMNS = ("t", "nz", "ngz", "ndz", "nzt", "ngzt", "kndzt", "nq", "ngq", "E",
               "wE", "wgz", "wdz", "wzt", "wq", "gronwall_res")


@dataclass(frozen=True, eq=False)
class EvolutionConfig:
    params: FlowParameters
    steady: SteadyState
    forcing: ForcingProfile
    z0: VelocityField
    dt: float
    horizon: float
    decay: DecayParameters
    constants: SpectralConstants
    scheme: str = "semi_implicit_be"
    settings: SolverSettings = SolverSettings()
    linear: bool = False
    project_z0: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon < 10 * self.dt * (1 - 1e-12):
            raise ValueError("horizon must be at least 10 dt")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        g = self.steady.u_inf.grid
        if self.z0.grid != g or self.forcing.grid != g:
            raise GridMismatchError("z0, forcing and steady state must share a grid")
        if self.project_z0:
            z = VelocityField.from_vector(g, leray_vector(g, self.z0.to_vector()))
            object.__setattr__(self, "z0", z)
            object.__setattr__(self, "project_z0", False)

    @property
    def grid(self):
        return self.z0.grid

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    z: VelocityField
    q: PressureField
    z_prev: VelocityField | None = None
    n: int = 0
    report: dict | None = None


@dataclass(frozen=True)
class DecayRecord:
    t: float
    nz: float
    ngz: float
    ndz: float
    nzt: float
    ngzt: float
    kndzt: float
    nq: float
    ngq: float
    E: float
    wE: float
    wgz: float
    wdz: float
    wzt: float
    wq: float
    gronwall_res: float

    def as_tuple(self):
        return astuple(self)


assert tuple(f.name for f in fields(DecayRecord)) == CSV_COLUMNS


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    nF: float
    nFt_m1: float
    kndzt_rhs: float
    max_div: float
    iterations: int
    momentum_residual: float
    divergence_residual: float


@dataclass(eq=False)
class RunResult:
    records: list
    diagnostics: list
    final: EvolutionState
    aborted: bool = False
    error: str | None = None


class _Stepper:
    """Per-run precomputed operators (owned by one run, never shared)."""

    def __init__(self, config: EvolutionConfig):
        self.c = config
        g = config.grid
        self.grid = g
        self.ops = operators(g)
        self.h = g.h
        self.nu = config.params.nu
        self.kappa = config.params.kappa
        u = config.steady.u_inf
        if np.any(u.to_vector()):
            self.S_inf = _conv_matrix_vec(g, u.to_vector())
            self.R_inf = reaction_matrix(u)
        else:
            self.S_inf = sp.csr_matrix((g.n_vel, g.n_vel))
            self.R_inf = self.S_inf
        self.lin = (self.S_inf + self.R_inf).tocsr()

    def forcing(self, t):
        return evaluate(self.c.forcing, t).to_vector()

    def advection(self, frozen_vec):
        if self.c.linear or frozen_vec is None:
            return self.lin
        return (_conv_matrix_vec(self.grid, frozen_vec) + self.lin).tocsr()

    def step(self, state: EvolutionState) -> EvolutionState:
        c = self.c
        dt, nu, kappa = c.dt, self.nu, self.kappa
        lap = self.ops.lap
        z = state.z.to_vector()
        t1 = state.t + dt
        mass = z - kappa * (lap @ z)
        if c.scheme == "semi_implicit_be":
            N = self.advection(z)
            rhs = mass / dt + self.forcing(t1)
            prob = SaddleProblem(1.0 / dt, kappa / dt + nu, VelocityField.from_vector(self.grid, rhs), N)
        else:
            zs = z if state.z_prev is None else 1.5 * z - 0.5 * state.z_prev.to_vector()
            N = self.advection(zs)
            explicit = -nu * (lap @ z) + N @ z
            rhs = mass / dt - 0.5 * explicit + 0.5 * (self.forcing(state.t) + self.forcing(t1))
            prob = SaddleProblem(1.0 / dt, kappa / dt + 0.5 * nu, VelocityField.from_vector(self.grid, rhs), 0.5 * N)
        w, q, rep = solve_saddle(prob, c.settings)
        return EvolutionState(t1, w, q, state.z, state.n + 1, rep)

    def initial_rates(self, z0: VelocityField):
        """``z_t(0)`` and ``q(0)`` from the equation itself."""
        x = z0.to_vector()
        N = self.advection(x)
        r = self.forcing(0.0) - (-self.nu * (self.ops.lap @ x) + N @ x)
        zt, q, rep = solve_saddle(SaddleProblem(1.0, self.kappa, VelocityField.from_vector(self.grid, r)), self.c.settings)
        return zt.to_vector(), q, rep

    # norms on flat vectors
    def l2(self, x):
        return self.h * float(np.linalg.norm(x))

    def h1(self, x):
        return self.h * math.sqrt(max(float(x @ -(self.ops.lap @ x)), 0.0))

    def stokes(self, x):
        return self.l2(leray_vector(self.grid, -(self.ops.lap @ x)))

    def pressure_norms(self, q: PressureField):
        p = q.to_vector()
        p = p - p.mean()
        return self.l2(p), self.h * float(np.linalg.norm(self.ops.grad @ p))


def _record(st: _Stepper, t, z, zt, q, dp, gres):
    nz, ngz, ndz = st.l2(z), st.h1(z), st.stokes(z)
    nzt, ngzt = st.l2(zt), st.h1(zt)
    kndzt = st.kappa * st.stokes(zt) if st.kappa > 0 else 0.0
    nq, ngq = st.pressure_norms(q)
    E = nz**2 + st.kappa * ngz**2
    w = float(weight(t, dp))
    return DecayRecord(
        t, nz, ngz, ndz, nzt, ngzt, kndzt, nq, ngq, E,
        w * E, w * ngz**2, w * ndz**2, w * (nzt**2 + st.kappa * ngzt**2), w * (nq**2 + ngq**2), gres,
    )


def _gronwall_initial(st, z, zt, dp, sc):
    a = dp.alpha
    E = st.l2(z) ** 2 + st.kappa * st.h1(z) ** 2
    dE = 2 * st.h**2 * float(z @ zt) + 2 * st.kappa * st.h**2 * float(z @ -(st.ops.lap @ zt))
    F2 = st.l2(st.forcing(0.0)) ** 2
    return 2 * a * E + dE + sc.gamma1 * st.h1(z) ** 2 - 2.0 / (sc.lambda1 * sc.gamma1) * F2


def _gronwall_step(st, t0, t1, z0, z1, dp, sc):
    a = dp.alpha
    e0 = math.exp(2 * a * t0) * (st.l2(z0) ** 2 + st.kappa * st.h1(z0) ** 2)
    w1 = math.exp(2 * a * t1)
    e1 = w1 * (st.l2(z1) ** 2 + st.kappa * st.h1(z1) ** 2)
    F2 = st.l2(st.forcing(t1)) ** 2
    return (e1 - e0) / (t1 - t0) + sc.gamma1 * w1 * st.h1(z1) ** 2 - 2.0 / (sc.lambda1 * sc.gamma1) * w1 * F2


def initial_state(config: EvolutionConfig) -> EvolutionState:
    st = _Stepper(config)
    _, q, rep = st.initial_rates(config.z0)
    return EvolutionState(0.0, config.z0, q, None, 0, rep)


def step(state: EvolutionState, config: EvolutionConfig) -> EvolutionState:
    """Advance one time step; raises :class:`NonConvergence` if the saddle solve fails."""
    if state.z.grid != config.grid:
        raise GridMismatchError("state and config live on different grids")
    return _Stepper(config).step(state)


def kappa_delta_zt(prev: EvolutionState, new: EvolutionState, config: EvolutionConfig) -> tuple[float, float]:
    """``(kappa |P Lap z_t|, right side of its triangle bound)`` for two consecutive states."""
    st = _Stepper(config)
    z0, z1 = prev.z.to_vector(), new.z.to_vector()
    zt = (z1 - z0) / (new.t - prev.t)
    return _lemma6(st, prev, new, z0, z1, zt)


def _lemma6(st, prev, new, z0, z1, zt):
    c = st.c
    if c.scheme == "semi_implicit_be":
        zth = z1
        frozen = z0
        F = st.forcing(new.t)
    else:
        zth = 0.5 * (z0 + z1)
        frozen = z0 if prev.z_prev is None else 1.5 * z0 - 0.5 * prev.z_prev.to_vector()
        F = 0.5 * (st.forcing(prev.t) + st.forcing(new.t))
    lhs = st.kappa * st.stokes(zt) if st.kappa > 0 else 0.0
    conv = 0.0 if c.linear else st.l2(_conv_matrix_vec(st.grid, frozen) @ zth)
    rhs = (st.l2(zt) + st.nu * st.stokes(zth) + conv
           + st.l2(st.S_inf @ zth) + st.l2(st.R_inf @ zth) + st.l2(F))
    return lhs, rhs


def run(config: EvolutionConfig) -> RunResult:
    """Integrate to the horizon, emitting one :class:`DecayRecord` per time level (t = 0 included)."""
    st = _Stepper(config)
    dp, sc = config.decay, config.constants
    z = config.z0.to_vector()
    zt, q, rep = st.initial_rates(config.z0)
    state = EvolutionState(0.0, config.z0, q, None, 0, rep)
    records = [_record(st, 0.0, z, zt, q, dp, _gronwall_initial(st, z, zt, dp, sc))]
    fdt = evaluate_dt(config.forcing, 0.0)
    diags = [StepDiagnostics(0.0, st.l2(st.forcing(0.0)), h_minus1_norm(fdt), float("nan"),
                             float(np.abs(st.ops.div @ z).max()), rep["iterations"],
                             rep["momentum_residual"], rep["divergence_residual"])]
    aborted, error = False, None
    for k in range(1, config.n_steps + 1):
        try:
            new = st.step(state)
        except NonConvergence as exc:
            log.error("saddle solve failed at step %d: %s", k, exc)
            aborted, error = True, str(exc)
            break
        # keep time levels on the exact grid k*dt
        new = EvolutionState(k * config.dt, new.z, new.q, new.z_prev, new.n, new.report)
        z0, z1 = state.z.to_vector(), new.z.to_vector()
        zt = (z1 - z0) / config.dt
        gres = _gronwall_step(st, state.t, new.t, z0, z1, dp, sc)
        records.append(_record(st, new.t, z1, zt, new.q, dp, gres))
        _, rhs6 = _lemma6(st, state, new, z0, z1, zt)
        rep = new.report
        diags.append(StepDiagnostics(new.t, st.l2(st.forcing(new.t)), h_minus1_norm(evaluate_dt(config.forcing, new.t)),
                                     rhs6, float(np.abs(st.ops.div @ z1).max()), rep["iterations"],
                                     rep["momentum_residual"], rep["divergence_residual"]))
        state = new
    return RunResult(records, diags, state, aborted, error)
