import numpy as np
import pytest
from dataclasses import replace

from kvlab.discretization import FlowParameters, GridSpec, VelocityField, norms, stokes_apply
from kvlab.manufactured import manufactured_solution
from kvlab.spectral import (
    SpectralConstants,
    a1_eigenvalue,
    a1_operator,
    alpha_bound,
    dense_constrained_eigs,
    dirichlet_lambda1,
    estimate_trilinear_N,
    gamma1_constant,
    lambda1_closed_form,
    t_bar,
)
from kvlab.steady import SteadyProblem, check_apriori_bounds, momentum_residual, solve_steady, weak_residual
from kvlab.discretization import operators


def test_steady_zero_forcing():
    g = GridSpec(8)
    st = solve_steady(SteadyProblem(FlowParameters(1.0, 0.0), VelocityField.zeros(g)))
    assert st.converged
    assert norms(st.u_inf)["max"] == 0


def test_steady_residual_and_bounds(small_flow):
    prob, st, _ = small_flow
    assert st.converged and st.newton_iters >= 1
    assert weak_residual(st.u_inf, prob) < 1e-10
    rep = check_apriori_bounds(st, prob)
    assert rep["item_i"]["pass"] and rep["item_ii"]["pass"]
    e = rep["energy_identity"]
    assert abs(e["lhs"] - e["rhs"]) < 1e-10 * e["rhs"]


def test_steady_pressure_recovers_equation(small_flow):
    prob, st, _ = small_flow
    r = momentum_residual(st.u_inf, prob)
    g = prob.grid
    ops = operators(g)
    # remaining residual equals -grad p: the pressure closes the momentum equation
    np.testing.assert_allclose(r, -(ops.grad @ st.p_inf.to_vector()), atol=1e-8 * np.abs(r).max())


def test_manufactured_second_order():
    ms = manufactured_solution(1.0, 50.0, True)
    errs = []
    for n in (16, 32):
        g = GridSpec(n)
        st = solve_steady(SteadyProblem(FlowParameters(1.0, 0.0), ms.forcing(g)))
        errs.append(np.abs((st.u_inf - ms.velocity(g)).to_vector()).max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_lambda1_closed_form():
    for n in (8, 16):
        g = GridSpec(n)
        assert abs(dirichlet_lambda1(g) - lambda1_closed_form(g)) < 1e-9 * lambda1_closed_form(g)


def test_lambda0_stokes_case():
    g = GridSpec(12)
    lam0, z = a1_eigenvalue(VelocityField.zeros(g), 1.0)
    ref = dense_constrained_eigs(g, -operators(g).lap.toarray())[0]
    assert abs(lam0 - ref) < 1e-8 * ref
    # eigenfield of the Stokes operator
    np.testing.assert_allclose(stokes_apply(z).to_vector(), lam0 * z.to_vector(), atol=1e-6 * lam0)


def test_a1_and_gamma1_dense(small_flow):
    _, st, sc = small_flow
    g = st.u_inf.grid
    K = a1_operator(st.u_inf, 1.0).toarray()
    lam_ref = dense_constrained_eigs(g, K)[0]
    assert abs(sc.lambda0 - lam_ref) < 1e-7 * abs(lam_ref)
    L = -operators(g).lap.toarray()
    mu_ref = dense_constrained_eigs(g, K - L, L)[0]
    assert abs(sc.gamma1 - (1.0 + mu_ref)) < 1e-7
    assert sc.lambda0 >= sc.gamma1 * sc.lambda1 * (1 - 1e-10)


def test_gamma1_is_nu_without_base_flow():
    g = GridSpec(10)
    assert abs(gamma1_constant(VelocityField.zeros(g), 0.3) - 0.3) < 1e-10


def test_alpha_bound_monotone_in_kappa(small_flow):
    sc = small_flow[2]
    vals = [alpha_bound(sc, k) for k in (0.1, 0.01, 0.001, 0.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_t_bar_none_for_zero_delta(small_flow):
    sc = small_flow[2]
    assert t_bar(0.0, 0.0, sc) is None
    assert t_bar(1.0, 0.0, sc) > 0


def test_n_estimate_stable_in_samples():
    g = GridSpec(16)
    a = estimate_trilinear_N(g, 500, seed=0)
    b = estimate_trilinear_N(g, 2000, seed=0)
    assert a > 0 and abs(a - b) <= 0.25 * b


def test_constants_roundtrip(small_flow):
    sc = small_flow[2]
    assert SpectralConstants.from_dict(sc.to_dict()) == sc
    assert replace(sc, lambda0=-1.0).a1_satisfied is False
