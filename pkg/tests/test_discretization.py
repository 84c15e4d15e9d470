import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvlab.discretization import (
    GridMismatchError,
    GridSpec,
    PressureField,
    VelocityField,
    convection_matrix,
    divergence,
    gradient,
    h_minus1_norm,
    inner,
    lp_norm,
    norms,
    operators,
    project,
    reaction_matrix,
    stokes_apply,
    trilinear_b,
)
from kvlab.shapes import random_smooth, stream_poly_field
from reference import dense_divergence, dense_laplacian, dense_reaction, dense_skew

seeds = st.integers(0, 2**31 - 1)


def rand_field(g, rng):
    return VelocityField.from_vector(g, rng.standard_normal(g.n_vel))


def test_grid_layout():
    g = GridSpec(8)
    assert g.h == 1 / 8
    assert g.n_vel == 2 * 7 * 8
    f = VelocityField.zeros(g)
    assert f.u.shape == (9, 8) and f.v.shape == (8, 9)


def test_grid_rejects_tiny():
    with pytest.raises(ValueError):
        GridSpec(1)


def test_vector_roundtrip():
    g = GridSpec(8)
    x = np.random.default_rng(0).standard_normal(g.n_vel)
    f = VelocityField.from_vector(g, x)
    np.testing.assert_array_equal(f.to_vector(), x)
    assert np.all(f.u[0] == 0) and np.all(f.u[-1] == 0)
    assert np.all(f.v[:, 0] == 0) and np.all(f.v[:, -1] == 0)


def test_mismatched_grids_raise():
    with pytest.raises(GridMismatchError):
        inner(VelocityField.zeros(GridSpec(8)), VelocityField.zeros(GridSpec(16)))


@pytest.mark.parametrize("n", [8, 16])
def test_operators_match_array_stencils(n):
    g = GridSpec(n)
    ops = operators(g)
    rng = np.random.default_rng(n)
    a, w = rng.standard_normal(g.n_vel), rng.standard_normal(g.n_vel)
    assert np.abs(ops.lap.toarray() - dense_laplacian(n)).max() == 0
    assert np.abs(ops.div.toarray() - dense_divergence(n)).max() == 0
    s = convection_matrix(VelocityField.from_vector(g, a)).toarray()
    assert np.abs(s - dense_skew(a, n)).max() < 1e-12 / g.h
    r = reaction_matrix(VelocityField.from_vector(g, w)).toarray()
    assert np.abs(r - dense_reaction(w, n)).max() < 1e-12 / g.h


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_gradient_is_minus_divergence_adjoint(seed):
    g = GridSpec(12)
    rng = np.random.default_rng(seed)
    f = rand_field(g, rng)
    p = PressureField.from_vector(g, rng.standard_normal(g.n_p))
    lhs = inner(gradient(p), f)
    rhs = -inner(divergence(f), p)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_trilinear_skew(seed):
    g = GridSpec(12)
    rng = np.random.default_rng(seed)
    u, v, w = (rand_field(g, rng) for _ in range(3))
    scale = norms(u)["max"] * norms(v)["h1_semi"] * norms(w)["l2"] + 1.0
    assert abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) <= 1e-12 * scale
    assert abs(trilinear_b(u, v, v)) <= 1e-12 * scale


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_reaction_identity(seed):
    g = GridSpec(10)
    rng = np.random.default_rng(seed)
    z, w = rng.standard_normal(g.n_vel), rng.standard_normal(g.n_vel)
    zf, wf = VelocityField.from_vector(g, z), VelocityField.from_vector(g, w)
    lhs = convection_matrix(zf) @ w
    rhs = reaction_matrix(wf) @ z
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * np.abs(lhs).max())


def test_laplacian_symmetric_negative():
    g = GridSpec(10)
    L = operators(g).lap.toarray()
    np.testing.assert_allclose(L, L.T, atol=0)
    assert np.linalg.eigvalsh(L).max() < 0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_projection(seed):
    g = GridSpec(12)
    f = rand_field(g, np.random.default_rng(seed))
    pf, phi = project(f)
    assert norms(divergence(pf))["max"] < 1e-10 * norms(f)["max"] / g.h
    pf2, _ = project(pf)
    np.testing.assert_allclose(pf2.to_vector(), pf.to_vector(), atol=1e-12 * norms(f)["max"])
    # orthogonal decomposition
    np.testing.assert_allclose((pf + gradient(phi)).to_vector(), f.to_vector(), atol=1e-10)
    assert abs(inner(pf, gradient(phi))) < 1e-10 * norms(f)["l2"] ** 2


def test_stream_function_field_is_solenoidal():
    g = GridSpec(16)
    f = stream_poly_field(g)
    assert norms(divergence(f))["max"] < 1e-12


def test_stokes_operator_positive_on_solenoidal():
    g = GridSpec(12)
    f = random_smooth(g, 3)
    assert inner(stokes_apply(f), f) > 0


def test_hminus1_dual_norm():
    g = GridSpec(12)
    f = random_smooth(g, 4)
    lam1 = 8 / g.h**2 * np.sin(np.pi * g.h / 2) ** 2
    assert h_minus1_norm(f) <= norms(f)["l2"] / np.sqrt(lam1) * (1 + 1e-12)


def test_lp_norms_ordered():
    g = GridSpec(16)
    f = random_smooth(g, 5)
    assert lp_norm(f, 2) <= lp_norm(f, 4) * (1 + 1e-12) <= lp_norm(f, np.inf) * (1 + 1e-12)
