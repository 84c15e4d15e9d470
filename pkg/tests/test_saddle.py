import numpy as np
import pytest
import scipy.sparse as sp

from kvlab.discretization import GridSpec, VelocityField, convection_matrix, norms, operators
from kvlab.saddle import (
    KKTSolver,
    NonConvergence,
    SaddleProblem,
    SolverSettings,
    inf_sup_estimate,
    solve_saddle,
)
from kvlab.shapes import random_smooth


def _rhs(g, seed):
    return VelocityField.from_vector(g, np.random.default_rng(seed).standard_normal(g.n_vel))


@pytest.mark.parametrize("method", ["schur_cg", "direct_sparse"])
@pytest.mark.parametrize("a,b", [(1.0, 0.0), (0.0, 1.0), (100.0, 0.5), (1.0, 0.01)])
def test_saddle_residuals(method, a, b):
    g = GridSpec(12)
    w, p, rep = solve_saddle(SaddleProblem(a, b, _rhs(g, 0)), SolverSettings(1e-11, 500, method))
    assert rep["momentum_residual"] < 1e-9
    assert rep["divergence_residual"] < 1e-9
    assert abs(p.to_vector().mean()) < 1e-10


def test_methods_agree_with_convection():
    g = GridSpec(12)
    extra = convection_matrix(random_smooth(g, 1) * 3.0)
    prob = SaddleProblem(10.0, 1.0, _rhs(g, 1), extra)
    w1, p1, _ = solve_saddle(prob, SolverSettings(1e-12, 500, "schur_cg"))
    w2, p2, _ = solve_saddle(prob, SolverSettings(1e-12, 500, "direct_sparse"))
    np.testing.assert_allclose(w1.to_vector(), w2.to_vector(), atol=1e-9 * norms(w2)["max"])
    np.testing.assert_allclose(p1.to_vector(), p2.to_vector(), atol=1e-8 * np.abs(p2.to_vector()).max())


def test_kkt_solver_reuse():
    g = GridSpec(10)
    s = KKTSolver(g, 1.0, 1.0)
    r = _rhs(g, 2).to_vector()
    w, p = s.solve_vectors(r)
    ops = operators(g)
    A = sp.identity(g.n_vel) - ops.lap
    assert np.linalg.norm(A @ w + ops.grad @ p - r) < 1e-9 * np.linalg.norm(r)


def test_bad_coefficients():
    g = GridSpec(8)
    with pytest.raises(ValueError):
        SaddleProblem(0.0, 0.0, _rhs(g, 0))
    with pytest.raises(ValueError):
        SolverSettings(tol=2.0)


def test_nonconvergence_raised():
    g = GridSpec(16)
    with pytest.raises(NonConvergence):
        solve_saddle(SaddleProblem(0.0, 1.0, _rhs(g, 3)), SolverSettings(1e-14, 1, "schur_cg"))


def test_inf_sup_bounded_below():
    vals = [inf_sup_estimate(GridSpec(n)) for n in (8, 16)]
    assert all(v > 0.1 for v in vals)
    assert abs(vals[0] - vals[1]) < 0.5 * vals[0]
