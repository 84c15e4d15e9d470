import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvlab.decay import DecayParameters, InadmissibleRate, tau, tau_weight, weight
from kvlab.discretization import GridSpec, h_minus1_norm, norms
from kvlab.forcing import ForcingProfile, compute_moduli, evaluate, evaluate_dt
from kvlab.shapes import random_smooth


def test_decay_parameters(small_flow):
    sc = small_flow[2]
    dp = DecayParameters.from_constants(sc, 0.0)
    assert dp.admissible and abs(dp.ratio - 0.9) < 1e-12
    assert dp.alpha1 == pytest.approx(dp.alpha / 2)
    assert dp.t_bar is None and dp.beta == 0
    assert DecayParameters.from_dict(dp.to_dict()) == dp
    bad = DecayParameters.from_constants(sc, 0.0, ratio=1.2)
    assert not bad.admissible


def test_decay_parameters_invalid(small_flow):
    sc = small_flow[2]
    with pytest.raises(InadmissibleRate):
        DecayParameters.from_constants(sc, 0.0, delta0=10 * sc.alpha_max)
    with pytest.raises(InadmissibleRate):
        DecayParameters.from_constants(sc, 0.0, ratio=0.0)


def test_tau_and_weight(small_flow):
    sc = small_flow[2]
    dp = DecayParameters.from_constants(sc, 0.0, delta=1.0)
    t = np.array([0.0, dp.t_bar / 2, dp.t_bar, 3.0])
    np.testing.assert_allclose(tau(t, dp.t_bar), [dp.t_bar, dp.t_bar, dp.t_bar, 3.0])
    np.testing.assert_allclose(weight(t, dp), tau_weight(t, 2.0, dp.t_bar) * np.exp(2 * dp.alpha1 * t))
    assert np.all(tau(t, None) == 1.0)


def test_forcing_normalized_and_laws():
    g = GridSpec(12)
    G = random_smooth(g, 0) * 7.0
    p = ForcingProfile(G, 2.0, "power_exponential", 1.5, 0.75)
    assert norms(p.spatial_shape)["l2"] == pytest.approx(1.0)
    t = 0.4
    assert p.g(t) == pytest.approx(2.0 * 1.4**-0.75 * math.exp(-0.6))
    eps = 1e-6
    assert p.g_prime(t) == pytest.approx((p.g(t + eps) - p.g(t - eps)) / (2 * eps), rel=1e-7)
    np.testing.assert_allclose(evaluate_dt(p, t).to_vector(), p.g_prime(t) * p.spatial_shape.to_vector())
    with pytest.raises(ValueError):
        evaluate(p, -1.0)
    with pytest.raises(ValueError):
        ForcingProfile(G, 1.0, "bogus")


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 5.0), st.sampled_from(["exponential", "power", "power_exponential"]))
def test_g_prime_matches_difference(t, kind):
    g = GridSpec(8)
    p = ForcingProfile(random_smooth(g, 1), 1.0, kind, 0.7, 1.3)
    eps = 1e-6
    fd = (p.g(t + eps) - p.g(max(t - eps, 0.0))) / (t + eps - max(t - eps, 0.0))
    assert p.g_prime(t) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_moduli_classes(small_flow):
    sc = small_flow[2]
    g = GridSpec(16)
    dp = DecayParameters.from_constants(sc, 0.0, delta=1.0)
    G = random_smooth(g, 2)
    zero = compute_moduli(ForcingProfile.zero(g), dp, 5.0, 0.01)
    assert zero.M == 0 and zero.M1 == 0 and zero.finite
    slow = compute_moduli(ForcingProfile(G, 1.0, "exponential", 0.5 * dp.alpha1), dp, 20.0, 0.01)
    assert math.isinf(slow.M) and not slow.finite_M
    crit = compute_moduli(ForcingProfile(G, 1.0, "power_exponential", dp.alpha1, dp.beta / 2), dp, 20.0, 0.01)
    assert crit.finite and crit.M <= 1.0 + 1e-12
    fast = compute_moduli(ForcingProfile(G, 1.0, "exponential", 2 * dp.alpha1), dp, 20.0, 0.01)
    assert fast.finite and fast.M1 >= fast.M
    assert fast.M1 <= fast.M + (2 * dp.alpha1) ** 2 * h_minus1_norm(G) ** 2 * fast.M + 1e-12
