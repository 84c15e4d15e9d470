import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvlab.decay import DecayParameters, tau_weight
from kvlab.evolution import CSV_COLUMNS, DecayRecord
from kvlab.forcing import DecayModuli
from kvlab.verification import (
    FAIL,
    NA,
    PASS,
    DegenerateWindow,
    IncompleteRun,
    check_admissibility,
    check_lemma1,
    check_lemma2_3,
    discounted_integral,
    fit_decay_rate,
    tail_window,
    verify_run,
)


def test_fit_exact_exponential():
    t = np.linspace(0, 2, 201)
    rate, r2 = fit_decay_rate(np.column_stack([t, np.exp(-3 * t)]), (0.5, 2.0))
    assert abs(rate - 3.0) < 1e-6 and r2 == pytest.approx(1.0)


def test_fit_constant():
    t = np.linspace(0, 1, 50)
    rate, _ = fit_decay_rate(np.column_stack([t, np.full_like(t, 2.5)]), (0, 1))
    assert abs(rate) < 1e-9


def test_fit_removes_power_factor():
    # t**-2 e^{-3t} with beta = 2 and a large t_bar so tau = t on the window
    t_bar = 5.0
    t = np.linspace(t_bar, 10 * t_bar, 2000)
    v = t**-2.0 * np.exp(-3 * t / 10)
    rate, _ = fit_decay_rate(np.column_stack([t, v]), (5 * t_bar, 10 * t_bar), beta=2.0, t_bar=t_bar)
    assert abs(rate - 0.3) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 50.0), st.floats(1e-3, 1e3))
def test_fit_roundtrip(r, c):
    t = np.linspace(0.0, 0.5, 120)
    rate, _ = fit_decay_rate(np.column_stack([t, c * np.exp(-r * t)]), (0.0, 0.5))
    assert abs(rate - r) < 1e-6 * max(1.0, r)


def test_fit_degenerate():
    t = np.linspace(0, 1, 10)
    with pytest.raises(DegenerateWindow):
        fit_decay_rate(np.column_stack([t, np.exp(-t)]), (0, 1))
    t = np.linspace(0, 1, 100)
    with pytest.raises(DegenerateWindow):
        fit_decay_rate(np.column_stack([t, np.zeros_like(t)]), (0, 1))
    with pytest.raises(ValueError):
        fit_decay_rate(np.column_stack([t, -np.ones_like(t)]), (0, 1))


def test_discounted_integral_exact():
    t = np.linspace(0, 3, 3001)
    d0 = 0.7
    out = discounted_integral(t, np.ones_like(t), d0)
    exact = (1 - np.exp(-2 * d0 * t)) / (2 * d0)
    np.testing.assert_allclose(out, exact, atol=1e-7)


def _records(t, E, dp, kappa=0.0, grow=0.0):
    rows = []
    for ti, Ei in zip(t, E):
        w = float(tau_weight(ti, dp.beta, dp.t_bar) * math.exp(2 * dp.alpha1 * ti))
        nz = math.sqrt(Ei)
        vals = dict(t=ti, nz=nz, ngz=3 * nz, ndz=10 * nz, nzt=5 * nz, ngzt=15 * nz, kndzt=kappa * 50 * nz,
                    nq=nz, ngq=2 * nz, E=Ei, wE=w * Ei, wgz=w * 9 * Ei, wdz=w * 100 * Ei,
                    wzt=w * 25 * Ei, wq=w * 5 * Ei, gronwall_res=-1.0)
        rows.append(DecayRecord(*[vals[c] for c in CSV_COLUMNS]))
    return rows


@pytest.fixture
def dp(small_flow):
    return DecayParameters.from_constants(small_flow[2], 0.0)


def test_incomplete_run(small_flow, dp):
    sc = small_flow[2]
    t = np.linspace(0, 0.5, 101)
    recs = _records(t, np.exp(-3 * dp.alpha * t), dp)
    with pytest.raises(IncompleteRun):
        check_lemma1(recs, dp, sc, 0.0, horizon=1.0)
    with pytest.raises(IncompleteRun):
        check_lemma1(recs, dp, sc, 0.0, horizon=0.5)


def test_lemma1_zero_forcing_passes(small_flow, dp):
    sc = small_flow[2]
    H = 5.0 / dp.delta0
    t = np.linspace(0, H, 2001)
    recs = _records(t, 1e-2 * np.exp(-20 * dp.alpha * t), dp)
    v = check_lemma1(recs, dp, sc, 0.0, H)
    assert [x.status for x in v] == [PASS, PASS]
    # a series that does not decay fast enough exceeds the zero bound
    recs = _records(t, 1e-2 * np.exp(-1.0 * dp.alpha1 * t), dp)
    assert all(x.status == FAIL for x in check_lemma1(recs, dp, sc, 0.0, H))


def test_lemma1_gated_on_infinite_modulus(small_flow, dp):
    sc = small_flow[2]
    H = 5.0 / dp.delta0
    t = np.linspace(0, H, 501)
    recs = _records(t, np.exp(-t), dp)
    assert all(x.status == NA for x in check_lemma1(recs, dp, sc, math.inf, H))
    assert all(x.status == NA for x in check_lemma2_3(recs, dp, sc, math.inf, H))


def test_growth_and_bounded_series(small_flow, dp):
    sc = small_flow[2]
    H = 5.0 / dp.delta0
    t = np.linspace(0, H, 1001)
    bounded = _records(t, np.exp(-2 * dp.alpha1 * t), dp)
    assert all(v.status == PASS for v in check_lemma2_3(bounded, dp, sc, 1.0, H))
    growing = _records(t, np.exp(-1.5 * dp.alpha1 * t), dp)
    assert all(v.status == FAIL for v in check_lemma2_3(growing, dp, sc, 1.0, H))


def test_admissibility(small_flow):
    sc = small_flow[2]
    assert check_admissibility(DecayParameters.from_constants(sc, 0.0, 0.9), sc).status == PASS
    assert check_admissibility(DecayParameters.from_constants(sc, 0.0, 1.2), sc).status == FAIL


def test_verify_run_sorted_and_deterministic(small_flow, dp):
    sc = small_flow[2]
    H = 5.0 / dp.delta0
    t = np.linspace(0, H, 1001)
    recs = _records(t, 1e-3 * np.exp(-20 * dp.alpha * t), dp)
    mod = DecayModuli(0.0, 0.0, True, True, H, t[1])
    a = verify_run(recs, dp, sc, mod, H, vanishing_forcing=True)
    b = verify_run(recs, dp, sc, mod, H, vanishing_forcing=True)
    assert [v.claim for v in a] == sorted(v.claim for v in a)
    assert [v.to_dict() for v in a] == [v.to_dict() for v in b]
    assert all(v.status in (PASS, NA) for v in a)


def test_tail_window(dp):
    assert tail_window(10.0, dp) == (5.0, 10.0)
