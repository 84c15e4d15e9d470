"""Pass/fail verdicts on the decay claims, computed from a run's records.

Pass semantics:

* ``quantitative``: tail sup of the weighted series must not exceed the explicit
  bound times ``1 + slack`` plus an absolute floor (``1e-12`` times the
  series' value at ``t = 0``).
* ``bounded``: the weighted series shows no growth on the window, i.e. its
  fitted log-slope is at most ``growth_tol * 2 alpha1`` (rate at least
  ``-growth_tol * 2 alpha1``). A series that decays below floating-point
  resolution inside the window is bounded.
* ``not-applicable``: the forcing modulus the claim assumes is infinite.

Every verdict stores its window and the constants it was checked against.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .decay import DecayParameters, tau_weight, weight
from .evolution import CSV_COLUMNS, DecayRecord
from .forcing import DecayModuli
from .spectral import SpectralConstants, alpha_bound

PASS, FAIL, NA = "pass", "fail", "not-applicable"

__all__ = [
    "DecayParameters",
    "ClaimVerdict",
    "DegenerateWindow",
    "IncompleteRun",
    "fit_decay_rate",
    "check_lemma1",
    "check_lemma2_3",
    "check_lemma4_6_7_theorems",
    "check_admissibility",
    "check_remark_power_decay",
    "verify_run",
    "kappa_uniformity_sweep",
]


class DegenerateWindow(ValueError):
    pass


class IncompleteRun(ValueError):
    pass


@dataclass(frozen=True)
class ClaimVerdict:
    claim: str
    series: str
    status: str
    kind: str
    sup: float
    bound: float | None
    bounded: bool
    fitted_rate: float | None
    expected_rate: float | None
    window: tuple
    r_squared: float | None = None
    empirical_constant: float | None = None
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return _clean(d)


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


# ---------------------------------------------------------------------------
# rate fitting


def fit_decay_rate(series, window, beta: float = 0.0, t_bar: float | None = None, min_samples: int = 20):
    """Least-squares exponential rate of ``value * tau(t)**beta`` on ``window``.

    Multiplying by ``tau**beta`` removes the algebraic ``t**-beta`` factor of a
    series behaving like ``t**-beta exp(-r t)``, leaving ``r``. Returns
    ``(rate, r_squared)`` with ``rate = -slope``. Values below ``1e2 * eps``
    of the window peak are discarded before fitting.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    t, v = arr[:, 0], arr[:, 1]
    lo, hi = window
    sel = (t >= lo - 1e-12 * max(1.0, abs(lo))) & (t <= hi + 1e-12 * max(1.0, abs(hi)))
    t, v = t[sel], v[sel]
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("series values must be finite and non-negative")
    if v.size == 0 or v.max() == 0:
        raise DegenerateWindow("window holds no positive values")
    keep = v > 1e2 * np.finfo(float).eps * v.max()
    t, v = t[keep], v[keep]
    if t.size < min_samples:
        raise DegenerateWindow(f"only {t.size} resolvable samples in window [{lo}, {hi}]")
    y = np.log(v)
    if beta > 0:
        y = y + beta * np.log(tau_weight(t, 1.0, t_bar) if t_bar is not None else np.maximum(t, 1e-300))
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(-slope), r2


# ---------------------------------------------------------------------------
# helpers


def _arrays(records):
    if not records:
        raise IncompleteRun("no records")
    if isinstance(records[0], DecayRecord):
        data = np.array([r.as_tuple() for r in records], dtype=float)
    else:
        data = np.asarray(records, dtype=float)
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}


def tail_window(horizon: float, dp: DecayParameters) -> tuple:
    lo = 0.5 * horizon
    if dp.t_bar is not None:
        lo = max(lo, 5.0 * dp.t_bar)
    return (float(lo), float(horizon))


def _check_complete(cols, horizon, dp, require_tail=True):
    t = cols["t"]
    if t[-1] < horizon * (1 - 1e-9):
        raise IncompleteRun(f"run stops at t={t[-1]:.6g} before the horizon {horizon:.6g}")
    if require_tail:
        need = 5.0 * max(dp.t_bar or 0.0, 1.0 / dp.delta0)
        if horizon < need * (1 - 1e-9):
            raise IncompleteRun(f"horizon {horizon:.6g} shorter than 5*max(t_bar, 1/delta0) = {need:.6g}")


def _window_mask(t, window):
    return (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)


def _growth_verdict(claim, name, t, s, window, dp, growth_tol, all_t=False, kind="bounded",
                    scale=None, note=""):
    """Boundedness verdict: no growth trend on the tail window."""
    m = _window_mask(t, window)
    sup_window = (0.0, float(t[-1])) if all_t else window
    sup = float(np.max(s)) if all_t else float(np.max(s[m]))
    threshold = -growth_tol * 2.0 * dp.alpha1
    rate, r2 = None, None
    if not np.all(np.isfinite(s)):
        status, bounded, note = FAIL, False, (note + " non-finite values").strip()
    else:
        try:
            rate, r2 = fit_decay_rate(np.column_stack([t, s]), window)
            bounded = rate >= threshold
        except DegenerateWindow:
            bounded = True
            note = (note + " decayed below resolution in window").strip()
        status = PASS if bounded else FAIL
    emp = sup / scale if scale and scale > 0 else None
    return ClaimVerdict(claim, name, status, kind, sup, None, bounded, rate, threshold, sup_window, r2, emp, note,
                        {"fit_window": list(window)})


def _na(claim, name, window, note):
    return ClaimVerdict(claim, name, NA, "gated", float("nan"), None, False, None, None, window, None, None, note)


def _initial_scale(cols, dp, kappa, grad_coef=None):
    """``tau(0)**beta (|z0|^2 + c |grad z0|^2 + kappa |P Lap z0|^2)`` with ``c = kappa`` by default."""
    c = kappa if grad_coef is None else grad_coef
    w0 = float(tau_weight(0.0, dp.beta, dp.t_bar))
    return w0 * (cols["nz"][0] ** 2 + c * cols["ngz"][0] ** 2 + kappa * cols["ndz"][0] ** 2)


def discounted_integral(t, f, delta0):
    """``I(t_k) = exp(-2 delta0 t_k) * int_0^{t_k} exp(2 delta0 s) f(s) ds`` by the trapezoid rule.

    ``f`` is already weighted by ``tau**beta exp(2 alpha1 s)``; the recursion
    avoids forming the large factor ``exp(2 delta0 s)``.
    """
    out = np.zeros_like(f)
    for k in range(1, len(t)):
        d = math.exp(-2.0 * delta0 * (t[k] - t[k - 1]))
        out[k] = d * out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (d * f[k - 1] + f[k])
    return out


# ---------------------------------------------------------------------------
# claims


def check_admissibility(dp: DecayParameters, sc: SpectralConstants) -> ClaimVerdict:
    """Hypothesis on the rate itself: ``0 < alpha < alpha_max`` and ``alpha1 > 0``."""
    amax = alpha_bound(sc, dp.kappa) if sc.gamma1 > 0 else 0.0
    ok = 0 < dp.alpha < amax and dp.alpha1 > 0 and sc.a1_satisfied
    note = "" if ok else f"alpha = {dp.alpha:.6g} not below alpha_max = {amax:.6g} (or A1 fails)"
    return ClaimVerdict("admissible_alpha", "alpha", PASS if ok else FAIL, "hypothesis", dp.alpha, amax, ok,
                        None, None, (0.0, 0.0), None, dp.alpha / amax if amax > 0 else None, note)


def check_lemma1(records, dp: DecayParameters, sc: SpectralConstants, M: float, horizon: float | None = None,
                 slack: float = 0.5, floor_rel: float = 1e-12):
    """Quantitative energy and gradient bounds with explicit constants; returns two verdicts."""
    cols = _arrays(records)
    horizon = float(cols["t"][-1]) if horizon is None else horizon
    _check_complete(cols, horizon, dp)
    win = tail_window(horizon, dp)
    if not math.isfinite(M):
        return [_na("lemma1_energy", "wE", win, "forcing modulus M is infinite"),
                _na("lemma1_gradient", "wgz", win, "forcing modulus M is infinite")]
    t = cols["t"]
    m = _window_mask(t, win)
    out = []
    for claim, name, bound in (
        ("lemma1_energy", "wE", M / (sc.lambda1 * sc.gamma1 * dp.delta0)),
        ("lemma1_gradient", "wgz", M / (sc.lambda1 * sc.gamma1**2 * dp.delta0)),
    ):
        s = cols[name]
        sup = float(np.max(s[m]))
        floor = floor_rel * float(s[0])
        ok = bool(np.isfinite(sup) and sup <= bound * (1 + slack) + floor)
        try:
            rate, r2 = fit_decay_rate(np.column_stack([t, s]), win)
        except DegenerateWindow:
            rate, r2 = None, None
        emp = sup / bound if bound > 0 else None
        out.append(ClaimVerdict(claim, name, PASS if ok else FAIL, "quantitative", sup, bound, ok, rate, None, win,
                                r2, emp, f"slack={slack}, floor={floor:.3e}"))
    return out


def check_lemma2_3(records, dp: DecayParameters, sc: SpectralConstants, M: float, horizon: float | None = None,
                   growth_tol: float = 0.01):
    """Boundedness of the weighted gradient, Stokes-norm and ``z_t`` series on the tail window."""
    cols = _arrays(records)
    horizon = float(cols["t"][-1]) if horizon is None else horizon
    _check_complete(cols, horizon, dp)
    win = tail_window(horizon, dp)
    specs = _lemma23_series(cols, dp, sc.kappa)
    if not math.isfinite(M):
        return [_na(c, n, win, "forcing modulus M is infinite") for c, n, _ in specs]
    t = cols["t"]
    # initial-data term of the Lemma 2 bound carries (1 + kappa) on the gradient
    scale = M + _initial_scale(cols, dp, sc.kappa, 1.0 + sc.kappa)
    return [_growth_verdict(c, n, t, s, win, dp, growth_tol, scale=scale) for c, n, s in specs]


def _lemma23_series(cols, dp, kappa):
    w = weight(cols["t"], dp)
    return [
        ("lemma2_gradient_stokes", "wgz+kappa*wdz", cols["wgz"] + kappa * cols["wdz"]),
        ("lemma2_stokes", "wdz", cols["wdz"]),
        ("lemma3_gradient", "wgz", cols["wgz"]),
        ("lemma3_zt", "w(|zt|^2+2kappa|grad zt|^2)", w * (cols["nzt"] ** 2 + 2 * kappa * cols["ngzt"] ** 2)),
    ]


def check_lemma4_6_7_theorems(records, dp: DecayParameters, sc: SpectralConstants, M1: float, M: float | None = None,
                              horizon: float | None = None, growth_tol: float = 0.01, diagnostics=None):
    """Lemmas 4-7 and both theorems: boundedness checks, all-t where the statement is for all t."""
    cols = _arrays(records)
    horizon = float(cols["t"][-1]) if horizon is None else horizon
    _check_complete(cols, horizon, dp)
    win = tail_window(horizon, dp)
    full = (0.0, float(horizon))
    t = cols["t"]
    kappa = sc.kappa
    w = weight(t, dp)
    nz2, ngz2, ndz2 = cols["nz"] ** 2, cols["ngz"] ** 2, cols["ndz"] ** 2
    nzt2, ngzt2, kdzt2 = cols["nzt"] ** 2, cols["ngzt"] ** 2, cols["kndzt"] ** 2
    q2 = cols["nq"] ** 2 + cols["ngq"] ** 2
    h2 = nz2 + ngz2 + ndz2  # discrete H^2 surrogate
    M = M1 if M is None else M
    init = _initial_scale(cols, dp, kappa)

    m1_claims = [
        ("lemma4_zt", "wzt", cols["wzt"], False),
        ("lemma4_grad_zt", "w|grad zt|^2", w * ngzt2, False),
        ("lemma6_kappa_stokes_zt", "w(kappa|P Lap zt|)^2", w * kdzt2, True),
        ("lemma7_pressure", "wq", cols["wq"], True),
        ("theorem1", "w(H2+zt+q)", w * (h2 + nzt2 + kappa * ngzt2 + q2), False),
        ("theorem_all_t", "w(H2+|zt|^2+q)", w * (h2 + nzt2 + q2), True),
        ("theorem_all_t_kappa", "w(kappa|grad zt|^2+(kappa|P Lap zt|)^2)", w * (kappa * ngzt2 + kdzt2), True),
    ]
    d0 = dp.delta0
    m_claims = [
        ("lemma5_h1", "w(|z|^2+|grad z|^2)", w * (nz2 + ngz2), True),
        ("theorem2_h1", "w|z|_H1^2", w * (nz2 + ngz2), True),
        ("theorem2_int_zt", "I[w(|zt|^2+kappa|grad zt|^2)]", discounted_integral(t, w * (nzt2 + kappa * ngzt2), d0), True),
        ("theorem2_int_stokes", "I[w|P Lap z|^2]", discounted_integral(t, w * ndz2, d0), True),
        ("theorem2_int_pressure", "I[w|q|_H1^2]", discounted_integral(t, w * q2, d0), True),
        ("theorem2_int_kappa_stokes_zt", "I[w(kappa|P Lap zt|)^2]", discounted_integral(t, w * kdzt2, d0), True),
    ]
    out = []
    for claim, name, s, all_t in m1_claims:
        if not math.isfinite(M1):
            out.append(_na(claim, name, full if all_t else win, "forcing modulus M1 is infinite"))
            continue
        out.append(_growth_verdict(claim, name, t, s, win, dp, growth_tol, all_t=all_t, scale=M1 + init))
    for claim, name, s, all_t in m_claims:
        if not math.isfinite(M):
            out.append(_na(claim, name, full if all_t else win, "forcing modulus M is infinite"))
            continue
        out.append(_growth_verdict(claim, name, t, s, win, dp, growth_tol, all_t=all_t, scale=M + init))

    # pressure tracks z_t and P Lap z (proof chain); recorded, not asserted
    corr = _log_correlation(cols["wq"], cols["wzt"] + cols["wdz"], _window_mask(t, win))
    for i, v in enumerate(out):
        if v.claim == "lemma7_pressure":
            out[i] = ClaimVerdict(**{**asdict(v), "extra": {**v.extra, "log_corr_with_wzt_plus_wdz": corr}})

    if diagnostics is not None:
        out.append(_lemma6_triangle(cols, diagnostics))
    return out


def _log_correlation(a, b, mask):
    a, b = a[mask], b[mask]
    ok = (a > 0) & (b > 0)
    if ok.sum() < 3:
        return None
    la, lb = np.log(a[ok]), np.log(b[ok])
    if np.std(la) == 0 or np.std(lb) == 0:
        return None
    return float(np.corrcoef(la, lb)[0, 1])


def _lemma6_triangle(cols, diagnostics):
    """Per-step check of ``kappa |P Lap z_t| <= |z_t| + nu |P Lap z| + |N z| + |F|``."""
    rhs = np.array([d["kndzt_rhs"] if isinstance(d, dict) else d.kndzt_rhs for d in diagnostics], dtype=float)
    lhs = cols["kndzt"][: len(rhs)]
    m = np.isfinite(rhs)
    m[0] = False  # z_t(0) is not a difference quotient
    viol = lhs[m] - rhs[m] * (1 + 1e-10)
    ok = bool(np.all(viol <= 1e-14))
    worst = float(np.max(lhs[m] / np.where(rhs[m] > 0, rhs[m], np.inf))) if m.any() else 0.0
    return ClaimVerdict("lemma6_triangle", "kndzt vs rhs", PASS if ok else FAIL, "per-step", worst, 1.0, ok,
                        None, None, (float(cols["t"][0]), float(cols["t"][-1])), None, worst,
                        "max ratio of left to right side")


def check_remark_power_decay(records, dp: DecayParameters, kappa: float, horizon: float | None = None,
                             forcing_vanishes: bool = True, rel_tol: float = 0.01):
    """Rate of the unweighted Theorem-1 quantity after removing ``t**-beta``: at least ``2 alpha1``."""
    cols = _arrays(records)
    horizon = float(cols["t"][-1]) if horizon is None else horizon
    win = tail_window(horizon, dp)
    name = "H2+zt+q"
    if not forcing_vanishes:
        return _na("remark_power_decay", name, win, "weighted forcing does not vanish at infinity")
    s = (cols["nz"] ** 2 + cols["ngz"] ** 2 + cols["ndz"] ** 2 + cols["nzt"] ** 2 + kappa * cols["ngzt"] ** 2
         + cols["nq"] ** 2 + cols["ngq"] ** 2)
    expected = 2.0 * dp.alpha1
    try:
        rate, r2 = fit_decay_rate(np.column_stack([cols["t"], s]), win, dp.beta, dp.t_bar)
        ok = rate >= expected * (1 - rel_tol)
        note = ""
    except DegenerateWindow:
        rate, r2, ok, note = None, None, True, "decayed below resolution in window"
    return ClaimVerdict("remark_power_decay", name, PASS if ok else FAIL, "rate", float(np.max(s[_window_mask(cols["t"], win)])),
                        None, ok, rate, expected, win, r2, None, note)


def forcing_vanishes(moduli_tail_value: float, M: float) -> bool:
    return M == 0 or moduli_tail_value <= 1e-12 * M


def verify_run(records, dp: DecayParameters, sc: SpectralConstants, moduli: DecayModuli, horizon: float | None = None,
               diagnostics=None, vanishing_forcing: bool = False, slack: float = 0.5, growth_tol: float = 0.01):
    """All verdicts for one run, sorted by claim id."""
    verdicts = [check_admissibility(dp, sc)]
    verdicts += check_lemma1(records, dp, sc, moduli.M, horizon, slack)
    verdicts += check_lemma2_3(records, dp, sc, moduli.M, horizon, growth_tol)
    verdicts += check_lemma4_6_7_theorems(records, dp, sc, moduli.M1, moduli.M, horizon, growth_tol, diagnostics)
    verdicts.append(check_remark_power_decay(records, dp, sc.kappa, horizon, vanishing_forcing))
    return sorted(verdicts, key=lambda v: v.claim)


def overall_status(verdicts) -> str:
    if any(v.status == FAIL for v in verdicts):
        return FAIL
    return PASS


def report_dict(run_id: str, sc: SpectralConstants, dp: DecayParameters, moduli: DecayModuli, verdicts) -> dict:
    return _clean({
        "run_id": run_id,
        "constants": sc.to_dict(),
        "decay": dp.to_dict(),
        "moduli": asdict(moduli),
        "status": overall_status(verdicts),
        "claims": [v.to_dict() for v in sorted(verdicts, key=lambda v: v.claim)],
    })


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def plot_series(records, dp: DecayParameters, kappa: float) -> dict:
    """Two-column (t, value) arrays for each weighted series."""
    cols = _arrays(records)
    t = cols["t"]
    out = {name: np.column_stack([t, cols[name]]) for name in ("wE", "wgz", "wdz", "wzt", "wq")}
    out["E"] = np.column_stack([t, cols["E"]])
    return out


# ---------------------------------------------------------------------------
# kappa sweep


def kappa_uniformity_sweep(base_config, kappas, dp: DecayParameters | None = None, ratio: float = 0.9,
                           rate_band: float = 0.10, sup_factor: float = 2.0, runner=None):
    """Run the same experiment for every ``kappa`` and compare tail sups and fitted energy rates.

    One set of decay parameters is shared by all members. By default it is
    built at the largest ``kappa`` (where the admissible bound is smallest), so
    the shared rate is admissible for every member.
    """
    from dataclasses import replace

    from .discretization import FlowParameters
    from .evolution import run

    runner = runner or run
    kappas = [float(k) for k in kappas]
    if not kappas:
        raise ValueError("at least one kappa is needed")
    sc0 = base_config.constants
    if not sc0.gamma1 > 0:
        raise ValueError("gamma1 must be positive for a kappa sweep")
    if dp is None:
        dp = DecayParameters.from_constants(replace(sc0, kappa=max(kappas)), max(kappas), ratio,
                                            delta=base_config.decay.delta)
    members = []
    for k in kappas:
        sc = replace(sc0, kappa=k, alpha_max=alpha_bound(sc0, k))
        cfg = replace(base_config, params=FlowParameters(base_config.params.nu, k), constants=sc, decay=dp)
        res = runner(cfg)
        if res.aborted:
            members.append({"kappa": k, "aborted": True, "error": res.error})
            continue
        cols = _arrays(res.records)
        win = tail_window(cfg.horizon, dp)
        m = _window_mask(cols["t"], win)
        try:
            rate, r2 = fit_decay_rate(np.column_stack([cols["t"], cols["E"]]), win, dp.beta, dp.t_bar)
        except DegenerateWindow:
            rate, r2 = None, None
        members.append({
            "kappa": k,
            "aborted": False,
            "alpha_max": alpha_bound(sc0, k),
            "tail_sup_wE": float(np.max(cols["wE"][m])),
            "fitted_rate_E": rate,
            "r_squared": r2,
            "window": list(win),
            "records": res.records,
        })
    ok_members = [m for m in members if not m["aborted"]]
    sups = np.array([m["tail_sup_wE"] for m in ok_members])
    rates = [m["fitted_rate_E"] for m in ok_members]
    envelope_ok = bool(len(sups) > 0 and sups.max() <= sup_factor * np.median(sups))
    if any(r is None for r in rates) or not rates:
        rates_ok = False
        spread = None
    else:
        r = np.array(rates)
        spread = float((r.max() - r.min()) / np.median(r))
        rates_ok = spread <= rate_band
    amax = [m["alpha_max"] for m in sorted(ok_members, key=lambda m: m["kappa"])]
    monotone = bool(all(a >= b for a, b in zip(amax, amax[1:])))
    all_ok = len(ok_members) == len(members) and envelope_ok and rates_ok
    return {
        "kappas": kappas,
        "decay": dp.to_dict(),
        "members": [{k: v for k, v in m.items() if k != "records"} for m in members],
        "member_records": {m["kappa"]: m.get("records") for m in members},
        "sup_envelope": {"max": float(sups.max()) if len(sups) else None,
                         "median": float(np.median(sups)) if len(sups) else None,
                         "factor": sup_factor, "pass": envelope_ok},
        "rates": {"values": rates, "relative_spread": spread, "band": rate_band, "pass": rates_ok},
        "alpha_max_monotone_in_kappa": monotone,
        "status": PASS if all_ok else FAIL,
    }
