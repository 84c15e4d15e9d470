"""``kvlab`` command line: steady | spectral | evolve | verify | sweep.

Exit codes: 0 pass, 1 claim failure (or refused because the stability
hypothesis fails), 2 config error, 3 missing/corrupt artifact, 4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .decay import DecayParameters
from .discretization import FlowParameters, GridSpec, VelocityField, norms
from .evolution import EvolutionConfig, run
from .forcing import ForcingProfile, compute_moduli, moduli_series
from .io import (
    ArtifactError,
    read_field_csv,
    read_json,
    read_rows_csv,
    read_timeseries_csv,
    write_field_csv,
    write_json,
    write_plot_data,
    write_rows_csv,
    write_timeseries_csv,
)
from .manufactured import manufactured_solution
from .saddle import NonConvergence, SolverSettings
from .shapes import named_field, steady_forcing
from .spectral import EigenNonConvergence, SpectralConstants, alpha_bound, compute_constants
from .steady import SteadyProblem, SteadyState, check_apriori_bounds, solve_steady
from .verification import (
    FAIL,
    DegenerateWindow,
    IncompleteRun,
    kappa_uniformity_sweep,
    overall_status,
    plot_series,
    report_dict,
    verify_run,
)

EXIT_OK, EXIT_CLAIM, EXIT_CONFIG, EXIT_ARTIFACT, EXIT_SOLVER = 0, 1, 2, 3, 4

log = logging.getLogger("kvlab")

STEADY_FIELD = "steady_field.csv"
STEADY_REPORT = "steady_report.json"
CONSTANTS = "constants.json"
TIMESERIES = "timeseries.csv"
DIAGNOSTICS = "diagnostics.csv"
MANIFEST = "manifest.json"
VERDICTS = "verdicts.json"
DIAG_COLUMNS = ("t", "nF", "nFt_m1", "kndzt_rhs", "max_div", "iterations", "momentum_residual", "divergence_residual")


class Refused(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# builders shared by the subcommands and the scripts


def settings_of(cfg: RunConfig) -> SolverSettings:
    return SolverSettings(cfg.solver_tol, cfg.solver_max_iter, cfg.solver_method)


def steady_problem(cfg: RunConfig) -> SteadyProblem:
    g = GridSpec(cfg.grid)
    f = steady_forcing(cfg.steady_forcing, g, cfg.steady_amplitude, cfg.nu, cfg.steady_forcing_file or None)
    return SteadyProblem(FlowParameters(cfg.nu, cfg.kappa), f)


def decay_parameters(cfg: RunConfig, sc: SpectralConstants, kappa: float | None = None) -> DecayParameters:
    k = cfg.kappa if kappa is None else kappa
    return DecayParameters.from_constants(replace(sc, kappa=k), k, cfg.ratio, cfg.delta0, cfg.delta)


def forcing_profile(cfg: RunConfig, dp: DecayParameters) -> ForcingProfile:
    g = GridSpec(cfg.grid)
    if cfg.forcing_kind == "zero" or cfg.forcing_amplitude == 0:
        return ForcingProfile.zero(g)
    shape = named_field(cfg.forcing_shape, g, cfg.seed, cfg.forcing_file or None)
    if cfg.forcing_kind == "critical":
        # the class that makes the weighted forcing modulus asymptotically constant
        return ForcingProfile(shape, cfg.forcing_amplitude, "power_exponential", dp.alpha1, dp.beta / 2)
    return ForcingProfile(shape, cfg.forcing_amplitude, cfg.forcing_kind, cfg.forcing_sigma, cfg.forcing_p)


def initial_perturbation(cfg: RunConfig) -> VelocityField:
    g = GridSpec(cfg.grid)
    z = named_field(cfg.z0_kind, g, cfg.seed, cfg.z0_file or None)
    n = norms(z)["l2"]
    return z * (cfg.z0_amplitude / n) if n > 0 else z


def evolution_config(cfg: RunConfig, steady: SteadyState, sc: SpectralConstants, kappa: float | None = None,
                     dp: DecayParameters | None = None) -> EvolutionConfig:
    k = cfg.kappa if kappa is None else kappa
    sc_k = replace(sc, kappa=k, alpha_max=alpha_bound(sc, k))
    dp = dp or decay_parameters(cfg, sc, k)
    return EvolutionConfig(FlowParameters(cfg.nu, k), steady, forcing_profile(cfg, dp), initial_perturbation(cfg),
                           cfg.dt, cfg.horizon, dp, sc_k, cfg.scheme, settings_of(cfg), cfg.linear)


# ---------------------------------------------------------------------------
# artifact helpers


def _out(cfg: RunConfig, override: str | None) -> Path:
    p = Path(override or cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_steady(out: Path, cfg: RunConfig) -> SteadyState:
    u, head = read_field_csv(out / STEADY_FIELD)
    if u.grid.n != cfg.grid:
        raise ArtifactError(f"steady field grid {u.grid.n} differs from config grid {cfg.grid}")
    if "pressure" not in head:
        raise ArtifactError("steady field lacks the pressure block")
    try:
        return SteadyState(u, head["pressure"], int(head["picard_iters"]), int(head["newton_iters"]),
                           float(head["residual"]), str(head["status"]))
    except KeyError as exc:
        raise ArtifactError(f"steady field header misses {exc}") from exc


def _load_constants(out: Path) -> SpectralConstants:
    d = read_json(out / CONSTANTS)
    try:
        return SpectralConstants.from_dict(d["constants"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"corrupt constants file: {exc}") from exc


def _manifest_base(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "version": __version__}


def _write_config_echo(out: Path, cfg: RunConfig):
    (out / "config.txt").write_text(cfg.to_text())


# ---------------------------------------------------------------------------
# subcommands


def cmd_steady(cfg: RunConfig, out: Path) -> int:
    prob = steady_problem(cfg)
    st = solve_steady(prob, settings_of(cfg))
    report = check_apriori_bounds(st, prob)
    header = {
        "kind": "steady",
        "nu": cfg.nu,
        "picard_iters": st.picard_iters,
        "newton_iters": st.newton_iters,
        "residual": st.residual,
        "status": st.status,
    }
    write_field_csv(out / STEADY_FIELD, st.u_inf, st.p_inf, header)
    doc = _manifest_base(cfg)
    doc.update({"steady": header, "apriori": report})
    if cfg.steady_forcing == "manufactured":
        doc["convergence"] = manufactured_table(cfg)
        write_rows_csv(out / "convergence_table.csv", ("grid", "max_error", "ratio"),
                       [(r["grid"], r["max_error"], r["ratio"]) for r in doc["convergence"]])
    write_json(out / STEADY_REPORT, _jsonable(doc))
    _write_config_echo(out, cfg)
    print(f"steady: status={st.status} residual={st.residual:.3e} "
          f"nu|grad u|={report['item_i']['lhs']:.6g} <= |f|_-1={report['item_i']['rhs']:.6g}")
    if not st.converged:
        return EXIT_SOLVER
    return EXIT_OK if report["item_i"]["pass"] and report["item_ii"]["pass"] else EXIT_CLAIM


def manufactured_table(cfg: RunConfig, grids=(16, 32, 64)) -> list:
    ms = manufactured_solution(cfg.nu, cfg.steady_amplitude, True)
    rows, prev = [], None
    for n in grids:
        g = GridSpec(n)
        st = solve_steady(SteadyProblem(FlowParameters(cfg.nu, cfg.kappa), ms.forcing(g)), settings_of(cfg))
        err = float(np.abs((st.u_inf - ms.velocity(g)).to_vector()).max())
        rows.append({"grid": n, "max_error": err, "ratio": (prev / err) if prev else float("nan")})
        prev = err
    return rows


def cmd_spectral(cfg: RunConfig, out: Path) -> int:
    st = _load_steady(out, cfg)
    sc = compute_constants(st.u_inf, cfg.nu, cfg.kappa, cfg.n_samples, cfg.seed)
    doc = _manifest_base(cfg)
    doc["constants"] = sc.to_dict()
    write_json(out / CONSTANTS, _jsonable(doc))
    print(f"spectral: lambda1={sc.lambda1:.10g} lambda0={sc.lambda0:.10g} gamma1={sc.gamma1:.10g} "
          f"alpha_max={sc.alpha_max:.10g} A1={'holds' if sc.a1_satisfied else 'FAILS'}")
    return EXIT_OK if sc.a1_satisfied else EXIT_CLAIM


def _require_stable(sc: SpectralConstants, allow_unstable: bool):
    if not sc.a1_satisfied and not allow_unstable:
        raise Refused(f"lambda0 = {sc.lambda0:.6g} <= 0; rerun with --allow-unstable to proceed")
    if not sc.gamma1 > 0:
        raise Refused(f"gamma1 = {sc.gamma1:.6g} <= 0; no admissible decay rate exists")


def _write_run(out: Path, cfg: RunConfig, ecfg: EvolutionConfig, result) -> dict:
    write_timeseries_csv(out / TIMESERIES, result.records)
    write_rows_csv(out / DIAGNOSTICS, DIAG_COLUMNS, [tuple(asdict(d).values()) for d in result.diagnostics])
    write_field_csv(out / "final_field.csv", result.final.z, result.final.q, {"kind": "perturbation", "t": result.final.t})
    dp, sc = ecfg.decay, ecfg.constants
    moduli = compute_moduli(ecfg.forcing, dp, ecfg.horizon, ecfg.dt)
    m, _ = moduli_series(ecfg.forcing, dp, np.array([ecfg.horizon]))
    its = [d.iterations for d in result.diagnostics]
    doc = _manifest_base(cfg)
    doc.update({
        "kappa": ecfg.params.kappa,
        "scheme": ecfg.scheme,
        "constants": sc.to_dict(),
        "decay": dp.to_dict(),
        "forcing": {"kind": ecfg.forcing.kind, "amplitude": ecfg.forcing.amplitude,
                    "sigma": ecfg.forcing.sigma, "p": ecfg.forcing.p},
        "moduli": asdict(moduli),
        "forcing_weighted_at_horizon": float(m[0]),
        "steps": len(result.records) - 1,
        "aborted": result.aborted,
        "error": result.error,
        "solver": {
            "method": ecfg.settings.method,
            "max_iterations": max(its) if its else 0,
            "max_momentum_residual": max(d.momentum_residual for d in result.diagnostics),
            "max_divergence_residual": max(d.divergence_residual for d in result.diagnostics),
            "max_divergence": max(d.max_div for d in result.diagnostics),
        },
    })
    write_json(out / MANIFEST, _jsonable(doc))
    _write_config_echo(out, cfg)
    return doc


def cmd_evolve(cfg: RunConfig, out: Path, allow_unstable: bool = False, kappa: float | None = None,
               dp: DecayParameters | None = None, base: Path | None = None) -> int:
    base = base or out
    st = _load_steady(base, cfg)
    sc = _load_constants(base)
    _require_stable(sc, allow_unstable)
    ecfg = evolution_config(cfg, st, sc, kappa, dp)
    result = run(ecfg)
    doc = _write_run(out, cfg, ecfg, result)
    print(f"evolve: kappa={ecfg.params.kappa:g} steps={doc['steps']} aborted={result.aborted} "
          f"E(T)={result.records[-1].E:.6e}")
    return EXIT_SOLVER if result.aborted else EXIT_OK


def cmd_verify(run_dir: Path) -> int:
    man = read_json(run_dir / MANIFEST)
    try:
        sc = SpectralConstants.from_dict(man["constants"])
        dp = DecayParameters.from_dict(man["decay"])
        mod = man["moduli"]
        from .forcing import DecayModuli

        moduli = DecayModuli(float(mod["M"]), float(mod["M1"]), bool(mod["finite_M"]), bool(mod["finite_M1"]),
                             float(mod["horizon"]), float(mod["dt"]))
        horizon = float(man["config"]["horizon"])
        slack = float(man["config"].get("slack", 0.5))
        growth = float(man["config"].get("growth_tol", 0.01))
        run_id = str(man["config"].get("run_id", "run"))
        vanishing = float(man.get("forcing_weighted_at_horizon", 0.0)) <= 1e-12 * moduli.M or moduli.M == 0
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"manifest schema mismatch: {exc}") from exc
    records = read_timeseries_csv(run_dir / TIMESERIES)
    diags = read_rows_csv(run_dir / DIAGNOSTICS)
    if man.get("aborted"):
        raise IncompleteRun(f"run aborted: {man.get('error')}")
    verdicts = verify_run(records, dp, sc, moduli, horizon, diags, vanishing, slack, growth)
    report = report_dict(run_id, sc, dp, moduli, verdicts)
    write_json(run_dir / VERDICTS, report)
    plots = run_dir / "plot"
    plots.mkdir(exist_ok=True)
    for name, arr in plot_series(records, dp, sc.kappa).items():
        write_plot_data(plots / f"{name}.dat", arr)
    for v in verdicts:
        print(f"  {v.claim:32s} {v.status}")
    status = overall_status(verdicts)
    print(f"verify: {status}")
    return EXIT_CLAIM if status == FAIL else EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, kappas, allow_unstable: bool = False) -> int:
    if not (out / STEADY_FIELD).is_file():
        rc = cmd_steady(cfg, out)
        if rc == EXIT_SOLVER:
            return rc
    if not (out / CONSTANTS).is_file():
        cmd_spectral(cfg, out)
    st = _load_steady(out, cfg)
    sc = _load_constants(out)
    _require_stable(sc, allow_unstable)
    kmax = max(kappas)
    dp = decay_parameters(cfg, sc, kmax)
    base = evolution_config(cfg, st, sc, kmax, dp)
    member_codes = {}

    def runner(ecfg):
        res = run(ecfg)
        k = ecfg.params.kappa
        mdir = out / f"kappa_{k:.6g}"
        mdir.mkdir(exist_ok=True)
        _write_run(mdir, replace(cfg, kappa=k, out=str(mdir)), ecfg, res)
        if res.aborted:
            member_codes[k] = EXIT_SOLVER
        else:
            try:
                member_codes[k] = cmd_verify(mdir)
            except (IncompleteRun, DegenerateWindow) as exc:
                log.error("member kappa=%g: %s", k, exc)
                member_codes[k] = EXIT_CLAIM
        return res

    rep = kappa_uniformity_sweep(base, kappas, dp, runner=runner)
    rep.pop("member_records")
    rep["member_exit_codes"] = {f"{k:.6g}": c for k, c in sorted(member_codes.items())}
    doc = _manifest_base(cfg)
    doc["sweep"] = rep
    write_json(out / "sweep_report.json", _jsonable(doc))
    print(f"sweep: rates={rep['rates']['values']} spread={rep['rates']['relative_spread']} "
          f"envelope={'ok' if rep['sup_envelope']['pass'] else 'violated'} -> {rep['status']}")
    if any(c == EXIT_SOLVER for c in member_codes.values()):
        return EXIT_CLAIM
    return EXIT_OK if rep["status"] == "pass" else EXIT_CLAIM


def _jsonable(obj):
    from .verification import _clean

    return _clean(obj)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvlab", description="Kelvin-Voigt stabilization laboratory")
    p.add_argument("--version", action="version", version=f"kvlab {__version__}")
    p.add_argument("command", choices=("steady", "spectral", "evolve", "verify", "sweep"))
    p.add_argument("--config", required=True, help="flat key=value config file (or a run manifest .json)")
    p.add_argument("--out", help="output directory (overrides the config key 'out')")
    p.add_argument("--kappas", help="comma-separated kappa list for 'sweep'")
    p.add_argument("--allow-unstable", action="store_true", help="proceed even when lambda0 <= 0")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        kappas = cfg.kappas
        if args.kappas:
            try:
                kappas = tuple(float(x) for x in args.kappas.split(",") if x.strip())
            except ValueError as exc:
                raise ConfigError(f"bad --kappas: {exc}") from exc
            if not kappas or min(kappas) < 0:
                raise ConfigError("--kappas needs non-negative values")
        out = _out(cfg, args.out)
        if args.command == "steady":
            return cmd_steady(cfg, out)
        if args.command == "spectral":
            return cmd_spectral(cfg, out)
        if args.command == "evolve":
            return cmd_evolve(cfg, out, args.allow_unstable)
        if args.command == "verify":
            return cmd_verify(out)
        return cmd_sweep(cfg, out, kappas, args.allow_unstable)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except Refused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    except IncompleteRun as exc:
        print(f"incomplete run: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    except (NonConvergence, EigenNonConvergence) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
