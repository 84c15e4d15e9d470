"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str):
    s = s.strip()
    return None if s.lower() in ("", "auto", "none") else float(s)


def _floats(s: str):
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


@dataclass(frozen=True)
class RunConfig:
    grid: int = 32
    nu: float = 1.0
    kappa: float = 0.0
    steady_forcing: str = "vortex"
    steady_amplitude: float = 5.0
    steady_forcing_file: str = ""
    forcing_kind: str = "zero"
    forcing_amplitude: float = 0.0
    forcing_sigma: float = 0.0
    forcing_p: float = 0.0
    forcing_shape: str = "eigenfield"
    forcing_file: str = ""
    z0_kind: str = "eigenfield"
    z0_amplitude: float = 0.1
    z0_file: str = ""
    ratio: float = 0.9
    delta0: float | None = None
    delta: float = 0.0
    dt: float = 1e-3
    horizon: float = 1.0
    scheme: str = "semi_implicit_be"
    linear: bool = False
    solver_method: str = "schur_cg"
    solver_tol: float = 1e-10
    solver_max_iter: int = 500
    n_samples: int = 2000
    slack: float = 0.5
    growth_tol: float = 0.01
    kappas: tuple = (0.1, 0.01, 0.001, 0.0)
    seed: int = 0
    out: str = "runs/default"
    run_id: str = "run"

    def __post_init__(self):
        if self.grid < 8:
            raise ConfigError("grid must be at least 8")
        if not self.nu > 0:
            raise ConfigError("nu must be positive")
        if self.kappa < 0:
            raise ConfigError("kappa must be non-negative")
        if not self.dt > 0 or not self.horizon > 0:
            raise ConfigError("dt and horizon must be positive")
        if not self.ratio > 0:
            raise ConfigError("ratio must be positive")
        if self.delta < 0:
            raise ConfigError("delta must be non-negative")
        if self.forcing_kind not in ("zero", "exponential", "power", "power_exponential", "critical"):
            raise ConfigError(f"unknown forcing_kind {self.forcing_kind!r}")
        if self.scheme not in ("semi_implicit_be", "semi_implicit_cn"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.solver_method not in ("schur_cg", "direct_sparse"):
            raise ConfigError(f"unknown solver_method {self.solver_method!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kappas"] = list(self.kappas)
        return d

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                s = "auto"
            elif isinstance(v, tuple):
                s = ",".join("%.17g" % x for x in v)
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = "%.17g" % v
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"


_CONVERTERS = {
    int: int,
    float: float,
    str: lambda s: s.strip(),
    bool: _bool,
}


def _converter(name):
    if name == "delta0":
        return _opt_float
    if name == "kappas":
        return _floats
    default = RunConfig.__dataclass_fields__[name].default
    return _CONVERTERS[type(default)]


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _converter(key)(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if k not in known:
            raise ConfigError(f"unknown key {k!r}")
        values[k] = v
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a flat config file, or the ``config`` section of a run manifest (``.json``)."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    if p.suffix == ".json":
        try:
            d = json.loads(p.read_text())["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"{p} is not a run manifest: {exc}") from exc
        d = dict(d)
        if "kappas" in d:
            d["kappas"] = tuple(d["kappas"])
        d.update(overrides or {})
        unknown = set(d) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        try:
            return RunConfig(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    return parse_config_text(p.read_text(), overrides)
