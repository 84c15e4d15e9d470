"""Portable artifacts: field CSV with JSON header, time-series CSV, JSON manifests, plot data.

Field CSV layout::

    # {"grid": 16, ...json header...}
    component,i,j,value
    u,0,0,0
    ...

``u`` rows cover all ``(n+1) x n`` x-faces (wall faces included, always 0),
then ``v`` rows cover the ``n x (n+1)`` y-faces, then optional ``p`` rows the
``n x n`` cells, each C-ordered by ``(i, j)``. Floats are written with
``%.17g`` so a read-back is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .discretization import GridSpec, PressureField, VelocityField
from .evolution import CSV_COLUMNS, DecayRecord


class ArtifactError(RuntimeError):
    """Missing, truncated or schema-violating artifact."""


def fmt(x) -> str:
    return "%.17g" % float(x)


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj))


def read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ArtifactError(f"missing artifact {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"corrupt JSON in {p}: {exc}") from exc


def write_field_csv(path, velocity: VelocityField, pressure: PressureField | None = None, header: dict | None = None):
    g = velocity.grid
    head = dict(header or {})
    head["grid"] = g.n
    head["has_pressure"] = pressure is not None
    lines = ["# " + json.dumps(head, sort_keys=True, allow_nan=False), "component,i,j,value"]
    for name, arr in (("u", velocity.u), ("v", velocity.v)) + ((("p", pressure.p),) if pressure is not None else ()):
        for (i, j), val in np.ndenumerate(arr):
            lines.append(f"{name},{i},{j},{fmt(val)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path):
    """Returns ``(VelocityField, header)``; the header gains ``pressure`` when present."""
    p = Path(path)
    if not p.is_file():
        raise ArtifactError(f"missing field file {p}")
    text = p.read_text().splitlines()
    try:
        if not text or not text[0].startswith("# "):
            raise ValueError("missing JSON header line")
        head = json.loads(text[0][2:])
        n = int(head["grid"])
        if text[1].strip() != "component,i,j,value":
            raise ValueError("bad column header")
        g = GridSpec(n)
        u = np.zeros((n + 1, n))
        v = np.zeros((n, n + 1))
        pr = np.zeros((n, n))
        target = {"u": u, "v": v, "p": pr}
        count = {"u": 0, "v": 0, "p": 0}
        for row in text[2:]:
            if not row.strip():
                continue
            c, i, j, val = row.split(",")
            target[c][int(i), int(j)] = float(val)
            count[c] += 1
        if count["u"] != u.size or count["v"] != v.size:
            raise ValueError("truncated velocity data")
        if head.get("has_pressure") and count["p"] != pr.size:
            raise ValueError("truncated pressure data")
        vel = VelocityField(u, v, g)
    except (ValueError, KeyError, IndexError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"corrupt field file {p}: {exc}") from exc
    if head.get("has_pressure"):
        head["pressure"] = PressureField(pr, g)
    return vel, head


def write_timeseries_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([fmt(x) for x in r.as_tuple()])


def read_timeseries_csv(path) -> list:
    p = Path(path)
    if not p.is_file():
        raise ArtifactError(f"missing time series {p}")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ArtifactError(f"time series {p} does not have the expected columns {CSV_COLUMNS}")
    try:
        return [DecayRecord(*[float(x) for x in row]) for row in rows[1:] if row]
    except (TypeError, ValueError) as exc:
        raise ArtifactError(f"corrupt time series {p}: {exc}") from exc


def write_rows_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


def read_rows_csv(path) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise ArtifactError(f"missing file {p}")
    with open(p, newline="") as fh:
        r = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in r]


def write_plot_data(path, arr):
    with open(path, "w") as fh:
        for t, v in arr:
            fh.write(f"{fmt(t)} {fmt(v)}\n")
