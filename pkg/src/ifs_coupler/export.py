"""Versioned CSV and deterministic JSON artifacts.

Every CSV starts with a ``#schema=<name>/<version>`` line followed by a header
row.  Floats are written with ``repr`` (shortest round-trip form), ',' as
separator and LF line endings, so equal inputs give byte-identical files.
"""

import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
SCHEMAS = {
    "trajectory": "ifs_coupler.trajectory",
    "ensemble": "ifs_coupler.ensemble",
    "augmented": "ifs_coupler.augmented",
    "curve": "ifs_coupler.curve",
    "sensitivity": "ifs_coupler.sensitivity",
    "coupling_steps": "ifs_coupler.coupling_steps",
}


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(kind, header, rows):
    buf = io.StringIO(newline="")
    buf.write(f"#schema={SCHEMAS[kind]}/{SCHEMA_VERSION}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, kind, header, rows):
    text = csv_text(kind, header, rows)
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return Path(path)


def _state_cols(prefix, dim):
    return [f"{prefix}{i}" for i in range(dim)]


def write_trajectory(path, traj):
    """Columns: index, generation, x0.., time (time of the division producing the state)."""
    states = np.asarray(traj.states)
    dim = states.shape[1]
    rows = []
    for k, s in enumerate(states):
        t = math.nan if k == 0 else float(traj.times[k - 1])
        rows.append([k, k, *s.tolist(), t])
    return write_csv(path, "trajectory", ["index", "generation", *_state_cols("x", dim), "time"], rows)


def write_ensemble(path, ens, times=None):
    pts = np.asarray(ens.points)
    dim = pts.shape[1]
    rows = []
    for i, p in enumerate(pts):
        t = math.nan if times is None else float(times[i])
        rows.append([i, ens.generation, *p.tolist(), t])
    return write_csv(path, "ensemble", ["index", "generation", *_state_cols("x", dim), "time"], rows)


def read_ensemble(path):
    """Points ``(N, d)`` from an ensemble or trajectory CSV."""
    with open(Path(path), encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty ensemble file")
    if lines[0].startswith("#schema="):
        tag = lines[0][len("#schema="):]
        name = tag.split("/")[0]
        if name not in (SCHEMAS["ensemble"], SCHEMAS["trajectory"]):
            raise ValueError(f"{path}: schema {tag!r} is not an ensemble")
        lines = lines[1:]
    header = lines[0].split(",")
    cols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if not cols:
        raise ValueError(f"{path}: no state columns x0, x1, ...")
    pts = np.array([[float(ln.split(",")[i]) for i in cols] for ln in lines[1:]], dtype=float)
    if pts.size == 0:
        raise ValueError(f"{path}: ensemble has no rows")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{path}: non-finite state values")
    return pts


def write_augmented(path, traj):
    pairs = np.asarray(traj.pairs)
    dim = pairs.shape[2]
    rows = []
    for k in range(len(pairs)):
        theta = "" if k == 0 else int(traj.thetas[k - 1])
        rows.append([k, *pairs[k, 0].tolist(), *pairs[k, 1].tolist(), theta])
    header = ["k", *_state_cols("x", dim), *_state_cols("y", dim), "theta"]
    return write_csv(path, "augmented", header, rows)


def write_curve(path, curve):
    rows = [[r["n"], r["W1"], r["FM"], r["stderr"]] for r in curve]
    return write_csv(path, "curve", ["n", "W1", "FM", "stderr"], rows)


def write_sensitivity(path, grid):
    header = ["eps", "a_tilde", "q", "p_holder", "n0", "C6", "status"]
    return write_csv(path, "sensitivity", header, [[r[h] for h in header] for r in grid])


def write_coupling_steps(path, theta_freq, mean_kappa):
    rows = [[k + 1, f, m] for k, (f, m) in enumerate(zip(theta_freq, mean_kappa))]
    return write_csv(path, "coupling_steps", ["k", "theta_frequency", "mean_kappa"], rows)


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, Path):
        return str(obj)
    return obj


def json_text(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(json_text(obj))
    return Path(path)
