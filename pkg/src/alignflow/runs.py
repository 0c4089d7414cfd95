"""Executing manifests and writing their CSV outputs."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunManifest
from .dynamics import Trajectory, simulate
from .ensemble import Ensemble, sample_initial
from .errors import AlignflowError, SimulationFailure
from .metrics import FRAME_COLUMNS


def header_lines(manifest: RunManifest | None, extra=None, inherited=None):
    """Comment header for an output file; ``inherited`` carries hash and seed from a source file."""
    inherited = inherited or {}
    digest = manifest.digest if manifest is not None else inherited.get("manifest", "none")
    seed = manifest.seed if manifest is not None else inherited.get("seed", "none")
    lines = [f"# alignflow {__version__}", f"# manifest {digest}", f"# seed {seed}"]
    for key, val in (extra or {}).items():
        lines.append(f"# {key} {val}")
    return lines


def initial_ensemble(manifest: RunManifest) -> Ensemble:
    return sample_initial(manifest.initial, manifest.n, seed=manifest.seed)


def run_manifest(manifest: RunManifest) -> Trajectory:
    """Sample the initial data and integrate; dynamics errors become :class:`SimulationFailure`."""
    e0 = initial_ensemble(manifest)
    try:
        return simulate(e0, manifest.sim, manifest.potential, manifest.kernel,
                        zeta=manifest.zeta, xi=manifest.xi)
    except AlignflowError as exc:
        raise SimulationFailure(f"simulation stage failed: {exc}", time=getattr(exc, "time", None),
                                cause=exc) from exc


def _fmt(value):
    return repr(float(value))


def write_csv(path, header, columns, rows):
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def frames_table(traj: Trajectory):
    return [f.as_row() for f in traj.frames]


def final_state_table(e: Ensemble):
    d = e.dim
    columns = [f"x{k + 1}" for k in range(d)] + [f"v{k + 1}" for k in range(d)] + ["m"]
    rows = np.column_stack([e.positions, e.velocities, e.weights])
    return columns, rows


def write_outputs(traj: Trajectory, manifest: RunManifest, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    head = header_lines(manifest)
    write_csv(out / "frames.csv", head, FRAME_COLUMNS, frames_table(traj))
    cols, rows = final_state_table(traj.final)
    write_csv(out / "final_state.csv", head + [f"# t {_fmt(traj.final.time)}"], cols, rows)
    echo = "\n".join(head + ["# resolved manifest; loadable with `alignflow simulate`", ""])
    (out / "manifest.toml").write_text(echo + dump_toml(manifest.resolved))
    return out


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value) if isinstance(value, int) or np.isfinite(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {value!r} as TOML")


def dump_toml(data: dict, prefix=""):
    """Minimal TOML writer for nested tables of scalars and arrays; ``None`` values are skipped."""
    scalars = [(k, v) for k, v in data.items() if not isinstance(v, dict) and v is not None]
    tables = [(k, v) for k, v in data.items() if isinstance(v, dict)]
    lines = [f"{k} = {_toml_value(v)}" for k, v in scalars]
    text = "\n".join(lines) + ("\n" if lines else "")
    for key, sub in tables:
        name = f"{prefix}{key}"
        text += f"\n[{name}]\n" + dump_toml(sub, name + ".")
    return text


def read_header(path):
    """``# key value`` comment lines at the top of a CSV file, as a dict."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition(" ")
            meta.setdefault(key, val)
    return meta


def read_frames(path):
    """Columns of a frames-style CSV as a dict of float arrays (comment lines skipped)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise ValueError(f"{path}: no header row")
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}
