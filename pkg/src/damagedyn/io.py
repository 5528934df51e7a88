"""Run-directory layout: ledger, threshold audit, snapshots, error report."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .damage import DamageState
from .dynamics import DynamicState, Trajectory
from .energy import LedgerRow
from .fem import element_gradients

THRESHOLD_FIELDS = ("step", "t", "delta", "area_above_lambda_plus_delta", "area_above_M")


def fmt(v) -> str:
    """Locale-independent number formatting with 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(x) for x in row] for row in r]
    return header, np.array(rows) if rows else np.zeros((0, len(header)))


def snapshot_name(step: int) -> str:
    return f"step_{step:06d}"


def write_snapshot(directory: Path, mesh, state: DynamicState):
    name = snapshot_name(state.step_index)
    g = element_gradients(mesh, state.u_curr)
    norms = np.hypot(g[:, 0], g[:, 1])
    write_csv(
        directory / f"{name}.elements.csv",
        ("index", "damaged", "grad_x", "grad_y", "grad_norm"),
        zip(range(mesh.n_triangles), state.damage.damaged.astype(int), g[:, 0], g[:, 1], norms),
    )
    write_csv(
        directory / f"{name}.nodes.csv",
        ("index", "x", "y", "u"),
        zip(range(mesh.n_nodes), mesh.nodes[:, 0], mesh.nodes[:, 1], state.u_curr),
    )


def write_outputs(run_dir, config, scheme, traj: Trajectory, ledger, thresholds, error=None):
    """Write a (possibly partial) run.  Existing files are overwritten."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.echo.json").write_text(config.to_json() + "\n", encoding="utf-8")
    write_csv(run_dir / "ledger.csv", LedgerRow.FIELDS, (r.as_tuple() for r in ledger))
    write_csv(
        run_dir / "threshold_audit.csv",
        THRESHOLD_FIELDS,
        ((r.step, r.t, r.delta, r.area_above_lambda_plus_delta, r.area_above_M) for r in thresholds),
    )
    snap_dir = run_dir / "snapshots"
    if snap_dir.exists():
        for old in snap_dir.glob("step_*.csv"):
            old.unlink()
    if config.snapshot_every > 0:
        snap_dir.mkdir(exist_ok=True)
        for s in traj.states:
            if s.step_index % config.snapshot_every == 0:
                write_snapshot(snap_dir, scheme.mesh, s)
    err_path = run_dir / "error.json"
    if error is not None:
        payload = {
            "type": type(error).__name__,
            "message": str(error),
            "step_index": getattr(error, "step_index", None),
            "energies": list(getattr(error, "energies", ()) or ()),
            "residual": getattr(error, "residual", None),
            "completed_steps": max(len(traj.states) - 1, 0),
        }
        err_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    elif err_path.exists():
        os.remove(err_path)


def load_snapshots(run_dir, mesh):
    """``{step: (u, damaged_flags)}`` for every snapshot pair in ``run_dir``."""
    snap_dir = Path(run_dir) / "snapshots"
    out = {}
    if not snap_dir.exists():
        return out
    for p in sorted(snap_dir.glob("step_*.nodes.csv")):
        step = int(p.name[len("step_") : len("step_") + 6])
        _, nodes = read_csv(p)
        _, els = read_csv(snap_dir / f"{snapshot_name(step)}.elements.csv")
        u = np.zeros(mesh.n_nodes)
        u[nodes[:, 0].astype(int)] = nodes[:, 3]
        flags = np.zeros(mesh.n_triangles, dtype=bool)
        flags[els[:, 0].astype(int)] = els[:, 1] > 0.5
        out[step] = (u, flags)
    return out


def trajectory_from_snapshots(scheme, v0, snaps) -> Trajectory | None:
    """Rebuild a contiguous trajectory from snapshots ``0..n``; ``None`` if any step is missing."""
    if not snaps or 0 not in snaps:
        return None
    steps = sorted(snaps)
    if steps != list(range(len(steps))):
        return None
    traj = Trajectory(v0=v0)
    u0, f0 = snaps[0]
    traj.states.append(
        DynamicState(u0 - scheme.dt * v0, u0, DamageState.from_flags(f0, scheme.mesh.areas), 0, scheme.dt, 0.0)
    )
    for j in steps[1:]:
        u, flags = snaps[j]
        traj.states.append(
            DynamicState(snaps[j - 1][0], u, DamageState.from_flags(flags, scheme.mesh.areas), j, scheme.dt, j * scheme.dt)
        )
    return traj
