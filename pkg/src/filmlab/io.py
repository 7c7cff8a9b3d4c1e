"""File formats: profile CSV, legacy VTK, JSON reports, CSV tables, checkpoints."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .elasticity import ElasticState, Materials, strain_energy_density
from .geometry import Mesh, Profile

__all__ = [
    "write_profile_csv",
    "read_profile_csv",
    "write_vtk",
    "write_json",
    "read_json",
    "write_rows_csv",
    "write_angle_csv",
    "write_exponents_csv",
    "write_trajectory_csv",
    "checkpoint_to_json",
    "checkpoint_from_json",
]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_profile_csv(p: Profile, path) -> None:
    """Columns ``x,h`` with 17 significant digits (exact float round trip)."""
    with open(path, "w", newline="") as fh:
        fh.write("x,h\n")
        for x, h in zip(p.x, p.h):
            fh.write(f"{_fmt(x)},{_fmt(h)}\n")


def read_profile_csv(path) -> Profile:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns x,h")
    return Profile(data[:, 0], data[:, 1])


def write_vtk(mesh: Mesh, path, state: ElasticState | None = None, mat: Materials | None = None) -> None:
    """Legacy ASCII unstructured grid with point ``u`` and cell ``region``/``W0``.

    The transmission formulation carries two displacement copies on the
    interface; the vertex value written is the film-side one.
    """
    nv, nt = mesh.n_vertices, mesh.n_triangles
    u = np.zeros((nv, 2))
    W = np.zeros(nt)
    if state is not None:
        # map per-triangle node copies back onto mesh vertices, film last
        order = np.argsort(mesh.region, kind="stable")
        u[mesh.triangles[order].ravel()] = state.u[state.tri_nodes[order].ravel()]
        W = strain_energy_density(state, mat)
    lines = ["# vtk DataFile Version 3.0", "filmlab mesh", "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines += [f"POINT_DATA {nv}", "VECTORS u double"]
    lines += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in u]
    lines += [f"CELL_DATA {nt}", "SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(r)) for r in mesh.region]
    lines += ["SCALARS W0 double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(w) for w in W]
    Path(path).write_text("\n".join(lines) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(obj, path) -> None:
    """Deterministic JSON: sorted keys, non-finite floats as ``null``."""
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_rows_csv(rows: list, columns: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], (float, np.floating)) else r[c] for c in columns])


def write_angle_csv(report, path) -> None:
    write_rows_csv(report.rows(), ["x", "kind", "theta_deg", "target_deg", "deviation_deg"], path)


def write_exponents_csv(report, path) -> None:
    rows = [{"re": float(z.real), "im": float(z.imag), "multiplicity": int(m)} for z, m in zip(report.exponents, report.multiplicity)]
    write_rows_csv(rows, ["re", "im", "multiplicity"], path)


def write_trajectory_csv(traj, path) -> None:
    rows = []
    for k, it in enumerate(traj.iterates):
        bd = it.breakdown
        rows.append(
            {
                "iteration": k,
                "kind": it.kind,
                "step": float(it.step),
                "grad_norm": float(it.grad_norm),
                "penalized": float(it.penalized),
                "total": float(bd.total),
                "elastic": float(bd.elastic),
                "area": float(bd.area_film),
            }
        )
    write_rows_csv(rows, ["iteration", "kind", "step", "grad_norm", "penalized", "total", "elastic", "area"], path)


def checkpoint_to_json(state: dict, path) -> None:
    """Resume state of the descent; floats survive the round trip exactly."""
    p = state["profile"]
    out = {k: v for k, v in state.items() if k != "profile"}
    out["x"] = p.x.tolist()
    out["h"] = p.h.tolist()
    Path(path).write_text(json.dumps(out, sort_keys=True))


def checkpoint_from_json(path) -> dict:
    d = json.loads(Path(path).read_text())
    d["profile"] = Profile(np.array(d.pop("x")), np.array(d.pop("h")))
    return d
