"""Command line front end: ``filmlab <command> --config run.toml --out dir``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import check_young_dupre, el_residual, fit_decay_exponent
from .config import RunConfig, load_config, parse_sector, resolve
from .elasticity import BoundaryMode, solve_equilibrium, zero_state
from .energy import Tensions, theta_star, total_energy
from .errors import ConfigError, FilmLabError, NoBorder, TooFewSegments
from .flow import Evaluator, minimize
from .geometry import contact_angles, mesh_subgraph, zero_set
from .io import (
    checkpoint_from_json,
    checkpoint_to_json,
    write_angle_csv,
    write_exponents_csv,
    write_json,
    write_profile_csv,
    write_rows_csv,
    write_trajectory_csv,
    write_vtk,
)
from .pencil import SectorSpec, assemble_pencil, singular_exponents

log = logging.getLogger("filmlab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _manifest(cmd: str, rc: RunConfig, args, extra=None) -> dict:
    flow = rc.flow.resolved(rc.profile, rc.tensions).to_dict()
    out = {
        "command": cmd,
        "version": __version__,
        "config": rc.raw,
        "resolved_flow": flow,
        "seed": rc.raw["run"]["seed"],
        "threads": args.threads,
        "quasi_monotone": rc.materials.quasi_monotone,
    }
    if extra:
        out.update(extra)
    return out


def _mesh(rc: RunConfig, p):
    dom, m = rc.raw["domain"], rc.raw["mesh"]
    return mesh_subgraph(p, dom["H"], m["target"], periodic=dom["lateral"] == "periodic", grade=m["grade"], max_aspect=m["max_aspect"])


def _state(rc: RunConfig, p):
    mesh = _mesh(rc, p)
    if rc.materials.e0 == 0.0:
        return mesh, zero_state(mesh, rc.materials)
    return mesh, solve_equilibrium(mesh, rc.materials, BoundaryMode(lateral=rc.raw["domain"]["lateral"]))


def cmd_solve(rc: RunConfig, out: Path, args) -> int:
    p = rc.profile
    mesh, state = _state(rc, p)
    bd = total_energy(p, state, rc.materials, rc.tensions)
    write_vtk(mesh, out / "mesh.vtk", state, rc.materials)
    write_profile_csv(p, out / "profile.csv")
    write_json({**bd.to_dict(rc.tensions), **state.summary(), "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles}, out / "energy.json")
    write_json(_manifest("solve", rc, args), out / "manifest.json")
    return EXIT_OK


def _finish_minimize(rc: RunConfig, traj, out: Path):
    q = traj.profile
    t = rc.tensions
    tol = math.radians(rc.raw["run"]["angle_tol_deg"])
    rep = check_young_dupre(q, t, tol)
    write_profile_csv(q, out / "final_profile.csv")
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_angle_csv(rep, out / "angle_report.csv")
    write_json(rep.to_dict(), out / "angle_report.json")
    state = None
    if rc.materials.e0 != 0.0:
        state = Evaluator(rc.materials, t, traj.config).mesh_and_solve(q)
    try:
        el = el_residual(q, state, t).to_dict()
    except TooFewSegments as exc:
        el = {"error": str(exc)}
    write_json(el, out / "el_residual.json")
    bd = traj.final.breakdown
    write_json({**bd.to_dict(t), "penalized": traj.final.penalized, "lam": traj.config.lam, "target_area": traj.config.target_area}, out / "energy.json")
    summary = {
        "converged": traj.converged,
        "reason": traj.reason,
        "iterations": traj.state["iteration"],
        "final_grad_norm": traj.final.grad_norm,
        "n_solves": traj.state.get("n_solves", 0),
        "angles_passed": rep.passed,
        "max_deviation_deg": math.degrees(rep.max_deviation),
    }
    write_json(summary, out / "summary.json")
    return rep, summary


def _run_minimize(rc: RunConfig, out: Path, resume=None):
    ck_dir = out / "checkpoints"
    ck_dir.mkdir(parents=True, exist_ok=True)
    every = rc.raw["run"]["checkpoint_every"]

    def cb(k, traj, state):
        if k % every == 0:
            checkpoint_to_json(state, ck_dir / f"ckpt_{k:07d}.json")

    traj = minimize(rc.profile, rc.materials, rc.tensions, rc.flow, resume=resume, callback=cb)
    k = traj.state["iteration"]
    checkpoint_to_json(traj.state, ck_dir / f"ckpt_{k:07d}.json")
    checkpoint_to_json(traj.state, out / "checkpoint.json")
    return traj


def cmd_minimize(rc: RunConfig, out: Path, args) -> int:
    resume = checkpoint_from_json(args.resume) if args.resume else None
    traj = _run_minimize(rc, out, resume)
    _finish_minimize(rc, traj, out)
    write_json(_manifest("minimize", rc, args, {"resumed_from": str(args.resume) if args.resume else None}), out / "manifest.json")
    return EXIT_OK


def _sweep_row(job):
    raw, base_dir, param, value, row_dir = job
    raw = copy.deepcopy(raw)
    if param == "beta":
        t = raw["tensions"]
        try:
            tt = Tensions.from_beta(float(value), t["gamma_f"], t["gamma_fs"])
        except FilmLabError as exc:
            return {param: value, "theta_measured_deg": float("nan"), "theta_target_deg": float("nan"), "status": f"error: {exc}"}
        t["gamma_s"] = tt.gamma_s
    else:
        raw["materials"]["e0"] = float(value)
    try:
        rc = resolve(raw, Path(base_dir))
        out = Path(row_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj = _run_minimize(rc, out)
        rep, summary = _finish_minimize(rc, traj, out)
    except FilmLabError as exc:
        return {param: value, "theta_measured_deg": float("nan"), "theta_target_deg": float("nan"), "status": f"error: {exc}"}
    borders = [e.theta for e in rep.entries if e.kind != "valley"]
    # no contact point at all: the film covers the substrate, angle 0
    measured = float(np.mean(borders)) if borders else 0.0
    status = "ok" if summary["converged"] else f"not-converged: {summary['reason']}"
    return {
        param: float(value),
        "theta_measured_deg": math.degrees(measured),
        "theta_target_deg": math.degrees(theta_star(rc.tensions)),
        "status": status,
    }


def cmd_sweep(rc: RunConfig, out: Path, args) -> int:
    sw = rc.raw["sweep"]
    values = sw["values"]
    if not values:
        raise ConfigError("'sweep.values' is empty")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"'sweep.values' entries must be numbers, got {v!r}")
    param = sw["parameter"]
    jobs = [(rc.raw, str(rc.base_dir), param, v, str(out / "rows" / f"row_{i:03d}")) for i, v in enumerate(values)]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as ex:
            rows = list(ex.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    write_rows_csv(rows, [param, "theta_measured_deg", "theta_target_deg", "status"], out / "sweep.csv")
    write_json(_manifest("sweep", rc, args, {"rows": rows}), out / "manifest.json")
    ok = sum(r["status"].startswith(("ok", "not-converged")) for r in rows)
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_pencil(rc: RunConfig, out: Path, args) -> int:
    pc = rc.raw["pencil"]
    spec = parse_sector(rc.raw)
    strip = tuple(float(v) for v in pc["strip"])
    if len(strip) != 2 or not strip[0] < strip[1]:
        raise ConfigError("'pencil.strip' must be [lo, hi] with lo < hi")
    try:
        pen = assemble_pencil(spec, rc.materials, int(pc["n_angular"]))
    except FilmLabError as exc:
        raise ConfigError(f"[pencil]: {exc}") from exc
    rep = singular_exponents(pen, strip)
    warnings = []
    if not rep.quasi_monotone:
        warnings.append("materials are not quasi-monotone: the decay bound alpha > 1/2 is not guaranteed")
    if not rep.tau_condition:
        warnings.append("sector geometry fails the tau condition")
    write_exponents_csv(rep, out / "exponents.csv")
    d = rep.to_dict()
    d.update(
        {
            "predicted_decay": min(rep.alpha_pred, 1.0),
            "warnings": warnings,
            "angles": [spec.theta1, spec.theta2, spec.theta3],
        }
    )
    write_json(d, out / "pencil.json")
    write_json(_manifest("pencil", rc, args), out / "manifest.json")
    return EXIT_OK


def cmd_angles(rc: RunConfig, out: Path, args) -> int:
    tol = math.radians(rc.raw["run"]["angle_tol_deg"])
    rep = check_young_dupre(rc.profile, rc.tensions, tol)
    write_angle_csv(rep, out / "angle_report.csv")
    write_json(rep.to_dict(), out / "angle_report.json")
    write_json(_manifest("angles", rc, args), out / "manifest.json")
    return EXIT_OK


def cmd_decay(rc: RunConfig, out: Path, args) -> int:
    dc = rc.raw["decay"]
    mat = rc.materials
    e0 = mat.e0 if dc["e0"] is None else float(dc["e0"])
    if not e0 > 0:
        raise ConfigError("'decay.e0' (or 'materials.e0') must be positive for a decay fit")
    mat = replace(mat, e0=e0)
    p = rc.profile
    want = dc["border"]
    if want not in ("left", "right"):
        raise ConfigError("'decay.border' must be 'left' or 'right'")
    # "left" is the left end of an island, where the film lies to the right
    side = "right" if want == "left" else "left"
    corners = [c for c in contact_angles(p, zero_set(p)) if c.kind == "border" and c.side == side]
    if not corners:
        raise NoBorder(f"profile has no {want} island border")
    c = corners[0]
    j = c.index + (1 if side == "right" else -1)
    theta = math.atan2(p.h[j] - p.h[c.index], abs(p.x[j] - p.x[c.index]))
    q = p.refined_near(c.x0, int(dc["refine_depth"]))
    dom, m = rc.raw["domain"], rc.raw["mesh"]
    mesh = mesh_subgraph(q, dom["H"], m["target"], periodic=dom["lateral"] == "periodic", grade=m["grade"], max_aspect=m["max_aspect"], min_angle_deg=0.0)
    state = solve_equilibrium(mesh, mat, BoundaryMode(lateral=dom["lateral"]))
    fit = fit_decay_exponent(state, (c.x0, 0.0), float(dc["r_max"]), int(dc["n_radii"]))
    rep = singular_exponents(assemble_pencil(SectorSpec.border(theta), mat))
    pred = min(rep.alpha_pred, 1.0)
    d = fit.to_dict()
    d.update(
        {
            "corner_angle_deg": math.degrees(theta),
            "alpha_pred": pred,
            "two_alpha_pred": 2 * pred,
            "relative_gap": abs(fit.two_alpha - 2 * pred) / (2 * pred),
            "quasi_monotone": mat.quasi_monotone,
        }
    )
    write_json(d, out / "decay.json")
    write_json(_manifest("decay", rc, args), out / "manifest.json")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "pencil": cmd_pencil,
    "angles": cmd_angles,
    "decay": cmd_decay,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filmlab", description="Thin-film energy minimisation and corner analysis.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--seed", type=int, default=None, help="overrides run.seed")
    ap.add_argument("--resume", type=Path, default=None, help="checkpoint JSON to continue from (minimize)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        overrides = {"run": {"seed": args.seed}} if args.seed is not None else None
        rc = load_config(args.config, overrides)
        if args.resume is not None and not args.resume.exists():
            raise ConfigError(f"--resume: no such checkpoint {args.resume}")
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](rc, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FilmLabError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
