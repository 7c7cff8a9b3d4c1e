import json
import math

import numpy as np
import pytest

from filmlab.cli import main
from filmlab.config import load_config
from filmlab.elasticity import Materials, solve_equilibrium
from filmlab.energy import EnergyBreakdown, Tensions, total_energy
from filmlab.errors import ConfigError
from filmlab.flow import FlowConfig, minimize
from filmlab.geometry import Profile, mesh_subgraph
from filmlab.io import (
    checkpoint_from_json,
    checkpoint_to_json,
    read_json,
    read_profile_csv,
    write_json,
    write_profile_csv,
    write_vtk,
)

from conftest import island


def _write(tmp_path, text, name="run.toml"):
    f = tmp_path / name
    f.write_text(text)
    return f


ISLAND = """
[profile]
kind = "rectangle-island"
n = 60
[flow]
max_outer = 3000
"""


# ---------------------------------------------------------------- file formats


def test_profile_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    p = Profile(np.sort(rng.uniform(0, 1, 30)), rng.uniform(0, 1, 30))
    write_profile_csv(p, tmp_path / "p.csv")
    q = read_profile_csv(tmp_path / "p.csv")
    assert np.array_equal(p.x, q.x) and np.array_equal(p.h, q.h)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,h"


def test_json_nan_and_sorting(tmp_path):
    write_json({"b": float("nan"), "a": np.float64(1.5), "c": np.arange(2)}, tmp_path / "x.json")
    text = (tmp_path / "x.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(tmp_path / "x.json") == {"a": 1.5, "b": None, "c": [0, 1]}


def test_vtk_structure(tmp_path):
    mat = Materials(1, 1, 2, 2, e0=0.05)
    mesh = mesh_subgraph(island(20), 0.5, 0.05)
    write_vtk(mesh, tmp_path / "m.vtk", solve_equilibrium(mesh, mat), mat)
    lines = (tmp_path / "m.vtk").read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert f"POINTS {mesh.n_vertices} double" in lines
    assert f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}" in lines
    assert "SCALARS region int 1" in lines and "SCALARS W0 double 1" in lines


def test_checkpoint_round_trip(tmp_path):
    traj = minimize(island(40), Materials(1, 1, 2, 2), Tensions(1, 1.5, 1), FlowConfig(max_outer=20))
    checkpoint_to_json(traj.state, tmp_path / "c.json")
    st = checkpoint_from_json(tmp_path / "c.json")
    assert np.array_equal(st["profile"].h, traj.state["profile"].h)
    assert st["step"] == traj.state["step"] and st["prev_g"] == traj.state["prev_g"]


# ---------------------------------------------------------------- config


def test_defaults_resolve():
    rc = load_config()
    assert rc.profile.n_nodes == 401
    assert rc.tensions == Tensions(1.0, 1.5, 1.0)


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError, match="flow.stepp"):
        load_config(_write(tmp_path, "[flow]\nstepp = 1\n"))
    with pytest.raises(ConfigError, match=r"\[bogus\]"):
        load_config(_write(tmp_path, "[bogus]\nx = 1\n"))


def test_invalid_values(tmp_path):
    with pytest.raises(ConfigError, match="tension"):
        load_config(_write(tmp_path, "[tensions]\ngamma_s = 0.5\ngamma_fs = 1.0\n"))
    with pytest.raises(ConfigError, match="lateral"):
        load_config(_write(tmp_path, '[domain]\nlateral = "sideways"\n'))
    with pytest.raises(ConfigError, match="malformed"):
        load_config(_write(tmp_path, "[flow\n"))


def test_non_monotone_materials_warn(tmp_path, caplog):
    load_config(_write(tmp_path, "[materials]\nmu_f = 3.0\n"))
    assert "quasi-monotone" in caplog.text


# ---------------------------------------------------------------- commands


def test_solve_flat_zero_mismatch(tmp_path):
    cfg = _write(tmp_path, '[profile]\nkind = "flat"\nn = 16\nheight = 0.2\n')
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    e = read_json(tmp_path / "o" / "energy.json")
    assert e["elastic"] == 0.0
    assert (tmp_path / "o" / "mesh.vtk").exists()
    man = read_json(tmp_path / "o" / "manifest.json")
    assert man["config"]["materials"]["mu_s"] == 2.0  # defaults echoed


def test_solve_island_reload_matches(tmp_path):
    cfg = _write(tmp_path, "[profile]\nn = 40\n[materials]\ne0 = 0.05\n[domain]\nH = 0.5\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    e = read_json(tmp_path / "o" / "energy.json")
    rc = load_config(cfg)
    p = read_profile_csv(tmp_path / "o" / "profile.csv")
    s = solve_equilibrium(mesh_subgraph(p, 0.5), rc.materials)
    bd = total_energy(p, s, rc.materials, rc.tensions)
    assert abs(bd.total - e["total"]) <= 1e-12 * abs(bd.total)
    assert EnergyBreakdown.from_dict(e).elastic == pytest.approx(bd.elastic, rel=1e-12)


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "[flow]\nstepp = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "flow.stepp" in capsys.readouterr().err


def test_numeric_failure_exit_code(tmp_path):
    # a profile too flat for the decay study has no border to fit at
    cfg = _write(tmp_path, '[profile]\nkind = "flat"\nn = 16\n[materials]\ne0 = 0.05\n')
    assert main(["decay", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_minimize_stationary_start(tmp_path):
    cfg = _write(tmp_path, '[profile]\nkind = "flat"\nn = 40\nheight = 0.2\n')
    assert main(["minimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = read_json(tmp_path / "o" / "summary.json")
    assert s["converged"] is True
    assert len(list((tmp_path / "o" / "checkpoints").iterdir())) == 1


def test_minimize_outputs_and_determinism(tmp_path):
    cfg = _write(tmp_path, ISLAND)
    for d in ("a", "b"):
        assert main(["minimize", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for f in ("final_profile.csv", "trajectory.csv", "angle_report.csv", "angle_report.json", "energy.json", "summary.json", "manifest.json", "el_residual.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    rep = read_json(tmp_path / "a" / "angle_report.json")
    assert rep["beta"] == 0.5


def test_minimize_max_iterations_exit_zero(tmp_path):
    cfg = _write(tmp_path, "[profile]\nn = 60\n[flow]\nmax_outer = 5\n")
    assert main(["minimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = read_json(tmp_path / "o" / "summary.json")
    assert s["converged"] is False and s["reason"] == "max-iterations"


def test_resume_bitwise(tmp_path):
    full = _write(tmp_path, "[profile]\nn = 60\n[flow]\nmax_outer = 80\n", "full.toml")
    half = _write(tmp_path, "[profile]\nn = 60\n[flow]\nmax_outer = 40\n", "half.toml")
    assert main(["minimize", "--config", str(full), "--out", str(tmp_path / "full")]) == 0
    assert main(["minimize", "--config", str(half), "--out", str(tmp_path / "half")]) == 0
    ck = tmp_path / "half" / "checkpoint.json"
    assert main(["minimize", "--config", str(full), "--out", str(tmp_path / "res"), "--resume", str(ck)]) == 0
    a = (tmp_path / "full" / "final_profile.csv").read_bytes()
    b = (tmp_path / "res" / "final_profile.csv").read_bytes()
    assert a == b
    assert read_json(tmp_path / "res" / "summary.json")["iterations"] == 80


def test_resume_missing_checkpoint(tmp_path):
    assert main(["minimize", "--out", str(tmp_path / "o"), "--resume", str(tmp_path / "none.json")]) == 2


def test_sweep_empty_is_config_error(tmp_path):
    cfg = _write(tmp_path, '[sweep]\nparameter = "beta"\nvalues = []\n')
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_singleton_sweep_equals_minimize(tmp_path):
    cfg = _write(tmp_path, ISLAND + '[sweep]\nparameter = "beta"\nvalues = [0.5]\n')
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    assert main(["minimize", "--config", str(cfg), "--out", str(tmp_path / "m")]) == 0
    row = (tmp_path / "s" / "rows" / "row_000" / "final_profile.csv").read_bytes()
    assert row == (tmp_path / "m" / "final_profile.csv").read_bytes()
    lines = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "beta,theta_measured_deg,theta_target_deg,status"
    assert len(lines) == 2


def test_sweep_partial_failure_and_threads(tmp_path):
    cfg = _write(tmp_path, ISLAND + '[sweep]\nparameter = "beta"\nvalues = [0.5, 1.7]\n')
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"), "--threads", "2"]) == 0
    rows = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[1:]
    assert rows[0].endswith(",ok")
    assert "error" in rows[1]


def test_pencil_command(tmp_path):
    cfg = _write(tmp_path, '[pencil]\nkind = "crack"\nn_angular = 128\n[materials]\nmu_s = 1.0\nlambda_s = 1.0\n')
    assert main(["pencil", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    d = read_json(tmp_path / "o" / "pencil.json")
    assert d["alpha_pred"] == pytest.approx(0.5, abs=1e-4)
    assert "sector geometry fails the tau condition" in d["warnings"]
    assert (tmp_path / "o" / "exponents.csv").read_text().startswith("re,im,multiplicity")


def test_pencil_flat_contact_and_warning(tmp_path):
    cfg = _write(tmp_path, '[pencil]\nkind = "border"\ntheta_deg = 60\nn_angular = 128\n')
    assert main(["pencil", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    d = read_json(tmp_path / "a" / "pencil.json")
    assert d["alpha_pred"] > 0.5 and d["quasi_monotone"] is True and d["warnings"] == []
    cfg = _write(tmp_path, '[pencil]\nn_angular = 64\n[materials]\nmu_f = 3.0\nlambda_f = 3.0\n', "b.toml")
    assert main(["pencil", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    d = read_json(tmp_path / "b" / "pencil.json")
    assert d["quasi_monotone"] is False
    assert any("quasi-monotone" in w for w in d["warnings"])


def test_angles_command(tmp_path):
    traj = minimize(island(60), Materials(1, 1, 2, 2), Tensions(1, 1.5, 1))
    write_profile_csv(traj.profile, tmp_path / "p.csv")
    cfg = _write(tmp_path, '[profile]\nkind = "file"\npath = "p.csv"\n')
    assert main(["angles", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    header = (tmp_path / "o" / "angle_report.csv").read_text().splitlines()[0]
    assert header == "x,kind,theta_deg,target_deg,deviation_deg"


def test_bad_threads(tmp_path):
    assert main(["solve", "--threads", "0", "--out", str(tmp_path / "o")]) == 2
