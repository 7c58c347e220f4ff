import json

import numpy as np
import pytest

from chidenn.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from chidenn.io import read_csv
from chidenn.scenario import ConfigError, bundled_scenario, load_scenario, run_scenario
from chidenn.verification import verify_suite

BLOCK = bundled_scenario("free_flight").parent / "block.mesh"


def write_config(tmp_path, body):
    path = tmp_path / "case.yaml"
    path.write_text(body.replace("MESH", str(BLOCK)))
    return path


BASE = """name: case
mesh: MESH
material: {C10: 1.0, D1: 0.5, rho0: 1.0}
convolution: {s: 1, a: 1.0, p: 1}
enrichment:
  default: plain_fe
  regions: REGIONS
loads:
  essential:
    - {nodes: left, direction: 0}
    - {nodes: left, direction: 1}
    - {nodes: right, direction: 0, history: [[0, 0], [0.5, 0.01], [100, 0.01]]}
solver: {dt: DT, t_end: 0.5, mode: explicit_cd, mass: auto}
output:
  directory: out
  snapshot_interval: 10
  monitored:
    - {label: corner, at: [1.0, 0.5], quantities: [u_x, u_y, von_mises]}
"""


def case(tmp_path, regions="{}", dt="0.01"):
    return write_config(tmp_path, BASE.replace("REGIONS", regions).replace("DT", dt))


def test_run_exit_zero_and_outputs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["run", str(case(tmp_path))]) == EXIT_OK
    config, header, data = read_csv(tmp_path / "out" / "case.csv")
    assert header == ["t", "u_x@corner", "u_y@corner", "von_mises@corner"]
    assert data.shape == (51, 4)
    assert config["solver"]["dt"] == 0.01 and config["quadrature_order"] == [2]
    assert len(list((tmp_path / "out").glob("case_*.vtk"))) == 6
    record = json.loads((tmp_path / "out" / "case_run.json").read_text())
    assert set(record["timings"]) >= {"patch_bases", "shape_tables", "mass", "assembly", "per_step"}
    assert record["config"]["monitored"][0]["choice"].startswith("nearest node")


def test_runs_are_byte_identical(tmp_path):
    path = write_config(tmp_path, BASE.replace("default: plain_fe", "default: chidenn")
                        .replace("REGIONS", "{}").replace("DT", "0.01"))
    texts = []
    for k in range(2):
        sc = load_scenario(path, {"output": {"directory": str(tmp_path / f"o{k}")}})
        run_scenario(sc, log=lambda s: None)
        texts.append((tmp_path / f"o{k}" / "case.csv").read_bytes())
    assert texts[0] == texts[1]


def test_unknown_region_tag_names_it(tmp_path, capsys):
    assert main(["run", str(case(tmp_path, regions="{nowhere: chidenn}"))]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "nowhere" in err and "case.yaml:7" in err


def test_malformed_yaml_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="case.yaml"):
        load_scenario(write_config(tmp_path, "mesh: {{}}\n"))


def test_validation_errors_carry_line(tmp_path):
    bad = BASE.replace("REGIONS", "{}").replace("DT", "0.01").replace("direction: 1}", "direction: 5}")
    with pytest.raises(ConfigError, match=r"case.yaml:11: loads.essential.1.direction"):
        load_scenario(write_config(tmp_path, bad))
    typo = BASE.replace("REGIONS", "{}").replace("DT", "0.01").replace("nodes: right", "nodes: rigth")
    with pytest.raises(ConfigError, match="unknown nodeset 'rigth'"):
        load_scenario(write_config(tmp_path, typo))


def test_unstable_step_exits_two(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["run", str(case(tmp_path, dt="0.5")), "--steps", "40"]) == EXIT_NUMERICAL
    assert "NonFiniteState" in capsys.readouterr().err


def test_bad_arguments_exit_one(tmp_path):
    assert main(["convergence", "bar1d"]) == EXIT_INVALID
    assert main(["convergence", "bar1d", "--refinements", "8", "4"]) == EXIT_INVALID
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_INVALID
    assert main(["run", "no_such_bundle"]) == EXIT_INVALID


def test_convergence_command(capsys):
    assert main(["convergence", "bar1d", "--refinements", "4", "8", "--modes", "fem"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "fem" in out and "rate" in out


def test_free_flight_parabola(tmp_path):
    sc = load_scenario(bundled_scenario("free_flight"), {"output": {"directory": str(tmp_path)}})
    res = run_scenario(sc, log=lambda s: None)
    _, header, data = read_csv(res.csv)
    t = data[:, 0]
    exact = -0.5 * 9.81 * t**2
    assert np.abs(data[:, header.index("u_y@corner")] - exact).max() < 1e-12
    assert np.abs(data[:, header.index("v_y@corner")] + 9.81 * t).max() < 1e-12
    assert np.abs(data[:, header.index("u_x@corner")]).max() < 1e-14


def test_verify_mutations():
    checks = {c.name: c for c in verify_suite("fast", perturb=1e-3)}
    assert not checks["f_int vs energy FD [quad fem]"].passed
    assert not checks["f_int vs energy FD [quad s=1 p=1]"].passed
    checks = {c.name: c for c in verify_suite("fast", quadrature_order=1)}
    assert checks["reproduction [quad s=1 a=1 p=1]"].passed
    assert not checks["patch test force balance [s=1 p=1]"].passed


def test_bundled_notch_ramp_columns(tmp_path, capsys):
    assert main(["run", "notch_ramp", "--output", str(tmp_path), "--steps", "5"]) == EXIT_OK
    config, header, data = read_csv(tmp_path / "notch_ramp.csv")
    assert header == ["t", "u_x@tip", "u_y@tip", "von_mises@tip"]
    assert data.shape == (6, 4)
    assert config["solver"]["mass_used"] == "consistent"
    out = capsys.readouterr().out
    assert "negative" in out.lower() or "non-positive" in out.lower()
    assert "rbf q=1.03 a=1.0 s=2 p=2" in out and "ms per step" in out


def test_mesh_refine_option(tmp_path):
    base = BASE.replace("REGIONS", "{}").replace("DT", "0.01")
    sc = load_scenario(write_config(tmp_path, base.replace("mesh: MESH", "mesh: {path: MESH, refine: 2}")))
    assert sc.mesh.n_elements == 32 and "split 2 x 2" in sc.resolved["mesh"]["source"]
    with pytest.raises(ConfigError, match="mesh.refine"):
        load_scenario(write_config(tmp_path, base.replace("mesh: MESH", "mesh: {path: MESH, refine: 0}")))
