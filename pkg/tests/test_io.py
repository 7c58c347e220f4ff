import json

import numpy as np
import pytest

from chidenn.assembly import shape_tables
from chidenn.fields import cell_field, nodal_field
from chidenn.interp import ConvolutionConfig, build_patch_bases
from chidenn.io import CsvHistory, config_summary, read_csv, write_run_record, write_vtk
from chidenn.material import NeoHookean
from chidenn.meshgen import rect_mesh

MAT = NeoHookean(C10=1.0, D1=0.5, rho0=1.0)
CONFIG = {"enrichment": {"configs": [{"kernel": "rbf", "q": 1.03, "a": 1.0, "s": 2, "p": 2}]},
          "quadrature_order": [14], "solver": {"dt": 1e-4, "mode": "explicit_cd"}}


def test_single_quad_at_rest(tmp_path):
    m = rect_mesh(1, 1)
    zeros = np.zeros(4)
    path = write_vtk(tmp_path / "a.vtk", m, CONFIG, 0.0, np.zeros(8), {"von_mises": zeros}, {"von_mises": [0.0]})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert "POINTS 4 double" in lines and "CELLS 1 5" in lines and "CELL_TYPES 1" in lines
    assert lines[lines.index("CELL_TYPES 1") + 1] == "9"
    assert lines[lines.index("CELLS 1 5") + 1] == "4 0 1 3 2"
    start = lines.index("VECTORS displacement double") + 1
    assert all(float(v) == 0.0 for row in lines[start:start + 4] for v in row.split())
    assert "CELL_DATA 1" in lines and "POINT_DATA 4" in lines


def test_vtk_title_carries_config():
    s = config_summary(CONFIG)
    for token in ("kernel=rbf", "q=1.03", "a=1.0", "s=2", "p=2", "dt=0.0001", "quadrature_order=[14]"):
        assert token in s
    assert len(s) <= 255


def test_vtk_title_from_a_resolved_scenario(tmp_path):
    from chidenn.scenario import bundled_scenario, load_scenario

    sc = load_scenario(bundled_scenario("notch_ramp"), {"output": {"directory": str(tmp_path)}})
    s = config_summary(sc.resolved)
    for token in ("kernel=rbf", "q=1.03", "a=1.0", "s=2", "p=2", "dt=6e-05", "quadrature_order=[2, 14]"):
        assert token in s


def test_stretched_bar_von_mises_constant(tmp_path):
    m = rect_mesh(6, 2, 1.0, 0.3)
    F = np.diag([1.1, 0.95])
    d = (m.nodes @ (F - np.eye(2)).T).ravel()
    for cfg in (None, ConvolutionConfig(s=1, p=1)):
        T = shape_tables(m, None if cfg is None else build_patch_bases(m, cfg), cfg)
        cells = cell_field(T, MAT, d)
        nodes = nodal_field(T, MAT, d)
        assert np.ptp(cells) < 1e-8 * cells.max()
        assert np.ptp(nodes) < 1e-8 * nodes.max()
    write_vtk(tmp_path / "b.vtk", m, CONFIG, 1.0, d, {"von_mises": nodes}, {"von_mises": cells})


def test_csv_header_once_and_roundtrip(tmp_path):
    path = tmp_path / "h.csv"
    with CsvHistory(path, ["u_x@tip", "von_mises@tip"], CONFIG) as csv:
        for k in range(5):
            csv.append(0.1 * k, [k, 2.0 * k])
        with pytest.raises(ValueError):
            csv.append(1.0, [1.0])
    text = path.read_text().splitlines()
    assert text[0].startswith("# config: ")
    assert sum(line.startswith("t,") for line in text) == 1
    config, header, data = read_csv(path)
    assert config == json.loads(json.dumps(CONFIG))
    assert header == ["t", "u_x@tip", "von_mises@tip"]
    np.testing.assert_array_equal(data[:, 1], np.arange(5.0))


def test_csv_rows_are_whole_after_each_append(tmp_path):
    path = tmp_path / "h.csv"
    csv = CsvHistory(path, ["a"], {})
    csv.append(0.5, [1.25])
    assert path.read_text().endswith("0.5,1.25\n")
    csv.close()


def test_run_record(tmp_path):
    path = write_run_record(tmp_path / "r.json", CONFIG, {"timings": {"setup": 1.0}})
    rec = json.loads(path.read_text())
    assert rec["config"]["quadrature_order"] == [14] and rec["timings"]["setup"] == 1.0
