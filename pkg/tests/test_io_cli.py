import json
import math

import numpy as np
import pytest

from hpdg.cli import build_config, main, make_parser, parse_int_list
from hpdg.errors import InvalidArgument
from hpdg.export import (
    read_solution_json,
    sample_on_grid,
    solution_from_dict,
    solution_to_dict,
    write_solution_csv,
)
from hpdg.functions import DGFunction
from hpdg.harness import StudyConfig, eoc, run_h_study, run_p_study
from hpdg.mesh import TensorMesh
from hpdg.report import CSV_COLUMNS, read_csv, write_report
from hpdg.verification import run_verification_suite


@pytest.fixture(scope="module")
def h_report():
    return run_h_study(StudyConfig(dim=1, degrees=(1,), meshes=(4, 8, 16)))


def test_csv_columns_and_roundtrip(tmp_path, h_report):
    csv_path, json_path = write_report(h_report, tmp_path)
    assert csv_path.name == "h_study_constant_1d.csv"
    assert csv_path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(csv_path)
    assert len(rows) == 3 and rows[0]["eoc_or_slope"] == ""
    errs = [float(r["dg_error"]) for r in rows]
    assert errs == h_report.errors
    # the stored EOC column reproduces from its own error column exactly
    hs = [float(r["param"]) for r in rows]
    assert [float(r["eoc_or_slope"]) for r in rows[1:]] == eoc(errs, hs)
    for r, row in zip(rows, h_report.rows):
        parts = sum(float(r[k]) for k in ("volume_part", "jump_part", "inflow_part", "outflow_part"))
        assert math.sqrt(parts) == pytest.approx(row.dg_error, rel=1e-14)
    summary = json.loads(json_path.read_text())
    assert summary["refine"] == "h" and summary["rows"] == 3
    assert "python" in summary["environment"]


def test_report_named_path(tmp_path):
    rep = run_p_study(StudyConfig(dim=1, refine="p", solution="singular-gamma", degrees=(1, 2, 3), meshes=(2,)))
    csv_path, json_path = write_report(rep, tmp_path / "sub" / "pstudy.json")
    assert csv_path.name == "pstudy.csv" and json_path.exists()
    summary = json.loads(json_path.read_text())
    assert summary["fitted_slope"] == pytest.approx(rep.slope)
    assert summary["predictions"]["optimal"] == -2.5


def _solution():
    mesh = TensorMesh((np.array([0.0, 0.3, 1.0]), np.array([0.0, 0.5, 1.0])))
    rng = np.random.default_rng(0)
    return DGFunction(mesh, 2, rng.standard_normal((4, 9)))


def test_solution_json_roundtrip(tmp_path):
    u = _solution()
    again = solution_from_dict(json.loads(json.dumps(solution_to_dict(u, note="x"))))
    assert np.array_equal(again.coeffs, u.coeffs)
    x = np.random.default_rng(1).uniform(0, 1, (10, 2))
    assert np.array_equal(again(x), u(x))
    with pytest.raises(ValueError):
        solution_from_dict({**solution_to_dict(u), "basis": "nodal"})


def test_solution_csv_and_samples(tmp_path):
    u = _solution()
    path = write_solution_csv(u, tmp_path / "u.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2 + 4
    assert lines[1].split(",")[:3] == ["element", "i0", "i1"]
    pts, vals = sample_on_grid(u, 5)
    assert pts.shape == (25, 2) and vals.shape == (25,)
    assert vals == pytest.approx(u(pts))


def test_parse_int_list():
    assert parse_int_list("1..4") == (1, 2, 3, 4)
    assert parse_int_list("4,8,16") == (4, 8, 16)
    assert parse_int_list("3") == (3,)
    for bad in ("4..1", "a,b"):
        with pytest.raises(InvalidArgument):
            parse_int_list(bad)


def test_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "study.toml"
    cfg_file.write_text('[study]\ndim = 2\nfield = "separable-tanh"\ndegrees = "2..2"\nmeshes = [2, 4]\n')
    args = make_parser().parse_args(["study", "--config", str(cfg_file), "--meshes", "4,8"])
    cfg = build_config(args)
    assert cfg.dim == 2 and cfg.field == "separable-tanh" and cfg.degrees == (2,) and cfg.meshes == (4, 8)
    js = tmp_path / "study.json"
    js.write_text(json.dumps({"dim": 1, "refine": "p"}))
    cfg = build_config(make_parser().parse_args(["study", "--config", str(js), "--gamma", "3.5"]))
    assert cfg.refine == "p" and cfg.gamma == 3.5 and cfg.meshes == (4,) and cfg.solution == "singular-gamma"
    bad = tmp_path / "study.yaml"
    bad.write_text("dim: 1")
    with pytest.raises(InvalidArgument):
        build_config(make_parser().parse_args(["study", "--config", str(bad)]))


def test_cli_study_writes_reports(tmp_path, capsys):
    code = main(["study", "--refine", "h", "--degrees", "1", "--meshes", "4,8", "--out", str(tmp_path / "r.csv")])
    assert code == 0
    assert (tmp_path / "r.csv").exists() and (tmp_path / "r.json").exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_p_study(tmp_path):
    code = main(["study", "--refine", "p", "--field", "general-swirl", "--degrees", "1..3", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "p_study_general-swirl_1d.csv").exists()


def test_cli_solve(tmp_path):
    assert main(["solve", "--dim", "2", "--cells", "2,3", "--degree", "1", "--out", str(tmp_path / "s.json")]) == 0
    u = read_solution_json(tmp_path / "s.json")
    assert u.mesh.shape == (2, 3) and u.degree == 1
    assert (tmp_path / "s_samples.csv").exists()
    assert main(["solve", "--format", "csv", "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "solution.csv").exists()


def test_cli_errors(capsys):
    assert main(["study", "--refine", "h", "--degrees", "1,2"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_verify_trivial_degrees(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--degrees", "0", "--inverse-degrees", "0", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["passed"] is True
    inv = {c["name"]: c for c in data["checks"]}
    assert inv["bubble_inverse_constant"]["value"] == 0.0
    assert inv["h1_inverse_low_degree"]["passed"]


def test_verify_flags_underintegrated_tanh():
    rep = run_verification_suite(degrees=(1, 2), field_name="separable-tanh", quad_offset=0, inverse_degrees=(0, 1))
    failed = {c.name for c in rep.failures}
    assert failed == {"coercivity_separable-tanh_offset0"}
    check = next(c for c in rep.checks if c.name == "coercivity_separable-tanh_offset0")
    assert check.value > 1e-8


def test_verify_default_checks_except_h1_growth():
    rep = run_verification_suite()
    names = [c.name for c in rep.checks]
    assert len(names) == len(set(names))
    # every check except the fitted H1 growth exponent passes; see the acceptance suite for that one
    assert {c.name for c in rep.failures} <= {"h1_inverse_growth"}
