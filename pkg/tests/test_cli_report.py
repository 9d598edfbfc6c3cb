import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from h3surf.cli import CONFIG_TYPES, run
from h3surf.report import CSV_COLUMNS, ReportDocument, atomic_write, dumps, table_to_csv

CYL = ["--family", "s1", "--a", "sqrt(4 - t^2)", "--t-range", "-1.8:1.8", "--s-range", "0:2", "--grid", "21x21"]


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- serialization


def test_dumps_is_sorted_and_fixed_precision():
    text = dumps({"b": 0.1, "a": [1, -0.0, float("nan")], "c": np.float64(1 / 3)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text
    assert "0.33333333333333331" in text
    assert "null" in text and "-0" not in text
    assert text.endswith("\n")
    assert json.loads(text)["b"] == 0.1


def test_report_document_omits_absent_sections():
    d = ReportDocument("geodesic", results={"x": 1}).as_dict()
    assert set(d) == {"version", "command", "results", "timing"}
    d = ReportDocument("analyze", {"kind": "graph"}, {"nu": 3}).as_dict()
    assert {"chart", "grid"} <= set(d)


def test_csv_round_trip_floats():
    cols = {"u": np.array([0.1, -0.0]), "v": np.array([1 / 3, 2.0])}
    text = table_to_csv(cols)
    lines = text.split("\n")
    assert lines[0] == "u,v" and lines[-1] == ""
    assert lines[1] == "0.1,0.3333333333333333"
    assert lines[2] == "0.0,2.0"


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "r.json"
    atomic_write(p, "abc")
    atomic_write(p, "xyz")
    assert p.read_text() == "xyz"
    assert os.listdir(p.parent) == ["r.json"]


def test_failed_command_writes_nothing(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = _run(capsys, "analyze", "--graph", "sqrt(x)", "--out", str(out))
    assert code == 4 and not out.exists()


# ---------------------------------------------------------------- commands


def test_finite_type_cylinder(capsys):
    code, out, _ = _run(capsys, "finite-type", *CYL)
    assert code == 0
    lam = json.loads(out)["results"]["finite_type"]["lambda"]
    assert lam[0] == pytest.approx(0.25, abs=1e-6) and lam[1] == pytest.approx(0.25, abs=1e-6)
    assert abs(lam[2]) <= 1e-6


def test_analyze_minimal_graph(capsys):
    code, out, _ = _run(capsys, "analyze", "--graph", "x*y/2", "--grid", "11x11")
    doc = json.loads(out)
    assert code == 0
    assert doc["results"]["verdict"]["label"] == "minimal"
    assert doc["results"]["surface"]["max_abs_H"] <= 1e-10
    assert set(doc) == {"version", "command", "chart", "grid", "results", "timing"}


def test_geodesic_line(capsys):
    code, out, _ = _run(capsys, "geodesic", "--point", "0,0,0", "--dir", "1,0,1")
    assert code == 0 and out.strip() == "not geodesic, |accel|=1"
    code, out, _ = _run(capsys, "geodesic", "--point", "0,0,0", "--dir", "0,0,1")
    assert out.strip() == "geodesic, |accel|=0"


def test_geodesic_random_sweep(capsys):
    code, out, _ = _run(capsys, "geodesic", "--random", "50", "--seed", "3")
    assert code == 0 and out.startswith("random lines: ")


def test_ruled_commands(capsys):
    code, out, _ = _run(capsys, "ruled", "s1", "--a", "sqrt(9 - t^2)", "--t-range", "-2.7:2.7", "--s-range", "0:2")
    doc = json.loads(out)
    assert code == 0 and doc["results"]["classification"]["case"] == "cylinder"
    assert doc["results"]["rulings"]["geodesic"] == doc["results"]["rulings"]["checked"]
    code, out, _ = _run(capsys, "ruled", "s2", "--a", "0", "--u", "0", "--grid", "7x7")
    doc = json.loads(out)
    assert code == 0 and doc["results"]["verdict"]["minimal"]
    assert doc["results"]["structure"]["max_abs_Q_plus_uP"] <= 1e-9


def test_solve_pde(capsys):
    code, out, _ = _run(
        capsys, "solve-pde", "--equation", "3.12", "--lam", "0,0,0.1", "--boundary", "x^2 - y^2"
    )
    doc = json.loads(out)
    assert code == 0
    assert doc["results"]["solution"]["residual_max"] <= 1e-8
    assert doc["results"]["independent_residual_max"] <= 1e-8


def test_beltrami_report(capsys):
    code, out, _ = _run(capsys, "beltrami", "--graph", "x*y/2", "--grid", "9x9")
    assert code == 0
    assert json.loads(out)["results"]["beltrami"]["tension_max"] <= 1e-6


def test_export_csv_columns(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    code, summary, _ = _run(capsys, "export", "--graph", "x^2 + y^2", "--grid", "5x4", "--out", str(out))
    assert code == 0 and summary.strip() == "rows=20"
    lines = out.read_text().split("\n")
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 22 and lines[-1] == ""
    row = [float(v) for v in lines[1].split(",")]
    assert all(math.isfinite(v) for v in row)
    assert (tmp_path / "grid_H.png").stat().st_size > 0


def test_figures_written_next_to_report(tmp_path, capsys):
    out = tmp_path / "ft.json"
    assert _run(capsys, "finite-type", *CYL, "--out", str(out))[0] == 0
    assert (tmp_path / "ft_fit.png").exists()
    out = tmp_path / "pde.json"
    assert _run(capsys, "solve-pde", "--boundary", "x^2 - y^2", "--grid", "9x9", "--out", str(out))[0] == 0
    assert (tmp_path / "pde_f.png").exists() and (tmp_path / "pde_newton.png").exists()
    out = tmp_path / "quiet.json"
    assert _run(capsys, "analyze", "--graph", "0", "--grid", "5x5", "--out", str(out), "--no-figures")[0] == 0
    assert sorted(p.name for p in tmp_path.glob("quiet*")) == ["quiet.json"]


# ---------------------------------------------------------------- determinism


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_repeated_runs_are_byte_identical(tmp_path, capsys, fmt):
    paths = [tmp_path / f"r{i}.{fmt}" for i in range(2)]
    for p in paths:
        assert _run(capsys, "finite-type", *CYL, "--format", fmt, "--out", str(p), "--no-figures")[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_figures_are_deterministic(tmp_path, capsys):
    for i in range(2):
        _run(capsys, "analyze", "--graph", "x*y/2", "--grid", "7x7", "--out", str(tmp_path / f"a{i}.json"))
    assert (tmp_path / "a0_H.png").read_bytes() == (tmp_path / "a1_H.png").read_bytes()


def test_timing_opt_in(capsys):
    doc = json.loads(_run(capsys, "analyze", "--graph", "0", "--grid", "5x5")[1])
    assert doc["timing"] == {"recorded": False}
    doc = json.loads(_run(capsys, "analyze", "--graph", "0", "--grid", "5x5", "--timing")[1])
    assert doc["timing"]["recorded"] and doc["timing"]["wall_s"] >= 0


# ---------------------------------------------------------------- errors and config


@pytest.mark.parametrize(
    "argv,code,kind",
    [
        ([], 2, "usage"),
        (["analyze", "--grid", "banana"], 2, "usage"),
        (["analyze"], 2, "usage"),
        (["analyze", "--graph", "x*y", "--family", "s1"], 2, "usage"),
        (["analyze", "--graph", "x +* y"], 3, "parse"),
        (["analyze", "--graph", "t*x"], 3, "parse"),
        (["analyze", "--family", "s1", "--a", "sqrt(1 - t^2)", "--t-range", "-2:2"], 4, "numerical"),
        (["analyze", "--family", "s1", "--a", "t", "--t-range", "0:0.5", "--c", "1"], 0, None),
        (["analyze", "--family", "s2", "--a", "t", "--u", "t", "--x-range", "0:1"], 0, None),
        (["solve-pde", "--boundary", "x^2", "--lam", "0,0,50", "--max-iter", "2"], 4, "numerical"),
        (["geodesic", "--point", "0,0,0", "--dir", "0,0,0"], 2, "usage"),
        (["geodesic", "--point", "0,0,0"], 2, "usage"),
    ],
)
def test_exit_codes(capsys, argv, code, kind):
    got, _, err = _run(capsys, *argv)
    assert got == code
    if kind is None:
        assert err == ""
    else:
        lines = err.strip().split("\n")
        assert len(lines) == 1
        assert lines[0].startswith(f"error code={code} kind={kind} reason=")


def test_config_defaults_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "h3.cfg"
    cfg.write_text("# defaults\ngrid = 5x5\ntol-minimal = 1e-3  # loose\n")
    doc = json.loads(_run(capsys, "analyze", "--graph", "0", "--config", str(cfg))[1])
    assert doc["grid"]["nu"] == 5 and doc["results"]["verdict"]["tol_minimal"] == 1e-3
    doc = json.loads(_run(capsys, "analyze", "--graph", "0", "--config", str(cfg), "--grid", "7x7")[1])
    assert doc["grid"]["nu"] == 7


@pytest.mark.parametrize("body", ["colour = red\n", "grid = 5by5\n", "[section]\n"])
def test_bad_config(tmp_path, capsys, body):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    code, _, err = _run(capsys, "analyze", "--graph", "0", "--config", str(cfg))
    assert code == 3 and "kind=config" in err


def test_config_keys_are_cli_options():
    from h3surf.cli import build_parser

    sub = build_parser()._subparsers._group_actions[0].choices
    dests = {a.dest for name in ("analyze", "solve-pde") for a in sub[name]._actions}
    assert set(CONFIG_TYPES) <= dests


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "h3surf", "geodesic", "--point", "0,0,0", "--dir", "1,0,1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and proc.stdout.strip() == "not geodesic, |accel|=1"
