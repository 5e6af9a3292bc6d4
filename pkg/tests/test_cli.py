import csv
import io
import json
import subprocess
import sys

import pytest

from cli_cases import CASE_NAMES, run_twice, write_fixtures
from pandemic_privacy.cli import main


@pytest.fixture
def fx(tmp_path):
    return write_fixtures(tmp_path)


@pytest.mark.parametrize("name", CASE_NAMES)
def test_command_byte_identical(name, fx, tmp_path, capsys):
    (code_a, out_a), (code_b, out_b) = run_twice(name, fx, tmp_path)
    assert code_a == code_b == 0
    assert out_a == out_b
    assert all(len(b) > 0 for b in out_a)


def test_seed_changes_output(fx, tmp_path):
    outs = []
    for seed in ("1", "2"):
        path = tmp_path / f"dop{seed}.csv"
        assert main(["doppelganger", "--input", str(fx["locations"]), "--epsilon", "1", "--seed", seed, "--output", str(path)]) == 0
        outs.append(path.read_text())
    assert outs[0] != outs[1]


def test_sanitize_counts_output(tmp_path):
    out = tmp_path / "tree.csv"
    assert main(["sanitize-counts", "--epsilon", "0.5", "--output", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["replicate", "node_path", "layer", "h"]
    assert len(rows) == 15
    h = {r["node_path"]: float(r["h"]) for r in rows}
    assert abs(h["*"] - 200) < 60
    assert h["*"] == pytest.approx(h["age=young"] + h["age=elderly"], rel=1e-9)


def test_sanitize_counts_truth_opt_in(tmp_path):
    out = tmp_path / "tree.csv"
    assert main(["sanitize-counts", "--epsilon", "1e6", "--include-truth", "--output", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert all(abs(float(r["h"]) - int(r["true"])) < 1e-2 for r in rows)


def test_sanitize_counts_bad_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text("{\n  nope\n}\n")
    code = main(["sanitize-counts", "--spec", str(spec), "--epsilon", "1", "--output", str(tmp_path / "o.csv")])
    assert code == 2
    assert not (tmp_path / "o.csv").exists()


def test_missing_input_is_io_error(tmp_path):
    code = main(["sanitize-counts", "--input", str(tmp_path / "nope.csv"), "--epsilon", "1", "--output", str(tmp_path / "o.csv")])
    assert code == 3


def test_invalid_epsilon_is_validation_error(tmp_path, fx):
    assert main(["ctn", "--mechanism", "rr", "--epsilon", "-1", "--output", str(tmp_path / "o.csv")]) == 2


def test_doppelganger_rows_and_columns(fx, tmp_path):
    out = tmp_path / "dop.csv"
    assert main(["doppelganger", "--input", str(fx["locations"]), "--k", "5", "--epsilon", "1", "--output", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["origin_id", "replicate_index", "x", "y"]
    assert len(rows) == 15
    assert [r["replicate_index"] for r in rows if r["origin_id"] == "a"] == ["0", "1", "2", "3", "4"]


def test_doppelganger_single_copy_rejected(fx, tmp_path, capsys):
    code = main(["doppelganger", "--input", str(fx["locations"]), "--k", "1", "--epsilon", "1", "--output", str(tmp_path / "o.csv")])
    assert code == 2
    assert "K >= 2" in capsys.readouterr().err


def test_ctn_gi_large_budget_identical(tmp_path):
    assert main(["ctn", "--mechanism", "gi", "--epsilon", "1e6", "--output", str(tmp_path / "gi.csv")]) == 0
    assert main(["ctn-stats", "--input", str(tmp_path / "gi.csv"), "--nodes", "100", "--output", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["num_edges"] == 39


def test_ctn_rr_edge_count(tmp_path):
    assert main(["ctn", "--mechanism", "rr", "--epsilon", "0.5", "--output", str(tmp_path / "rr.csv")]) == 0
    n_edges = len((tmp_path / "rr.csv").read_text().splitlines()) - 1
    assert abs(n_edges - 1876) <= 3 * 37.4


def test_ctn_stats_triangle(fx, tmp_path):
    out = tmp_path / "stats.json"
    assert main(["ctn-stats", "--input", str(fx["k3"]), "--nodes", "3", "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["num_edges"] == 3 and doc["num_triangles"] == 1
    assert doc["gdd"]["by_distance"][1] == 1.0
    assert "conventions" in doc["metadata"]


def test_heatmap_sidecar(fx, tmp_path):
    out = tmp_path / "heat.csv"
    assert main(["heatmap", "--input", str(fx["locations"]), "--bandwidth", "5", "--resolution", "20,10", "--output", str(out)]) == 0
    meta = json.loads((tmp_path / "heat.json").read_text())
    assert meta["resolution"] == [20, 10] and meta["n_points"] == 3
    lines = out.read_text().splitlines()
    assert len(lines) == 11 and len(lines[0].split(",")) == 20


def test_experiment_table1_layout(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["experiment", "table1", "--reps", "3", "--output", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["mechanism"] for r in rows] == ["original"] + ["rr"] * 4 + ["gi"] * 4
    assert "gi_stability" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pandemic_privacy", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sanitize-counts" in proc.stdout
