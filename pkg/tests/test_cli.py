import csv
import json
import subprocess
import sys

import pytest

from rkhs_lsq.cli import main

TRIG = {"basis": "trig_sharp", "s": 2.0, "d": 1}
LEG = {"basis": "legendre", "s": 2.0, "d": 1}


def write_cfg(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(tmp_path, command, doc, *extra):
    cfg = write_cfg(tmp_path, f"{command}.json", doc)
    return main([command, "--config", cfg, "--out", str(tmp_path / "out"), *extra])


def test_spectrum(tmp_path):
    assert run(tmp_path, "spectrum", {"model": LEG, "N": 10, "ms": [4, 8]}) == 0
    rows = list(csv.reader(open(tmp_path / "out" / "spectrum.csv")))
    assert len(rows) == 11
    table = list(csv.reader(open(tmp_path / "out" / "christoffel.csv")))
    assert float(table[1][1]) == pytest.approx(4.5)


def test_sample_recover_subsample_certify(tmp_path):
    out = tmp_path / "out"
    assert run(tmp_path, "sample", {"model": TRIG, "m": 8, "n": 200, "seed": 1}) == 0
    stats = json.loads((out / "sample_stats.json").read_text())
    assert stats["m"] == 8
    nodes = str(out / "nodes.csv")
    target = {"ranks": [1, 2, 5], "coefficients": [[1, 0], [0.5, -0.2], [0, 1]]}
    assert run(tmp_path, "recover", {"model": TRIG, "nodes": nodes, "target": target}) == 0
    rep = json.loads((out / "recover_report.json").read_text())
    assert rep["rank_ok"] and rep["grid_error_sup"] < 1e-9
    assert run(tmp_path, "subsample", {"model": TRIG, "nodes": nodes}) == 0
    sub = json.loads((out / "subsample.json").read_text())
    assert len(sub["J"]) < 200
    assert run(tmp_path, "certify", {"model": TRIG, "nodes": nodes, "grid_per_dim": 128}) == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["sup_value"] > 0
    assert len((out / "certificate.csv").read_text().splitlines()) == 129


def test_recover_from_samples_file(tmp_path):
    out = tmp_path / "out"
    run(tmp_path, "sample", {"model": LEG, "m": 4, "n": 50})
    samples = tmp_path / "f.csv"
    samples.write_text("f\n" + "\n".join("2.0" for _ in range(50)) + "\n")
    doc = {"model": LEG, "nodes": str(out / "nodes.csv"), "samples": str(samples)}
    assert run(tmp_path, "recover", doc) == 0
    op = json.loads((out / "operator.json").read_text())
    assert op["m"] == 4


def test_bounds(tmp_path):
    doc = {"model": TRIG, "ms": [24], "evaluators": ["wls_bound", "subsampled_bound_ii"],
           "sigma_upper": {"s": 1, "d": 2, "ns": [6]}, "hmix": {"s": 2, "d": 2, "ms": [10]}}
    assert run(tmp_path, "bounds", doc) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "bounds.csv")))
    assert [r["name"] for r in rows] == ["wls_bound", "subsampled_bound_ii", "sigma_upper_bound",
                                         "hmix_preasymptotic_bound"]
    assert float(rows[0]["value"]) == pytest.approx(3.8068, abs=5e-5)


def test_experiment_and_seed_override(tmp_path):
    doc = {"model": TRIG, "n": [600], "trials": 1, "grid_per_dim": 64}
    assert run(tmp_path, "experiment", doc, "--seed", "5") == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["config"]["seed"] == 5


def test_experiment_with_errors_exits_one(tmp_path):
    assert run(tmp_path, "experiment", {"model": TRIG, "n": [30], "trials": 1}) == 1


def test_bad_inputs_exit_two(tmp_path, capsys):
    assert run(tmp_path, "sample", {"m": 4, "n": 10}) == 2
    assert "model" in capsys.readouterr().err
    assert run(tmp_path, "bounds", {}) == 2
    assert run(tmp_path, "sample", {"model": TRIG, "m": 4, "n": 10}, "--seed", str(2 ** 64)) == 2


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, "b.json", {"hmix": {"s": 2, "d": 2, "ms": [10]}})
    proc = subprocess.run([sys.executable, "-m", "rkhs_lsq", "bounds", "--config", cfg,
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip().endswith("bounds.csv")
