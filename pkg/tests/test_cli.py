"""End-to-end tests of the command-line front end via main(argv)."""

import csv
import json

import numpy as np
import pytest

from conftest import make_classification

from opsample.cli import main
from opsample.population import load_population, write_population_csv


@pytest.fixture
def tiny_csv(tmp_path):
    rng = np.random.default_rng(0)
    pop = make_classification((rng.random(40) < 0.25).astype(int), rng.random(40))
    path = tmp_path / "tiny.csv"
    write_population_csv(pop, path)
    return str(path)


@pytest.fixture
def micro_csv(tmp_path):
    pop = make_classification([1, 0, 0], [2.0, 1.0, 1.0])
    path = tmp_path / "micro.csv"
    write_population_csv(pop, path)
    return str(path)


def test_gen_round_trip(tmp_path, capsys):
    out = tmp_path / "gen"
    rc = main(
        ["gen", "--n", "400", "--accuracy", "0.85", "--rho", "0.5",
         "--seed", "3", "--name", "pop", "--out", str(out)]
    )
    assert rc == 0
    assert "realized accuracy" in capsys.readouterr().out
    pop = load_population(str(out / "pop.csv"))
    assert pop.N == 400
    manifest = json.loads((out / "pop.manifest.json").read_text())
    assert manifest["config"]["target_accuracy"] == 0.85
    assert abs(manifest["realized_accuracy"] - 0.85) <= 1 / np.sqrt(400) + 1e-12


def test_gen_rejects_degenerate_accuracy(tmp_path, capsys):
    rc = main(["gen", "--n", "50", "--accuracy", "1.0", "--out", str(tmp_path)])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert err["type"] == "ValueError"


def test_run_srs(tiny_csv, tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(
        ["run", "--population", tiny_csv, "--technique", "srs",
         "--budget", "10", "--seed", "2", "--out", str(out)]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "xi_hat" in text and "failures exposed" in text
    payload = json.loads((out / "result_srs.json").read_text())
    assert payload["technique"] == "srs"
    assert len(payload["selected_ids"]) == 10


def test_run_ssrs_prints_allocation(tiny_csv, tmp_path, capsys):
    rc = main(
        ["run", "--population", tiny_csv, "--technique", "ssrs", "--aux", "chi",
         "--budget", "20", "--k", "4", "--out", str(tmp_path / "ssrs")]
    )
    assert rc == 0
    text = capsys.readouterr().out
    line = next(l for l in text.splitlines() if l.startswith("allocation"))
    alloc = json.loads(line.split("=", 1)[1])
    assert sum(alloc) == 20


def test_run_chi_technique_without_aux_fails(tiny_csv, tmp_path, capsys):
    rc = main(
        ["run", "--population", tiny_csv, "--technique", "sups",
         "--budget", "5", "--out", str(tmp_path)]
    )
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert "auxiliary" in err["error"]


def test_eval_flags_and_outputs(tiny_csv, tmp_path, capsys):
    out = tmp_path / "eval"
    rc = main(
        ["eval", "--population", tiny_csv, "--techniques", "srs,sups",
         "--aux", "none,chi", "--budgets", "5,10", "--reps", "3",
         "--seed", "7", "--out", str(out)]
    )
    assert rc == 0
    with open(out / "summary.csv", newline="") as fh:
        summary = list(csv.DictReader(fh))
    assert {(r["technique"], r["aux"], r["budget"]) for r in summary} == {
        ("srs", "", "5"), ("srs", "", "10"), ("sups", "chi", "5"), ("sups", "chi", "10"),
    }
    with open(out / "raw.csv", newline="") as fh:
        raw = list(csv.DictReader(fh))
    assert len(raw) == 12
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["master_seed"] == 7
    assert manifest["population"] == tiny_csv


def test_eval_config_file_with_flag_override(tiny_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "population": tiny_csv,
        "techniques": ["srs"],
        "aux": [None],
        "budgets": [5],
        "repetitions": 2,
        "master_seed": 1,
    }))
    out = tmp_path / "evalcfg"
    rc = main(["eval", "--config", str(cfg), "--reps", "4", "--out", str(out)])
    assert rc == 0
    with open(out / "raw.csv", newline="") as fh:
        raw = list(csv.DictReader(fh))
    assert len(raw) == 4  # flag wins over the file's repetitions=2


def test_eval_requires_population(tmp_path, capsys):
    rc = main(["eval", "--techniques", "srs", "--out", str(tmp_path)])
    assert rc == 1
    assert "population" in json.loads(capsys.readouterr().err)["error"]


def test_eval_rerun_is_byte_identical(tiny_csv, tmp_path):
    args = ["eval", "--population", tiny_csv, "--techniques", "srs,ssrs",
            "--aux", "none,chi", "--budgets", "5,10", "--reps", "3",
            "--seed", "5", "--k", "3"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    for name in ("summary.csv", "raw.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_oracle_exact_expectation(micro_csv, capsys):
    rc = main(
        ["oracle", "--population", micro_csv, "--technique", "sups",
         "--aux", "chi", "--budget", "1"]
    )
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    exact = float(lines[0].split("=")[1])
    gap = float(lines[2].split("=")[1])
    assert exact == pytest.approx(1 / 3, abs=1e-12)
    assert gap < 1e-12


def test_oracle_rejects_non_enumerable(micro_csv, capsys):
    rc = main(
        ["oracle", "--population", micro_csv, "--technique", "gbs",
         "--aux", "chi", "--budget", "2"]
    )
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert "not enumerable" in err["error"]


def test_report_round_trip(tiny_csv, tmp_path):
    out = tmp_path / "eval"
    main(
        ["eval", "--population", tiny_csv, "--techniques", "srs",
         "--aux", "none", "--budgets", "5,10", "--reps", "4",
         "--seed", "2", "--out", str(out)]
    )
    rep = tmp_path / "report"
    rc = main(
        ["report", "--raw", str(out / "raw.csv"),
         "--manifest", str(out / "manifest.json"), "--out", str(rep)]
    )
    assert rc == 0
    with open(rep / "rmse_vs_budget.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["technique"], r["budget"]) for r in rows] == [("srs", "5"), ("srs", "10")]
    # RMSE recomputed from raw rows must match the summary file exactly.
    with open(out / "summary.csv", newline="") as fh:
        summary = {r["budget"]: r["rmse"] for r in csv.DictReader(fh)}
    for r in rows:
        assert float(r["rmse"]) == pytest.approx(float(summary[r["budget"]]), abs=1e-15)
