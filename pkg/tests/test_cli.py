"""Command-line interface: outputs, exit codes, round trips."""

import csv
import json

import numpy as np
import pytest

from mteq import ConvDiffSpec, build_convdiff, save_manifest
from mteq.cli import main


def run_solve(tmp_path, extra=()):
    argv = [
        "solve", "--problem", "convdiff", "--n", "34", "--eps", "0.1",
        "--method", "ss-gcr1", "--maxrank", "20", "--tol", "1e-8",
        "--toltrank", "1e-12", "--precond", "two-term-adi", "--adi-iters", "4",
        "--seed", "7", "--out-dir", str(tmp_path), *extra,
    ]
    return main(argv)


def test_solve_writes_report_and_history(tmp_path):
    assert run_solve(tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["result"]["status"] == "converged"
    assert report["config"]["maxrank"] == 20
    assert report["problem"] == {"problem": "convdiff", "n": 34, "eps": 0.1}
    with open(tmp_path / "history.csv") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["k", "residual_estimate", "rank_x", "rank_r", "rank_p"]
    assert len(rows) - 1 == report["result"]["iterations"] + 1


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--no-such-flag"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_nonconvergence_exits_3_but_writes_report(tmp_path):
    code = main([
        "solve", "--problem", "convdiff", "--n", "34", "--eps", "0.01",
        "--maxit", "1", "--maxrank", "4", "--tol", "1e-12",
        "--precond", "none", "--out-dir", str(tmp_path),
    ])
    assert code == 3
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["result"]["status"] == "maxit_reached"


def test_verify_round_trip(tmp_path):
    sol = tmp_path / "solution.npz"
    assert run_solve(tmp_path, extra=["--save-solution", str(sol)]) == 0
    code = main([
        "verify", "--problem", "convdiff", "--n", "34", "--eps", "0.1",
        "--solution", str(sol),
    ])
    assert code == 0


def test_manifest_problem_source(tmp_path):
    eq = build_convdiff(ConvDiffSpec(n=20, eps=0.1))
    manifest = save_manifest(eq, tmp_path / "eq")
    code = main([
        "solve", "--problem", "manifest", "--manifest", str(manifest),
        "--maxrank", "18", "--tol", "1e-8", "--precond", "two-term-adi",
        "--adi-iters", "4", "--shift-source", "analytic-laplacian",
        "--out-dir", str(tmp_path),
    ])
    assert code == 0


def test_manifest_source_requires_path(tmp_path, capsys):
    code = main(["solve", "--problem", "manifest", "--out-dir", str(tmp_path)])
    assert code == 2
    assert "manifest" in capsys.readouterr().err


def test_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MTEQ_SEED", "123")
    code = main([
        "solve", "--problem", "convdiff", "--n", "34", "--eps", "0.1",
        "--maxrank", "20", "--precond", "two-term-adi", "--adi-iters", "4",
        "--out-dir", str(tmp_path),
    ])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["sketch_seed"] == 123


def test_benchmark_invocation_at_full_size(tmp_path):
    code = main([
        "solve", "--problem", "convdiff", "--n", "1024", "--eps", "0.1",
        "--method", "ss-gcr1", "--maxrank", "50", "--tol", "1e-6",
        "--toltrank", "1e-10", "--precond", "two-term-adi",
        "--adi-iters", "8", "--seed", "7", "--out-dir", str(tmp_path),
    ])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["result"]["iterations"] <= 8
    assert report["result"]["true_final_residual"] <= 1e-6
    assert report["result"]["sketch_mode"] == "two_sided"


def test_bench_quick_emits_all_columns(tmp_path, capsys):
    code = main(["bench", "--quick", "--sizes", "66", "--seed", "3",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    for column in ("n", "eps", "method", "k", "rank", "pcg", "Res", "Time"):
        assert column in out.splitlines()[0]
    with open(tmp_path / "bench.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 4  # 1 size x 2 eps x 2 methods
    assert all(float(row["res"]) <= 1e-6 for row in rows)
