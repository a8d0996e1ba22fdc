import copy
import csv
import json

import numpy as np
import pytest

from anisolve.cli import build_parser, main, run_case
from anisolve.constants import EXIT_ERROR, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION


def _read_field(path):
    with open(path, encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    return rows[0], np.array(rows[1:], dtype=float)


def _summary(directory):
    return json.loads((directory / "summary.json").read_text(encoding="utf-8"))


def test_parser_defaults():
    args = build_parser().parse_args(["convergence", "--config", "case.json"])
    assert args.levels == [32, 64, 128, 256]
    assert args.jobs == 1
    args = build_parser().parse_args(["verify"])
    assert args.seed == 42
    assert args.trials is None


def test_run_p2_case(cases_dir, tmp_path):
    out = tmp_path / "p2"
    assert main(["run", "--config", str(cases_dir / "elliptic_p2.json"), "--out", str(out)]) == EXIT_OK

    header, rows = _read_field(out / "solution.csv")
    assert header == ["x", "u"]
    assert rows.shape == (257, 2)
    middle = rows[128]
    assert middle[0] == 0.5
    assert middle[1] == pytest.approx(0.125, abs=1e-3)

    summary = _summary(out)
    assert summary["status"] == "ok"
    assert summary["validation"]["passed"]
    assert summary["files"] == ["solution.csv", "summary.json"]
    assert len(summary["config_hash"]) == 64


def test_growth_exponent_at_p_minus_is_rejected(cases_dir, tmp_path, capsys):
    out = tmp_path / "invalid"
    code = main(["run", "--config", str(cases_dir / "invalid_growth.json"), "--out", str(out)])
    assert code == EXIT_VALIDATION
    assert "(f)" in capsys.readouterr().out

    summary = _summary(out)
    assert summary["status"] == "validation_failed"
    assert not (out / "solution.csv").exists()


def test_heat_case_writes_snapshots_and_ledger(cases_dir, tmp_path):
    out = tmp_path / "heat"
    assert main(["run", "--config", str(cases_dir / "parabolic_heat.json"), "--out", str(out)]) == EXIT_OK

    _, rows = _read_field(out / "solution_t0.1.csv")
    assert np.max(rows[:, 1]) == pytest.approx(0.3727, rel=0.02)
    assert (out / "solution_t0.05.csv").exists()

    ledger = json.loads((out / "ledger.json").read_text(encoding="utf-8"))
    assert len(ledger) == 200
    assert all(entry["slack"] >= -100.0 * entry["tol_residual"] for entry in ledger)
    summary = _summary(out)
    assert summary["report"]["energy_ok"]
    assert "ledger.json" in summary["files"]


@pytest.mark.parametrize("case_name", ["small", "nonlocal"])
def test_runs_are_deterministic(case_name, small_elliptic_document, write_case, tmp_path):
    if case_name == "small":
        document = small_elliptic_document
    else:
        document = {
            "name": "nonlocal",
            "mode": "parabolic",
            "grid": {"d": 1, "n": 16},
            "exponents": {"expressions": ["3 + tanh(s)"], "bounds": [[2, 4]], "lipschitz": [1]},
            "source": "1",
            "parabolic": {"b": {"kind": "lq_norm", "q": 2}, "u0": "0", "T": 0.2, "N0": 4},
            "output": {"snapshots": [0.1]},
        }
    path = write_case(document)

    outputs = []
    for attempt in ("first", "second"):
        out = tmp_path / attempt
        assert main(["run", "--config", str(path), "--out", str(out), "--seed", "7"]) == EXIT_OK
        outputs.append(out)

    first, second = outputs
    for name in _summary(first)["files"]:
        if name == "summary.json":
            continue
        assert (first / name).read_bytes() == (second / name).read_bytes()

    summaries = [_summary(out) for out in outputs]
    for summary in summaries:
        assert summary["config"]["seed"] == 7
        del summary["wall_time"]
    assert summaries[0] == summaries[1]


def test_configuration_errors_exit_with_one(small_elliptic_document, write_case, tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_ERROR

    unknown = copy.deepcopy(small_elliptic_document)
    unknown["colour"] = "blue"
    assert main(["run", "--config", str(write_case(unknown, "unknown.json")), "--out", str(tmp_path / "a")]) == EXIT_ERROR

    bad_expression = copy.deepcopy(small_elliptic_document)
    bad_expression["source"] = "1 +"
    assert main(["run", "--config", str(write_case(bad_expression, "bad.json")), "--out", str(tmp_path / "b")]) == EXIT_ERROR


def test_newton_failure_writes_partial_results(small_elliptic_document, write_case, tmp_path):
    document = copy.deepcopy(small_elliptic_document)
    document["exponents"] = {"expressions": ["4"], "bounds": [[4, 4]], "lipschitz": [0]}
    document["solver"]["newton"] = {"max_iter": 1}
    out = tmp_path / "failed"

    assert main(["run", "--config", str(write_case(document)), "--out", str(out)]) == EXIT_SOLVER
    summary = _summary(out)
    assert summary["status"] == "solver_failed"
    assert "did not converge" in summary["error"]
    assert (out / "solution.csv").exists()


def test_aborted_trajectory_writes_partial_results(write_case, tmp_path):
    document = {
        "name": "aborted",
        "mode": "parabolic",
        "grid": {"d": 1, "n": 16},
        "exponents": {"expressions": ["3 + tanh(s)"], "bounds": [[2, 4]], "lipschitz": [1]},
        "source": "1",
        "parabolic": {"b": {"kind": "grad_norm"}, "u0": "0", "T": 0.2, "N0": 2},
        "solver": {"parabolic": {"max_fixed_point": 1}},
    }
    summary, code = run_case(str(write_case(document)), str(tmp_path / "aborted"))
    assert code == EXIT_SOLVER
    assert summary["status"] == "solver_failed"
    assert "solution.csv" in summary["files"]
    _, rows = _read_field(tmp_path / "aborted" / "solution.csv")
    assert np.all(rows[:, 1] == 0.0)


def test_convergence_subcommand_writes_table(cases_dir, tmp_path):
    out = tmp_path / "study"
    code = main(["convergence", "--config", str(cases_dir / "elliptic_p2_sin.json"), "--out", str(out), "--levels", "16", "32"])
    assert code == EXIT_OK
    lines = (out / "convergence.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "n,error,order"
    assert len(lines) == 3
    assert lines[1].endswith(",")
    assert float(lines[2].split(",")[2]) > 1.8


def test_verify_subcommand(capsys):
    assert main(["verify", "--trials", "2"]) == EXIT_OK
    assert "All 10 properties passed" in capsys.readouterr().out
    assert main(["verify", "--trials", "0"]) == EXIT_ERROR
