import copy
import json

import pytest

from anisolve.config import load_case_config, parse_case_config
from anisolve.convergence import observed_order, run_convergence
from anisolve.exceptions import ConfigurationError
from anisolve.types import ConvergenceRow


def _row(n, error):
    return ConvergenceRow(n=n, error=error, order=None)


def test_observed_order():
    assert observed_order(_row(32, 4e-2), _row(64, 1e-2)) == pytest.approx(2.0)
    assert observed_order(_row(32, 0.0), _row(64, 1e-2)) is None


def test_second_order_for_p2(cases_dir):
    rows = run_convergence(load_case_config(cases_dir / "elliptic_p2_sin.json"), [32, 64, 128, 256])
    assert [row["n"] for row in rows] == [32, 64, 128, 256]
    assert rows[0]["order"] is None
    assert all(row["order"] >= 1.8 for row in rows[1:])


def test_p2_constant_source_is_nodally_exact_up_to_regularization(cases_dir):
    rows = run_convergence(load_case_config(cases_dir / "elliptic_p2.json"), [32, 64])
    assert all(row["error"] <= 1e-8 for row in rows)


def test_p4_errors_decrease(cases_dir):
    rows = run_convergence(load_case_config(cases_dir / "elliptic_p4.json"), [32, 64, 128, 256])
    errors = [row["error"] for row in rows]
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_self_reference_drops_the_finest_level(small_elliptic_document):
    document = copy.deepcopy(small_elliptic_document)
    document["exponents"] = {"expressions": ["3 + tanh(u)"], "bounds": [[2, 4]], "lipschitz": [1]}
    rows = run_convergence(parse_case_config(document), [64, 16, 32])
    assert [row["n"] for row in rows] == [16, 32]
    assert rows[1]["error"] < rows[0]["error"]


def test_parallel_levels_match_serial(small_elliptic_config):
    serial = run_convergence(small_elliptic_config, [8, 16])
    parallel = run_convergence(small_elliptic_config, [8, 16], jobs=2)
    assert json.dumps(serial) == json.dumps(parallel)


def test_level_checks(small_elliptic_config):
    with pytest.raises(ConfigurationError):
        run_convergence(small_elliptic_config, [16, 16])
    with pytest.raises(ConfigurationError):
        run_convergence(small_elliptic_config, [24, 64])
