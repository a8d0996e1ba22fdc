import json
from pathlib import Path

import pytest

from anisolve.config import parse_case_config

CASES_DIR = Path(__file__).resolve().parent.parent / "cases"


@pytest.fixture
def cases_dir():
    return CASES_DIR


@pytest.fixture
def write_case(tmp_path):
    """Write a case document into tmp_path and return its path"""

    def _write(document: dict, name: str = "case.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def small_elliptic_document():
    return {
        "name": "small_p3",
        "mode": "elliptic",
        "grid": {"d": 1, "n": 16},
        "exponents": {"expressions": ["3"], "bounds": [[3, 3]], "lipschitz": [0]},
        "source": "1",
        "elliptic": {"growth": {"c": 1, "r": 1}},
        "solver": {"continuation": {"epsilon_0": 1e-2, "factor": 0.1, "epsilon_min": 1e-6}},
    }


@pytest.fixture
def small_elliptic_config(small_elliptic_document):
    return parse_case_config(small_elliptic_document)
