"""
anisolve Configuration
Centralized solver defaults and case-file loading

SOLVER PIPELINE:
----------------
1. Frozen solve   : damped Newton on the convex discrete energy
2. Elliptic       : Picard on (q, f) frozen at the last iterate, inside a
                    geometric epsilon continuation
3. Parabolic      : Rothe steps, each a damped scalar fixed point on s = b(u)

Case files are JSON documents checked against case_schema.json (shipped next
to this module). The defaults below are the documented schema defaults;
validate_config() asserts they agree.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Optional

from .constants import (
    CASE_SCHEMA_FILENAME,
    EMOJI_CHECK,
    MODE_ELLIPTIC,
    MODE_PARABOLIC,
)
from .exceptions import ConfigurationError
from .types import CaseConfig

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
DEFAULT_LEVELS = [32, 64, 128, 256]


# ==============================================================================
# FUNCTION SPACES
# ==============================================================================

SPACES = {
    "luxemburg_tol": 1e-10,  # modular defect |rho(u / tau) - 1|
    "lower_guard": 1e-300,  # smallest tau the bracket search will try
    "max_bisection": 2000,
    "conjugacy_tol": 1e-12,  # |1/r + 1/s - 1| for Hölder pairs
}


# ==============================================================================
# GRID / ENERGY
# ==============================================================================

GRID = {
    "hessian_mu": 1e-12,  # (|D u|^2 + mu)^{(q-2)/2} in Newton weights only
    "monotonicity_slack": 1e-12,  # relative slack for lhs >= rhs
}


# ==============================================================================
# FROZEN SOLVER (damped Newton)
# ==============================================================================

NEWTON = {
    "tol_scale": 1e-9,  # tol_residual = tol_scale * (1 + sup|source|) unless given
    "max_iter": 100,
    "armijo_c1": 1e-4,
    "backtrack_factor": 0.5,
    "max_halvings": 40,
    "max_step": 1e2,  # initial step capped so that sup|step * direction| <= max_step
}


# ==============================================================================
# ELLIPTIC CONTINUATION + PICARD
# ==============================================================================

CONTINUATION = {
    "epsilon_0": 1e-2,
    "factor": 0.5,  # epsilon_{j+1} = factor * epsilon_j
    "epsilon_min": 1e-8,
    "tol_picard": 1e-8,  # sup |u^{m+1} - u^m|
    "tol_exponent": 1e-8,  # sup |q^{m+1} - q^m|
    "max_picard": 200,
    "theta_u": 1.0,  # 1 = undamped
}

ELLIPTIC_CHECKS = {
    "near_zero": 1e-10,  # sup|u| below this (with f(.,0) != 0) is flagged
    "trace_slack": 0.05,  # modular trace may grow by 5% as epsilon decreases
}


# ==============================================================================
# PARABOLIC (Rothe + scalar fixed point)
# ==============================================================================

PARABOLIC = {
    "theta_b": 0.5,
    "tol_b": 1e-10,
    "max_fixed_point": 100,
    "epsilon_continuation": False,  # epsilon = 0 inside steps by default
}

LEDGER = {
    "residual_factor": 100.0,  # per-step slack >= -factor * tol_residual
}


# ==============================================================================
# VALIDATION LATTICES
# ==============================================================================

VALIDATION = {
    "sample_span": 10.0,  # exponents sampled on t in [-span, span]
    "exponent_samples": 2001,
    "lipschitz_slack": 1e-6,
    "growth_slack": 1e-6,
    "growth_u_max": 1e3,  # u lattice for (f) is [-growth_u_max, growth_u_max]
    "growth_u_samples": 401,
    "growth_x_samples": 17,  # per axis
    "boundary_tol": 1e-8,  # sup|u0| on the boundary <= tol * (1 + sup|u0|)
}


# ==============================================================================
# VERIFY SUITE
# ==============================================================================

VERIFY_TRIALS = {
    "modular_norm": 200,  # per branch (norm > 1, < 1, = 1)
    "holder": 500,
    "monotonicity": 10_000,  # vector pairs per exponent
    "gradient": 50,
    "convexity": 50,
    "operator_monotonicity": 50,
    "coercivity": 20,
    "uniqueness": 5,
}

MONOTONICITY_EXPONENTS = [2.0, 2.7, 3.0, 4.0, 6.0]


# ==============================================================================
# OUTPUT
# ==============================================================================

OUTPUT = {
    "directory": "out",
    "snapshots": [],
}


# ==============================================================================
# HELPER FUNCTIONS
# ==============================================================================


def default_tol_residual(source_sup: float) -> float:
    """
    Scale-aware Newton tolerance

    Args:
        source_sup: sup-norm of the frozen source

    Returns:
        tol_scale * (1 + source_sup)
    """
    return NEWTON["tol_scale"] * (1.0 + source_sup)


def schema_path() -> Path:
    """Location of the shipped case schema"""
    return Path(__file__).parent / CASE_SCHEMA_FILENAME


def load_schema() -> dict:
    with open(schema_path(), encoding="utf-8") as handle:
        return json.load(handle)


def schema_defaults(schema: Optional[dict] = None, section: str = "solver") -> dict:
    """
    Documented defaults of one top-level schema section

    Args:
        schema: Parsed schema (loaded from disk when omitted)
        section: Top-level property name

    Returns:
        Nested dict of defaults, e.g. {"newton": {"max_iter": 100, ...}, ...}
    """
    schema = schema or load_schema()
    return _collect_defaults(schema["properties"][section])


def _collect_defaults(node: dict) -> Any:
    if "properties" in node:
        return {
            key: _collect_defaults(child)
            for key, child in node["properties"].items()
            if "default" in child or "properties" in child
        }
    return copy.deepcopy(node.get("default"))


# ==============================================================================
# SCHEMA CHECKING
# ==============================================================================

_JSON_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
}


def _type_ok(value: Any, expected: str) -> bool:
    if expected == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if expected == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, _JSON_TYPES[expected])


def _check(value: Any, schema: dict, path: str) -> Any:
    """Validate one node against a schema subset, filling defaults in objects"""
    expected = schema.get("type")
    if expected and not _type_ok(value, expected):
        raise ConfigurationError(path, f"expected {expected}, got {type(value).__name__}")

    if "enum" in schema and value not in schema["enum"]:
        raise ConfigurationError(path, f"{value!r} is not one of {schema['enum']}")
    if "minimum" in schema and value < schema["minimum"]:
        raise ConfigurationError(path, f"{value} is below the minimum {schema['minimum']}")
    if "exclusiveMinimum" in schema and value <= schema["exclusiveMinimum"]:
        raise ConfigurationError(path, f"{value} must be greater than {schema['exclusiveMinimum']}")
    if "maximum" in schema and value > schema["maximum"]:
        raise ConfigurationError(path, f"{value} is above the maximum {schema['maximum']}")

    if expected == "array":
        if "minItems" in schema and len(value) < schema["minItems"]:
            raise ConfigurationError(path, f"needs at least {schema['minItems']} item(s)")
        if "maxItems" in schema and len(value) > schema["maxItems"]:
            raise ConfigurationError(path, f"takes at most {schema['maxItems']} item(s)")
        items = schema.get("items")
        if items:
            return [_check(item, items, f"{path}[{i}]") for i, item in enumerate(value)]
        return list(value)

    if expected == "object":
        properties = schema.get("properties", {})
        if schema.get("additionalProperties") is False:
            unknown = sorted(set(value) - set(properties))
            if unknown:
                where = f"{path}.{unknown[0]}" if path else unknown[0]
                raise ConfigurationError(where, "unknown key")
        for key in schema.get("required", []):
            if key not in value:
                raise ConfigurationError(f"{path}.{key}" if path else key, "required key is missing")

        result = {}
        for key, child in properties.items():
            where = f"{path}.{key}" if path else key
            if key in value:
                result[key] = _check(value[key], child, where)
            elif "default" in child:
                result[key] = _check(copy.deepcopy(child["default"]), child, where)
        return result

    return value


def load_case_config(path: str | Path) -> CaseConfig:
    """
    Read, schema-check and default-fill a case file

    Args:
        path: JSON case file

    Returns:
        Validated CaseConfig with every documented default present

    Raises:
        ConfigurationError: On unreadable files, invalid JSON, schema violations
            or a mode section that does not match the selected mode
    """
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except OSError as e:
        raise ConfigurationError("config", f"cannot read {path}: {e.strerror or e}")
    except json.JSONDecodeError as e:
        raise ConfigurationError("config", f"invalid JSON at line {e.lineno}: {e.msg}")

    return parse_case_config(document)


def parse_case_config(document: Any) -> CaseConfig:
    """Schema-check an already parsed case document (see load_case_config)"""
    config = _check(document, load_schema(), "")

    mode = config["mode"]
    other = MODE_PARABOLIC if mode == MODE_ELLIPTIC else MODE_ELLIPTIC
    if other in config:
        raise ConfigurationError(other, f"section does not apply to mode '{mode}'")
    if mode not in config:
        raise ConfigurationError(mode, f"section is required for mode '{mode}'")

    logger.debug("Loaded %s case '%s'", mode, config["name"])
    return config


# ==============================================================================
# CONFIGURATION VALIDATION
# ==============================================================================


def validate_config():
    """Validate configuration settings"""
    assert SPACES["luxemburg_tol"] > 0, "Luxemburg tolerance must be positive"
    assert 0 < NEWTON["backtrack_factor"] < 1, "Backtrack factor must lie in (0, 1)"
    assert 0 < NEWTON["armijo_c1"] < 0.5, "Armijo constant must lie in (0, 1/2)"
    assert (
        0 < CONTINUATION["epsilon_min"] <= CONTINUATION["epsilon_0"]
    ), "Need 0 < epsilon_min <= epsilon_0"
    assert 0 < CONTINUATION["factor"] < 1, "Continuation factor must lie in (0, 1)"
    assert 0 < CONTINUATION["theta_u"] <= 1, "theta_u must lie in (0, 1]"
    assert 0 < PARABOLIC["theta_b"] <= 1, "theta_b must lie in (0, 1]"

    defaults = schema_defaults()
    assert defaults["continuation"] == CONTINUATION, "Schema continuation defaults drifted"
    assert defaults["parabolic"] == PARABOLIC, "Schema parabolic defaults drifted"
    assert defaults["newton"] == {"max_iter": NEWTON["max_iter"]}, "Schema Newton defaults drifted"
    print(f"{EMOJI_CHECK} anisolve configuration validated successfully")
