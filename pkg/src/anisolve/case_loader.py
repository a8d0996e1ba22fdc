"""
Case Loader Module

Turns a validated case config into problem objects and solver settings.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .config import load_case_config
from .constants import B_GRAD_NORM, MODE_ELLIPTIC
from .elliptic import ContinuationParams, EllipticProblem, ExponentSpec
from .exceptions import ConfigurationError, ExpressionError
from .expr import Expr, free_variables, parse
from .frozen import NewtonParams
from .grid import Grid
from .parabolic import NonlocalMap, ParabolicParams, ParabolicProblem
from .types import CaseConfig

_SPATIAL = {1: ("x",), 2: ("x", "y")}


@dataclass(frozen=True, eq=False)
class Case:
    """A loaded case: config plus the problem it describes"""

    config: CaseConfig
    problem: Union[EllipticProblem, ParabolicProblem]
    newton: NewtonParams
    continuation: ContinuationParams
    parabolic: ParabolicParams

    @property
    def mode(self) -> str:
        return self.config["mode"]

    @property
    def name(self) -> str:
        return self.config["name"]


def _expression(text: str, key: str, allowed: tuple[str, ...]) -> Expr:
    try:
        tree = parse(text)
    except ExpressionError as e:
        raise ConfigurationError(key, e.message) from e
    extra = free_variables(tree) - set(allowed)
    if extra:
        raise ConfigurationError(key, f"uses {', '.join(sorted(extra))}; allowed variables are {', '.join(allowed)}")
    return tree


def build_grid(config: CaseConfig) -> Grid:
    return Grid(config["grid"]["d"], config["grid"]["n"])


def build_exponents(config: CaseConfig) -> ExponentSpec:
    """Parse the exponent section; one entry per direction is required"""
    section = config["exponents"]
    d = config["grid"]["d"]
    for key in ("expressions", "bounds", "lipschitz"):
        if len(section[key]) != d:
            raise ConfigurationError(f"exponents.{key}", f"expected {d} entries (one per direction), got {len(section[key])}")
    try:
        return ExponentSpec.parse(section["expressions"], section["bounds"], section["lipschitz"])
    except ExpressionError as e:
        raise ConfigurationError("exponents.expressions", e.message) from e


def build_reference(config: CaseConfig) -> Optional[Expr]:
    """Closed-form reference solution in (x, y) (and t for parabolic cases), if declared"""
    if "reference" not in config:
        return None
    allowed = _SPATIAL[config["grid"]["d"]]
    if config["mode"] != MODE_ELLIPTIC:
        allowed = allowed + ("t",)
    return _expression(config["reference"], "reference", allowed)


def build_elliptic(config: CaseConfig) -> EllipticProblem:
    grid = build_grid(config)
    section = config["elliptic"]
    return EllipticProblem(
        grid=grid,
        exponents=build_exponents(config),
        source=_expression(config["source"], "source", _SPATIAL[grid.d] + ("u",)),
        growth_c=float(section["growth"]["c"]),
        growth_r=float(section["growth"]["r"]),
        expect_negative_at_zero=section["expect_negative_at_zero"],
    )


def build_nonlocal_map(config: CaseConfig, spec: ExponentSpec) -> NonlocalMap:
    section = config["parabolic"]["b"]
    if section["kind"] == B_GRAD_NORM:
        if "q" in section:
            raise ConfigurationError("parabolic.b.q", "grad_norm uses p_minus; q only applies to lq_norm")
        return NonlocalMap.grad_norm(spec)
    if "q" not in section:
        raise ConfigurationError("parabolic.b.q", "lq_norm needs an exponent q >= 1")
    return NonlocalMap.lq_norm(section["q"])


def build_parabolic(config: CaseConfig) -> ParabolicProblem:
    grid = build_grid(config)
    spec = build_exponents(config)
    section = config["parabolic"]
    return ParabolicProblem(
        grid=grid,
        exponents=spec,
        b=build_nonlocal_map(config, spec),
        source=_expression(config["source"], "source", _SPATIAL[grid.d] + ("t",)),
        u0=_expression(section["u0"], "parabolic.u0", _SPATIAL[grid.d]),
        T=float(section["T"]),
        N0=int(section["N0"]),
    )


def solver_settings(config: CaseConfig) -> tuple[NewtonParams, ContinuationParams, ParabolicParams]:
    """Solver dataclasses from the (default-filled) solver section"""
    solver = config["solver"]
    newton = NewtonParams(**solver["newton"])
    continuation = ContinuationParams(**solver["continuation"])
    parabolic = ParabolicParams(**solver["parabolic"], continuation=continuation, newton=newton)
    return newton, continuation, parabolic


def build_case(config: CaseConfig) -> Case:
    problem = build_elliptic(config) if config["mode"] == MODE_ELLIPTIC else build_parabolic(config)
    newton, continuation, parabolic = solver_settings(config)
    return Case(config, problem, newton, continuation, parabolic)


def load_case(path: Union[str, Path]) -> Case:
    """
    Load, schema-check and build a case file

    Raises:
        ConfigurationError: On I/O, schema, expression or consistency problems
    """
    return build_case(load_case_config(path))
