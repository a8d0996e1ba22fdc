"""
Type definitions for anisolve

TypedDict records for solver reports, validation results and case configs.
Reports are plain JSON-serializable dictionaries so they can be written to the
run summary unchanged.
"""

from typing import Literal, Optional, TypedDict

# Type aliases
Mode = Literal["elliptic", "parabolic"]
NonlocalKind = Literal["grad_norm", "lq_norm"]
RunStatus = Literal["ok", "validation_failed", "solver_failed"]


# ==============================================================================
# SOLVER REPORTS
# ==============================================================================


class FrozenReport(TypedDict):
    """Damped Newton trace for one frozen-exponent solve"""

    iterations: int
    converged: bool
    residual: float  # final sup-norm of the nodal defect
    tol_residual: float
    energy_history: list[float]
    backtracks: list[int]
    gradient_fallbacks: int


class PicardStage(TypedDict):
    """Picard iteration trace at one regularization level"""

    epsilon: float
    iterations: int
    converged: bool
    difference_history: list[float]  # sup |u^{m+1} - u^m|
    drift_history: list[float]  # sup |q^{m+1} - q^m|
    newton_iterations: int
    modular: float  # anisotropic modular of the accepted iterate
    defect: float | None  # self-consistent residual, checked at the last level only


class EllipticReport(TypedDict):
    """Full trace of an elliptic solve"""

    stages: list[PicardStage]
    picard_iterations: int
    newton_iterations: int
    final_defect: float
    tol_residual: float
    modular_trace: list[float]
    a_priori_bounded: bool
    near_zero: bool
    sup_norm: float


class StepReport(TypedDict):
    """One Rothe step with its scalar fixed point and energy ledger"""

    step: int
    time: float
    s: float
    s_history: list[float]
    b_defect: float
    fixed_point_iterations: int
    exponents: list[float]
    newton_iterations: int
    tol_residual: float
    l2_sq_prev: float
    l2_sq: float
    modular: float
    source_work: float
    slack: float
    cumulative_lhs: float
    cumulative_bound: float


class ParabolicReport(TypedDict):
    """Trajectory-level summary of a parabolic solve"""

    h: float
    steps: list[StepReport]
    energy_ok: bool
    cumulative_ok: bool
    source_bound: float  # F = max_k ||[f]_h||_{L2}
    bound_constant: float  # C in ||u_k||^2 <= ||u_0||^2 + C t_k
    l2_bound: float
    max_l2_sq: float
    l2_nonincreasing: Optional[bool]  # only meaningful for zero sources


# ==============================================================================
# VALIDATION
# ==============================================================================


class ConditionCheck(TypedDict):
    """Pass/fail record for one standing hypothesis"""

    condition: str
    passed: bool
    message: str
    witness: Optional[dict]


class ValidationReport(TypedDict):
    """All condition checks for one problem"""

    passed: bool
    checks: list[ConditionCheck]


# ==============================================================================
# VERIFY SUITE AND STUDIES
# ==============================================================================


class PropertyResult(TypedDict):
    """Outcome of one randomized property"""

    name: str
    passed: bool
    trials: int
    failures: int
    worst: float  # largest violation margin seen (<= 0 means never violated)


class VerifyReport(TypedDict):
    """Outcome of the whole randomized suite"""

    seed: int
    passed: bool
    properties: list[PropertyResult]


class ConvergenceRow(TypedDict):
    """One refinement level of a convergence study"""

    n: int
    error: float
    order: Optional[float]


class RunSummary(TypedDict):
    """JSON summary written next to the solution files"""

    case: str
    mode: Mode
    status: RunStatus
    config_hash: str
    config: dict
    validation: ValidationReport
    report: Optional[dict]
    error: Optional[str]
    files: list[str]
    wall_time: float


# ==============================================================================
# CASE CONFIGURATION
# ==============================================================================


class GridConfig(TypedDict):
    d: int
    n: int


class ExponentConfig(TypedDict):
    expressions: list[str]
    bounds: list[list[float]]
    lipschitz: list[float]


class GrowthConfig(TypedDict):
    c: float
    r: float


class EllipticConfig(TypedDict):
    growth: GrowthConfig
    expect_negative_at_zero: bool


class NonlocalConfig(TypedDict, total=False):
    kind: NonlocalKind
    q: float


class ParabolicConfig(TypedDict):
    b: NonlocalConfig
    u0: str
    T: float
    N0: int


class OutputConfig(TypedDict):
    directory: str
    snapshots: list[float]


class CaseConfig(TypedDict, total=False):
    """Validated case document (defaults filled from the schema)"""

    name: str
    mode: Mode
    seed: int
    grid: GridConfig
    exponents: ExponentConfig
    source: str
    reference: str
    elliptic: EllipticConfig
    parabolic: ParabolicConfig
    solver: dict
    output: OutputConfig
