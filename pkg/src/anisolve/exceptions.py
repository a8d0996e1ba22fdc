"""
Custom Exceptions for anisolve

Provides specific exception types for configuration, expression, layout and
solver failures. Solver failures carry the best iterate and the report so far.
"""

from typing import Any, Optional


class AnisolveError(Exception):
    """Base exception for all anisolve errors"""

    pass


class ConfigurationError(AnisolveError):
    """Raised when a case configuration or solver setting is invalid"""

    def __init__(self, parameter: str, message: str):
        self.parameter = parameter
        self.message = f"Configuration error for '{parameter}': {message}"
        super().__init__(self.message)


class ValidationError(AnisolveError):
    """Raised when problem data violates a standing hypothesis"""

    def __init__(self, condition: str, message: str):
        self.condition = condition
        self.message = f"Condition {condition} violated: {message}"
        super().__init__(self.message)


class LayoutMismatchError(AnisolveError):
    """Raised when two sampled fields do not share a layout"""

    def __init__(self, expected: tuple, actual: tuple, what: str = "field"):
        self.expected = expected
        self.actual = actual
        self.message = f"Layout mismatch for {what}: expected shape {expected}, got {actual}"
        super().__init__(self.message)


# ==============================================================================
# EXPRESSION ERRORS
# ==============================================================================


class ExpressionError(AnisolveError):
    """Base class for parse and evaluation errors of expressions"""

    pass


class ExpressionSyntaxError(ExpressionError):
    """Raised when an expression does not follow the grammar"""

    def __init__(self, source: str, offset: int, expected: str):
        self.source = source
        self.offset = offset
        self.expected = expected
        self.message = (
            f"Syntax error at byte {offset} in '{source}': expected {expected}"
        )
        super().__init__(self.message)


class UnknownIdentifierError(ExpressionError):
    """Raised when an expression names a variable or function that does not exist"""

    def __init__(self, name: str, offset: int, known: list[str]):
        self.name = name
        self.offset = offset
        self.message = (
            f"Unknown identifier '{name}' at byte {offset}. "
            f"Known identifiers are: {', '.join(known)}"
        )
        super().__init__(self.message)


class ArityError(ExpressionError):
    """Raised when a function is called with the wrong number of arguments"""

    def __init__(self, name: str, expected: int, actual: int):
        self.name = name
        self.expected = expected
        self.actual = actual
        self.message = f"Function '{name}' takes {expected} argument(s), got {actual}"
        super().__init__(self.message)


class UnboundVariableError(ExpressionError):
    """Raised when evaluation meets a variable missing from the environment"""

    def __init__(self, name: str):
        self.name = name
        self.message = f"Variable '{name}' is not bound in the evaluation environment"
        super().__init__(self.message)


class EvaluationError(ExpressionError):
    """Raised on division by zero, 0^negative and other domain errors"""

    def __init__(self, reason: str, index: Optional[tuple] = None, location: str = ""):
        self.reason = reason
        self.index = index
        self.location = location
        where = f" at {location}" if location else ""
        if not where and index is not None:
            where = f" at sample {index}"
        self.message = f"Evaluation error{where}: {reason}"
        super().__init__(self.message)

    def at(self, location: str) -> "EvaluationError":
        """Return a copy of this error with a human-readable location attached"""
        return EvaluationError(self.reason, self.index, location)


# ==============================================================================
# SOLVER ERRORS
# ==============================================================================


class SolverError(AnisolveError):
    """Base class for iterative solver failures"""

    def __init__(self, message: str, best: Any = None, report: Any = None):
        self.best = best
        self.report = report
        self.message = message
        super().__init__(self.message)


class NonConvergenceError(SolverError):
    """Raised when an iteration exhausts its budget"""

    def __init__(self, stage: str, budget: int, best: Any = None, report: Any = None):
        self.stage = stage
        self.budget = budget
        super().__init__(
            f"{stage} did not converge within {budget} iterations", best, report
        )


class LineSearchStallError(SolverError):
    """Raised when neither the Newton nor the gradient direction passes Armijo"""

    def __init__(self, iteration: int, halvings: int, best: Any = None, report: Any = None):
        self.iteration = iteration
        self.halvings = halvings
        super().__init__(
            f"Line search stalled at Newton iteration {iteration} "
            f"after {halvings} halvings (gradient fallback also failed)",
            best,
            report,
        )


class TrajectoryAbortedError(SolverError):
    """Raised when a time step fails; carries the partial trajectory"""

    def __init__(self, step: int, cause: AnisolveError, trajectory: Any, report: Any = None):
        self.step = step
        self.cause = cause
        self.trajectory = trajectory
        super().__init__(
            f"Time step {step} failed: {cause}", best=trajectory, report=report
        )
