"""
Expression Module

A small arithmetic-expression language used in case files to describe exponent
functions p_i(t), sources f(x,u) / f(x,t) and initial data u0(x).

Grammar (precedence low -> high):
    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := atom ('^' unary)?          # right-associative, binds tighter than '-'
    atom       := NUMBER | NAME | NAME '(' args ')' | '(' expression ')'

Evaluation is vectorized: environment values may be floats or numpy arrays of a
common broadcast shape, and errors report the first offending sample.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .exceptions import (
    ArityError,
    EvaluationError,
    ExpressionSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)

VARIABLES = ("x", "y", "t", "u", "s")

# name -> arity
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "tanh": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
    "clamp": 3,
}

_UNARY_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
}

_OPERATOR_CHARS = "+-*/^(),"


# ==============================================================================
# SYNTAX TREE
# ==============================================================================


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Number, Variable, Unary, Binary, Call]
Value = Union[float, np.ndarray]


# ==============================================================================
# TOKENIZER
# ==============================================================================


@dataclass(frozen=True)
class _Token:
    kind: str  # "number", "name", "op", "end"
    text: str
    offset: int  # byte offset into the UTF-8 source


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    idx = 0
    byte_offset = 0

    def advance(count: int) -> None:
        nonlocal idx, byte_offset
        byte_offset += len(source[idx : idx + count].encode("utf-8"))
        idx += count

    while idx < len(source):
        c = source[idx]
        if c.isspace():
            advance(1)
            continue

        if c.isascii() and (c.isdigit() or c == "."):
            end = idx
            while end < len(source) and (source[end].isdigit() or source[end] == "."):
                end += 1
            if end < len(source) and source[end] in "eE":
                exp_end = end + 1
                if exp_end < len(source) and source[exp_end] in "+-":
                    exp_end += 1
                if exp_end < len(source) and source[exp_end].isdigit():
                    while exp_end < len(source) and source[exp_end].isdigit():
                        exp_end += 1
                    end = exp_end
            text = source[idx:end]
            try:
                value = float(text)
            except ValueError:
                raise ExpressionSyntaxError(source, byte_offset, "a number")
            if not math.isfinite(value):
                raise ExpressionSyntaxError(source, byte_offset, "a finite number")
            tokens.append(_Token("number", text, byte_offset))
            advance(end - idx)
            continue

        if c.isascii() and (c.isalpha() or c == "_"):
            end = idx
            while end < len(source) and source[end].isascii() and (
                source[end].isalnum() or source[end] == "_"
            ):
                end += 1
            tokens.append(_Token("name", source[idx:end], byte_offset))
            advance(end - idx)
            continue

        if c in _OPERATOR_CHARS:
            tokens.append(_Token("op", c, byte_offset))
            advance(1)
            continue

        raise ExpressionSyntaxError(source, byte_offset, "an operator, number or name")

    tokens.append(_Token("end", "", byte_offset))
    return tokens


# ==============================================================================
# PARSER
# ==============================================================================


class _Parser:
    """Recursive-descent parser over the token list"""

    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.peek()
        if token.kind != "op" or token.text != text:
            raise ExpressionSyntaxError(self.source, token.offset, f"'{text}'")
        return self.take()

    def at_op(self, *texts: str) -> bool:
        token = self.peek()
        return token.kind == "op" and token.text in texts

    def parse(self) -> Expr:
        tree = self.expression()
        token = self.peek()
        if token.kind != "end":
            raise ExpressionSyntaxError(self.source, token.offset, "an operator or end of input")
        return tree

    def expression(self) -> Expr:
        left = self.term()
        while self.at_op("+", "-"):
            op = self.take().text
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.take().text
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.at_op("-"):
            self.take()
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at_op("^"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        token = self.peek()

        if token.kind == "number":
            self.take()
            return Number(float(token.text))

        if token.kind == "name":
            self.take()
            if self.at_op("("):
                return self.call(token)
            if token.text in VARIABLES:
                return Variable(token.text)
            if token.text in FUNCTIONS:
                raise ExpressionSyntaxError(self.source, self.peek().offset, "'('")
            raise UnknownIdentifierError(token.text, token.offset, list(VARIABLES))

        if self.at_op("("):
            self.take()
            inner = self.expression()
            self.expect(")")
            return inner

        raise ExpressionSyntaxError(self.source, token.offset, "a number, name or '('")

    def call(self, name_token: _Token) -> Expr:
        name = name_token.text
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, name_token.offset, sorted(FUNCTIONS))

        self.expect("(")
        args: list[Expr] = []
        if not self.at_op(")"):
            args.append(self.expression())
            while self.at_op(","):
                self.take()
                args.append(self.expression())
        self.expect(")")

        if len(args) != FUNCTIONS[name]:
            raise ArityError(name, FUNCTIONS[name], len(args))
        return Call(name, tuple(args))


def parse(source: str) -> Expr:
    """
    Parse an expression string into a syntax tree

    Args:
        source: Expression text, e.g. "clamp(tanh(u)+3, 2.5, 4)"

    Returns:
        Immutable syntax tree (structural equality via ==)

    Raises:
        ExpressionSyntaxError: On malformed input, with byte offset
        UnknownIdentifierError: On names outside the variable/function tables
        ArityError: On calls with the wrong number of arguments

    Example:
        >>> evaluate(parse("2^3^2"), {})
        512.0
    """
    return _Parser(source).parse()


def to_source(e: Expr) -> str:
    """Print a tree as fully parenthesized source that re-parses to the same tree"""
    match e:
        case Number(value):
            return repr(float(value))
        case Variable(name):
            return name
        case Unary(op, operand):
            return f"({op}{to_source(operand)})"
        case Binary(op, left, right):
            return f"({to_source(left)} {op} {to_source(right)})"
        case Call(name, args):
            return f"{name}({', '.join(to_source(a) for a in args)})"
    raise TypeError(f"Not an expression node: {e!r}")


def free_variables(e: Expr) -> frozenset[str]:
    """Return the set of variable names used by an expression"""
    match e:
        case Number():
            return frozenset()
        case Variable(name):
            return frozenset([name])
        case Unary(_, operand):
            return free_variables(operand)
        case Binary(_, left, right):
            return free_variables(left) | free_variables(right)
        case Call(_, args):
            return frozenset().union(*(free_variables(a) for a in args))
    raise TypeError(f"Not an expression node: {e!r}")


# ==============================================================================
# EVALUATION
# ==============================================================================


def _first_index(mask: np.ndarray) -> tuple | None:
    if mask.ndim == 0:
        return None
    return tuple(int(i) for i in np.argwhere(mask)[0])


def _require_finite(result: np.ndarray, operands: tuple, what: str) -> np.ndarray:
    finite_in = np.ones(np.shape(result), dtype=bool)
    for operand in operands:
        finite_in &= np.broadcast_to(np.isfinite(operand), np.shape(result))
    bad = ~np.isfinite(result) & finite_in
    if np.any(bad):
        raise EvaluationError(f"non-finite result of {what}", _first_index(bad))
    return result


def _eval(e: Expr, env: Mapping[str, Value]) -> np.ndarray:
    match e:
        case Number(value):
            return np.float64(value)

        case Variable(name):
            if name not in env:
                raise UnboundVariableError(name)
            return np.asarray(env[name], dtype=float)

        case Unary(_, operand):
            return -_eval(operand, env)

        case Binary(op, left, right):
            a = _eval(left, env)
            b = _eval(right, env)
            if op == "+":
                return _require_finite(a + b, (a, b), "'+'")
            if op == "-":
                return _require_finite(a - b, (a, b), "'-'")
            if op == "*":
                return _require_finite(a * b, (a, b), "'*'")
            if op == "/":
                zero = np.broadcast_to(b == 0, np.broadcast(a, b).shape)
                if np.any(zero):
                    raise EvaluationError("division by zero", _first_index(zero))
                return _require_finite(a / b, (a, b), "'/'")
            # '^'
            bad = np.broadcast_to((a == 0) & (b < 0), np.broadcast(a, b).shape)
            if np.any(bad):
                raise EvaluationError("0 raised to a negative power", _first_index(bad))
            return _require_finite(np.power(a, b), (a, b), "'^'")

        case Call(name, args):
            values = [_eval(arg, env) for arg in args]
            if name in _UNARY_FUNCTIONS:
                return _require_finite(_UNARY_FUNCTIONS[name](values[0]), tuple(values), name)
            if name == "min":
                return np.minimum(values[0], values[1])
            if name == "max":
                return np.maximum(values[0], values[1])
            # clamp(v, lo, hi) = min(max(v, lo), hi)
            v, lo, hi = values
            swapped = np.broadcast_to(lo > hi, np.broadcast(v, lo, hi).shape)
            if np.any(swapped):
                raise EvaluationError("clamp with lo > hi", _first_index(swapped))
            return np.minimum(np.maximum(v, lo), hi)

    raise TypeError(f"Not an expression node: {e!r}")


def evaluate(e: Expr, env: Mapping[str, Value]) -> Value:
    """
    Evaluate an expression in double precision

    Args:
        e: Parsed expression
        env: Variable bindings; floats or numpy arrays (broadcast together)

    Returns:
        float when every binding is scalar, otherwise a numpy array

    Raises:
        UnboundVariableError: If a free variable is missing from env
        EvaluationError: On division by zero, 0^negative or non-finite results
    """
    with np.errstate(all="ignore"):
        value = _eval(e, env)
    if np.ndim(value) == 0:
        return float(value)
    return np.array(value, dtype=float)


def is_constant(e: Expr) -> bool:
    """True when the expression has no free variables"""
    return not free_variables(e)
