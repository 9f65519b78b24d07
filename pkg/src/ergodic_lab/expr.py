"""
Function DSL for iterate functions.

Grammar (``^`` binds tightest and is right-associative, unary minus binds looser
than ``^``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | "x" | "pi" | "e" | FUNC "(" expr ")" | "(" expr ")"
    FUNC   := exp | log | sin | cos | sqrt

A unary minus in front of a plain numeric literal folds into a negative constant;
in front of anything else it becomes ``(-1.0) * operand``.
"""

from __future__ import annotations

import logging
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Callable, Iterator, Mapping, Optional, Tuple, Union

import mpmath as mp
import numpy as np

from .errors import (
    ExprDomainError,
    ExprSyntaxError,
    InverseError,
    NoBracketError,
    NonMonotoneError,
    UnknownIdentifierError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}
INVERSE_SEARCH_BOUND = 1e18
DOMAIN_CANDIDATES = (1.0, math.e, math.exp(math.e), math.exp(math.exp(math.e)))
_DOMAIN_OFFSETS = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e3, 1e6)


# ============================================================================
# AST
# ============================================================================

class Expr:
    """Base node. Concrete nodes are frozen dataclasses, so ``==`` is structural."""

    precedence = 100

    def __add__(self, other: "Expr") -> "Expr":
        return Add(self, _coerce(other))

    def __sub__(self, other: "Expr") -> "Expr":
        return Sub(self, _coerce(other))

    def __mul__(self, other: "Expr") -> "Expr":
        return Mul(self, _coerce(other))

    def __truediv__(self, other: "Expr") -> "Expr":
        return Div(self, _coerce(other))

    def __pow__(self, other: "Expr") -> "Expr":
        return Pow(self, _coerce(other))

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float
    name: Optional[str] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ExprDomainError(f"constant must be finite, got {self.value}", self)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    pass


@dataclass(frozen=True, eq=True)
class BinaryOp(Expr):
    left: Expr
    right: Expr

    op_symbol = "?"


@dataclass(frozen=True, eq=True)
class Add(BinaryOp):
    precedence = 1
    op_symbol = "+"


@dataclass(frozen=True, eq=True)
class Sub(BinaryOp):
    precedence = 1
    op_symbol = "-"


@dataclass(frozen=True, eq=True)
class Mul(BinaryOp):
    precedence = 2
    op_symbol = "*"


@dataclass(frozen=True, eq=True)
class Div(BinaryOp):
    precedence = 2
    op_symbol = "/"


@dataclass(frozen=True, eq=True)
class Pow(BinaryOp):
    precedence = 3
    op_symbol = "^"


@dataclass(frozen=True, eq=True)
class Call(Expr):
    func: str
    arg: Expr

    def __post_init__(self) -> None:
        if self.func not in FUNCTIONS:
            raise UnknownIdentifierError(self.func, 0)


X = Var()


def _coerce(value: Union[Expr, float, int]) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def depends_on_x(node: Expr) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, BinaryOp):
        return depends_on_x(node.left) or depends_on_x(node.right)
    if isinstance(node, Call):
        return depends_on_x(node.arg)
    return False


def _literal_only(node: Expr) -> bool:
    if isinstance(node, Const):
        return node.name is None
    if isinstance(node, BinaryOp):
        return _literal_only(node.left) and _literal_only(node.right)
    if isinstance(node, Call):
        return _literal_only(node.arg)
    return False


def _whole_exponent(node: Expr) -> Expr:
    """Fold a literal-only exponent with a whole value, so ``x^(6/3)`` parses as ``x^2``."""
    if isinstance(node, Const) or not _literal_only(node):
        return node
    try:
        value = float(evaluate(node, 0.0))
    except ExprDomainError:
        return node
    return Const(value) if math.isfinite(value) and value.is_integer() else node


def node_count(node: Expr) -> int:
    if isinstance(node, BinaryOp):
        return 1 + node_count(node.left) + node_count(node.right)
    if isinstance(node, Call):
        return 1 + node_count(node.arg)
    return 1


# ============================================================================
# Printing
# ============================================================================

def to_text(node: Expr) -> str:
    """Render an AST as DSL text that parses back to the same tree."""
    if isinstance(node, Const):
        if node.name is not None:
            return node.name
        text = repr(float(node.value))
        return f"({text})" if text.startswith("-") else text
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, BinaryOp):
        left = to_text(node.left)
        right = to_text(node.right)
        left_prec = node.left.precedence
        right_prec = node.right.precedence
        if isinstance(node, Pow):
            if left_prec <= node.precedence:
                left = f"({left})"
            if right_prec < node.precedence:
                right = f"({right})"
        else:
            if left_prec < node.precedence:
                left = f"({left})"
            if right_prec <= node.precedence:
                right = f"({right})"
        return f"{left} {node.op_symbol} {right}"
    raise TypeError(f"Cannot print a {type(node).__name__}")


# ============================================================================
# Tokenizer and parser
# ============================================================================

TOKEN_NUMBER = "NUMBER"
TOKEN_NAME = "NAME"
TOKEN_OPERATOR = "OPERATOR"
TOKEN_LPAREN = "LPAREN"
TOKEN_RPAREN = "RPAREN"
TOKEN_EOF = "EOF"


@dataclass(frozen=True)
class Token:
    type: str
    value: str
    offset: int


class Tokenizer:
    TOKEN_SPECS = [
        (r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?", TOKEN_NUMBER),
        (r"[A-Za-z_][A-Za-z0-9_]*", TOKEN_NAME),
        (r"[-+*/^]", TOKEN_OPERATOR),
        (r"\(", TOKEN_LPAREN),
        (r"\)", TOKEN_RPAREN),
        (r"\s+", None),
    ]
    _COMPILED_SPECS = [(re.compile(pattern), ttype) for pattern, ttype in TOKEN_SPECS]

    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = list(self._tokenize())

    def byte_offset(self, char_offset: int) -> int:
        return len(self.text[:char_offset].encode("utf-8"))

    def _tokenize(self) -> Iterator[Token]:
        pos = 0
        while pos < len(self.text):
            for regex, ttype in self._COMPILED_SPECS:
                match = regex.match(self.text, pos)
                if match:
                    if ttype:
                        yield Token(ttype, match.group(0), self.byte_offset(pos))
                    pos = match.end()
                    break
            else:
                raise ExprSyntaxError(
                    f"unexpected character {self.text[pos]!r}", self.byte_offset(pos)
                )
        yield Token(TOKEN_EOF, "", self.byte_offset(len(self.text)))


class Parser:
    def __init__(self, text: str, constants: Optional[Mapping[str, float]] = None) -> None:
        self.tokens = Tokenizer(text).tokens
        self.index = 0
        self.constants = dict(NAMED_CONSTANTS)
        self.constants.update(constants or {})

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        if token.type != TOKEN_EOF:
            self.index += 1
        return token

    def _expect(self, ttype: str, what: str) -> Token:
        if self.current.type != ttype:
            raise ExprSyntaxError(f"expected {what}", self.current.offset)
        return self._advance()

    def _is_op(self, *symbols: str) -> bool:
        return self.current.type == TOKEN_OPERATOR and self.current.value in symbols

    def parse(self) -> Expr:
        node = self._expr()
        if self.current.type != TOKEN_EOF:
            raise ExprSyntaxError(f"unexpected {self.current.value!r}", self.current.offset)
        return node

    def _expr(self) -> Expr:
        node = self._term()
        while self._is_op("+", "-"):
            op = self._advance().value
            right = self._term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def _term(self) -> Expr:
        node = self._unary()
        while self._is_op("*", "/"):
            op = self._advance().value
            right = self._unary()
            node = Mul(node, right) if op == "*" else Div(node, right)
        return node

    def _unary(self) -> Expr:
        if self._is_op("-"):
            self._advance()
            operand = self._unary()
            if isinstance(operand, Const) and operand.name is None:
                return Const(-operand.value)
            return Mul(Const(-1.0), operand)
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self._is_op("^"):
            self._advance()
            return Pow(base, _whole_exponent(self._unary()))
        return base

    def _atom(self) -> Expr:
        token = self.current
        if token.type == TOKEN_NUMBER:
            self._advance()
            value = float(token.value)
            if not math.isfinite(value):
                raise ExprSyntaxError("numeric literal overflows", token.offset)
            return Const(value)
        if token.type == TOKEN_NAME:
            self._advance()
            if token.value == "x":
                return X
            if token.value in self.constants:
                return Const(self.constants[token.value], token.value)
            if token.value in FUNCTIONS:
                self._expect(TOKEN_LPAREN, "'(' after function name")
                arg = self._expr()
                self._expect(TOKEN_RPAREN, "')'")
                return Call(token.value, arg)
            raise UnknownIdentifierError(token.value, token.offset)
        if token.type == TOKEN_LPAREN:
            self._advance()
            node = self._expr()
            self._expect(TOKEN_RPAREN, "')'")
            return node
        if token.type == TOKEN_EOF:
            raise ExprSyntaxError("unexpected end of input", token.offset)
        raise ExprSyntaxError(f"unexpected {token.value!r}", token.offset)


def parse(text: str, constants: Optional[Mapping[str, float]] = None) -> Expr:
    """Parse DSL text into an AST.

    ``constants`` adds named constants beyond ``pi`` and ``e``; they print by name.
    """
    return Parser(text, constants).parse()


# ============================================================================
# Evaluation
# ============================================================================

def _is_integral(node: Expr) -> bool:
    """x-free and whole-valued, so ``x^(6/3)`` takes negative x like ``x^2`` does."""
    if isinstance(node, Const):
        return float(node.value).is_integer()
    if depends_on_x(node):
        return False
    value = float(_evaluate(node, np.zeros(1))[0])
    return math.isfinite(value) and value.is_integer()


@singledispatch
def _evaluate(node: Expr, x: np.ndarray) -> np.ndarray:
    raise TypeError(f"Cannot evaluate a {type(node).__name__}")


@_evaluate.register(Const)
def _(node: Const, x: np.ndarray) -> np.ndarray:
    return np.full_like(x, node.value, dtype=float)


@_evaluate.register(Var)
def _(node: Var, x: np.ndarray) -> np.ndarray:
    return x


@_evaluate.register(Add)
def _(node: Add, x: np.ndarray) -> np.ndarray:
    return _evaluate(node.left, x) + _evaluate(node.right, x)


@_evaluate.register(Sub)
def _(node: Sub, x: np.ndarray) -> np.ndarray:
    return _evaluate(node.left, x) - _evaluate(node.right, x)


@_evaluate.register(Mul)
def _(node: Mul, x: np.ndarray) -> np.ndarray:
    return _evaluate(node.left, x) * _evaluate(node.right, x)


@_evaluate.register(Div)
def _(node: Div, x: np.ndarray) -> np.ndarray:
    denominator = _evaluate(node.right, x)
    if np.any(denominator == 0.0):
        raise ExprDomainError(f"division by zero in {to_text(node)}", node)
    return _evaluate(node.left, x) / denominator


@_evaluate.register(Pow)
def _(node: Pow, x: np.ndarray) -> np.ndarray:
    base = _evaluate(node.left, x)
    exponent = _evaluate(node.right, x)
    if not _is_integral(node.right):
        if np.any(base < 0.0):
            raise ExprDomainError(
                f"non-integer power of negative base in {to_text(node)}", node
            )
        if np.any((base == 0.0) & (exponent <= 0.0)):
            raise ExprDomainError(f"non-positive power of zero in {to_text(node)}", node)
    return np.power(base, exponent)


@_evaluate.register(Call)
def _(node: Call, x: np.ndarray) -> np.ndarray:
    arg = _evaluate(node.arg, x)
    if node.func == "log":
        if np.any(arg <= 0.0):
            raise ExprDomainError(f"log of non-positive value in {to_text(node)}", node)
        return np.log(arg)
    if node.func == "sqrt":
        if np.any(arg < 0.0):
            raise ExprDomainError(f"sqrt of negative value in {to_text(node)}", node)
        return np.sqrt(arg)
    if node.func == "exp":
        return np.exp(arg)
    if node.func == "sin":
        return np.sin(arg)
    return np.cos(arg)


def evaluate(node: Expr, x: ArrayLike) -> ArrayLike:
    """Evaluate in binary64; arrays evaluate elementwise, scalars return float."""
    scalar = np.ndim(x) == 0
    values = np.atleast_1d(np.asarray(x, dtype=float))
    with np.errstate(all="ignore"):
        result = _evaluate(node, values)
    if np.any(np.isnan(result) & ~np.isnan(values)):
        raise ExprDomainError(f"evaluation of {to_text(node)} is undefined", node)
    return float(result[0]) if scalar else result


_MP_FUNCTIONS = {
    "exp": mp.exp,
    "log": mp.log,
    "sin": mp.sin,
    "cos": mp.cos,
    "sqrt": mp.sqrt,
}


def evaluate_mp(
    node: Expr,
    x: Optional[mp.mpf] = None,
    named: Optional[Mapping[str, Callable[[], mp.mpf]]] = None,
) -> mp.mpf:
    """Evaluate with mpmath at the current working precision.

    Literals are read from their decimal text so ``0.1`` means one tenth.
    """
    if isinstance(node, Const):
        if named and node.name in named:
            return named[node.name]()
        if node.name == "pi":
            return +mp.pi
        if node.name == "e":
            return +mp.e
        return mp.mpf(repr(node.value))
    if isinstance(node, Var):
        if x is None:
            raise ExprDomainError("expression depends on x", node)
        return mp.mpf(x)
    if isinstance(node, Call):
        arg = evaluate_mp(node.arg, x, named)
        if node.func == "log" and arg <= 0:
            raise ExprDomainError(f"log of non-positive value in {to_text(node)}", node)
        if node.func == "sqrt" and arg < 0:
            raise ExprDomainError(f"sqrt of negative value in {to_text(node)}", node)
        return _MP_FUNCTIONS[node.func](arg)
    left = evaluate_mp(node.left, x, named)
    right = evaluate_mp(node.right, x, named)
    if isinstance(node, Add):
        return left + right
    if isinstance(node, Sub):
        return left - right
    if isinstance(node, Mul):
        return left * right
    if isinstance(node, Div):
        if right == 0:
            raise ExprDomainError(f"division by zero in {to_text(node)}", node)
        return left / right
    if left < 0 and not _is_integral(node.right):
        raise ExprDomainError(f"non-integer power of negative base in {to_text(node)}", node)
    return mp.power(left, right)


# ============================================================================
# Differentiation
# ============================================================================

def _is_const(node: Expr, value: Optional[float] = None) -> bool:
    if not isinstance(node, Const):
        return False
    return value is None or node.value == value


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(a, 0.0):
        return _mul(Const(-1.0), b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return Const(1.0)
    if _is_const(b, 1.0):
        return a
    return Pow(a, b)


@singledispatch
def differentiate(node: Expr) -> Expr:
    """Exact symbolic derivative with respect to x, lightly constant-folded."""
    raise NotImplementedError(f"Cannot differentiate a {type(node).__name__}")


@differentiate.register(Const)
def _(node: Const) -> Expr:
    return Const(0.0)


@differentiate.register(Var)
def _(node: Var) -> Expr:
    return Const(1.0)


@differentiate.register(Add)
def _(node: Add) -> Expr:
    return _add(differentiate(node.left), differentiate(node.right))


@differentiate.register(Sub)
def _(node: Sub) -> Expr:
    return _sub(differentiate(node.left), differentiate(node.right))


@differentiate.register(Mul)
def _(node: Mul) -> Expr:
    u, v = node.left, node.right
    return _add(_mul(differentiate(u), v), _mul(u, differentiate(v)))


@differentiate.register(Div)
def _(node: Div) -> Expr:
    u, v = node.left, node.right
    numerator = _sub(_mul(differentiate(u), v), _mul(u, differentiate(v)))
    return _div(numerator, _pow(v, Const(2.0)))


@differentiate.register(Pow)
def _(node: Pow) -> Expr:
    u, v = node.left, node.right
    du = differentiate(u)
    if not depends_on_x(v):
        lowered = Const(v.value - 1.0) if isinstance(v, Const) else _sub(v, Const(1.0))
        return _mul(_mul(v, _pow(u, lowered)), du)
    dv = differentiate(v)
    if not depends_on_x(u):
        return _mul(_mul(node, Call("log", u)), dv)
    inner = _add(_mul(dv, Call("log", u)), _div(_mul(v, du), u))
    return _mul(node, inner)


@differentiate.register(Call)
def _(node: Call) -> Expr:
    u = node.arg
    du = differentiate(u)
    if node.func == "exp":
        outer: Expr = node
    elif node.func == "log":
        return _div(du, u)
    elif node.func == "sin":
        outer = Call("cos", u)
    elif node.func == "cos":
        outer = _mul(Const(-1.0), Call("sin", u))
    else:
        return _div(du, _mul(Const(2.0), node))
    return _mul(outer, du)


# ============================================================================
# Function specs and inversion
# ============================================================================

class RealFunction(ABC):
    """A real function on a half-line with derivatives up to order three."""

    name: str
    domain_start: float
    monotone_hint: str

    @abstractmethod
    def value(self, x: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def derivative(self, order: int, x: ArrayLike) -> ArrayLike:
        ...


def _evaluates_from(node: Expr, start: float) -> bool:
    points = np.array([start + offset for offset in _DOMAIN_OFFSETS])
    try:
        values = evaluate(node, points)
    except ExprDomainError:
        return False
    return bool(np.all(np.isfinite(values[:4])))


def detect_domain_start(node: Expr) -> float:
    """Smallest candidate in {1, e, e^e, ...} at which a short grid evaluates."""
    for candidate in DOMAIN_CANDIDATES:
        if _evaluates_from(node, candidate):
            return candidate
    raise ExprDomainError(f"no domain start found for {to_text(node)}", node)


def _monotone_hint(d1: Expr, start: float) -> str:
    grid = start + np.geomspace(1.0, 1e6, 25)
    try:
        slopes = evaluate(d1, grid)
    except ExprDomainError:
        return "unknown"
    tail = slopes[-10:]
    if np.all(tail > 0):
        return "increasing"
    if np.all(tail < 0):
        return "decreasing"
    return "unknown"


@dataclass(frozen=True)
class FunctionSpec(RealFunction):
    """Closed-form iterate function with its first three symbolic derivatives."""

    expr: Expr
    d1: Expr
    d2: Expr
    d3: Expr
    domain_start: float = 1.0
    monotone_hint: str = "unknown"
    name: str = ""
    derivatives: Tuple[Expr, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "derivatives", (self.expr, self.d1, self.d2, self.d3))

    @classmethod
    def from_expr(
        cls,
        expr: Expr,
        domain_start: Optional[float] = None,
        name: Optional[str] = None,
    ) -> "FunctionSpec":
        d1 = differentiate(expr)
        d2 = differentiate(d1)
        d3 = differentiate(d2)
        start = detect_domain_start(expr) if domain_start is None else float(domain_start)
        hint = _monotone_hint(d1, start)
        spec = cls(expr, d1, d2, d3, start, hint, name or to_text(expr))
        logger.debug(
            "function %s: domain_start=%s monotone=%s d3 nodes=%d",
            spec.name, start, hint, node_count(d3),
        )
        return spec

    @classmethod
    def from_text(
        cls,
        text: str,
        domain_start: Optional[float] = None,
        name: Optional[str] = None,
    ) -> "FunctionSpec":
        return cls.from_expr(parse(text), domain_start, name or text)

    @classmethod
    def affine(cls, slope: float, offset: float) -> "FunctionSpec":
        expr = _add(_mul(Const(float(slope)), X), Const(float(offset)))
        return cls.from_expr(expr, domain_start=0.0, name=f"{slope!r}*x+{offset!r}")

    def value(self, x: ArrayLike) -> ArrayLike:
        return evaluate(self.expr, x)

    def derivative(self, order: int, x: ArrayLike) -> ArrayLike:
        if not 0 <= order <= 3:
            raise ValueError(f"derivative order must be 0..3, got {order}")
        return evaluate(self.derivatives[order], x)


def _midpoint(lo: float, hi: float) -> float:
    if lo > 0.0 and hi > 4.0 * lo:
        return math.sqrt(lo * hi)
    return 0.5 * (lo + hi)


def inverse_eval(
    f: RealFunction,
    y: float,
    bracket_hint: Optional[Tuple[float, float]] = None,
) -> float:
    """Solve f(x) = y past ``f.domain_start``.

    Expands a bracket by doubling up to 1e18, then bisects with Newton steps on d1
    whenever they stay inside the bracket.
    """
    y = float(y)
    tol = 1e-10 * max(1.0, abs(y))
    lo = float(bracket_hint[0]) if bracket_hint else float(f.domain_start)
    hi = float(bracket_hint[1]) if bracket_hint else max(2.0 * lo, lo + 1.0)

    f_lo, f_hi = float(f.value(lo)), float(f.value(hi))
    if f.monotone_hint == "increasing":
        direction = 1.0
    elif f.monotone_hint == "decreasing":
        direction = -1.0
    elif f_hi != f_lo:
        direction = math.copysign(1.0, f_hi - f_lo)
    else:
        raise NonMonotoneError(f"{f.name} is flat on [{lo}, {hi}]")

    slack = 1e-12 * max(1.0, abs(y))
    g_lo = direction * (f_lo - y)
    if abs(f_lo - y) <= tol:
        return lo
    if g_lo > 0.0:
        raise NoBracketError(f"{y} is below the range of {f.name} past {lo}")
    g_hi = direction * (f_hi - y)
    while g_hi < 0.0:
        if hi >= INVERSE_SEARCH_BOUND:
            raise NoBracketError(f"no bracket for {f.name} = {y} below {INVERSE_SEARCH_BOUND:g}")
        lo, g_lo = hi, g_hi
        hi = min(2.0 * hi, INVERSE_SEARCH_BOUND)
        g_next = direction * (float(f.value(hi)) - y)
        if not math.isnan(g_next) and g_next < g_lo - slack:
            raise NonMonotoneError(f"{f.name} decreases while expanding the bracket at {hi}")
        g_hi = g_next
    if abs(g_hi) <= tol:
        return hi

    x = _midpoint(lo, hi)
    for _ in range(400):
        fx = float(f.value(x))
        gx = direction * (fx - y)
        if abs(fx - y) <= tol:
            return x
        if gx < g_lo - slack or gx > g_hi + slack:
            raise NonMonotoneError(f"{f.name} is not monotone inside [{lo}, {hi}]")
        if gx < 0.0:
            lo, g_lo = x, gx
        else:
            hi, g_hi = x, gx
        if hi - lo <= 4.0 * np.finfo(float).eps * max(abs(hi), 1.0):
            break
        slope = direction * float(f.derivative(1, x))
        candidate = x - gx / slope if slope > 0.0 and math.isfinite(slope) else math.nan
        x = candidate if lo < candidate < hi else _midpoint(lo, hi)

    best = min((lo, hi, x), key=lambda t: abs(float(f.value(t)) - y))
    residual = abs(float(f.value(best)) - y)
    if residual > tol:
        raise InverseError(
            f"inverse of {f.name} at {y} stalled at x={best!r} with residual {residual:.3g}"
        )
    return best
