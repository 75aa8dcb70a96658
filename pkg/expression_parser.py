"""
Immersion Formula Parser with Second-Order Jet Evaluation
Parses coordinate formulas in the surface parameters u, v and propagates
value, gradient and Hessian through the tree in one pass.

Syntax:
    numbers      1, 2.5, 1e-3
    variables    u, v
    constants    pi
    functions    sin(.), cos(.), exp(.), sqrt(.)
    operators    + - * / and ^ with a constant integer exponent
    precedence   ^  >  unary -  >  * /  >  + -   (left associative)
"""

import math
import re
from dataclasses import dataclass, field
from typing import List, Tuple, Union

from errors import ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError

VARIABLES = ("u", "v")
FUNCTIONS = ("sin", "cos", "exp", "sqrt")
NAMED_CONSTANTS = {"pi": math.pi}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


# ---------------------------------------------------------------------------
# Tree nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    """neg, or one of the elementary functions"""
    op: str
    operand: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Power:
    base: "Expr"
    exponent: int
    offset: int = field(default=0, compare=False)


Expr = Union[Const, Var, Unary, Binary, Power]


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int  # byte offset into the UTF-8 source


def _tokenize(source: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(source, pos)
        if match is None or match.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExpressionSyntaxError(
                f"Unexpected character {source[start]!r}", _byte_offset(source, start)
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _byte_offset(source, start)))
        pos = match.end()
    tokens.append(_Token("end", "", len(source.encode("utf-8"))))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    """Recursive descent over the token list"""

    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.current
        if token.kind != "op" or token.text != text:
            found = token.text or "end of input"
            raise ExpressionSyntaxError(f"Expected {text!r}, found {found!r}", token.offset)
        return self.advance()

    def parse(self) -> Expr:
        expr = self.parse_sum()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(f"Unexpected {self.current.text!r}", self.current.offset)
        return expr

    def parse_sum(self) -> Expr:
        left = self.parse_product()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance()
            right = self.parse_product()
            left = Binary(op.text, left, right, op.offset)
        return left

    def parse_product(self) -> Expr:
        left = self.parse_unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance()
            right = self.parse_unary()
            left = Binary(op.text, left, right, op.offset)
        return left

    def parse_unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            op = self.advance()
            return Unary("neg", self.parse_unary(), op.offset)
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        while self.current.kind == "op" and self.current.text == "^":
            op = self.advance()
            base = Power(base, self.parse_integer_exponent(), op.offset)
        return base

    def parse_integer_exponent(self) -> int:
        sign = 1
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            sign = -1
        token = self.current
        if token.kind != "number" or not re.fullmatch(r"\d+", token.text):
            raise ExpressionSyntaxError("Exponent must be an integer constant", token.offset)
        self.advance()
        return sign * int(token.text)

    def parse_atom(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExpressionSyntaxError(f"Numeric literal {token.text!r} is out of range", token.offset)
            return Const(value, token.offset)
        if token.kind == "ident":
            self.advance()
            if token.text in VARIABLES:
                return Var(token.text, token.offset)
            if token.text in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[token.text], token.offset)
            if token.text in FUNCTIONS:
                self.expect("(")
                argument = self.parse_sum()
                self.expect(")")
                return Unary(token.text, argument, token.offset)
            raise UnknownIdentifierError(f"Unknown identifier {token.text!r}", token.offset)
        if token.kind == "op" and token.text == "(":
            self.advance()
            inner = self.parse_sum()
            self.expect(")")
            return inner
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"Unexpected {found!r}", token.offset)


def parse(source: str) -> Expr:
    """Parse one coordinate formula"""
    return _Parser(source).parse()


def to_source(expr: Expr) -> str:
    """Print a tree back to text; parse(to_source(e)) == e"""
    if isinstance(expr, Const):
        if not math.isfinite(expr.value):
            raise ValueError(f"Constant {expr.value!r} has no source form")
        return repr(float(expr.value))
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == "neg":
            return f"(-{to_source(expr.operand)})"
        return f"{expr.op}({to_source(expr.operand)})"
    if isinstance(expr, Binary):
        return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"
    if isinstance(expr, Power):
        return f"({to_source(expr.base)})^{expr.exponent}"
    raise TypeError(f"Not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Second-order jets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    """Value, first and second partials in (u, v); duv is the single mixed partial"""
    value: float
    du: float = 0.0
    dv: float = 0.0
    duu: float = 0.0
    duv: float = 0.0
    dvv: float = 0.0

    @classmethod
    def constant(cls, value: float) -> "Jet2":
        return cls(float(value))

    @classmethod
    def variable(cls, name: str, u: float, v: float) -> "Jet2":
        if name == "u":
            return cls(float(u), du=1.0)
        return cls(float(v), dv=1.0)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(
            self.value + other.value, self.du + other.du, self.dv + other.dv,
            self.duu + other.duu, self.duv + other.duv, self.dvv + other.dvv,
        )

    def __sub__(self, other: "Jet2") -> "Jet2":
        return self + (-other)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.du, -self.dv, -self.duu, -self.duv, -self.dvv)

    def __mul__(self, other: "Jet2") -> "Jet2":
        a, b = self, other
        return Jet2(
            a.value * b.value,
            a.du * b.value + a.value * b.du,
            a.dv * b.value + a.value * b.dv,
            a.duu * b.value + 2.0 * a.du * b.du + a.value * b.duu,
            a.duv * b.value + a.du * b.dv + a.dv * b.du + a.value * b.duv,
            a.dvv * b.value + 2.0 * a.dv * b.dv + a.value * b.dvv,
        )

    def compose(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a scalar function with f(a)=f0, f'(a)=f1, f''(a)=f2"""
        return Jet2(
            f0,
            f1 * self.du,
            f1 * self.dv,
            f2 * self.du * self.du + f1 * self.duu,
            f2 * self.du * self.dv + f1 * self.duv,
            f2 * self.dv * self.dv + f1 * self.dvv,
        )

    def gradient(self) -> Tuple[float, float]:
        return self.du, self.dv

    def hessian(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        return (self.duu, self.duv), (self.duv, self.dvv)


def _power_jet(base: Jet2, n: int, offset: int) -> Jet2:
    if n == 0:
        return Jet2.constant(1.0)
    a = base.value
    if n < 0 and a == 0.0:
        raise ExpressionDomainError("Division by zero in negative power", offset)
    try:
        f0 = a ** n
        f1 = n * a ** (n - 1) if n != 1 else 1.0
        f2 = n * (n - 1) * a ** (n - 2) if n not in (0, 1) else 0.0
    except (OverflowError, ZeroDivisionError):
        raise ExpressionDomainError(f"Power {n} of {a!r} is out of range", offset) from None
    return base.compose(f0, f1, f2)


def eval_jet2(expr: Expr, u: float, v: float) -> Jet2:
    """Evaluate a tree and its derivatives up to order two at (u, v)"""
    if isinstance(expr, Const):
        return Jet2.constant(expr.value)
    if isinstance(expr, Var):
        return Jet2.variable(expr.name, u, v)
    if isinstance(expr, Power):
        return _power_jet(eval_jet2(expr.base, u, v), expr.exponent, expr.offset)
    if isinstance(expr, Binary):
        left = eval_jet2(expr.left, u, v)
        right = eval_jet2(expr.right, u, v)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right.value == 0.0:
            raise ExpressionDomainError("Division by zero", expr.offset)
        b = right.value
        try:
            reciprocal = right.compose(1.0 / b, -1.0 / b ** 2, 2.0 / b ** 3)
        except (OverflowError, ZeroDivisionError):
            raise ExpressionDomainError("Quotient is out of range", expr.offset) from None
        return left * reciprocal
    if isinstance(expr, Unary):
        a = eval_jet2(expr.operand, u, v)
        x = a.value
        if expr.op == "neg":
            return -a
        if expr.op == "sin":
            return a.compose(math.sin(x), math.cos(x), -math.sin(x))
        if expr.op == "cos":
            return a.compose(math.cos(x), -math.sin(x), -math.cos(x))
        if expr.op == "exp":
            try:
                e = math.exp(x)
            except OverflowError:
                raise ExpressionDomainError(f"exp overflows at {x!r}", expr.offset) from None
            return a.compose(e, e, e)
        if expr.op == "sqrt":
            if x < 0.0:
                raise ExpressionDomainError("sqrt of a negative value", expr.offset)
            if x == 0.0:
                raise ExpressionDomainError("sqrt is not differentiable at zero", expr.offset)
            s = math.sqrt(x)
            return a.compose(s, 0.5 / s, -0.25 / (s * x))
    raise TypeError(f"Not an expression node: {expr!r}")


def evaluate(expr: Expr, u: float, v: float) -> float:
    return eval_jet2(expr, u, v).value
