"""Scalar expressions in the time variable ``t``.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' exponent)?
    exponent:= INT ('^' exponent)?          # right-associative, folded, >= 1
    unary   := '-' unary | primary
    primary := NUMBER | 't' | 'pi' | ('sin' | 'cos') '(' expr ')' | '(' expr ')'

Unary minus binds tighter than ``^``, so ``-t^2`` is ``(-t)^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

from .errors import EvalError, ParseError

__all__ = [
    "Expr",
    "Const",
    "Time",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Sin",
    "Cos",
    "parse",
    "evaluate",
    "differentiate",
    "to_string",
    "compile_expr",
    "node_count",
]


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 1:
            raise ValueError(f"Pow exponent must be an integer >= 1, got {self.exponent!r}")


@dataclass(frozen=True)
class Sin:
    arg: "Expr"


@dataclass(frozen=True)
class Cos:
    arg: "Expr"


Expr = Union[Const, Time, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos]

_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


# -- lexer / parser -------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, pos: int | None = None):
        pos = self.pos if pos is None else pos
        raise ParseError(message, len(self.text[:pos].encode("utf-8")))

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            self.error(f"expected {ch!r}, found {found}")
        self.pos += 1

    def number(self) -> str:
        start = self.pos
        text = self.text
        while self.pos < len(text) and text[self.pos].isdigit():
            self.pos += 1
        if self.pos < len(text) and text[self.pos] == ".":
            self.pos += 1
            while self.pos < len(text) and text[self.pos].isdigit():
                self.pos += 1
        if self.pos - start == 1 and text[start] == ".":
            self.error("expected digits", start)
        if self.pos < len(text) and text[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = save
        return text[start : self.pos]

    def identifier(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start : self.pos]

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek():
            self.error(f"expected operator or end of input, found {self.peek()!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self) -> Expr:
        left = self.power()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            right = self.power()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def power(self) -> Expr:
        base = self.unary()
        if self.peek() == "^":
            self.pos += 1
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        self.skip_ws()
        start = self.pos
        digits = self.identifier() if self.peek().isdigit() else ""
        if not digits.isdigit():
            self.error("expected integer exponent", start)
        k = int(digits)
        if self.peek() == "^":
            self.pos += 1
            k = k ** self.exponent()
        if k < 1:
            self.error("exponent must be >= 1", start)
        return k

    def unary(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        ch = self.peek()
        if not ch:
            self.error("expected number, 't', 'pi', 'sin', 'cos' or '(', found end of input")
        if ch.isdigit() or ch == ".":
            return Const(float(self.number()))
        if ch == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if ch.isalpha():
            start = self.pos
            name = self.identifier()
            if name == "t":
                return Time()
            if name == "pi":
                return Const(math.pi)
            if name in ("sin", "cos"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Sin(arg) if name == "sin" else Cos(arg)
            self.error(f"unknown identifier {name!r}", start)
        self.error(f"unexpected character {ch!r}")


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree; raises :class:`ParseError`."""
    return _Parser(text).parse()


# -- evaluation -------------------------------------------------------------------


def evaluate(e: Expr, t: float) -> float:
    """Evaluate ``e`` at time ``t``; raises :class:`EvalError` on division by zero."""
    match e:
        case Const(value):
            return value
        case Time():
            return t
        case Neg(a):
            return -evaluate(a, t)
        case Add(a, b):
            return evaluate(a, t) + evaluate(b, t)
        case Sub(a, b):
            return evaluate(a, t) - evaluate(b, t)
        case Mul(a, b):
            return evaluate(a, t) * evaluate(b, t)
        case Div(a, b):
            den = evaluate(b, t)
            if den == 0.0:
                raise EvalError(f"division by zero at t={t!r}")
            return evaluate(a, t) / den
        case Pow(a, k):
            return evaluate(a, t) ** k
        case Sin(a):
            return math.sin(evaluate(a, t))
        case Cos(a):
            return math.cos(evaluate(a, t))
    raise TypeError(f"not an expression node: {e!r}")


def differentiate(e: Expr) -> Expr:
    """d/dt by the textbook rules.  No simplification is attempted."""
    match e:
        case Const():
            return Const(0.0)
        case Time():
            return Const(1.0)
        case Neg(a):
            return Neg(differentiate(a))
        case Add(a, b):
            return Add(differentiate(a), differentiate(b))
        case Sub(a, b):
            return Sub(differentiate(a), differentiate(b))
        case Mul(a, b):
            return Add(Mul(differentiate(a), b), Mul(a, differentiate(b)))
        case Div(a, b):
            num = Sub(Mul(differentiate(a), b), Mul(a, differentiate(b)))
            return Div(num, Pow(b, 2))
        case Pow(a, k):
            if k == 1:
                return differentiate(a)
            outer = a if k == 2 else Pow(a, k - 1)
            return Mul(Mul(Const(float(k)), outer), differentiate(a))
        case Sin(a):
            return Mul(Cos(a), differentiate(a))
        case Cos(a):
            return Neg(Mul(Sin(a), differentiate(a)))
    raise TypeError(f"not an expression node: {e!r}")


def to_string(e: Expr) -> str:
    """Fully parenthesised text that :func:`parse` maps back to an equal-valued tree."""
    match e:
        case Const(value):
            return repr(float(value)) if value >= 0 else f"(-{repr(float(-value))})"
        case Time():
            return "t"
        case Neg(a):
            return f"(-{to_string(a)})"
        case Pow(a, k):
            return f"({to_string(a)}^{k})"
        case Sin(a):
            return f"sin({to_string(a)})"
        case Cos(a):
            return f"cos({to_string(a)})"
        case Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b):
            return f"({to_string(a)} {_BINARY[type(e)]} {to_string(b)})"
    raise TypeError(f"not an expression node: {e!r}")


def _source(e: Expr) -> str:
    match e:
        case Const(value):
            # parenthesised so that a negative literal survives ``**``
            return f"({float(value)!r})"
        case Time():
            return "t"
        case Neg(a):
            return f"(-{_source(a)})"
        case Div(a, b):
            return f"_div({_source(a)}, {_source(b)})"
        case Add(a, b) | Sub(a, b) | Mul(a, b):
            return f"({_source(a)} {_BINARY[type(e)]} {_source(b)})"
        case Pow(a, k):
            return f"({_source(a)} ** {k})"
        case Sin(a):
            return f"_sin({_source(a)})"
        case Cos(a):
            return f"_cos({_source(a)})"
    raise TypeError(f"not an expression node: {e!r}")


def _div(a, b):
    if b == 0.0:
        raise EvalError("division by zero")
    return a / b


_NAMESPACE = {"_sin": math.sin, "_cos": math.cos, "_div": _div}


def compile_expr(*exprs: Expr) -> Callable[[float], tuple]:
    """Compile expressions into one Python function ``t -> tuple of floats``.

    Semantics match :func:`evaluate`; this is only a faster route for the
    integrator's inner loop.
    """
    body = ", ".join(_source(e) for e in exprs)
    code = compile(f"lambda t: ({body},)", "<texpr>", "eval")
    return eval(code, dict(_NAMESPACE))


def node_count(e: Expr) -> int:
    match e:
        case Const() | Time():
            return 1
        case Neg(a) | Sin(a) | Cos(a) | Pow(a, _):
            return 1 + node_count(a)
        case Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b):
            return 1 + node_count(a) + node_count(b)
    raise TypeError(f"not an expression node: {e!r}")
