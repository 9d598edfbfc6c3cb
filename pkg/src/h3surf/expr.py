"""A small expression language for surface data.

Profiles such as ``a(t)``, ``u(t)`` and graphs ``f(x, y)`` are written as
text, parsed into an immutable tree, and evaluated on :class:`Jet2` inputs so
that first and second derivatives come out exactly.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Unary minus binds looser than ``^`` (so ``-t^2`` is ``-(t^2)``) and ``^`` is
right-associative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from . import jet
from .jet import Jet2, JetDomainError

VARIABLES = frozenset({"t", "s", "x", "y", "c"})
FUNCTIONS = frozenset(jet.FUNCTIONS)


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, src: str, pos: int):
        self.src = src
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {src!r}")


class ExprDomainError(JetDomainError):
    def __init__(self, message: str, node: "Expr"):
        self.node = node
        super().__init__(f"{message} in {to_text(node)}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    src_len = len(src)
    while pos < src_len:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", src, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", src_len))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, pos = self.take()
        if val != text:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.src, pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", self.src, pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in VARIABLES:
                return Var(val)
            raise ExprSyntaxError(f"unknown identifier {val!r}", self.src, pos)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", self.src, pos)


def parse(src: str) -> Expr:
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", src, 0)
    return _Parser(src).parse()


def _num_text(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    """Canonical, fully parenthesised text; ``parse(to_text(e)) == e``."""
    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    return f"({to_text(e.left)} {e.op} {to_text(e.right)})"


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


Binding = Union[Jet2, float, np.ndarray]


def eval_jet2(e: Expr, bindings: Mapping[str, Binding], nparams: int | None = None) -> Jet2:
    """Evaluate ``e`` on jets.

    ``bindings`` maps each free variable to a :class:`Jet2` or to a plain
    number (treated as a constant, e.g. the family parameter ``c``).
    """
    if nparams is None:
        nparams = next((b.nparams for b in bindings.values() if isinstance(b, Jet2)), 1)
    missing = free_variables(e) - set(bindings)
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    env = {
        k: b if isinstance(b, Jet2) else Jet2.constant(b, nparams) for k, b in bindings.items()
    }
    out = _eval(e, env, nparams)
    if not out.is_finite():
        raise ExprDomainError("non-finite result", e)
    return out


def _integer_exponent(e: Expr) -> int | None:
    if isinstance(e, Num) and e.value.is_integer():
        return int(e.value)
    if isinstance(e, Neg) and isinstance(e.arg, Num) and e.arg.value.is_integer():
        return -int(e.arg.value)
    return None


def _eval(e: Expr, env: dict[str, Jet2], n: int) -> Jet2:
    if isinstance(e, Num):
        return Jet2.constant(e.value, n)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env, n)
    if isinstance(e, Call):
        arg = _eval(e.arg, env, n)
        try:
            return jet.FUNCTIONS[e.func](arg)
        except JetDomainError as exc:
            raise ExprDomainError(str(exc), e) from None
    left = _eval(e.left, env, n)
    if e.op == "^":
        k = _integer_exponent(e.right)
        try:
            if k is not None:
                return left.ipow(k)
            right = _eval(e.right, env, n)
            if not np.any(right.grad) and right.value.ndim == 0:
                return jet.rpow(left, float(right.value))
            return jet.exp(right * jet.log(left))
        except JetDomainError as exc:
            raise ExprDomainError(str(exc), e) from None
    right = _eval(e.right, env, n)
    try:
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        return left / right
    except JetDomainError as exc:
        raise ExprDomainError(str(exc), e) from None


def evaluate(e: Expr, **values: float) -> float:
    """Plain numeric evaluation (no derivatives)."""
    return float(eval_jet2(e, values, nparams=1).value)


def profile(e: Expr, t, constants: Mapping[str, float] | None = None) -> Jet2:
    """Value, first and second derivative of a one-variable profile in ``t``."""
    bind: dict[str, Binding] = dict(constants or {})
    bind["t"] = Jet2.seed(t, 0, 1)
    return eval_jet2(e, bind, nparams=1)


def is_constant(e: Expr) -> bool:
    return not (free_variables(e) - {"c"})


__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprSyntaxError",
    "ExprDomainError",
    "parse",
    "to_text",
    "eval_jet2",
    "evaluate",
    "profile",
    "free_variables",
]
