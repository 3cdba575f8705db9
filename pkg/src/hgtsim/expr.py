"""Tiny arithmetic expression language for rate formulas.

Scenario files define the birth, death, competition and transfer rates as
text formulas over the free variables ``x`` (and ``y`` for two-argument
kernels).  The grammar is deliberately small and total:

    expr   := cmp
    cmp    := add (('<' | '>' | '<=' | '>=') add)*    # each yields 0.0/1.0
    add    := mul (('+' | '-') mul)*
    mul    := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ['^' unary]                        # right-associative
    atom   := NUMBER | NAME | NAME '(' expr {',' expr} ')' | '(' expr ')'

Functions: ``exp``, ``log``, ``abs`` (one argument), ``min``, ``max`` (two
arguments).  Numeric literals use a decimal point only.  Comparisons return
exactly 0.0 or 1.0, which is enough to express indicator kernels such as
``0.7*(x>y)`` without a conditional construct.

``evaluate`` accepts scalar or numpy-array bindings; ``to_python_source``
emits an equivalent Python expression (used to JIT-compile rate functions
for the stochastic engine).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

__all__ = [
    "ExprNode",
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Cmp",
    "Call",
    "ParseError",
    "ExprEvalError",
    "parse",
    "evaluate",
    "pretty",
    "variables",
    "to_python_source",
]

_FUNCTIONS = {"exp": 1, "log": 1, "abs": 1, "min": 2, "max": 2}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|[-+*/^()<>,]))"
)


class ParseError(ValueError):
    """Raised on malformed expression text; carries the byte offset."""

    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at position {position}: {message}")


class ExprEvalError(ArithmeticError):
    """Raised when evaluation hits log of a nonpositive value or x/0."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "ExprNode"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "ExprNode"
    right: "ExprNode"


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < > <= >=
    left: "ExprNode"
    right: "ExprNode"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["ExprNode", ...]


ExprNode = Num | Var | Neg | Bin | Cmp | Call


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip whitespace-only tail
            if source[pos:].strip() == "":
                break
            raise ParseError(pos, f"unexpected character {source[pos:].lstrip()[0]!r}")
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed_vars: frozenset[str]):
        self.source = source
        self.tokens = _tokenize(source)
        self.idx = 0
        self.allowed = allowed_vars

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(pos, f"expected {op!r}")
        return self.advance()

    def parse(self) -> ExprNode:
        node = self.comparison()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(pos, f"unexpected trailing input {val!r}")
        return node

    def comparison(self) -> ExprNode:
        node = self.additive()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("<", ">", "<=", ">="):
                self.advance()
                node = Cmp(val, node, self.additive())
            else:
                return node

    def additive(self) -> ExprNode:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.advance()
                node = Bin(val, node, self.term())
            else:
                return node

    def term(self) -> ExprNode:
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("*", "/"):
                self.advance()
                node = Bin(val, node, self.unary())
            else:
                return node

    def unary(self) -> ExprNode:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> ExprNode:
        node = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            # exponent re-enters unary, giving right associativity and
            # allowing a negated exponent like x^-2
            return Bin("^", node, self.unary())
        return node

    def atom(self) -> ExprNode:
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                return self.call(val, pos)
            if val not in self.allowed:
                raise ParseError(pos, f"unknown identifier {val!r}")
            return Var(val)
        if kind == "op" and val == "(":
            node = self.comparison()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ParseError(pos, "empty operand")
        raise ParseError(pos, f"unexpected token {val!r}")

    def call(self, name: str, pos: int) -> ExprNode:
        if name not in _FUNCTIONS:
            raise ParseError(pos, f"unknown function {name!r}")
        self.expect_op("(")
        args = [self.comparison()]
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == ",":
                self.advance()
                args.append(self.comparison())
            else:
                break
        self.expect_op(")")
        arity = _FUNCTIONS[name]
        if len(args) != arity:
            raise ParseError(pos, f"{name} takes {arity} argument(s), got {len(args)}")
        return Call(name, tuple(args))


def parse(source: str, allowed_vars=("x", "y")) -> ExprNode:
    """Parse ``source`` into an AST using only the given variable names."""
    if not source or not source.strip():
        raise ParseError(0, "empty expression")
    return _Parser(source, frozenset(allowed_vars)).parse()


def variables(ast: ExprNode) -> frozenset[str]:
    """Free variables referenced by the expression."""
    if isinstance(ast, Var):
        return frozenset((ast.name,))
    if isinstance(ast, Num):
        return frozenset()
    if isinstance(ast, Neg):
        return variables(ast.child)
    if isinstance(ast, (Bin, Cmp)):
        return variables(ast.left) | variables(ast.right)
    if isinstance(ast, Call):
        out: frozenset[str] = frozenset()
        for a in ast.args:
            out |= variables(a)
        return out
    raise TypeError(f"not an expression node: {ast!r}")


def evaluate(ast: ExprNode, bindings: Mapping[str, float | np.ndarray]):
    """Evaluate the AST; bindings may be scalars or numpy arrays.

    Comparison nodes contribute exactly 0.0/1.0.  Raises ExprEvalError on
    log of a nonpositive argument or division by zero.
    """
    if isinstance(ast, Num):
        return ast.value
    if isinstance(ast, Var):
        try:
            return bindings[ast.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {ast.name!r}") from None
    if isinstance(ast, Neg):
        return -evaluate(ast.child, bindings)
    if isinstance(ast, Bin):
        lhs = evaluate(ast.left, bindings)
        rhs = evaluate(ast.right, bindings)
        if ast.op == "+":
            return lhs + rhs
        if ast.op == "-":
            return lhs - rhs
        if ast.op == "*":
            return lhs * rhs
        if ast.op == "/":
            if np.any(rhs == 0):
                raise ExprEvalError("division by zero")
            return lhs / rhs
        if ast.op == "^":
            try:
                return lhs**rhs
            except (ZeroDivisionError, ValueError, OverflowError) as err:
                raise ExprEvalError(f"power undefined: {err}") from None
        raise TypeError(f"bad operator {ast.op!r}")
    if isinstance(ast, Cmp):
        lhs = evaluate(ast.left, bindings)
        rhs = evaluate(ast.right, bindings)
        if ast.op == "<":
            return (lhs < rhs) * 1.0
        if ast.op == ">":
            return (lhs > rhs) * 1.0
        if ast.op == "<=":
            return (lhs <= rhs) * 1.0
        return (lhs >= rhs) * 1.0
    if isinstance(ast, Call):
        args = [evaluate(a, bindings) for a in ast.args]
        if ast.fn == "exp":
            return np.exp(args[0])
        if ast.fn == "log":
            if np.any(args[0] <= 0):
                raise ExprEvalError("log of nonpositive argument")
            return np.log(args[0])
        if ast.fn == "abs":
            return np.abs(args[0])
        if ast.fn == "min":
            return np.minimum(args[0], args[1])
        return np.maximum(args[0], args[1])
    raise TypeError(f"not an expression node: {ast!r}")


# precedence levels used by the printer; higher binds tighter
_PREC_CMP, _PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5, 6


def _prec(ast: ExprNode) -> int:
    if isinstance(ast, (Num, Var, Call)):
        return _PREC_ATOM
    if isinstance(ast, Neg):
        return _PREC_UNARY
    if isinstance(ast, Cmp):
        return _PREC_CMP
    if ast.op in ("+", "-"):
        return _PREC_ADD
    if ast.op in ("*", "/"):
        return _PREC_MUL
    return _PREC_POW


def pretty(ast: ExprNode) -> str:
    """Render the AST as text; parse(pretty(a)) is structurally equal to a
    for any AST the parser can produce (literals are nonnegative finite
    numbers)."""

    def wrap(child: ExprNode, minimum: int) -> str:
        text = pretty(child)
        return f"({text})" if _prec(child) < minimum else text

    if isinstance(ast, Num):
        # positional notation only: the grammar has no exponent syntax
        return np.format_float_positional(ast.value, unique=True, trim="0")
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        return "-" + wrap(ast.child, _PREC_UNARY)
    if isinstance(ast, Cmp):
        # same-level operands are re-wrapped on the right so that folding
        # stays left-associative on reparse
        return f"{wrap(ast.left, _PREC_CMP)} {ast.op} {wrap(ast.right, _PREC_CMP + 1)}"
    if isinstance(ast, Bin):
        p = _prec(ast)
        if ast.op == "^":
            # right-associative: wrap an exponentiation on the left
            return f"{wrap(ast.left, p + 1)}^{wrap(ast.right, _PREC_UNARY)}"
        return f"{wrap(ast.left, p)} {ast.op} {wrap(ast.right, p + 1)}"
    if isinstance(ast, Call):
        return f"{ast.fn}({', '.join(pretty(a) for a in ast.args)})"
    raise TypeError(f"not an expression node: {ast!r}")


def to_python_source(ast: ExprNode) -> str:
    """Emit an equivalent Python expression (math-module style).

    Comparisons become conditional 0.0/1.0 expressions and calls map onto
    math.exp/math.log/abs/min/max, so the result can be compiled by numba
    in nopython mode.
    """
    if isinstance(ast, Num):
        return repr(ast.value)
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        return f"(-{to_python_source(ast.child)})"
    if isinstance(ast, Bin):
        op = "**" if ast.op == "^" else ast.op
        return f"({to_python_source(ast.left)} {op} {to_python_source(ast.right)})"
    if isinstance(ast, Cmp):
        return (
            f"(1.0 if ({to_python_source(ast.left)} {ast.op} "
            f"{to_python_source(ast.right)}) else 0.0)"
        )
    if isinstance(ast, Call):
        args = ", ".join(to_python_source(a) for a in ast.args)
        fn = {"exp": "math.exp", "log": "math.log", "abs": "abs"}.get(ast.fn, ast.fn)
        return f"{fn}({args})"
    raise TypeError(f"not an expression node: {ast!r}")
