"""Coefficient expressions: a tiny arithmetic DSL for a(x,s), f(x,s,p) and brackets.

Grammar (lowest to highest binding)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := number | name | name '(' args ')' | '(' expr ')'

Evaluation goes through numpy so the same tree works on scalars and on
arrays of nodes; domain errors (sqrt of a negative, fractional power of a
negative base) produce NaN instead of raising.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

VARIABLES = frozenset({"x", "y", "s", "p1", "p2", "t"})
CONSTANTS = {"pi": np.pi}
FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "tanh": (1, np.tanh),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "pow": (2, np.power),
}
BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


class ExpressionError(ValueError):
    """Base class for parse and evaluation failures."""


class ExprSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class UnboundVariableError(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} is not bound")
        self.name = name


# --- tree ----------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]


# --- tokenizer -----------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'num' | 'name' | 'op' | 'end'
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.lastgroup is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _expect(self, text: str) -> _Tok:
        if self.cur.text != text or self.cur.kind != "op":
            what = "end of input" if self.cur.kind == "end" else repr(self.cur.text)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", self.cur.offset, self.source)
        return self._advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.cur.kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.cur.text!r}", self.cur.offset, self.source)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self._advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.cur.kind == "op" and self.cur.text == "-":
            self._advance()
            return Neg(self.unary())
        if self.cur.kind == "op" and self.cur.text == "+":
            self._advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            self._advance()
            # exponent may itself carry a sign: 2^-1
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.cur
        if tok.kind == "num":
            self._advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self._advance()
            if self.cur.kind == "op" and self.cur.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifierError(tok.text, tok.offset)
                self._advance()
                args = [self.expr()]
                while self.cur.kind == "op" and self.cur.text == ",":
                    self._advance()
                    args.append(self.expr())
                self._expect(")")
                arity = FUNCTIONS[tok.text][0]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{tok.text}() takes {arity} argument(s), got {len(args)}",
                        tok.offset, self.source)
                return Call(tok.text, tuple(args))
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in VARIABLES:
                return Var(tok.text)
            raise UnknownIdentifierError(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        what = "end of input" if tok.kind == "end" else f"token {tok.text!r}"
        raise ExprSyntaxError(f"unexpected {what}", tok.offset, self.source)


# --- public API ----------------------------------------------------------

@dataclass(frozen=True)
class Expression:
    """Parsed, immutable expression tree."""

    root: Node
    source: str = ""

    @property
    def variables(self) -> frozenset:
        return _variables(self.root)

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    def __str__(self) -> str:
        return pretty(self)


def parse(source: str) -> Expression:
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source)
    return Expression(_Parser(source).parse(), source)


def constant(value: float) -> Expression:
    return Expression(Num(float(value)), repr(float(value)))


def as_expression(value) -> Expression:
    """Accept an Expression, an expression string, or a real number."""
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return constant(float(value))
    return parse(str(value))


def _variables(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Neg):
        return _variables(node.operand)
    if isinstance(node, BinOp):
        return _variables(node.left) | _variables(node.right)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= _variables(a)
        return out
    return frozenset()


def _eval(node: Node, env: Mapping):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariableError(node.name) from None
    if isinstance(node, Neg):
        return np.negative(_eval(node.operand, env))
    if isinstance(node, BinOp):
        return BINARY[node.op](_eval(node.left, env), _eval(node.right, env))
    fn = FUNCTIONS[node.func][1]
    return fn(*(_eval(a, env) for a in node.args))


def evaluate(e: Expression, bindings: Mapping):
    """Evaluate ``e``; scalar bindings give a float, array bindings broadcast.

    Only the variables that actually occur in ``e`` need to be bound.
    """
    env = {k: (np.asarray(v, dtype=float) if not np.isscalar(v) else np.float64(v))
           for k, v in bindings.items()}
    with np.errstate(all="ignore"):
        out = _eval(e.root, env)
    if np.ndim(out) == 0:
        return float(out)
    return out


def evaluate_on(e: Expression, shape, bindings: Mapping) -> np.ndarray:
    """Evaluate and broadcast to ``shape`` (constants become full arrays)."""
    return np.broadcast_to(np.asarray(evaluate(e, bindings), dtype=float), shape).copy()


def _fmt_num(v: float) -> str:
    if v == np.pi:
        return "pi"
    text = repr(float(v))
    if text in ("inf", "nan"):
        raise ExpressionError(f"cannot print non-finite literal {text}")
    return text


def _pretty(node: Node) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_pretty(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_pretty(node.left)} {node.op} {_pretty(node.right)})"
    return f"{node.func}({', '.join(_pretty(a) for a in node.args)})"


def pretty(e: Expression) -> str:
    """Fully parenthesised rendering; reparses to the identical tree."""
    return _pretty(e.root)
