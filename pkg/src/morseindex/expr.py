"""A small arithmetic expression language for metric and embedding components.

Grammar (``^`` binds tightest and is right-associative; unary minus sits
between ``^`` and the multiplicative operators)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Names resolve to variables first and then to the constants ``pi`` and
``e``.  Evaluation is vectorized over numpy arrays.
"""

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, ParseError

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
RESERVED = frozenset(FUNCTIONS) | frozenset(CONSTANTS)

_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


@dataclass(frozen=True)
class Number:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ConfigError(f"numeric literals must be finite and non-negative, got {self.value}")


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Number, Name, Neg, BinOp, Call]

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int       # byte offset into the UTF-8 source


def _tokenize(src):
    tokens = []
    i = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ParseError(f"unexpected character {src[i]!r}", len(src[:i].encode()),
                             ("number", "name", "operator"))
        if m.lastgroup != "ws":
            kind = m.lastgroup if m.lastgroup != "op" else m.group()
            tokens.append(_Token(kind, m.group(), len(src[:i].encode())))
        i = m.end()
    tokens.append(_Token("end", "", len(src.encode())))
    return tokens


class _Parser:
    def __init__(self, src):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, kind):
        if self.tok.kind != kind:
            self.fail((kind,))
        return self.advance()

    def fail(self, expected):
        found = self.tok.text or "end of input"
        raise ParseError(f"unexpected {found!r}", self.tok.pos, expected)

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.advance().kind
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind in ("*", "/"):
            op = self.advance().kind
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(f"numeric literal {tok.text!r} overflows", tok.pos, ("number",))
            return Number(value)
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            return Name(tok.text)
        if tok.kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(("number", "name", "function", "(", "-"))


def parse_expression(src):
    """Parse ``src`` into an expression tree; raises ParseError with a byte offset."""
    if not isinstance(src, str):
        raise ConfigError(f"expressions must be strings, got {type(src).__name__}")
    return _Parser(src).parse()


def to_string(node):
    """Print ``node`` so that parsing the result gives back an equal tree."""
    if isinstance(node, Number):
        return repr(float(node.value))
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Neg):
        return f"(-{to_string(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")


def names(node):
    """Free names used by ``node`` (constants included)."""
    if isinstance(node, Name):
        return {node.id}
    if isinstance(node, Neg):
        return names(node.operand)
    if isinstance(node, Call):
        return names(node.arg)
    if isinstance(node, BinOp):
        return names(node.left) | names(node.right)
    return set()


def compile_expression(node, variables=()):
    """Turn ``node`` into ``f(env) -> array`` where ``env`` maps variable names to arrays."""
    variables = set(variables)

    def build(n):
        if isinstance(n, Number):
            value = n.value
            return lambda env: value
        if isinstance(n, Name):
            key = n.id
            if key in variables:
                return lambda env: env[key]
            if key in CONSTANTS:
                value = CONSTANTS[key]
                return lambda env: value
            raise ConfigError(f"unknown name {key!r} (variables: {sorted(variables)})")
        if isinstance(n, Neg):
            inner = build(n.operand)
            return lambda env: np.negative(inner(env))
        if isinstance(n, Call):
            func, inner = FUNCTIONS[n.func], build(n.arg)
            return lambda env: func(inner(env))
        op, left, right = _BINARY[n.op], build(n.left), build(n.right)
        return lambda env: op(left(env), right(env))

    return build(node)


def evaluate(node, env=None):
    """Evaluate ``node`` with variables from ``env`` (numbers or arrays)."""
    env = dict(env or {})
    if isinstance(node, str):
        node = parse_expression(node)
    with np.errstate(all="ignore"):
        out = compile_expression(node, env)({k: np.asarray(v, dtype=float) for k, v in env.items()})
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def constant_value(value, what="value"):
    """A number, or an expression string without variables, as a float."""
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be a number or expression, got a boolean")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        out = evaluate(parse_expression(value))
    else:
        raise ConfigError(f"{what} must be a number or expression string, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(f"{what} is not finite: {value!r}")
    return out
