"""A small expression language for coefficient functions.

Grammar (EBNF)::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = "-" , unary | power ;
    power    = atom , [ "^" , unary ] ;          (* right-associative *)
    atom     = number | name | call | "(" , expr , ")" ;
    call     = func , "(" , expr , [ "," , expr ] , ")" ;
    func     = "exp" | "ln" | "sin" | "cos" | "abs" | "sqrt" | "floor"
             | "min" | "max" ;
    name     = "pi" | "e" | variable ;
    number   = digits , [ "." , [ digits ] ] , [ exponent ]
             | "." , digits , [ exponent ] ;
    exponent = ("e" | "E") , [ "+" | "-" ] , digits ;

``^`` binds tighter than unary minus, so ``-2^i`` means ``-(2^i)``.
Each expression has at most one free variable: ``t`` for coefficients and
initial data, ``i`` for impulse coefficients.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from . import _kernels
from ._kernels import _opcodes as op
from ._kernels._fallback import apply_binary, apply_unary
from .errors import LexError, ParseError, UnknownIdentifierError, WrongVariableError

FUNCTIONS = {"exp": 1, "ln": 1, "sin": 1, "cos": 1, "abs": 1, "sqrt": 1,
             "floor": 1, "min": 2, "max": 2}
CONSTANTS = {"pi": math.pi, "e": math.e}
VARIABLES = ("t", "i")

NUMBER = "number"
IDENT = "identifier"
OPERATOR = "operator"
LPAREN = "left-paren"
RPAREN = "right-paren"
COMMA = "comma"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<identifier>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<operator>[-+*/^])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
""", re.VERBOSE)

_KIND = {"number": NUMBER, "identifier": IDENT, "operator": OPERATOR,
         "lparen": LPAREN, "rparen": RPAREN, "comma": COMMA}


def _byte_offset(source, index):
    return len(source[:index].encode("utf-8"))


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise LexError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if kind == "number" and not math.isfinite(float(text)):
                raise LexError(f"number {text!r} is not finite", _byte_offset(source, pos))
            tokens.append(Token(_KIND[kind], text, _byte_offset(source, pos)))
        pos = m.end()
    return tokens


# --- syntax tree -----------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Const, Var, Neg, BinOp, Call]

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_BP = 25


class _Parser:
    def __init__(self, tokens, allowed_var, end):
        self.tokens = tokens
        self.allowed_var = allowed_var
        self.end = end
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression", self.end)
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.peek()
        if tok is None or tok.kind != kind:
            where = self.end if tok is None else tok.position
            raise ParseError(f"expected {what}", where)
        self.pos += 1
        return tok

    def lbp(self, tok):
        if tok is not None and tok.kind == OPERATOR:
            return _LBP[tok.text]
        return 0

    def expression(self, rbp=0):
        left = self.nud(self.advance())
        while rbp < self.lbp(self.peek()):
            tok = self.advance()
            # ^ is right-associative
            right = self.expression(_LBP[tok.text] - (1 if tok.text == "^" else 0))
            left = BinOp(tok.text, left, right)
        return left

    def nud(self, tok):
        if tok.kind == NUMBER:
            return Const(float(tok.text))
        if tok.kind == LPAREN:
            inner = self.expression()
            self.expect(RPAREN, "')'")
            return inner
        if tok.kind == OPERATOR and tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.kind == IDENT:
            return self.identifier(tok)
        raise ParseError(f"unexpected {tok.text!r}", tok.position)

    def identifier(self, tok):
        name = tok.text
        if name in FUNCTIONS:
            self.expect(LPAREN, f"'(' after {name}")
            args = [self.expression()]
            while self.peek() is not None and self.peek().kind == COMMA:
                self.advance()
                args.append(self.expression())
            self.expect(RPAREN, "')'")
            if len(args) != FUNCTIONS[name]:
                raise ParseError(
                    f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}",
                    tok.position)
            return Call(name, tuple(args))
        if name in CONSTANTS:
            return Const(CONSTANTS[name])
        if name == self.allowed_var:
            return Var(name)
        if name in VARIABLES:
            allowed = f"'{self.allowed_var}'" if self.allowed_var else "no variable"
            raise WrongVariableError(f"variable {name!r} not allowed here ({allowed} expected)",
                                     tok.position)
        raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.position)


def parse(tokens: list[Token], allowed_var: str | None, source: str | None = None) -> Expr:
    """Parse a token stream; ``allowed_var`` is the single free variable (or None)."""
    if source is not None:
        end = len(source.encode("utf-8"))
    elif tokens:
        end = tokens[-1].position + len(tokens[-1].text.encode("utf-8"))
    else:
        end = 0
    p = _Parser(tokens, allowed_var, end)
    if not tokens:
        raise ParseError("empty expression", 0)
    tree = p.expression()
    tok = p.peek()
    if tok is not None:
        raise ParseError(f"unexpected {tok.text!r}", tok.position)
    return tree


def parse_expr(source: str, allowed_var: str | None = "t") -> Expr:
    return parse(tokenize(source), allowed_var, source)


# --- evaluation --------------------------------------------------------------

def evaluate(expr: Expr, value: float) -> float:
    """Tree-walking evaluation in binary64; raises DomainError off the domain."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return float(value)
    if isinstance(expr, Neg):
        return -evaluate(expr.child, value)
    if isinstance(expr, BinOp):
        a = evaluate(expr.left, value)
        b = evaluate(expr.right, value)
        return apply_binary(op.BINARY[expr.op], a, b)
    if expr.name in op.UNARY_CALLS:
        return apply_unary(op.UNARY_CALLS[expr.name], evaluate(expr.args[0], value))
    a = evaluate(expr.args[0], value)
    b = evaluate(expr.args[1], value)
    return apply_binary(op.BINARY_CALLS[expr.name], a, b)


def to_source(expr: Expr) -> str:
    """Fully parenthesized source text that parses back to an equal-valued tree."""
    if isinstance(expr, Const):
        v = expr.value
        if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
            return f"(-{-v!r})"
        return repr(v)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.child)})"
    if isinstance(expr, BinOp):
        return f"({to_source(expr.left)}{expr.op}{to_source(expr.right)})"
    return f"{expr.name}({','.join(to_source(a) for a in expr.args)})"


def has_variable(expr: Expr) -> bool:
    if isinstance(expr, Var):
        return True
    if isinstance(expr, Const):
        return False
    if isinstance(expr, Neg):
        return has_variable(expr.child)
    if isinstance(expr, BinOp):
        return has_variable(expr.left) or has_variable(expr.right)
    return any(has_variable(a) for a in expr.args)


def is_zero_constant(expr: Expr) -> bool:
    """True when the expression is structurally the constant 0."""
    if has_variable(expr):
        return False
    try:
        return evaluate(expr, 0.0) == 0.0
    except ArithmeticError:
        return False


# --- compilation -------------------------------------------------------------

class Program:
    """An expression compiled to stack-machine bytecode for the kernels."""

    __slots__ = ("expr", "code", "consts", "_kcode", "_kconsts", "source")

    def __init__(self, expr: Expr):
        code = []
        consts = []
        depth = _emit(expr, code, consts, 0)
        if depth > op.MAX_STACK:
            raise ParseError(f"expression too deeply nested (stack {depth})")
        self.expr = expr
        self.code = tuple(code)
        self.consts = tuple(consts)
        self.source = to_source(expr)
        self._kcode = _kernels.as_code(self.code)
        self._kconsts = _kernels.as_consts(self.consts)

    @property
    def kernel_args(self):
        return self._kcode, self._kconsts

    def __call__(self, x: float) -> float:
        return _kernels.run_program(self._kcode, self._kconsts, float(x))

    def __repr__(self):
        return f"Program({self.source!r})"

    # pickled for process pools; the kernel arrays are rebuilt on load
    def __reduce__(self):
        return (Program, (self.expr,))


def _emit(expr, code, consts, depth):
    """Append bytecode for expr; return the peak stack height reached."""
    if isinstance(expr, Const):
        code.extend((op.CONST, len(consts)))
        consts.append(expr.value)
        return depth + 1
    if isinstance(expr, Var):
        code.append(op.VAR)
        return depth + 1
    if isinstance(expr, Neg):
        peak = _emit(expr.child, code, consts, depth)
        code.append(op.NEG)
        return peak
    if isinstance(expr, BinOp):
        p1 = _emit(expr.left, code, consts, depth)
        p2 = _emit(expr.right, code, consts, depth + 1)
        code.append(op.BINARY[expr.op])
        return max(p1, p2)
    if expr.name in op.UNARY_CALLS:
        peak = _emit(expr.args[0], code, consts, depth)
        code.append(op.UNARY_CALLS[expr.name])
        return peak
    p1 = _emit(expr.args[0], code, consts, depth)
    p2 = _emit(expr.args[1], code, consts, depth + 1)
    code.append(op.BINARY_CALLS[expr.name])
    return max(p1, p2)


def compile_expr(expr: Expr | str, allowed_var: str | None = "t") -> Program:
    if isinstance(expr, str):
        expr = parse_expr(expr, allowed_var)
    return Program(expr)
