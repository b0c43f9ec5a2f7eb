"""Small arithmetic expression language for dynamics and Lagrangians in problem files.

Grammar (recursive descent, ~10 productions):

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := atom ('^' power)?          # right associative
    atom       := NUMBER | IDENT | FUNC '(' expression ')' | '(' expression ')'

Precedence: ^  >  unary -  >  * /  >  + -.  The exponent of ^ must fold to a
constant (it is constant-folded at parse time; a non-constant exponent is a
syntax error).  Identifiers must come from the declared variable set.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import FrozenSet, Mapping, Optional, Union

from .errors import PontrylieError

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ExprSyntaxError(PontrylieError, ValueError):
    """Malformed source text; carries the byte offset of the failure."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


class UndeclaredVariableError(ExprSyntaxError):
    def __init__(self, name: str, pos: int):
        super().__init__(f"undeclared variable '{name}'", pos)
        self.name = name


class ExprEvaluationError(PontrylieError, ArithmeticError):
    """Runtime failure (division by zero, domain error); carries the node offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


@dataclass(frozen=True)
class Constant:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Variable:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a FUNCTIONS name
    operand: "Node"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"
    pos: int = field(default=0, compare=False)


Node = Union[Constant, Variable, Unary, Binary]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    tokens = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            stripped = src[i:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", len(src) - len(stripped))
        if m.group("number") is not None:
            tokens.append(("number", m.group("number"), m.start("number")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        i = m.end()
    tokens.append(("eof", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, declared: FrozenSet[str]):
        self.src = src
        self.declared = declared
        self.tokens = _tokenize(src)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected '{op}'", pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expression()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expression(self) -> Node:
        node = self.term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Binary(text, node, self.term(), pos)
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Binary(text, node, self.unary(), pos)
            else:
                return node

    def unary(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Unary("neg", self.unary(), pos)
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            exponent = self.exponent()
            return Binary("^", node, exponent, pos)
        return node

    def exponent(self) -> Node:
        # right associative; a leading '-' is folded into the constant
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            inner = self.exponent()
            return Constant(-inner.value, pos)
        node = self.power()
        folded = _fold_constant(node)
        if folded is None:
            raise ExprSyntaxError("exponent must be a constant", pos)
        return folded

    def atom(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "number":
            return Constant(float(text), pos)
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expression()
                self.expect_op(")")
                return Unary(text, arg, pos)
            if text not in self.declared:
                raise UndeclaredVariableError(text, pos)
            return Variable(text, pos)
        if kind == "op" and text == "(":
            node = self.expression()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected token {text!r}" if text else "unexpected end of input", pos)


def _fold_constant(node: Node) -> Optional[Constant]:
    """Fold a constant-only subtree to a Constant; None if it contains variables."""
    if isinstance(node, Constant):
        return node
    if isinstance(node, Unary) and node.op == "neg":
        inner = _fold_constant(node.operand)
        return None if inner is None else Constant(-inner.value, node.pos)
    if isinstance(node, Binary):
        left = _fold_constant(node.left)
        right = _fold_constant(node.right)
        if left is None or right is None:
            return None
        return Constant(_apply_binary(node.op, left.value, right.value, node.pos), node.pos)
    return None


def _apply_binary(op: str, a: float, b: float, pos: int) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise ExprEvaluationError("division by zero", pos)
        return a / b
    if op == "^":
        try:
            return float(a**b)
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise ExprEvaluationError(f"power failed: {exc}", pos) from None
    raise ExprSyntaxError(f"unknown operator {op!r}", pos)


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its declared variable set."""

    ast: Node
    variables: FrozenSet[str]
    source: str = field(default="", compare=False)

    def __call__(self, bindings: Mapping[str, float]) -> float:
        return evaluate(self, bindings)

    def to_string(self) -> str:
        return _print_node(self.ast)


def parse(src: str, declared_vars) -> Expression:
    """Parse ``src`` against a set of declared variable names."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    declared = frozenset(declared_vars)
    node = _Parser(src, declared).parse()
    return Expression(ast=node, variables=declared, source=src)


def evaluate(expression: Expression, bindings: Mapping[str, float]) -> float:
    """Evaluate with all variables bound; IEEE double semantics."""
    return _eval_node(expression.ast, bindings)


def _eval_node(node: Node, bindings: Mapping[str, float]) -> float:
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Variable):
        try:
            return float(bindings[node.name])
        except KeyError:
            raise ExprEvaluationError(f"unbound variable '{node.name}'", node.pos) from None
    if isinstance(node, Unary):
        v = _eval_node(node.operand, bindings)
        if node.op == "neg":
            return -v
        if node.op == "sin":
            return math.sin(v)
        if node.op == "cos":
            return math.cos(v)
        if node.op == "exp":
            try:
                return math.exp(v)
            except OverflowError:
                raise ExprEvaluationError("exp overflow", node.pos) from None
        if node.op == "sqrt":
            if v < 0.0:
                raise ExprEvaluationError(f"sqrt of negative value {v!r}", node.pos)
            return math.sqrt(v)
        raise ExprSyntaxError(f"unknown function {node.op!r}", node.pos)
    return _apply_binary(node.op, _eval_node(node.left, bindings), _eval_node(node.right, bindings), node.pos)


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _print_node(node: Node, parent_prec: int = 0) -> str:
    if isinstance(node, Constant):
        text = repr(node.value)
        return f"({text})" if node.value < 0 and parent_prec > 0 else text
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = _print_node(node.operand, _PRECEDENCE["neg"])
            text = f"-{inner}"
            return f"({text})" if parent_prec > _PRECEDENCE["neg"] else text
        return f"{node.op}({_print_node(node.operand)})"
    prec = _PRECEDENCE[node.op]
    # bump the context on the non-associating side so the shape survives printing
    if node.op == "^":
        left = _print_node(node.left, prec + 1)
        right = _print_node(node.right, prec)
        text = f"{left}^{right}"
    else:
        left = _print_node(node.left, prec)
        right = _print_node(node.right, prec + 1)
        text = f"{left} {node.op} {right}"
    return f"({text})" if prec < parent_prec else text
