"""Arithmetic expression evaluator for the calculator tool.

Accepts a single expression (no statements, no names other than the
whitelisted functions), evaluated with float semantics. Exponentiation is
right-associative and binds tighter than unary minus, so ``-3^2 == -9``.
Both ``^`` and ``**`` denote power.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .core import MofsmithError, format_number


class ParseError(MofsmithError):
    def __init__(self, position: int, message: str):
        super().__init__(f"parse error at position {position}: {message}")
        self.position = position


class DomainError(MofsmithError):
    pass


FUNCTIONS = {
    "exp": (1, math.exp),
    "ln": (1, None),     # domain-checked below
    "log10": (1, None),
    "sqrt": (1, None),
    "abs": (1, abs),
    "pow": (2, None),
    "min": (2, min),
    "max": (2, max),
}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<power>\*\*|\^)
  | (?P<sym>[-+*/(),%])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(0), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


# Binding powers. Power is handled specially for right associativity and
# for binding tighter than unary minus.
_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "%": 20}
_POWER_BP = 30
_UNARY_BP = 25


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> float:
        value = self.expression(0)
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(tok.position, f"unexpected trailing input {tok.text!r}")
        return value

    def expression(self, min_bp: int) -> float:
        value = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind == "power":
                if _POWER_BP < min_bp:
                    break
                self.advance()
                # right-associative: recurse at the same binding power
                exponent = self.expression(_POWER_BP)
                value = _power(value, exponent, tok.position)
                continue
            if tok.kind == "sym" and tok.text in _BINARY_BP:
                bp = _BINARY_BP[tok.text]
                if bp < min_bp:
                    break
                self.advance()
                rhs = self.expression(bp + 1)
                value = _apply_binary(tok.text, value, rhs, tok.position)
                continue
            break
        return value

    def prefix(self) -> float:
        tok = self.peek()
        if tok.kind == "sym" and tok.text in ("-", "+"):
            self.advance()
            operand = self.expression(_UNARY_BP)
            return -operand if tok.text == "-" else operand
        if tok.kind == "number":
            self.advance()
            return float(tok.text)
        if tok.kind == "name":
            return self.call()
        if tok.kind == "sym" and tok.text == "(":
            self.advance()
            value = self.expression(0)
            self.close_paren()
            return value
        raise ParseError(tok.position, f"expected a value, found {tok.text!r}" if tok.text else "expected a value")

    def call(self) -> float:
        name_tok = self.advance()
        name = name_tok.text
        if name not in FUNCTIONS:
            raise ParseError(name_tok.position, f"unknown function {name!r}")
        arity, _ = FUNCTIONS[name]
        tok = self.peek()
        if not (tok.kind == "sym" and tok.text == "("):
            raise ParseError(tok.position, f"expected '(' after {name}")
        self.advance()
        args = [self.expression(0)]
        while self.peek().kind == "sym" and self.peek().text == ",":
            self.advance()
            args.append(self.expression(0))
        self.close_paren()
        if len(args) != arity:
            raise ParseError(name_tok.position, f"{name} takes {arity} argument(s), got {len(args)}")
        return _apply_function(name, args, name_tok.position)

    def close_paren(self) -> None:
        tok = self.peek()
        if tok.kind == "sym" and tok.text == ")":
            self.advance()
            return
        raise ParseError(tok.position, "expected ')'")


def _power(base: float, exponent: float, position: int) -> float:
    try:
        value = base ** exponent
    except (OverflowError, ZeroDivisionError) as exc:
        raise DomainError(f"power out of range: {exc}") from None
    if isinstance(value, complex):
        raise DomainError("fractional power of a negative number")
    return float(value)


def _apply_binary(op: str, lhs: float, rhs: float, position: int) -> float:
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if rhs == 0.0 and op in ("/", "%"):
        raise DomainError("division by zero")
    if op == "/":
        return lhs / rhs
    return math.fmod(lhs, rhs)


def _apply_function(name: str, args: list[float], position: int) -> float:
    if name == "ln":
        if args[0] <= 0.0:
            raise DomainError("ln requires a positive argument")
        return math.log(args[0])
    if name == "log10":
        if args[0] <= 0.0:
            raise DomainError("log10 requires a positive argument")
        return math.log10(args[0])
    if name == "sqrt":
        if args[0] < 0.0:
            raise DomainError("sqrt requires a non-negative argument")
        return math.sqrt(args[0])
    if name == "pow":
        return _power(args[0], args[1], position)
    if name == "exp":
        try:
            return math.exp(args[0])
        except OverflowError:
            raise DomainError("exp overflow") from None
    _, fn = FUNCTIONS[name]
    return float(fn(*args))


def eval_expr(text: str) -> float:
    """Evaluate one arithmetic expression; the whole input must parse."""
    if not text.strip():
        raise ParseError(0, "empty expression")
    value = _Parser(text).parse()
    if isinstance(value, float) and (math.isnan(value) or math.isinf(value)):
        raise DomainError("result is not a finite number")
    return value


def run_calculator(text: str) -> str:
    """Tool entry point: evaluate and format the observation line."""
    value = eval_expr(text)
    return format_number(value)
