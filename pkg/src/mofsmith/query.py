"""Constrained table-query DSL: parse, execute, render as markdown.

This replaces free-form generated code with a validated plan. The grammar
(documented in docs/tql.md) covers exactly the behaviors the table
searcher needs: keyed lookups, filters, top-k ordering, and DESCRIBE
statistics. Query text is parsed to a QueryPlan, executed against an
immutable Table, and rendered as a pipe table under a token budget.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .core import MofsmithError, format_number
from .dataset import Cell, Column, Dtype, Table, UnknownColumn
from .llm import Estimator, TokenBudgetExceeded, estimate_tokens


class QuerySyntaxError(MofsmithError):
    def __init__(self, position: int, expected: str):
        super().__init__(f"syntax error at position {position}: expected {expected}")
        self.position = position
        self.expected = expected


class TypeMismatch(MofsmithError):
    pass


class RetriesExhausted(MofsmithError):
    def __init__(self, last_error: Exception):
        super().__init__(f"no valid query after retries; last error: {last_error}")
        self.last_error = last_error


Literal = Union[float, str, bool]
OPS = ("==", "!=", "<=", ">=", "<", ">", "contains")


@dataclass(frozen=True)
class Filter:
    column: str
    op: str
    literal: Literal


@dataclass
class QueryPlan:
    kind: str  # "select" | "describe"
    table: str
    columns: list[str] = field(default_factory=list)  # ["*"] for all
    filters: list[Filter] = field(default_factory=list)
    joiners: list[str] = field(default_factory=list)  # AND/OR, left-assoc
    order_by: Optional[tuple[str, bool]] = None  # (column, ascending)
    limit: Optional[int] = None
    describe_column: Optional[str] = None


@dataclass
class ResultTable:
    columns: list[Column]
    rows: list[list[Cell]]
    row_count_total: int
    index: list[Union[int, str]] = field(default_factory=list)

    @property
    def headers(self) -> list[str]:
        return [c.header for c in self.columns]


# --- tokenizer -------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<backtick>`[^`]*`)
  | (?P<string>'(?:[^'\\]|\\.)*')
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<comma>,)
  | (?P<star>\*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

KEYWORDS = {"SELECT", "DESCRIBE", "FROM", "WHERE", "ORDER", "BY", "ASC",
            "DESC", "LIMIT", "AND", "OR", "CONTAINS", "TRUE", "FALSE"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(pos, f"a valid token (found {text[pos]!r})")
        kind = m.lastgroup
        if kind != "ws":
            tok_text = m.group(0)
            if kind == "word" and tok_text.upper() in KEYWORDS:
                kind = "keyword"
                tok_text = tok_text.upper()
            tokens.append(Token(kind, tok_text, pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == "keyword" and tok.text == word:
            return self.advance()
        raise QuerySyntaxError(tok.position, word)

    def column(self) -> str:
        tok = self.peek()
        if tok.kind == "backtick":
            self.advance()
            return tok.text[1:-1]
        if tok.kind == "word":
            self.advance()
            return tok.text
        raise QuerySyntaxError(tok.position, "a column name")

    def literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return float(tok.text)
        if tok.kind == "string":
            self.advance()
            return tok.text[1:-1].replace("\\'", "'").replace("\\\\", "\\")
        if tok.kind == "keyword" and tok.text in ("TRUE", "FALSE"):
            self.advance()
            return tok.text == "TRUE"
        raise QuerySyntaxError(tok.position, "a literal (number, 'string', TRUE, or FALSE)")


def parse_query(text: str) -> QueryPlan:
    """Parse DSL text into a QueryPlan. The whole input must parse."""
    p = _Parser(text)
    tok = p.peek()
    if tok.kind == "keyword" and tok.text == "SELECT":
        plan = _parse_select(p)
    elif tok.kind == "keyword" and tok.text == "DESCRIBE":
        plan = _parse_describe(p)
    else:
        raise QuerySyntaxError(tok.position, "SELECT or DESCRIBE")
    tail = p.peek()
    if tail.kind != "eof":
        raise QuerySyntaxError(tail.position, "end of query")
    return plan


def _parse_select(p: _Parser) -> QueryPlan:
    p.expect_keyword("SELECT")
    columns: list[str] = []
    if p.peek().kind == "star":
        p.advance()
        columns = ["*"]
    else:
        columns.append(p.column())
        while p.peek().kind == "comma":
            p.advance()
            columns.append(p.column())
    p.expect_keyword("FROM")
    table_tok = p.peek()
    if table_tok.kind != "word":
        raise QuerySyntaxError(table_tok.position, "a table name")
    p.advance()

    plan = QueryPlan(kind="select", table=table_tok.text, columns=columns)

    if p.peek().kind == "keyword" and p.peek().text == "WHERE":
        p.advance()
        plan.filters.append(_parse_comparison(p))
        while p.peek().kind == "keyword" and p.peek().text in ("AND", "OR"):
            joiner = p.advance().text
            plan.joiners.append(joiner)
            plan.filters.append(_parse_comparison(p))

    if p.peek().kind == "keyword" and p.peek().text == "ORDER":
        p.advance()
        p.expect_keyword("BY")
        col = p.column()
        ascending = True
        if p.peek().kind == "keyword" and p.peek().text in ("ASC", "DESC"):
            ascending = p.advance().text == "ASC"
        plan.order_by = (col, ascending)

    if p.peek().kind == "keyword" and p.peek().text == "LIMIT":
        p.advance()
        tok = p.peek()
        if tok.kind != "number":
            raise QuerySyntaxError(tok.position, "a positive integer")
        value = float(tok.text)
        if value < 1 or value != int(value):
            raise QuerySyntaxError(tok.position, "a positive integer")
        p.advance()
        plan.limit = int(value)

    return plan


def _parse_comparison(p: _Parser) -> Filter:
    col = p.column()
    tok = p.peek()
    if tok.kind == "op":
        p.advance()
        return Filter(col, tok.text, p.literal())
    if tok.kind == "keyword" and tok.text == "CONTAINS":
        p.advance()
        return Filter(col, "contains", p.literal())
    raise QuerySyntaxError(tok.position, "a comparison operator")


def _parse_describe(p: _Parser) -> QueryPlan:
    p.expect_keyword("DESCRIBE")
    col = p.column()
    p.expect_keyword("FROM")
    table_tok = p.peek()
    if table_tok.kind != "word":
        raise QuerySyntaxError(table_tok.position, "a table name")
    p.advance()
    return QueryPlan(kind="describe", table=table_tok.text, describe_column=col)


# --- execution -------------------------------------------------------------

def _check_filter_types(f: Filter, table: Table) -> None:
    dtype = table.dtype_of(f.column)
    if f.op in ("<", "<=", ">", ">="):
        if dtype is not Dtype.NUMBER:
            raise TypeMismatch(f"{f.op!r} requires a numeric column, {f.column!r} is {dtype.value}")
        if not isinstance(f.literal, float):
            raise TypeMismatch(f"{f.op!r} on {f.column!r} requires a numeric literal")
    elif f.op == "contains":
        if dtype is not Dtype.TEXT:
            raise TypeMismatch(f"contains requires a text column, {f.column!r} is {dtype.value}")
        if not isinstance(f.literal, str):
            raise TypeMismatch("contains requires a string literal")
    else:  # == / !=
        if dtype is Dtype.NUMBER and not isinstance(f.literal, float):
            raise TypeMismatch(f"{f.column!r} is numeric; literal {f.literal!r} is not")
        if dtype is Dtype.TEXT and not isinstance(f.literal, str):
            raise TypeMismatch(f"{f.column!r} is text; literal {f.literal!r} is not")
        if dtype is Dtype.BOOLEAN and not isinstance(f.literal, bool):
            raise TypeMismatch(f"{f.column!r} is boolean; literal {f.literal!r} is not")


def _filter_matches(f: Filter, value: Cell) -> bool:
    if value is None:
        return False  # nulls never match
    if f.op == "==":
        return value == f.literal
    if f.op == "!=":
        return value != f.literal
    if f.op == "contains":
        return f.literal in str(value)
    assert isinstance(value, float)
    assert isinstance(f.literal, float)
    if f.op == "<":
        return value < f.literal
    if f.op == "<=":
        return value <= f.literal
    if f.op == ">":
        return value > f.literal
    return value >= f.literal


def _row_matches(plan: QueryPlan, table: Table, row: list[Cell]) -> bool:
    positions = [table.column_position(f.column) for f in plan.filters]
    acc = _filter_matches(plan.filters[0], row[positions[0]])
    for joiner, f, pos in zip(plan.joiners, plan.filters[1:], positions[1:]):
        value = _filter_matches(f, row[pos])
        acc = (acc and value) if joiner == "AND" else (acc or value)
    return acc


def quantile_linear(sorted_values: list[float], q: float) -> float:
    """Quantile by linear interpolation between closest ranks."""
    n = len(sorted_values)
    if n == 1:
        return sorted_values[0]
    h = (n - 1) * q
    lo = math.floor(h)
    frac = h - lo
    if lo + 1 >= n:
        return sorted_values[-1]
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo])


DESCRIBE_STATS = ("count", "mean", "std", "min", "25%", "50%", "75%", "max")


def describe_column(values: list[Cell]) -> dict[str, Optional[float]]:
    """count, mean, sample std, min, quartiles, max over non-null values."""
    xs = sorted(v for v in values if v is not None)
    n = len(xs)
    stats: dict[str, Optional[float]] = {"count": float(n)}
    if n == 0:
        for key in DESCRIBE_STATS[1:]:
            stats[key] = None
        return stats
    mean = sum(xs) / n
    if n > 1:
        var = sum((x - mean) ** 2 for x in xs) / (n - 1)
        std = math.sqrt(var)
    else:
        std = None
    stats["mean"] = mean
    stats["std"] = std
    stats["min"] = xs[0]
    stats["25%"] = quantile_linear(xs, 0.25)
    stats["50%"] = quantile_linear(xs, 0.50)
    stats["75%"] = quantile_linear(xs, 0.75)
    stats["max"] = xs[-1]
    return stats


def execute(plan: QueryPlan, table: Table) -> ResultTable:
    """Run a plan: filter, then stable sort, then limit; or DESCRIBE stats.

    Ties under ORDER BY keep original row order. ``row_count_total`` is the
    post-filter, pre-limit row count.
    """
    if plan.kind == "describe":
        col = plan.describe_column
        if table.dtype_of(col) is not Dtype.NUMBER:
            raise TypeMismatch(f"DESCRIBE requires a numeric column, {col!r} is not")
        stats = describe_column(table.column_values(col))
        rows = [[stats[key]] for key in DESCRIBE_STATS]
        return ResultTable(
            columns=[Column(col, Dtype.NUMBER)],
            rows=rows,
            row_count_total=len(DESCRIBE_STATS),
            index=list(DESCRIBE_STATS),
        )

    if plan.columns == ["*"]:
        headers = table.headers
    else:
        headers = list(plan.columns)
    positions = [table.column_position(h) for h in headers]
    for f in plan.filters:
        _check_filter_types(f, table)
    if plan.order_by is not None:
        order_pos = table.column_position(plan.order_by[0])
        if table.columns[order_pos].dtype is not Dtype.NUMBER:
            raise TypeMismatch(f"ORDER BY requires a numeric column, {plan.order_by[0]!r} is not")

    if plan.filters:
        picked = [i for i, row in enumerate(table.rows) if _row_matches(plan, table, row)]
    else:
        picked = list(range(len(table.rows)))

    if plan.order_by is not None:
        col_pos = table.column_position(plan.order_by[0])
        ascending = plan.order_by[1]
        with_value = [i for i in picked if table.rows[i][col_pos] is not None]
        without = [i for i in picked if table.rows[i][col_pos] is None]
        with_value.sort(key=lambda i: table.rows[i][col_pos], reverse=not ascending)
        picked = with_value + without  # nulls last, original order preserved

    total = len(picked)
    if plan.limit is not None:
        picked = picked[: plan.limit]

    return ResultTable(
        columns=[table.columns[p] for p in positions],
        rows=[[table.rows[i][p] for p in positions] for i in picked],
        row_count_total=total,
        index=[table.index[i] for i in picked],
    )


# --- rendering -------------------------------------------------------------

def _format_cell(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def render_markdown(result: ResultTable, token_budget: int,
                    estimator: Estimator = estimate_tokens) -> str:
    """Pipe table with the row index as first column.

    Raises TokenBudgetExceeded (instead of truncating) when the rendered
    text would not fit the budget; that failure is terminal for a session.
    """
    if token_budget <= 0:
        raise ValueError("token_budget must be positive")
    header = "|  | " + " | ".join(c.header for c in result.columns) + " |"
    separator = "| --- |" + " --- |" * len(result.columns)
    lines = [header, separator]
    for label, row in zip(result.index, result.rows):
        lines.append("| " + " | ".join([_format_cell(label)] + [_format_cell(v) for v in row]) + " |")
    text = "\n".join(lines)
    estimated = estimator(text)
    if estimated > token_budget:
        raise TokenBudgetExceeded(estimated, token_budget)
    return text


# --- retry loop ------------------------------------------------------------

Planner = Callable[[str, Optional[str]], str]


def run_with_retries(question: str, table: Table, planner: Planner,
                     max_attempts: int = 3, token_budget: int = 4000,
                     estimator: Estimator = estimate_tokens) -> tuple[ResultTable, str]:
    """Plan, parse, execute, render — re-planning on correctable errors.

    Syntax and unknown-column errors are fed back to the planner (up to
    ``max_attempts`` total attempts). A budget overflow is terminal and is
    never retried.
    """
    last_error: Optional[Exception] = None
    for _ in range(max_attempts):
        query_text = planner(question, str(last_error) if last_error else None)
        try:
            plan = parse_query(query_text)
            result = execute(plan, table)
            markdown = render_markdown(result, token_budget, estimator)
            return result, markdown
        except (QuerySyntaxError, UnknownColumn) as exc:
            last_error = exc
            continue
    raise RetriesExhausted(last_error)
