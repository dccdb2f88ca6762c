"""Question-suite harness: run items through sessions and score outcomes.

Each suite item carries a machine matcher instead of a human judgment:
answered sessions whose answer satisfies the matcher count as true,
answered-but-wrong counts as a logic error, and token/logic failures pass
through. Items with matcher "none" have no verifiable expectation; they
are reported but excluded from the accuracy ratio, which also excludes
token-limit items by definition: accuracy = n_true / (n_true + n_logic).
"""

from __future__ import annotations

import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Union

from .core import MofsmithError, Outcome, OutcomeLabel, extract_numbers


class SuiteParseError(MofsmithError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Task(str, Enum):
    SEARCH = "search"
    PREDICTION = "prediction"
    GENERATION = "generation"


class MatcherKind(str, Enum):
    NUMERIC = "numeric"
    REGEX = "regex"
    CONTAINS = "contains"
    NONE = "none"


@dataclass(frozen=True)
class Matcher:
    kind: MatcherKind
    value: float = 0.0
    rel_tol: float = 1e-6
    pattern: str = ""
    text: str = ""

    def matches(self, answer: str) -> bool:
        if self.kind is MatcherKind.NONE:
            return True
        if self.kind is MatcherKind.NUMERIC:
            numbers = extract_numbers(answer)
            if not numbers:
                return False
            return math.isclose(numbers[0], self.value, rel_tol=self.rel_tol,
                                abs_tol=0.0)
        if self.kind is MatcherKind.REGEX:
            return re.search(self.pattern, answer) is not None
        return self.text in answer


@dataclass(frozen=True)
class SuiteItem:
    id: str
    task: Task
    question: str
    expect: Matcher


class ItemLabel(str, Enum):
    TRUE = "true"
    LOGIC_ERROR = "logic_error"
    TOKEN_LIMIT = "token_limit"
    UNVERIFIED = "unverified"


@dataclass
class ItemResult:
    id: str
    label: ItemLabel
    elapsed: float
    tokens: int
    answer: Optional[str] = None
    detail: str = ""


@dataclass
class Report:
    items: list[ItemResult] = field(default_factory=list)

    @property
    def n_true(self) -> int:
        return sum(1 for r in self.items if r.label is ItemLabel.TRUE)

    @property
    def n_logic(self) -> int:
        return sum(1 for r in self.items if r.label is ItemLabel.LOGIC_ERROR)

    @property
    def n_token(self) -> int:
        return sum(1 for r in self.items if r.label is ItemLabel.TOKEN_LIMIT)

    @property
    def n_unverified(self) -> int:
        return sum(1 for r in self.items if r.label is ItemLabel.UNVERIFIED)

    @property
    def accuracy(self) -> Optional[float]:
        denominator = self.n_true + self.n_logic
        if denominator == 0:
            return None
        return self.n_true / denominator

    def to_json(self) -> dict:
        return {
            "items": [
                {"id": r.id, "label": r.label.value, "elapsed": r.elapsed,
                 "tokens": r.tokens, "answer": r.answer, "detail": r.detail}
                for r in self.items
            ],
            "counts": {"true": self.n_true, "logic_error": self.n_logic,
                       "token_limit": self.n_token, "unverified": self.n_unverified},
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Report":
        report = cls()
        for r in data["items"]:
            report.items.append(ItemResult(
                id=r["id"], label=ItemLabel(r["label"]), elapsed=r["elapsed"],
                tokens=r["tokens"], answer=r["answer"], detail=r.get("detail", "")))
        return report

    def render_table(self) -> str:
        lines = [f"{'id':<16} {'label':<12} {'tokens':>7} {'elapsed':>8}"]
        for r in self.items:
            lines.append(f"{r.id:<16} {r.label.value:<12} {r.tokens:>7} "
                         f"{r.elapsed:>8.3f}")
        accuracy = "n/a" if self.accuracy is None else f"{self.accuracy:.3f}"
        lines.append(f"true={self.n_true} logic_error={self.n_logic} "
                     f"token_limit={self.n_token} unverified={self.n_unverified} "
                     f"accuracy={accuracy}")
        return "\n".join(lines)


def parse_matcher(raw: dict) -> Matcher:
    kind = MatcherKind(raw.get("kind", "none"))
    if kind is MatcherKind.NUMERIC:
        return Matcher(kind=kind, value=float(raw["value"]),
                       rel_tol=float(raw.get("rel_tol", 1e-6)))
    if kind is MatcherKind.REGEX:
        re.compile(raw["pattern"])  # validate eagerly
        return Matcher(kind=kind, pattern=raw["pattern"])
    if kind is MatcherKind.CONTAINS:
        return Matcher(kind=kind, text=raw["text"])
    return Matcher(kind=kind)


def load_suite(path: Union[str, Path]) -> list[SuiteItem]:
    """Read a JSON-lines suite; every line must be a complete item."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                items.append(SuiteItem(
                    id=str(raw["id"]),
                    task=Task(raw["task"]),
                    question=raw["question"],
                    expect=parse_matcher(raw.get("expect", {"kind": "none"})),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise SuiteParseError(line_no, str(exc)) from None
    return items


def classify(outcome: Outcome, matcher: Matcher) -> ItemLabel:
    """Pure mapping from (outcome label, answer, matcher) to an item label."""
    if outcome.label is OutcomeLabel.TOKEN_LIMIT:
        return ItemLabel.TOKEN_LIMIT
    if outcome.label is OutcomeLabel.LOGIC_ERROR:
        return ItemLabel.LOGIC_ERROR
    if matcher.kind is MatcherKind.NONE:
        return ItemLabel.UNVERIFIED
    return ItemLabel.TRUE if matcher.matches(outcome.answer or "") \
        else ItemLabel.LOGIC_ERROR


Runner = Callable[[SuiteItem], Outcome]


def run_suite(suite: list[SuiteItem], runner: Runner, workers: int = 1) -> Report:
    """Run every item in its own session; item failures become labels."""

    def run_one(item: SuiteItem) -> ItemResult:
        started = time.monotonic()
        try:
            outcome = runner(item)
        except MofsmithError as exc:
            return ItemResult(id=item.id, label=ItemLabel.LOGIC_ERROR,
                              elapsed=time.monotonic() - started, tokens=0,
                              detail=f"runner error: {exc}")
        elapsed = time.monotonic() - started
        tokens = getattr(outcome.trace, "token_used", 0) if outcome.trace else 0
        return ItemResult(id=item.id, label=classify(outcome, item.expect),
                          elapsed=elapsed, tokens=tokens, answer=outcome.answer,
                          detail=outcome.detail)

    report = Report()
    if workers <= 1:
        report.items.extend(run_one(item) for item in suite)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.items.extend(pool.map(run_one, suite))
    return report


def write_report(report: Report, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    return path
