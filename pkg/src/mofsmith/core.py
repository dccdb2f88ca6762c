"""Shared domain types: genes, property specs, objectives, session outcomes.

A gene is the textual encoding of a candidate framework: a topology code
plus an ordered pair of building-block identifiers, written
``topology+block1+block2`` (e.g. ``tbo+N17+N10``). Block order matters;
the two slots are never interchangeable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

GENE_PART = re.compile(r"^[A-Za-z0-9_-]+$")


class MofsmithError(Exception):
    """Base class for all errors raised by this package."""


class MalformedGene(MofsmithError):
    pass


@dataclass(frozen=True)
class Gene:
    """Topology plus an ordered building-block pair; the unit of inverse design."""

    topology: str
    block1: str
    block2: str

    def __str__(self) -> str:
        return format_gene(self)


def parse_gene(text: str) -> Gene:
    """Parse ``topology+block1+block2`` into a Gene.

    Raises MalformedGene when the part count is not exactly three, a part
    is empty, or a part contains characters outside ``[A-Za-z0-9_-]``.
    """
    parts = text.split("+")
    if len(parts) != 3:
        raise MalformedGene(f"expected 3 '+'-separated parts, got {len(parts)}: {text!r}")
    for part in parts:
        if not part:
            raise MalformedGene(f"empty part in gene: {text!r}")
        if not GENE_PART.match(part):
            raise MalformedGene(f"invalid characters in gene part {part!r}")
    return Gene(parts[0], parts[1], parts[2])


def format_gene(gene: Gene) -> str:
    """Inverse of parse_gene: ``topology+block1+block2``."""
    return f"{gene.topology}+{gene.block1}+{gene.block2}"


class Scale(str, Enum):
    LINEAR = "linear"
    LOG = "log"


@dataclass(frozen=True)
class PropertySpec:
    """A predictable property: canonical snake_case key, verbatim unit, scale.

    ``scale == LOG`` marks surrogates whose raw output is a natural-log
    value; downstream consumers must exponentiate to recover the original.
    """

    name: str
    unit: str = ""
    scale: Scale = Scale.LINEAR
    # free-text phrases that map natural-language questions onto this key
    aliases: tuple[str, ...] = ()


class ObjectiveKind(str, Enum):
    MAX = "max"
    MIN = "min"
    NEAR = "near"
    RANGE = "range"


@dataclass(frozen=True)
class Objective:
    """Optimization target for one property."""

    kind: ObjectiveKind
    target: Optional[float] = None  # near only
    low: Optional[float] = None  # range only
    high: Optional[float] = None  # range only

    def __post_init__(self):
        if self.kind is ObjectiveKind.NEAR:
            if self.target is None or not _finite(self.target):
                raise ValueError("near objective requires a finite target")
        if self.kind is ObjectiveKind.RANGE:
            if self.low is None or self.high is None or self.low > self.high:
                raise ValueError("range objective requires low <= high")

    def describe(self) -> str:
        if self.kind is ObjectiveKind.NEAR:
            return f"near {self.target:g}"
        if self.kind is ObjectiveKind.RANGE:
            return f"range {self.low:g} {self.high:g}"
        return self.kind.value


def _finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


class OutcomeLabel(str, Enum):
    ANSWERED = "answered"
    TOKEN_LIMIT = "token_limit"
    LOGIC_ERROR = "logic_error"


@dataclass
class Outcome:
    """Terminal classification of an agent session.

    ``answer`` is present exactly when the label is ANSWERED.
    """

    label: OutcomeLabel
    answer: Optional[str] = None
    trace: object = None  # AgentTrace; typed loosely to avoid an import cycle
    detail: str = ""

    def __post_init__(self):
        if self.label is OutcomeLabel.ANSWERED and self.answer is None:
            raise ValueError("answered outcome requires an answer")
        if self.label is not OutcomeLabel.ANSWERED and self.answer is not None:
            raise ValueError("only answered outcomes carry an answer")


NUMBER_TOKEN = re.compile(
    r"(?<![\w.])[-+]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][-+]?\d+)?(?!\w)"
)


def extract_numbers(text: str) -> list[float]:
    """Standalone numeric tokens in order of appearance.

    Digits embedded in identifiers (ROLCEC19, 100bar, 77K) are skipped: a
    match must not be preceded or followed by a word character.
    """
    return [float(m.group(0)) for m in NUMBER_TOKEN.finditer(text)]


def format_number(value: float) -> str:
    """Shortest round-trip decimal; integers render without a trailing .0."""
    if value != value:  # NaN
        return "nan"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))
