"""Property prediction over registered surrogate lookups.

The pipeline mirrors a model-selection flow: parse a Property/Material
plan, resolve the material selector against a table, read values out of
the gene- or name-keyed surrogate table for that property, and compose an
answer. Log-scale properties are never exponentiated here — the answer
carries a caveat so the session applies the calculator itself.
"""

from __future__ import annotations

import csv
import re
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .core import MofsmithError, PropertySpec, Scale, format_number
from .dataset import Column, Dtype, Registry, Table
from .llm import Estimator, estimate_tokens
from .query import ResultTable, render_markdown


class UnknownProperty(MofsmithError):
    def __init__(self, name: str, known: list[str]):
        super().__init__(f"no model registered for {name!r}; known: {', '.join(known)}")
        self.name = name


class MalformedPlan(MofsmithError):
    pass


class UnknownMaterial(MofsmithError):
    def __init__(self, material_id: str):
        super().__init__(f"material {material_id!r} is not in the dataset")
        self.material_id = material_id


class ModelMiss(MofsmithError):
    def __init__(self, material_id: str):
        super().__init__(f"no predicted value for {material_id!r}")
        self.material_id = material_id


class Unanswerable(MofsmithError):
    pass


class SelectorKind(str, Enum):
    NAMED = "named"
    ALL = "all"
    TOPOLOGY = "topology"


@dataclass(frozen=True)
class MaterialSelector:
    kind: SelectorKind
    names: tuple[str, ...] = ()
    topology: str = ""

    def __post_init__(self):
        if self.kind is SelectorKind.NAMED and not self.names:
            raise MalformedPlan("named selector needs at least one id")
        if self.kind is SelectorKind.TOPOLOGY and not self.topology:
            raise MalformedPlan("topology selector needs a topology id")


@dataclass
class PredictPlan:
    pairs: list[tuple[str, MaterialSelector]]
    final_thought: str = ""


@dataclass
class PredictionTable:
    property: PropertySpec
    ids: list[str]
    values: list[float]

    @property
    def is_log_scale(self) -> bool:
        return self.property.scale is Scale.LOG

    def to_result_table(self) -> ResultTable:
        return ResultTable(
            columns=[Column("name", Dtype.TEXT), Column(self.property.name, Dtype.NUMBER)],
            rows=[[i, v] for i, v in zip(self.ids, self.values)],
            row_count_total=len(self.ids),
            index=list(range(len(self.ids))),
        )

    def to_markdown(self, token_budget: int = 4000,
                    estimator: Estimator = estimate_tokens) -> str:
        return render_markdown(self.to_result_table(), token_budget, estimator)


_PLAN_LINE = re.compile(r"^\s*(?:\[[^\]]+\]\s*)?(Property|Materials?|Final Thought)\s*:\s*(.*)$",
                        re.IGNORECASE)


def parse_selector(text: str) -> MaterialSelector:
    text = text.strip()
    if not text:
        raise MalformedPlan("empty material selector")
    if text == "*":
        return MaterialSelector(SelectorKind.ALL)
    if text.endswith("*"):
        return MaterialSelector(SelectorKind.TOPOLOGY, topology=text[:-1].strip())
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    return MaterialSelector(SelectorKind.NAMED, names=names)


def parse_predict_plan(text: str, registry: Registry) -> PredictPlan:
    """Extract repeated Property/Material line pairs plus the final thought.

    Property keys must name registered models (matched case-insensitively).
    A Material line must follow its Property line.
    """
    known = registry.property_names()
    by_fold = {name.casefold(): name for name in known}
    pairs: list[tuple[str, MaterialSelector]] = []
    pending_property: Optional[str] = None
    final_thought = ""
    for line in text.splitlines():
        m = _PLAN_LINE.match(line)
        if m is None:
            continue
        key = m.group(1).lower()
        value = m.group(2).strip().strip("`")
        if key == "property":
            if pending_property is not None:
                raise MalformedPlan(f"Property {pending_property!r} has no Material line")
            name = by_fold.get(value.casefold())
            if name is None:
                raise UnknownProperty(value, known)
            pending_property = name
        elif key.startswith("material"):
            if pending_property is None:
                raise MalformedPlan("Material line before any Property line")
            pairs.append((pending_property, parse_selector(value)))
            pending_property = None
        else:
            final_thought = value
    if pending_property is not None:
        raise MalformedPlan(f"Property {pending_property!r} has no Material line")
    if not pairs:
        raise MalformedPlan("plan contains no Property/Material pair")
    return PredictPlan(pairs=pairs, final_thought=final_thought)


def _topology_column(table: Table) -> Optional[int]:
    for pos, col in enumerate(table.columns):
        if col.header.casefold() == "topology":
            return pos
    return None


def resolve_materials(selector: MaterialSelector, table: Table) -> list[str]:
    """Expand a selector to canonical material ids from ``table``."""
    if selector.kind is SelectorKind.ALL:
        return list(table.keys())
    if selector.kind is SelectorKind.TOPOLOGY:
        pos = _topology_column(table)
        if pos is None:
            return []
        want = selector.topology.casefold()
        return [key for key, row in zip(table.keys(), table.rows)
                if isinstance(row[pos], str) and row[pos].casefold() == want]
    resolved = []
    for name in selector.names:
        position = table.row_position(name)
        if position is None:
            raise UnknownMaterial(name)
        resolved.append(table.keys()[position])
    return resolved


def predict(property_name: str, ids: list[str], registry: Registry) -> PredictionTable:
    """Look up surrogate values for each id; identical inputs give identical tables."""
    known = registry.property_names()
    if property_name not in registry.lookups:
        raise UnknownProperty(property_name, known)
    registration = registry.lookup(property_name)
    table = registry.table(registration.table)
    col_pos = table.column_position(registration.column)
    values = []
    for material_id in ids:
        position = table.row_position(material_id)
        if position is None:
            raise ModelMiss(material_id)
        value = table.rows[position][col_pos]
        if value is None:
            raise ModelMiss(material_id)
        values.append(float(value))
    return PredictionTable(property=registration.property, ids=list(ids), values=values)


LOG_CAVEAT = ("However, this is a **logarithmic value**. "
              "To get the original value, an exponential must be applied.")

_MAX_WORDS = ("highest", "largest", "maximum", "biggest", "greatest", "most")
_MIN_WORDS = ("lowest", "smallest", "minimum", "least")
_THRESHOLD = re.compile(
    r"(greater|more|larger|higher|less|smaller|lower)\s+than\s+(?:an?\s+)?"
    r"([-+]?\d+(?:\.\d+)?)",
    re.IGNORECASE)


def _prose_label(spec: PropertySpec) -> str:
    if spec.aliases:
        return spec.aliases[0]
    return spec.name.replace("_", " ")


def _with_unit(value: float, unit: str) -> str:
    text = format_number(value)
    return f"{text} {unit}" if unit else text


def answer_from_table(question: str, table: PredictionTable) -> str:
    """Answer directly from the prediction table when a deterministic path exists.

    Covers single-value, argmax/argmin, and threshold-filter questions;
    anything else raises Unanswerable (the session turns that into an
    observation, not a crash). Ties resolve to the lexicographically
    smallest id.
    """
    if not table.ids:
        raise Unanswerable("the prediction table is empty")
    label = _prose_label(table.property)
    unit = table.property.unit

    if len(table.ids) == 1:
        sentence = (f"The predicted {label} for {table.ids[0]} is "
                    f"**{_with_unit(table.values[0], unit)}**.")
        if table.is_log_scale:
            sentence += " " + LOG_CAVEAT
        return sentence

    q = question.casefold()
    if any(word in q for word in _MAX_WORDS):
        top = max(table.values)
        best_id = min(i for i, v in zip(table.ids, table.values) if v == top)
        return f"{best_id} has the highest predicted {label} at {_with_unit(top, unit)}."
    if any(word in q for word in _MIN_WORDS):
        bottom = min(table.values)
        best_id = min(i for i, v in zip(table.ids, table.values) if v == bottom)
        return f"{best_id} has the lowest predicted {label} at {_with_unit(bottom, unit)}."

    m = _THRESHOLD.search(question)
    if m is not None:
        cutoff = float(m.group(2))
        want_above = m.group(1).casefold() in ("greater", "more", "larger", "higher")
        hits = [i for i, v in zip(table.ids, table.values)
                if (v > cutoff if want_above else v < cutoff)]
        direction = "above" if want_above else "below"
        if not hits:
            return f"No material has a predicted {label} {direction} {format_number(cutoff)}."
        return (f"{len(hits)} material(s) have a predicted {label} {direction} "
                f"{format_number(cutoff)}: {', '.join(sorted(hits))}.")

    raise Unanswerable(f"cannot answer {question!r} from a {len(table.ids)}-row table")


def write_predictions_csv(table: PredictionTable, out_dir: Union[str, Path],
                          timestamp: Optional[int] = None) -> Path:
    """Write (id, value, unit, scale) rows to predictions/<property>_<ts>.csv."""
    stamp = int(time.time()) if timestamp is None else timestamp
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{table.property.name}_{stamp}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "value", "unit", "scale"])
        for material_id, value in zip(table.ids, table.values):
            writer.writerow([material_id, format_number(value),
                             table.property.unit, table.property.scale.value])
    return path
