"""Minimal CIF reader: cell parameters, atom count, Hill formula, volume.

Parses just enough of the CIF grammar for tool observations — the six
cell tags plus the first `_atom_site` loop of the first data block.
Other loops, symmetry, and multi-block files beyond the first block are
out of scope.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .core import MofsmithError, format_number


class CifParseError(MofsmithError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingCellBlock(MofsmithError):
    pass


_CELL_TAGS = {
    "_cell_length_a": "a",
    "_cell_length_b": "b",
    "_cell_length_c": "c",
    "_cell_angle_alpha": "alpha",
    "_cell_angle_beta": "beta",
    "_cell_angle_gamma": "gamma",
}

_ELEMENT = re.compile(r"^([A-Z][a-z]?)")
_UNCERTAINTY = re.compile(r"\(\d+\)$")


@dataclass(frozen=True)
class StructureInfo:
    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float
    atom_count: int
    formula: str
    volume: float


def cell_volume(a: float, b: float, c: float,
                alpha: float, beta: float, gamma: float) -> float:
    """Triclinic cell volume from lengths (Å) and angles (degrees)."""
    ca = math.cos(math.radians(alpha))
    cb = math.cos(math.radians(beta))
    cg = math.cos(math.radians(gamma))
    discriminant = 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg
    if discriminant <= 0.0:
        raise ValueError("angles do not describe a valid cell")
    return a * b * c * math.sqrt(discriminant)


def _numeric(raw: str, line: int) -> float:
    text = _UNCERTAINTY.sub("", raw.strip())
    try:
        return float(text)
    except ValueError:
        raise CifParseError(line, f"expected a number, found {raw!r}") from None


def _element_of(symbol: str, label_fallback: bool) -> Optional[str]:
    text = symbol.strip().strip("'\"")
    if not text or text in ("?", "."):
        return None
    if label_fallback:
        # labels look like "Zn3" or "C12A"; take the leading letters
        letters = re.match(r"^([A-Za-z]+)", text)
        if letters is None:
            return None
        text = letters.group(1)
    normalized = text[0].upper() + text[1:2].lower()
    m = _ELEMENT.match(normalized)
    return m.group(1) if m else None


def hill_formula(elements: Counter) -> str:
    """C first, then H, then the rest alphabetically; count 1 is implicit."""
    if not elements:
        return ""
    ordered = []
    if "C" in elements:
        ordered.append("C")
        if "H" in elements:
            ordered.append("H")
        ordered.extend(sorted(e for e in elements if e not in ("C", "H")))
    else:
        ordered.extend(sorted(elements))
    return "".join(f"{e}{elements[e]}" if elements[e] > 1 else e for e in ordered)


def _split_fields(line: str) -> list[str]:
    # CIF values may be quoted with ' or "; this handles the single-line case
    fields = []
    i = 0
    n = len(line)
    while i < n:
        if line[i].isspace():
            i += 1
            continue
        if line[i] in "'\"":
            quote = line[i]
            end = line.find(quote, i + 1)
            if end == -1:
                fields.append(line[i + 1:])
                return fields
            fields.append(line[i + 1:end])
            i = end + 1
        else:
            end = i
            while end < n and not line[end].isspace():
                end += 1
            fields.append(line[i:end])
            i = end
    return fields


def parse_cif(path: Union[str, Path]) -> StructureInfo:
    """Read one CIF file (first data block) into a StructureInfo."""
    try:
        text = Path(path).read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise CifParseError(0, f"cannot read {path}: {exc}") from None

    cell: dict[str, float] = {}
    elements: Counter = Counter()
    atom_count = 0
    lines = text.splitlines()
    blocks_seen = 0
    i = 0
    while i < len(lines):
        raw = lines[i]
        line_no = i + 1
        stripped = raw.strip()
        i += 1
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.lower().startswith("data_"):
            blocks_seen += 1
            if blocks_seen > 1:
                break  # only the first block
            continue
        if stripped.lower() == "loop_":
            tags = []
            while i < len(lines) and lines[i].strip().startswith("_"):
                tags.append(lines[i].strip().split()[0].lower())
                i += 1
            is_atom_site = any(t.startswith("_atom_site_") for t in tags)
            type_col = label_col = None
            for pos, tag in enumerate(tags):
                if tag == "_atom_site_type_symbol":
                    type_col = pos
                if tag == "_atom_site_label":
                    label_col = pos
            while i < len(lines):
                row = lines[i].strip()
                if not row or row.startswith(("_", "#")) or row.lower() == "loop_" \
                        or row.lower().startswith("data_"):
                    break
                fields = _split_fields(row)
                i += 1
                if not is_atom_site:
                    continue
                if len(fields) != len(tags):
                    raise CifParseError(i, f"loop row has {len(fields)} fields, "
                                           f"expected {len(tags)}")
                source = type_col if type_col is not None else label_col
                if source is None:
                    continue
                element = _element_of(fields[source], label_fallback=type_col is None)
                if element is None:
                    continue
                atom_count += 1
                elements[element] += 1
            continue
        if stripped.startswith("_"):
            parts = stripped.split(None, 1)
            tag = parts[0].lower()
            if tag in _CELL_TAGS:
                if len(parts) < 2:
                    raise CifParseError(line_no, f"{tag} has no value")
                cell[_CELL_TAGS[tag]] = _numeric(parts[1], line_no)
            continue

    missing = [tag for tag, key in _CELL_TAGS.items() if key not in cell]
    if missing:
        raise MissingCellBlock(f"missing cell tags: {', '.join(sorted(missing))}")
    for key in ("a", "b", "c"):
        if cell[key] <= 0:
            raise MissingCellBlock(f"cell length {key} must be positive")
    for key in ("alpha", "beta", "gamma"):
        if not 0.0 < cell[key] < 180.0:
            raise MissingCellBlock(f"cell angle {key} must be in (0, 180)")

    volume = cell_volume(cell["a"], cell["b"], cell["c"],
                         cell["alpha"], cell["beta"], cell["gamma"])
    return StructureInfo(a=cell["a"], b=cell["b"], c=cell["c"],
                         alpha=cell["alpha"], beta=cell["beta"], gamma=cell["gamma"],
                         atom_count=atom_count, formula=hill_formula(elements),
                         volume=volume)


def describe_structure(info: StructureInfo) -> str:
    """One-paragraph observation used by the structure_info tool."""
    cell = ", ".join(format_number(v) for v in (info.a, info.b, info.c))
    angles = ", ".join(format_number(v) for v in (info.alpha, info.beta, info.gamma))
    formula = info.formula or "unknown composition"
    return (f"The structure has formula {formula} with {info.atom_count} atoms "
            f"per cell. Cell lengths are {cell} Å with angles {angles}°, "
            f"giving a volume of {format_number(info.volume)} Å³.")
