"""Column-typed property tables loaded from CSV, plus the lookup registry.

Tables are immutable after load. A registry binds property keys (e.g.
``accessible_surface_area``) to a (table, column) pair so the predictor
can resolve them; gene-keyed tables back the generator's parent pools.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .core import MofsmithError, PropertySpec, Scale

Cell = Union[float, str, bool, None]


class IoError(MofsmithError):
    pass


class CsvParseError(MofsmithError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateKey(MofsmithError):
    def __init__(self, value: str):
        super().__init__(f"duplicate key {value!r}")
        self.value = value


class UnknownTable(MofsmithError):
    pass


class UnknownColumn(MofsmithError):
    pass


class Dtype(str, Enum):
    NUMBER = "number"
    TEXT = "text"
    BOOLEAN = "boolean"


_BOOL_WORDS = {"true": True, "yes": True, "false": False, "no": False}
_SUFFIX = re.compile(r"_[A-Za-z0-9]+$")


class MaterialKind(str, Enum):
    NAMED_MOF = "named_mof"
    GENE = "gene"


@dataclass(frozen=True)
class Column:
    header: str  # verbatim, units included
    dtype: Dtype


@dataclass
class Table:
    """A named, column-typed table. Rows are row-major; nulls are None.

    ``index`` carries per-row labels (preserved from an unnamed leading CSV
    column when present, else 0..n-1), mirroring how a dataframe keeps the
    original row ids of a sampled file.
    """

    name: str
    columns: list[Column]
    rows: list[list[Cell]]
    key_column: str = "name"
    index: list[Union[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.index:
            self.index = list(range(len(self.rows)))
        self._col_pos = {c.header: i for i, c in enumerate(self.columns)}
        self._exact_map: dict[str, int] = {}
        self._fold_map: dict[str, int] = {}
        self._stem_map: dict[str, int] = {}
        if self.key_column in self._col_pos:
            k = self._col_pos[self.key_column]
            for r, row in enumerate(self.rows):
                v = row[k]
                if v is None:
                    continue
                norm = str(v).casefold()
                if norm in self._fold_map:
                    raise DuplicateKey(str(v))
                self._exact_map[str(v)] = r
                self._fold_map[norm] = r
                stem = _SUFFIX.sub("", norm)
                if stem and stem != norm and stem not in self._stem_map:
                    self._stem_map[stem] = r

    @property
    def headers(self) -> list[str]:
        return [c.header for c in self.columns]

    def column_position(self, header: str) -> int:
        try:
            return self._col_pos[header]
        except KeyError:
            raise UnknownColumn(f"no column {header!r} in table {self.name!r}") from None

    def dtype_of(self, header: str) -> Dtype:
        return self.columns[self.column_position(header)].dtype

    def column_values(self, header: str) -> list[Cell]:
        pos = self.column_position(header)
        return [row[pos] for row in self.rows]

    def keys(self) -> list[str]:
        k = self._col_pos[self.key_column]
        return [str(row[k]) for row in self.rows if row[k] is not None]

    def row_position(self, key: str) -> Optional[int]:
        """Exact match first, then case-insensitive, then one trailing
        ``_<word>`` suffix stripped from either side (YUSGID_clean falls back
        to stored YUSGID; a bare XEGKUR finds stored XEGKUR_clean)."""
        hit = self._exact_map.get(key)
        if hit is None:
            hit = self._fold_map.get(key.casefold())
        if hit is None:
            hit = self._stem_map.get(key.casefold())
        if hit is not None:
            return hit
        stem = _SUFFIX.sub("", key)
        if stem and stem != key:
            return self.row_position(stem)
        return None


def material_row(table: Table, key: str) -> Optional[dict[str, Cell]]:
    """The row for a material key, or None when absent (absence is not an error)."""
    pos = table.row_position(key)
    if pos is None:
        return None
    return {c.header: v for c, v in zip(table.columns, table.rows[pos])}


def _parse_number(text: str) -> Optional[float]:
    try:
        return float(text)
    except ValueError:
        return None


def load_table(path: Union[str, Path], name: str, key_column: str = "name") -> Table:
    """Load a CSV (RFC-4180, UTF-8, header row) and infer column dtypes.

    A column is numeric iff every non-null cell parses as a number; boolean
    iff every non-null cell is one of true/false/yes/no; text otherwise.
    An unnamed first column becomes the row index.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(1, "missing header row") from None
        except csv.Error as exc:
            raise CsvParseError(1, str(exc)) from None

        has_index = bool(header) and header[0] == ""
        col_headers = header[1:] if has_index else header
        raw_rows: list[list[str]] = []
        index: list[Union[int, str]] = []
        try:
            for lineno, record in enumerate(reader, start=2):
                if not record:
                    continue
                if len(record) != len(header):
                    raise CsvParseError(lineno, f"expected {len(header)} cells, got {len(record)}")
                if has_index:
                    label = record[0]
                    num = _parse_number(label)
                    index.append(int(num) if num is not None and num == int(num) else label)
                    raw_rows.append(record[1:])
                else:
                    raw_rows.append(record)
        except csv.Error as exc:
            raise CsvParseError(reader.line_num, str(exc)) from None

    columns: list[Column] = []
    converted: list[list[Cell]] = [[None] * len(col_headers) for _ in raw_rows]
    for c, h in enumerate(col_headers):
        cells = [row[c] for row in raw_rows]
        non_null = [v for v in cells if v != ""]
        if non_null and all(_parse_number(v) is not None for v in non_null):
            dtype = Dtype.NUMBER
        elif non_null and all(v.casefold() in _BOOL_WORDS for v in non_null):
            dtype = Dtype.BOOLEAN
        else:
            dtype = Dtype.TEXT
        columns.append(Column(h, dtype))
        for r, v in enumerate(cells):
            if v == "":
                converted[r][c] = None
            elif dtype is Dtype.NUMBER:
                converted[r][c] = float(v)
            elif dtype is Dtype.BOOLEAN:
                converted[r][c] = _BOOL_WORDS[v.casefold()]
            else:
                converted[r][c] = v

    return Table(name=name, columns=columns, rows=converted,
                 key_column=key_column, index=index)


@dataclass(frozen=True)
class LookupRegistration:
    """Binds one property key to a table column holding its values."""

    property: PropertySpec
    table: str
    column: str
    material_kind: MaterialKind = MaterialKind.NAMED_MOF


class Registry:
    """All loaded tables plus property-to-column bindings.

    Built once at startup; read-only afterward, so concurrent readers are
    safe.
    """

    def __init__(self):
        self.tables: dict[str, Table] = {}
        self.lookups: dict[str, LookupRegistration] = {}
        self.primary_table: Optional[str] = None
        self.pool_table: Optional[str] = None  # gene parent pool for the generator

    def add_table(self, table: Table, primary: bool = False) -> None:
        self.tables[table.name] = table
        if primary or self.primary_table is None:
            self.primary_table = table.name

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise UnknownTable(f"no table named {name!r}") from None

    def register_lookup(self, registration: LookupRegistration) -> None:
        table = self.table(registration.table)
        table.column_position(registration.column)  # raises UnknownColumn
        self.lookups[registration.property.name] = registration

    def lookup(self, property_name: str) -> Optional[LookupRegistration]:
        return self.lookups.get(property_name)

    def property_names(self) -> list[str]:
        return sorted(self.lookups)

    def primary(self) -> Table:
        if self.primary_table is None:
            raise UnknownTable("registry has no tables")
        return self.tables[self.primary_table]

    def pool(self) -> Optional[Table]:
        """The gene parent-pool table, if one is registered."""
        if self.pool_table is None:
            return None
        return self.tables[self.pool_table]


def load_registry(root: Union[str, Path]) -> Registry:
    """Build a registry from ``<root>/registry.json``.

    The JSON document lists tables (paths relative to root) and lookup
    registrations; see README for the schema.
    """
    root = Path(root)
    spec_path = root / "registry.json"
    try:
        doc = json.loads(spec_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {spec_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"bad registry JSON in {spec_path}: {exc}") from exc

    registry = Registry()
    for entry in doc.get("tables", []):
        table = load_table(root / entry["path"], entry["name"],
                           key_column=entry.get("key_column", "name"))
        registry.add_table(table, primary=entry.get("primary", False))
    if "primary_table" in doc:
        registry.table(doc["primary_table"])
        registry.primary_table = doc["primary_table"]
    if "pool_table" in doc:
        registry.table(doc["pool_table"])
        registry.pool_table = doc["pool_table"]
    for entry in doc.get("lookups", []):
        prop = entry["property"]
        spec = PropertySpec(
            name=prop["name"],
            unit=prop.get("unit", ""),
            scale=Scale(prop.get("scale", "linear")),
            aliases=tuple(prop.get("aliases", ())),
        )
        registry.register_lookup(LookupRegistration(
            property=spec,
            table=entry["table"],
            column=entry["column"],
            material_kind=MaterialKind(entry.get("material_kind", "named_mof")),
        ))
    return registry


def resolve_data_root(explicit: Optional[str] = None) -> Path:
    """Dataset root: explicit flag wins, then the MOFSMITH_DATA env var."""
    if explicit:
        return Path(explicit)
    env = os.environ.get("MOFSMITH_DATA")
    if env:
        return Path(env)
    raise IoError("no dataset root: pass --data or set MOFSMITH_DATA")
