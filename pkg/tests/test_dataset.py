"""CSV loading, dtype inference, key lookup, and the registry."""

import json

import pytest

from mofsmith.dataset import (CsvParseError, DuplicateKey, Dtype, IoError,
                              UnknownColumn, UnknownTable, load_registry,
                              load_table, material_row, resolve_data_root)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadTable:
    def test_bundled_table_shape(self, coremof):
        assert len(coremof.rows) == 50
        assert coremof.headers[0] == "name"
        assert coremof.headers[-1] == "Has Open Metal Site"

    def test_unnamed_first_column_becomes_index(self, coremof):
        # integral labels load as ints
        assert all(isinstance(i, int) for i in coremof.index)
        assert coremof.index[0] == 151  # ACOGEF's original row id

    def test_dtype_inference(self, coremof):
        assert coremof.dtype_of("Density (g/cm^3)") is Dtype.NUMBER
        assert coremof.dtype_of("Metal Type") is Dtype.TEXT
        assert coremof.dtype_of("Has Open Metal Site") is Dtype.BOOLEAN

    def test_boolean_cells_store_python_bools(self, coremof):
        values = coremof.column_values("Has Open Metal Site")
        assert set(type(v) for v in values if v is not None) == {bool}

    def test_empty_cells_become_none(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\na,1\nb,\n")
        table = load_table(path, "t")
        assert table.column_values("x") == [1.0, None]
        assert table.dtype_of("x") is Dtype.NUMBER  # nulls don't break numeric

    def test_mixed_column_is_text(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\na,1\nb,two\n")
        table = load_table(path, "t")
        assert table.dtype_of("x") is Dtype.TEXT
        assert table.column_values("x") == ["1", "two"]

    def test_all_null_column_is_text(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\na,\nb,\n")
        assert load_table(path, "t").dtype_of("x") is Dtype.TEXT

    def test_duplicate_key_rejected(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\nsame,1\nSAME,2\n")
        with pytest.raises(DuplicateKey):
            load_table(path, "t")

    def test_ragged_row_rejected_with_line_number(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\na,1\nb\n")
        with pytest.raises(CsvParseError) as err:
            load_table(path, "t")
        assert err.value.line == 3

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(CsvParseError):
            load_table(write(tmp_path / "t.csv", ""), "t")

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_table(tmp_path / "nope.csv", "t")

    def test_unknown_column(self, coremof):
        with pytest.raises(UnknownColumn):
            coremof.column_position("No Such Header")


class TestRowPosition:
    def test_exact_match(self, coremof):
        assert coremof.row_position("ACOGEF") == 0

    def test_case_insensitive(self, coremof):
        assert coremof.row_position("acogef") == 0

    def test_query_suffix_stripped(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\nYUSGID,1\n")
        table = load_table(path, "t")
        assert table.row_position("YUSGID_clean") == 0

    def test_stored_suffix_stripped(self, tmp_path):
        path = write(tmp_path / "t.csv", "name,x\nXEGKUR_clean,1\n")
        table = load_table(path, "t")
        assert table.row_position("XEGKUR") == 0

    def test_absent_key(self, coremof):
        assert coremof.row_position("ZZZZZZ") is None

    def test_material_row(self, coremof):
        row = material_row(coremof, "ACOGEF")
        assert row["Gravimetric Surface Area (m^2/g)"] == 1138.35
        assert material_row(coremof, "ZZZZZZ") is None


class TestRegistry:
    def test_tables_load(self, registry):
        for name in ("coremof", "predictions", "gene_landscape", "gene_pool"):
            assert registry.table(name).name == name

    def test_unknown_table(self, registry):
        with pytest.raises(UnknownTable):
            registry.table("nope")

    def test_primary_table(self, registry):
        assert registry.primary().name == "coremof"

    def test_pool_table(self, registry):
        pool = registry.pool()
        assert pool is not None and pool.name == "gene_pool"
        assert len(pool.rows) == 2000

    def test_lookups(self, registry):
        reg = registry.lookup("bandgap")
        assert reg is not None
        assert reg.table == "predictions"
        assert reg.property.unit == "eV"
        assert registry.lookup("no_such_property") is None

    def test_property_names(self, registry):
        names = registry.property_names()
        assert "bandgap" in names
        assert "CO2_henry_coefficient_298K" in names

    def test_log_scale_marked(self, registry):
        reg = registry.lookup("CO2_henry_coefficient_298K")
        assert reg.property.scale.value == "log"

    def test_bad_registry_json(self, tmp_path):
        write(tmp_path / "registry.json", "{not json")
        with pytest.raises(IoError):
            load_registry(tmp_path)

    def test_missing_registry_file(self, tmp_path):
        with pytest.raises(IoError):
            load_registry(tmp_path)

    def test_registry_with_minimal_doc(self, tmp_path):
        write(tmp_path / "only.csv", "name,x\na,1\n")
        write(tmp_path / "registry.json", json.dumps({
            "tables": [{"name": "only", "path": "only.csv", "primary": True}],
        }))
        registry = load_registry(tmp_path)
        assert registry.primary().name == "only"
        assert registry.pool() is None


class TestResolveDataRoot:
    def test_explicit_wins(self, monkeypatch):
        monkeypatch.setenv("MOFSMITH_DATA", "/env/path")
        assert str(resolve_data_root("/explicit")) == "/explicit"

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("MOFSMITH_DATA", "/env/path")
        assert str(resolve_data_root()) == "/env/path"

    def test_error_when_unset(self, monkeypatch):
        monkeypatch.delenv("MOFSMITH_DATA", raising=False)
        with pytest.raises(IoError):
            resolve_data_root()
