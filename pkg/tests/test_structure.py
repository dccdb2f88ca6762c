"""CIF parsing: cell parameters, composition, and volume."""

import math

import pytest

from conftest import CIFS
from mofsmith.structure import (CifParseError, MissingCellBlock, cell_volume,
                                describe_structure, hill_formula, parse_cif)
from collections import Counter


class TestCellVolume:
    def test_cubic(self):
        assert cell_volume(10, 10, 10, 90, 90, 90) == pytest.approx(1000.0)

    def test_triclinic_matches_lattice_vector_triple_product(self):
        numpy = pytest.importorskip("numpy")
        a, b, c = 8.2, 9.1, 11.4
        alpha, beta, gamma = map(math.radians, (77.3, 102.6, 91.2))
        # standard cartesian lattice vectors
        va = numpy.array([a, 0, 0])
        vb = numpy.array([b * math.cos(gamma), b * math.sin(gamma), 0])
        cx = c * math.cos(beta)
        cy = c * (math.cos(alpha) - math.cos(beta) * math.cos(gamma)) \
            / math.sin(gamma)
        cz = math.sqrt(c * c - cx * cx - cy * cy)
        vc = numpy.array([cx, cy, cz])
        triple = float(numpy.dot(va, numpy.cross(vb, vc)))
        mine = cell_volume(a, b, c, 77.3, 102.6, 91.2)
        assert math.isclose(mine, triple, rel_tol=1e-9)


class TestParseCif:
    def test_cubic_fixture(self):
        info = parse_cif(CIFS / "cubic.cif")
        assert (info.a, info.b, info.c) == (10.0, 10.0, 10.0)
        assert info.atom_count == 7
        assert info.formula == "C2HCu2O2"
        assert info.volume == pytest.approx(1000.0)

    def test_triclinic_fixture_strips_uncertainties(self):
        info = parse_cif(CIFS / "triclinic.cif")
        assert info.a == 8.2
        assert info.alpha == 77.3
        assert info.atom_count == 8

    def test_type_symbol_preferred_over_label(self):
        info = parse_cif(CIFS / "triclinic.cif")
        # Zn2+ normalizes to element Zn; labels like Zn1 are the fallback
        assert info.formula == "C3HNO2Zn"

    def test_volume_matches_cell_formula(self):
        info = parse_cif(CIFS / "triclinic.cif")
        assert math.isclose(
            info.volume,
            cell_volume(info.a, info.b, info.c,
                        info.alpha, info.beta, info.gamma),
            rel_tol=1e-12)

    def test_missing_cell_block(self, tmp_path):
        path = tmp_path / "no_cell.cif"
        path.write_text("data_x\nloop_\n_atom_site_label\nC1\n",
                        encoding="utf-8")
        with pytest.raises(MissingCellBlock):
            parse_cif(path)

    def test_bad_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.cif"
        path.write_text("data_x\n_cell_length_a abc\n", encoding="utf-8")
        with pytest.raises(CifParseError) as err:
            parse_cif(path)
        assert err.value.line == 2

    def test_label_fallback_when_no_type_symbol(self, tmp_path):
        path = tmp_path / "labels.cif"
        path.write_text(
            "data_x\n"
            "_cell_length_a 5\n_cell_length_b 5\n_cell_length_c 5\n"
            "_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 90\n"
            "loop_\n_atom_site_label\n_atom_site_fract_x\n"
            "Cu1 0.0\nO12 0.5\nC3 0.2\n",
            encoding="utf-8")
        info = parse_cif(path)
        assert info.atom_count == 3
        assert info.formula == "CCuO"


class TestHillFormula:
    def test_carbon_first_then_hydrogen_then_alphabetical(self):
        counts = Counter({"Cu": 2, "O": 2, "C": 2, "H": 1})
        assert hill_formula(counts) == "C2HCu2O2"

    def test_no_carbon_is_fully_alphabetical(self):
        counts = Counter({"Zn": 1, "O": 4, "H": 2})
        assert hill_formula(counts) == "H2O4Zn"

    def test_empty(self):
        assert hill_formula(Counter()) == ""


class TestDescribe:
    def test_deterministic_and_integer_friendly(self):
        info = parse_cif(CIFS / "cubic.cif")
        text = describe_structure(info)
        assert text == describe_structure(info)
        assert "10, 10, 10 Å" in text        # integral lengths print bare
        assert "90, 90, 90°" in text
        assert "1000" in text                 # volume
        assert "C2HCu2O2" in text
        assert "7 atoms" in text
