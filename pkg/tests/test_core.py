"""Gene encoding, objectives, outcomes, and number helpers."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mofsmith.core import (Gene, MalformedGene, Objective, ObjectiveKind,
                           Outcome, OutcomeLabel, extract_numbers,
                           format_gene, format_number, parse_gene)

PART = st.text(
    alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-",
    min_size=1, max_size=12)


class TestGene:
    def test_parse_example(self):
        gene = parse_gene("tbo+N17+N10")
        assert gene == Gene("tbo", "N17", "N10")
        assert str(gene) == "tbo+N17+N10"

    @given(PART, PART, PART)
    def test_round_trip(self, topology, block1, block2):
        text = f"{topology}+{block1}+{block2}"
        gene = parse_gene(text)
        assert format_gene(gene) == text
        assert parse_gene(format_gene(gene)) == gene

    @pytest.mark.parametrize("text", [
        "tbo+N17",            # two parts
        "tbo+N17+N10+N3",     # four parts
        "tbo++N10",           # empty middle
        "+N17+N10",           # empty topology
        "tbo+N 17+N10",       # space inside a part
        "tbo+N17+N1é",        # non-ascii
        "",
    ])
    def test_malformed(self, text):
        with pytest.raises(MalformedGene):
            parse_gene(text)

    def test_slots_are_not_interchangeable(self):
        assert parse_gene("a+b+c") != parse_gene("a+c+b")


class TestObjective:
    def test_near_requires_finite_target(self):
        for bad in (None, float("nan"), float("inf"), float("-inf")):
            with pytest.raises(ValueError):
                Objective(ObjectiveKind.NEAR, target=bad)
        assert Objective(ObjectiveKind.NEAR, target=0.5).target == 0.5

    def test_range_requires_ordered_bounds(self):
        with pytest.raises(ValueError):
            Objective(ObjectiveKind.RANGE, low=2.0, high=1.0)
        with pytest.raises(ValueError):
            Objective(ObjectiveKind.RANGE, low=1.0)
        obj = Objective(ObjectiveKind.RANGE, low=1.0, high=1.0)
        assert (obj.low, obj.high) == (1.0, 1.0)

    def test_describe(self):
        assert Objective(ObjectiveKind.MAX).describe() == "max"
        assert Objective(ObjectiveKind.NEAR, target=500.0).describe() == "near 500"
        assert Objective(ObjectiveKind.RANGE, low=30, high=40).describe() == \
            "range 30 40"


class TestOutcome:
    def test_answered_requires_answer(self):
        with pytest.raises(ValueError):
            Outcome(OutcomeLabel.ANSWERED)

    def test_error_labels_reject_answer(self):
        with pytest.raises(ValueError):
            Outcome(OutcomeLabel.TOKEN_LIMIT, answer="nope")
        with pytest.raises(ValueError):
            Outcome(OutcomeLabel.LOGIC_ERROR, answer="nope")

    def test_valid_combinations(self):
        assert Outcome(OutcomeLabel.ANSWERED, answer="42").answer == "42"
        assert Outcome(OutcomeLabel.TOKEN_LIMIT).answer is None


class TestExtractNumbers:
    def test_plain_sequence(self):
        assert extract_numbers("3 then 5.5 then -2") == [3.0, 5.5, -2.0]

    def test_digits_inside_identifiers_skipped(self):
        assert extract_numbers("CO2 uptake for ROLCEC19 at 100bar and 77K") == []

    def test_value_with_unit_comes_first(self):
        # exponents in the unit do extract (they stand alone after ^),
        # which is why consumers key off the first number
        assert extract_numbers("1474.22 m^2/cm^3")[0] == 1474.22
        assert extract_numbers("1474.22 m²/g") == [1474.22]

    def test_negative_in_parentheses(self):
        assert extract_numbers("exp(-3.62769)") == [-3.62769]

    def test_scientific_notation(self):
        assert extract_numbers("2.5e-3 and 1E6") == [0.0025, 1000000.0]

    def test_version_like_tokens_skipped(self):
        assert extract_numbers("v1.2") == []

    def test_decimal_without_leading_zero(self):
        assert extract_numbers("a value of .25 here") == [0.25]


class TestFormatNumber:
    @pytest.mark.parametrize("value,expected", [
        (5.0, "5"),
        (-3.0, "-3"),
        (0.0, "0"),
        (-0.0, "0"),
        (1474.22, "1474.22"),
        (2.5, "2.5"),
        (0.026577507595890823, "0.026577507595890823"),
        (float("nan"), "nan"),
    ])
    def test_examples(self, value, expected):
        assert format_number(value) == expected

    def test_huge_integral_floats_keep_float_form(self):
        assert format_number(1e16) == "1e+16"

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_round_trips(self, value):
        assert float(format_number(value)) == value

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_extract_inverts_format(self, value):
        text = f"the value is {format_number(value)} today"
        assert extract_numbers(text) == [value]
