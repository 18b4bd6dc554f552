"""String DSL semantics, parsing, and the grammar property suites.

Expected values in the oracle tests were derived by hand from the operation
definitions before the interpreter was written, and are frozen here.
"""

import random

import pytest
from hypothesis import given, settings, strategies as st

from stepsynth import rf_dsl
from stepsynth.errors import ExecError, ParseError
from stepsynth.rf_dsl import (
    Compose, ConstStr, GetAll, GetFirst, GetFrom, GetSpan, GetToken, GetUpto,
    Remove, RemoveAll, Replace, RfProgram, SubStr, Substitute, SubstituteAll,
    ToCase, Trim, execute, execute_expression, matches, parse,
    parse_expression, serialize, serialize_expression,
)

FLAGSHIP = "GetFrom(' ') | Const('.') | Compose(ToCase(PROPER), GetToken(WORD, 1))"

FLAGSHIP_CASES = [
    ("TURING, Alan", "Alan.Turing"),
    ("knuth Donald", "Donald.Knuth"),
    ("Hopper Grace", "Grace.Hopper"),
    ("DIJKSTRA... Edsger", "Edsger.Dijkstra"),
]


class TestGoldenProgram:
    @pytest.mark.parametrize("text,expected", FLAGSHIP_CASES)
    def test_flagship_cases(self, text, expected):
        assert execute(parse(FLAGSHIP), text) == expected

    def test_flagship_round_trips(self):
        assert serialize(parse(FLAGSHIP)) == FLAGSHIP

    def test_step_one_expression(self):
        assert execute_expression(GetFrom(" "), "TURING, Alan") == "Alan"


class TestMatches:
    def test_number_runs(self):
        assert matches("NUMBER", "ab12cd3") == [(2, 4), (6, 7)]

    def test_word_on_empty(self):
        assert matches("WORD", "") == []

    def test_delimiter_literal(self):
        assert matches(",", "a,b,c") == [(1, 2), (3, 4)]

    def test_all_caps_and_proper(self):
        # Hand-derived: maximal runs, PROPER_CASE needs a lowercase tail.
        assert matches("ALL_CAPS", "McDONALD inc") == [(0, 1), (2, 8)]
        # "Mc" matches too: capital followed by >=1 lowercase, then "Donald".
        assert matches("PROPER_CASE", "McDonald Inc X") == [(0, 2), (2, 8), (9, 12)]

    def test_char_matches_everything(self):
        assert matches("CHAR", "a b") == [(0, 1), (1, 2), (2, 3)]


class TestExpressionSemantics:
    def test_const_ignores_input(self):
        assert execute_expression(ConstStr("."), "anything") == "."
        assert execute_expression(ConstStr("."), "") == "."

    def test_substr_inclusive_positions(self):
        # 1-based inclusive: (2, 4) of "abcdef" is "bcd".
        assert execute_expression(SubStr(2, 4), "abcdef") == "bcd"
        assert execute_expression(SubStr(1, 1), "abcdef") == "a"
        # Negative positions count from the end: (-3, -1) is "def".
        assert execute_expression(SubStr(-3, -1), "abcdef") == "def"

    @pytest.mark.parametrize("k1,k2", [(0, 3), (3, 0), (4, 2), (1, 7), (-7, 2)])
    def test_substr_bad_spans(self, k1, k2):
        with pytest.raises(ExecError):
            execute_expression(SubStr(k1, k2), "abcdef")

    def test_getspan(self):
        # "ab12cd3": from start of 1st NUMBER (2) to end of 2nd NUMBER (7).
        expr = GetSpan("NUMBER", 1, "START", "NUMBER", 2, "END")
        assert execute_expression(expr, "ab12cd3") == "12cd3"

    def test_getspan_reversed_is_error(self):
        expr = GetSpan("NUMBER", 2, "START", "NUMBER", 1, "END")
        with pytest.raises(ExecError):
            execute_expression(expr, "ab12cd3")

    def test_getspan_missing_match(self):
        expr = GetSpan("NUMBER", 3, "START", "NUMBER", 1, "END")
        with pytest.raises(ExecError):
            execute_expression(expr, "ab12cd3")

    def test_gettoken_negative_index(self):
        assert execute_expression(GetToken("WORD", -1), "ab cd ef") == "ef"
        assert execute_expression(GetToken("WORD", 2), "ab cd ef") == "cd"

    def test_gettoken_out_of_range(self):
        with pytest.raises(ExecError):
            execute_expression(GetToken("WORD", 3), "ab cd")

    def test_getupto_includes_first_match(self):
        assert execute_expression(GetUpto(","), "a,b,c") == "a,"
        assert execute_expression(GetUpto("NUMBER"), "ab12cd3") == "ab12"

    def test_getfrom_excludes_first_match(self):
        assert execute_expression(GetFrom(","), "a,b,c") == "b,c"
        assert execute_expression(GetFrom(" "), "TURING, Alan") == "Alan"

    def test_getupto_getfrom_no_match(self):
        with pytest.raises(ExecError):
            execute_expression(GetUpto("NUMBER"), "abc")
        with pytest.raises(ExecError):
            execute_expression(GetFrom("NUMBER"), "abc")

    @pytest.mark.parametrize("case,expected", [
        ("LOWER", "ab, cd"),
        ("ALL_CAPS", "AB, CD"),
        ("PROPER", "Ab, Cd"),
    ])
    def test_tocase(self, case, expected):
        assert execute_expression(ToCase(case), "aB, cD") == expected

    def test_tocase_proper_single_word(self):
        assert execute_expression(ToCase("PROPER"), "dijkstra") == "Dijkstra"
        assert execute_expression(ToCase("PROPER"), "TURING") == "Turing"

    def test_replace_all_occurrences(self):
        assert execute_expression(Replace(",", ";"), "a,b,c") == "a;b;c"
        assert execute_expression(Replace(",", ";"), "abc") == "abc"

    def test_trim(self):
        assert execute_expression(Trim(), "  a b  ") == "a b"
        assert execute_expression(Trim(), "ab") == "ab"

    def test_getfirst_concatenates(self):
        assert execute_expression(GetFirst("WORD", 2), "ab cd ef") == "abcd"
        with pytest.raises(ExecError):
            execute_expression(GetFirst("WORD", 3), "ab cd")
        with pytest.raises(ExecError):
            execute_expression(GetFirst("WORD", -1), "ab cd")

    def test_getall(self):
        assert execute_expression(GetAll("NUMBER"), "ab12cd3") == "123"
        assert execute_expression(GetAll("NUMBER"), "abc") == ""

    def test_substitute_indexed(self):
        assert execute_expression(Substitute("DIGIT", 2, "x"), "a1b2") == "a1bx"
        assert execute_expression(Substitute("DIGIT", -2, "x"), "a1b2") == "axb2"
        with pytest.raises(ExecError):
            execute_expression(Substitute("DIGIT", 3, "x"), "a1b2")

    def test_substitute_all(self):
        assert execute_expression(SubstituteAll("DIGIT", "x"), "a1b2") == "axbx"
        assert execute_expression(SubstituteAll("DIGIT", "x"), "ab") == "ab"
        # Whole maximal matches are replaced by the single character.
        assert execute_expression(SubstituteAll("NUMBER", "x"), "ab12cd3") == "abxcdx"

    def test_remove_indexed(self):
        assert execute_expression(Remove("DIGIT", 1), "a1b2") == "ab2"
        assert execute_expression(Remove("DIGIT", -1), "a1b2") == "a1b"
        with pytest.raises(ExecError):
            execute_expression(Remove("DIGIT", 3), "a1b2")

    def test_remove_all(self):
        assert execute_expression(RemoveAll("DIGIT"), "a1b2") == "ab"
        assert execute_expression(RemoveAll("DIGIT"), "ab") == "ab"

    def test_compose_applies_outer_last(self):
        expr = Compose(ToCase("PROPER"), GetToken("WORD", 1))
        assert execute_expression(expr, "TURING, Alan") == "Turing"
        expr = Compose(RemoveAll("DIGIT"), ToCase("ALL_CAPS"))
        assert execute_expression(expr, "a1b") == "AB"

    def test_compose_inner_error_propagates(self):
        expr = Compose(Trim(), GetToken("NUMBER", 1))
        with pytest.raises(ExecError):
            execute_expression(expr, "abc")


class TestParse:
    def test_single_const(self):
        assert parse("Const('.')") == RfProgram((ConstStr("."),))

    def test_conststr_alias(self):
        assert parse("ConstStr('.')") == RfProgram((ConstStr("."),))

    def test_case_alias(self):
        assert parse_expression("ToCase(PROPER_CASE)") == ToCase("PROPER")

    def test_round_trip_fixed_point(self):
        assert serialize(parse("GetToken(WORD, 1)")) == "GetToken(WORD, 1)"

    def test_index_zero_rejected(self):
        with pytest.raises(ParseError):
            parse("GetToken(WORD, 0)")

    def test_index_range_rejected(self):
        with pytest.raises(ParseError):
            parse("GetToken(WORD, 6)")

    def test_position_zero_parses_but_errors_at_exec(self):
        program = parse("SubStr(0, 3)")
        with pytest.raises(ExecError):
            execute(program, "abcdef")

    def test_position_range_rejected(self):
        with pytest.raises(ParseError):
            parse("SubStr(101, 3)")

    def test_apostrophe_escape(self):
        text = serialize_expression(ConstStr("'"))
        assert parse_expression(text) == ConstStr("'")

    def test_nested_compose_rejected(self):
        with pytest.raises(ParseError):
            parse("Compose(Trim(), Compose(Trim(), Trim()))")

    def test_compose_outer_must_be_modification(self):
        with pytest.raises(ParseError):
            parse("Compose(GetToken(WORD, 1), Trim())")

    def test_garbage_rejected(self):
        for bad in ["", "Frobnicate('a')", "GetToken(WORD 1)", "Const('ab')",
                    "Const(')", "GetToken(WORD, 1) trailing"]:
            with pytest.raises(ParseError):
                parse(bad)

    def test_parse_error_carries_position(self):
        with pytest.raises(ParseError) as exc_info:
            parse("GetToken(BOGUS, 1)")
        assert exc_info.value.position is not None


def _program(seed, length=None):
    rng = random.Random(seed)
    return rf_dsl.sample_program(rng, length)


def _input(seed):
    rng = random.Random(seed)
    n = rng.randint(0, 20)
    return "".join(rng.choice(rf_dsl.CHARACTERS) for _ in range(n))


class TestGrammarProperties:
    @given(st.integers(0, 10**9))
    @settings(max_examples=300, deadline=None)
    def test_round_trip(self, seed):
        program = _program(seed)
        assert parse(serialize(program)) == program

    @given(st.integers(0, 10**9), st.integers(0, 10**9))
    @settings(max_examples=300, deadline=None)
    def test_concatenation_law_and_determinism(self, pseed, xseed):
        program = _program(pseed)
        text = _input(xseed)
        try:
            full = execute(program, text)
        except ExecError:
            return
        parts = [execute_expression(e, text) for e in program.expressions]
        assert full == "".join(parts)
        assert execute(program, text) == full

    @given(st.integers(0, 10**9), st.integers(0, 10**9), st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_expressions_independent_of_siblings(self, pseed, xseed, shuffle_seed):
        program = _program(pseed, length=4)
        text = _input(xseed)
        results = {}
        for e in program.expressions:
            try:
                results[e] = execute_expression(e, text)
            except ExecError:
                results[e] = ExecError
        shuffled = list(program.expressions)
        random.Random(shuffle_seed).shuffle(shuffled)
        for e in shuffled:
            try:
                assert results[e] == execute_expression(e, text)
            except ExecError:
                assert results[e] is ExecError

    @given(st.integers(0, 10**9))
    @settings(max_examples=300, deadline=None)
    def test_sampled_programs_are_well_formed(self, seed):
        assert rf_dsl.validate_program(_program(seed))

    @given(st.integers(0, 10**9), st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_outputs_stay_in_alphabet(self, pseed, xseed):
        program = _program(pseed)
        text = _input(xseed)
        try:
            out = execute(program, text)
        except ExecError:
            return
        assert set(out) <= rf_dsl.ALPHABET
