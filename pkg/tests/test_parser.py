"""Tests for the s-expression reader and the printer that feeds it."""

from __future__ import annotations

from pathlib import Path

import pytest

from corechkc.errors import ParseError
from corechkc.genprop.generator import gen_program
from corechkc.models.report import GenConfig
from corechkc.models.syntax import (
    INT,
    Add,
    ArrayType,
    BoundPair,
    ConstBound,
    Deref,
    Let,
    Lit,
    Mode,
    PtrType,
    Ret,
    StructType,
    Var,
    VarBound,
    array_ptr,
)
from corechkc.parser import parse_expr, parse_program, parse_type
from corechkc.printer import print_expr, print_program, print_type

PROGRAMS_DIR = Path(__file__).parent.parent / "programs"


# ---------------------------------------------------------------------------
# TestParseType
# ---------------------------------------------------------------------------


class TestParseType:
    def test_int(self):
        assert parse_type("int") == INT

    def test_checked_pointer_to_int(self):
        assert parse_type("(ptr c int)") == PtrType(Mode.CHECKED, INT)

    def test_null_terminated_array_with_dependent_bound(self):
        ty = parse_type("(ptr c (ntarray 0 (+ n 1) int))")
        assert ty == PtrType(
            Mode.CHECKED,
            ArrayType(BoundPair(ConstBound(0), VarBound("n", 1)), INT, True),
        )

    def test_bare_identifier_bound_has_zero_offset(self):
        assert parse_type("(ptr c (array 0 n int))") == array_ptr(0, VarBound("n", 0))

    def test_count_shorthand_starts_at_zero(self):
        assert parse_type("(ptr c (array (count 4) int))") == array_ptr(0, 4)

    def test_struct(self):
        assert parse_type("(ptr u (struct cell))") == PtrType(
            Mode.UNCHECKED, StructType("cell")
        )

    def test_unknown_mode_rejected(self):
        with pytest.raises(ParseError):
            parse_type("(ptr x int)")

    def test_array_elements_must_be_words(self):
        with pytest.raises(ParseError):
            parse_type("(ptr c (array 0 1 (struct cell)))")


# ---------------------------------------------------------------------------
# TestParseExpr
# ---------------------------------------------------------------------------


class TestParseExpr:
    def test_let_with_pointer_arithmetic(self):
        e = parse_expr("(let x (lit 1 int) (deref (+ p x)))")
        assert e == Let("x", Lit(1, INT), Deref(Add(Var("p"), Var("x"))))

    def test_ret_frame_with_saved_literal(self):
        e = parse_expr("(ret x (lit 3 int) x)")
        assert e == Ret("x", Lit(3, INT), Var("x"))

    def test_ret_frame_with_bot(self):
        assert parse_expr("(ret x bot x)") == Ret("x", None, Var("x"))

    def test_comments_are_skipped(self):
        assert parse_expr("; leading\n(lit 7 int) ; trailing") == Lit(7, INT)

    def test_reserved_dollar_rejected(self):
        with pytest.raises(ParseError, match="reserved"):
            parse_expr("x$1")

    def test_wrong_arity_reports_position(self):
        with pytest.raises(ParseError) as info:
            parse_expr("\n  (deref a b)")
        assert info.value.line == 2
        assert info.value.column == 3

    def test_unbalanced_close(self):
        with pytest.raises(ParseError, match="unbalanced"):
            parse_expr("(lit 1 int))")

    def test_unclosed_open(self):
        with pytest.raises(ParseError, match="unclosed"):
            parse_expr("(lit 1 int")


# ---------------------------------------------------------------------------
# TestParseProgram
# ---------------------------------------------------------------------------


class TestParseProgram:
    def test_struct_fun_and_main(self):
        program = parse_program(
            "(defs (struct pair (a int) (b int))"
            " (fun id ((x int)) int x)"
            " (main (call id (lit 1 int))))"
        )
        assert list(program.structs) == ["pair"]
        assert program.funs["id"].params == (("x", INT),)
        assert program.structs["pair"].index("b") == 1

    def test_missing_main(self):
        with pytest.raises(ParseError, match="missing"):
            parse_program("(defs (fun id ((x int)) int x))")

    def test_ret_not_allowed_in_programs(self):
        with pytest.raises(ParseError, match="runtime form"):
            parse_program("(defs (main (ret x bot (lit 0 int))))")

    def test_duplicate_parameter(self):
        with pytest.raises(ParseError, match="duplicate parameter"):
            parse_program("(defs (fun f ((x int) (x int)) int x) (main (lit 0 int)))")

    def test_top_form_must_be_defs(self):
        with pytest.raises(ParseError):
            parse_program("(main (lit 0 int))")


# ---------------------------------------------------------------------------
# TestPrinter
# ---------------------------------------------------------------------------


class TestPrinter:
    def test_prints_dependent_bound_in_normal_form(self):
        ty = array_ptr(0, VarBound("n", 0), nt=True)
        assert print_type(ty) == "(ptr c (ntarray 0 (+ n 0) int))"

    def test_expression_reparses(self):
        text = "(if (deref p) (deref (+ p (lit 1 int))) (lit 0 int))"
        assert print_expr(parse_expr(text)) == text

    @pytest.mark.parametrize("name", sorted(p.name for p in PROGRAMS_DIR.glob("*.chkc")))
    def test_bundled_programs_survive_print_and_parse(self, name):
        program = parse_program((PROGRAMS_DIR / name).read_text(encoding="utf-8"))
        again = parse_program(print_program(program))
        assert again == program

    @pytest.mark.parametrize("near_ill_typed", [False, True])
    def test_generated_programs_survive_print_and_parse(self, near_ill_typed):
        cfg = GenConfig(depth=5, workers=1)
        for seed in range(25):
            program = gen_program(cfg, seed, near_ill_typed=near_ill_typed).program
            assert parse_program(print_program(program)) == program, seed
