"""Tests for the annotated small-step interpreter."""

from __future__ import annotations

from pathlib import Path

import pytest

from corechkc.models.state import Heap
from corechkc.models.syntax import INT, Lit, Program, array_ptr
from corechkc.parser import parse_expr, parse_program, parse_type
from corechkc.semantics import (
    Halt,
    Status,
    alloc,
    decompose,
    run_program,
    stack_consistent,
)

PROGRAMS_DIR = Path(__file__).parent.parent / "programs"


def _run(body: str, fuel: int = 10000):
    return run_program(Program(main=parse_expr(body)), fuel)


def _load(name: str) -> Program:
    return parse_program((PROGRAMS_DIR / name).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# TestBundledPrograms
# ---------------------------------------------------------------------------


class TestBundledPrograms:
    @pytest.mark.parametrize(
        "name, expected",
        [
            ("null_deref.chkc", "null"),
            ("strlen_widen.chkc", "value 105"),
            ("shadow_persist.chkc", "value 105"),
            ("deref_array.chkc", "value 2"),
            ("strcat.chkc", "value 3"),
        ],
    )
    def test_outcome(self, name, expected):
        assert run_program(_load(name)).describe() == expected

    def test_trace_starts_at_first_allocation(self):
        outcome = run_program(_load("strlen_widen.chkc"))
        first = outcome.trace_lines()[0]
        assert first == (
            "STEP 1 MODE c REDEX (malloc (ntarray 0 2 int))"
            " -> (lit 1 (ptr c (ntarray 0 2 int)))"
        )

    def test_finished_run_restores_stack(self):
        outcome = run_program(_load("shadow_persist.chkc"))
        assert outcome.status is Status.FINISHED
        assert outcome.phi == {}


# ---------------------------------------------------------------------------
# TestMemory
# ---------------------------------------------------------------------------


class TestMemory:
    def test_alloc_adds_terminator_and_moves_cursor(self):
        base, heap = alloc(Heap(), parse_type("(ntarray 0 2 int)"), {})
        assert base == 1
        assert heap.cursor == 4
        assert [heap.cells[a] for a in (1, 2, 3)] == [Lit(0, INT)] * 3

    def test_malloc_of_empty_array_halts(self):
        assert _run("(malloc (array 0 0 int))").result is Halt.BOUNDS

    def test_read_past_plain_array(self):
        outcome = _run("(let p (malloc (array 0 2 int)) (deref (+ p (lit 2 int))))")
        assert outcome.describe() == "bounds"

    def test_read_of_terminator_is_allowed(self):
        outcome = _run("(let p (malloc (ntarray 0 2 int)) (deref (+ p (lit 2 int))))")
        assert outcome.describe() == "value 0"

    def test_write_to_terminator_halts(self):
        outcome = _run(
            "(let p (malloc (ntarray 0 2 int)) (assign (+ p (lit 2 int)) (lit 1 int)))"
        )
        assert outcome.describe() == "bounds"

    def test_arithmetic_shifts_bounds(self):
        outcome = _run("(let p (malloc (array 0 3 int)) (+ p (lit 1 int)))")
        assert outcome.result == Lit(2, array_ptr(-1, 2))

    def test_arithmetic_on_null_halts(self):
        outcome = _run("(deref (+ (lit 0 (ptr c (array 0 2 int))) (lit 1 int)))")
        assert outcome.result is Halt.NULL

    def test_dynamic_cast_outside_source_bounds(self):
        outcome = _run("(dyncast (ptr c (array 0 3 int)) (malloc (array 0 2 int)))")
        assert outcome.describe() == "bounds"


# ---------------------------------------------------------------------------
# TestWidening
# ---------------------------------------------------------------------------


class TestWidening:
    _SETUP = (
        "(let s (malloc (ntarray 0 1 int)) (let w (assign s (lit {c} int))"
        " (let p (cast (ptr c (ntarray 0 0 int)) s) {body})))"
    )

    def test_nonzero_first_character_takes_then_branch(self):
        body = "(if (deref p) (deref (+ p (lit 1 int))) (lit 9 int))"
        assert _run(self._SETUP.format(c=7, body=body)).describe() == "value 0"

    def test_zero_first_character_takes_else_branch(self):
        body = "(if (deref p) (deref (+ p (lit 1 int))) (lit 9 int))"
        assert _run(self._SETUP.format(c=0, body=body)).describe() == "value 9"

    def test_without_the_test_the_read_is_out_of_bounds(self):
        body = "(deref (+ p (lit 1 int)))"
        assert _run(self._SETUP.format(c=7, body=body)).describe() == "bounds"

    def test_strlen_returns_length(self):
        body = "(strlen p)"
        assert _run(self._SETUP.format(c=7, body=body)).describe() == "value 1"


# ---------------------------------------------------------------------------
# TestDriver
# ---------------------------------------------------------------------------


class TestDriver:
    def test_let_shadowing_restores_outer_binding(self):
        outcome = _run("(let x (lit 1 int) (let y (let x (lit 2 int) x) (+ x y)))")
        assert outcome.describe() == "value 3"

    def test_stuck_inside_unchecked_is_blamed_there(self):
        outcome = _run("(unchecked (deref (lit 5 (ptr u int))))")
        assert outcome.status is Status.STUCK
        assert outcome.stuck_mode.value == "u"

    def test_fuel_exhaustion(self):
        outcome = run_program(_load("strlen_widen.chkc"), 1)
        assert outcome.status is Status.OUT_OF_FUEL
        assert outcome.describe() == "fuel"
        assert len(outcome.trace) == 1

    def test_value_has_no_redex(self):
        assert decompose(Lit(1, INT)) is None

    def test_redex_under_unchecked_reports_mode(self):
        dec = decompose(parse_expr("(+ (lit 1 int) (unchecked (+ (lit 1 int) (lit 2 int))))"))
        assert dec.mode.value == "u"
        assert dec.redex == parse_expr("(+ (lit 1 int) (lit 2 int))")

    def test_stack_consistency(self):
        phi = {"n": Lit(3, INT)}
        assert stack_consistent({"n": INT}, {}, phi)
        assert not stack_consistent({"m": INT}, {}, phi)
