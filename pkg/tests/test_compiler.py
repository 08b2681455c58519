"""Tests for check insertion, the CoreC machine and erasure."""

from __future__ import annotations

from pathlib import Path

import pytest

from corechkc.compiler import compile_config, compile_expr, compile_program
from corechkc.corec_eval import erase, eval_corec, step_corec
from corechkc.errors import CompileError
from corechkc.models.corec import (
    HOLE,
    CAssign,
    CLet,
    CMalloc,
    CRet,
    Name,
    Num,
    is_anf,
    let,
)
from corechkc.models.state import CHeap, Heap
from corechkc.models.syntax import INT, Lit, Program, array_ptr
from corechkc.parser import parse_expr, parse_program
from corechkc.printer import print_corec
from corechkc.semantics import Halt, Status, run_program

PROGRAMS_DIR = Path(__file__).parent.parent / "programs"
BUNDLED = sorted(p.name for p in PROGRAMS_DIR.glob("*.chkc"))


def _load(name: str) -> Program:
    return parse_program((PROGRAMS_DIR / name).read_text(encoding="utf-8"))


def _compiled_text(body: str) -> str:
    program = compile_program(Program(main=parse_expr(body)))
    return print_corec(program.main)


def _run_compiled(program: Program):
    compiled = compile_program(program)
    return eval_corec({}, CHeap(), compiled.main, compiled.funs, 500000)


# ---------------------------------------------------------------------------
# TestCheckInsertion
# ---------------------------------------------------------------------------


class TestCheckInsertion:
    def test_checked_deref_gets_null_check(self):
        assert "(nullfail)" in _compiled_text("(deref (lit 0 (ptr c int)))")

    def test_unchecked_deref_has_no_checks(self):
        text = _compiled_text("(unchecked (deref (lit 5 (ptr u int))))")
        assert "nullfail" not in text
        assert "boundsfail" not in text

    def test_indexed_read_gets_bounds_checks(self):
        text = _compiled_text("(let p (malloc (array 0 2 int)) (deref (+ p (lit 1 int))))")
        assert text.count("(boundsfail)") == 2

    def test_null_terminated_arrays_get_shadow_bounds(self):
        text = _compiled_text("(let p (malloc (ntarray 0 2 int)) (strlen p))")
        assert "p$" in text
        assert "_hi$" in text
        assert "stackassign" in text

    def test_generated_names_are_reserved(self):
        text = _compiled_text("(let x (lit 1 int) (+ x (lit 2 int)))")
        assert "(let x$" in text

    @pytest.mark.parametrize("name", BUNDLED)
    def test_output_is_a_normal_form(self, name):
        compiled = compile_program(_load(name))
        assert is_anf(compiled.main)
        assert all(is_anf(f.body) for f in compiled.funs.values())

    def test_compile_expr_under_environment(self):
        env = {"p": array_ptr(0, 3)}
        c = compile_expr(env, {}, parse_expr("(deref (+ p (lit 1 int)))"))
        assert c.type == INT
        assert not c.closure.is_hole

    def test_closure_plugs_lets_outermost_first(self):
        closure = let("a", Num(1)).then(let("b", Num(2)))
        assert closure.plug(Name("b")) == CLet("a", Num(1), CLet("b", Num(2), Name("b")))
        assert HOLE.plug(Num(3)) == Num(3)

    def test_branches_join_under_strlen_facts(self):
        body = (
            "(let p (malloc (ntarray 0 2 int)) (let n (strlen p)"
            " (if (lit 1 int) p (cast (ptr c (ntarray 0 0 int)) p))))"
        )
        c = compile_expr({}, {}, parse_expr(body))
        assert c.type == array_ptr(0, 0, nt=True)

    def test_branches_that_do_not_join_are_rejected(self):
        body = "(if (lit 1 int) (lit 0 int) (lit 0 (ptr c int)))"
        with pytest.raises(CompileError, match="do not join"):
            compile_expr({}, {}, parse_expr(body))


# ---------------------------------------------------------------------------
# TestAgreement
# ---------------------------------------------------------------------------


class TestAgreement:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_compiled_program_agrees_with_source(self, name):
        program = _load(name)
        assert _run_compiled(program).describe() == run_program(program).describe()

    @pytest.mark.parametrize(
        "body",
        [
            "(let p (malloc (array 0 2 int)) (deref (+ p (lit 2 int))))",
            "(let p (malloc (ntarray 0 2 int)) (deref (+ p (lit 2 int))))",
            "(let p (malloc (ntarray 0 2 int)) (assign (+ p (lit 2 int)) (lit 1 int)))",
            "(let n (lit 0 int) (malloc (array 0 n int)))",
            "(dyncast (ptr c (array 0 3 int)) (malloc (array 0 2 int)))",
        ],
    )
    def test_halting_errors_survive_compilation(self, body):
        program = Program(main=parse_expr(body))
        assert _run_compiled(program).describe() == run_program(program).describe()

    def test_strcat_without_room_halts_on_both_sides(self):
        text = (PROGRAMS_DIR / "strcat.chkc").read_text(encoding="utf-8")
        text = text.replace("(malloc (ntarray 0 5 int))", "(malloc (ntarray 0 3 int))")
        text = text.replace("(lit 5 int) d", "(lit 3 int) d")
        program = parse_program(text)
        assert run_program(program).describe() == "bounds"
        assert _run_compiled(program).describe() == "bounds"

    def test_every_intermediate_configuration_reaches_the_same_value(self):
        program = _load("strlen_widen.chkc")
        outcome = run_program(program)
        compiled = compile_program(program)
        for step in outcome.trace:
            if isinstance(step.expr, Halt):
                continue
            ce = compile_config(step.phi, step.expr, program.funs, program.structs)
            phi, heap = erase(step.phi, step.heap)
            image = eval_corec(phi, heap, ce, compiled.funs, 500000)
            assert image.describe() == "value 105"


# ---------------------------------------------------------------------------
# TestCoreCMachine
# ---------------------------------------------------------------------------


class TestCoreCMachine:
    def test_malloc_then_write(self):
        e = CLet("a", CMalloc(Num(2)), CAssign(Name("a"), Num(7)))
        outcome = eval_corec({}, CHeap(), e, {})
        assert outcome.status is Status.FINISHED
        assert outcome.result == 7
        assert outcome.heap.cells == {1: 7, 2: 0}
        assert outcome.heap.cursor == 3
        assert outcome.phi == {}

    def test_ret_restores_saved_value(self):
        outcome = eval_corec({"x": 4}, CHeap(), CRet("x", 1, Name("x")), {})
        assert outcome.result == 4
        assert outcome.phi == {"x": 1}

    def test_unbound_name_is_stuck(self):
        outcome = eval_corec({}, CHeap(), Name("missing"), {})
        assert outcome.status is Status.STUCK

    def test_value_does_not_step(self):
        assert step_corec({}, CHeap(), Num(1), {}).reason == "no step from a value"

    def test_inputs_are_not_mutated(self):
        heap = CHeap({1: 0}, 2)
        eval_corec({}, heap, CAssign(Num(1), Num(9)), {})
        assert heap.cells == {1: 0}

    def test_erase_drops_annotations(self):
        phi = {"p": Lit(1, array_ptr(0, 1))}
        heap = Heap({1: Lit(5, INT)}, 2)
        cphi, cheap = erase(phi, heap)
        assert cphi == {"p": 1}
        assert cheap.cells == {1: 5}
        assert cheap.cursor == 2
