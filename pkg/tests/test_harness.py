"""Tests for the property checks, the shrinker and the sharded runner."""

from __future__ import annotations

from pathlib import Path

import pytest

from corechkc.compiler import Compiler
from corechkc.genprop.harness import (
    PASS,
    PROPERTY_CHECKS,
    _shards,
    check_seed,
    flatten,
    run_properties,
    run_shard,
)
from corechkc.genprop.shrink import shrink, subterm_types
from corechkc.models.corec import HOLE, Binop, BoundsFail, Op
from corechkc.models.report import GenConfig, GenMode
from corechkc.models.syntax import INT, FunDef, Lit, Mode, Program, PtrType, array_view
from corechkc.parser import parse_expr, parse_program
from corechkc.semantics import Halt, run_program

PROGRAMS_DIR = Path(__file__).parent.parent / "programs"
BUNDLED = sorted(p.name for p in PROGRAMS_DIR.glob("*.chkc"))


def _load(name: str) -> Program:
    return parse_program((PROGRAMS_DIR / name).read_text(encoding="utf-8"))


def _cfg(**overrides) -> GenConfig:
    return GenConfig(**{"depth": 4, "count": 12, "workers": 1, **overrides})


# ---------------------------------------------------------------------------
# TestPropertiesOnBundledPrograms
# ---------------------------------------------------------------------------


class TestPropertiesOnBundledPrograms:
    @pytest.mark.parametrize("name", BUNDLED)
    @pytest.mark.parametrize("prop", ["progress", "blame", "preservation", "simulation"])
    def test_property_holds(self, name, prop):
        program = _load(name)
        outcome = run_program(program)
        assert PROPERTY_CHECKS[prop](program, outcome, GenConfig()).result is True

    def test_error_kind_survives_compilation(self):
        program = _load("null_deref.chkc")
        outcome = run_program(program)
        assert PROPERTY_CHECKS["error-kind"](program, outcome, GenConfig()).result is True

    def test_error_kind_inconclusive_without_error(self):
        program = _load("deref_array.chkc")
        outcome = run_program(program)
        assert PROPERTY_CHECKS["error-kind"](program, outcome, GenConfig()).result is None

    def test_progress_inconclusive_when_out_of_fuel(self):
        program = _load("strcat.chkc")
        outcome = run_program(program, 2)
        assert PROPERTY_CHECKS["progress"](program, outcome, GenConfig()).result is None

    def test_stuck_checked_code_breaks_progress_and_blame(self):
        program = Program(main=parse_expr("(deref (lit 5 (ptr c int)))"))
        outcome = run_program(program)
        assert PROPERTY_CHECKS["progress"](program, outcome, GenConfig()).result is False
        assert PROPERTY_CHECKS["blame"](program, outcome, GenConfig()).result is False

    def test_stuck_unchecked_code_is_blamed(self):
        program = Program(main=parse_expr("(unchecked (deref (lit 5 (ptr u int))))"))
        outcome = run_program(program)
        assert PROPERTY_CHECKS["blame"](program, outcome, GenConfig()).result is True


# ---------------------------------------------------------------------------
# TestShrink
# ---------------------------------------------------------------------------


def _halts_null(program: Program) -> bool:
    return run_program(program).result is Halt.NULL


class TestShrink:
    def test_reaches_the_failing_core(self):
        program = Program(
            main=parse_expr(
                "(let a (lit 3 int) (let b (+ a (lit 4 int)) (deref (lit 0 (ptr c int)))))"
            )
        )
        smaller = shrink(program, _halts_null)
        assert smaller.main == parse_expr("(deref (lit 0 (ptr c int)))")

    def test_drops_unused_functions(self):
        unused = FunDef("unused", (("x", INT),), INT, parse_expr("x"))
        program = Program({"unused": unused}, {}, parse_expr("(deref (lit 0 (ptr c int)))"))
        assert shrink(program, _halts_null).funs == {}

    def test_passing_program_is_left_alone(self):
        program = Program(main=parse_expr("(+ (lit 1 int) (lit 2 int))"))
        assert shrink(program, _halts_null) == program

    def test_literals_move_toward_zero(self):
        program = Program(main=parse_expr("(+ (lit 9 int) (lit 9 int))"))
        smaller = shrink(program, lambda p: True)
        assert smaller.main == Lit(0, INT)

    def test_subterm_becomes_a_zero_of_its_own_type(self):
        program = Program(main=parse_expr("(deref (cast (ptr c int) (malloc (array 0 2 int))))"))
        smaller = shrink(program, _halts_null)
        assert smaller.main == parse_expr("(deref (lit 0 (ptr c int)))")

    def test_subterm_types_follow_the_checker(self):
        program = Program(main=parse_expr("(deref (malloc int))"))
        main = program.main
        types = subterm_types(program)
        assert types[id(main)] == INT
        assert types[id(main.expr)] == PtrType(Mode.CHECKED, INT)

    def test_ill_typed_program_has_no_subterm_types(self):
        assert subterm_types(Program(main=parse_expr("(deref (lit 1 int))"))) == {}


# ---------------------------------------------------------------------------
# TestRunner
# ---------------------------------------------------------------------------


class TestRunner:
    def test_every_generated_term_passes_the_generator_property(self):
        report = run_shard(_cfg(), list(range(12)))
        assert report.terms == 12
        assert report.tallies["generator"].passed == 12
        assert report.tallies["generator"].failed == 0

    def test_runs_are_deterministic(self):
        cfg = _cfg(seed=5, count=8)
        assert run_properties(cfg).to_text() == run_properties(cfg).to_text()

    def test_near_ill_typed_mode_never_accepts_a_relaxed_rule(self):
        report = run_properties(_cfg(mode=GenMode.NEAR_ILL_TYPED, count=30))
        tally = report.tallies["ill-typed-rejection"]
        assert tally.failed == 0
        assert tally.passed + tally.inconclusive == 30
        assert len(report.consistency_flags) == tally.inconclusive

    def test_check_seed_replays_one_term(self):
        assert check_seed(_cfg(), 3).terms == 1

    def test_shards_are_contiguous_and_cover_every_seed(self):
        cfg = _cfg(seed=10, count=500, workers=4)
        shards = _shards(cfg)
        assert len(shards) == 4
        assert [s for shard in shards for s in shard] == list(range(10, 510))

    def test_small_runs_use_one_shard(self):
        assert len(_shards(_cfg(count=20, workers=8))) == 1

    def test_empty_run(self):
        report = run_properties(_cfg(count=0))
        assert report.terms == 0
        assert not report.failed

    def test_flatten_is_single_line(self):
        text = flatten(_load("deref_array.chkc"))
        assert "\n" not in text
        assert text.startswith("(defs (fun deref_array")


# ---------------------------------------------------------------------------
# TestSimulation
# ---------------------------------------------------------------------------


class TestSimulation:
    def test_halt_after_a_let_simulates(self):
        program = parse_program(
            "(defs (main (let v0 (malloc (ntarray 0 1 int))"
            " (deref (lit 0 (ptr c (array 0 3 int)))))))"
        )
        outcome = run_program(program)
        assert outcome.result is Halt.NULL
        assert PROPERTY_CHECKS["simulation"](program, outcome, GenConfig()) == PASS

    def test_value_after_nested_lets_simulates(self):
        program = Program(
            main=parse_expr(
                "(+ (let x (lit 1 int) x) (let x (lit 2 int) (let y (malloc int) x)))"
            )
        )
        outcome = run_program(program)
        assert outcome.describe() == "value 3"
        assert PROPERTY_CHECKS["simulation"](program, outcome, GenConfig()) == PASS


# ---------------------------------------------------------------------------
# TestMutatedCompilers
# ---------------------------------------------------------------------------


WIDEN_PROGRAM = (
    "(let s (malloc (ntarray 0 1 int))"
    " (let w (assign s (lit 5 int))"
    " (let t (cast (ptr c (ntarray 0 0 int)) s)"
    " (if (deref t) (deref (+ t (lit 1 int))) (lit 7 int)))))"
)
WRITE_AT_BOUND_PROGRAM = (
    "(let p (malloc (ntarray 0 2 int)) (assign (+ p (lit 2 int)) (lit 1 int)))"
)
NULL_PROGRAM = "(deref (lit 0 (ptr c int)))"


def _no_deref_widening(self, rho, x, ty):
    return HOLE


def _lenient_write_check(self, rho, key, ty, index):
    view = array_view(ty)
    if view is None or view[0] is Mode.UNCHECKED:
        return HOLE
    pre, lo, hi = self._bounds_atoms(rho, key, ty)
    lower = self._require(Binop(lo, Op.LE, index), BoundsFail())
    upper = self._require(Binop(index, Op.LE, hi), BoundsFail())
    return pre.then(lower, upper)


def _no_null_check(self, a, mode):
    return HOLE


MUTANTS = {
    "widen_deref": _no_deref_widening,
    "check_bounds_w": _lenient_write_check,
    "check_null": _no_null_check,
}


def _verdict(prop: str, body: str) -> bool | None:
    program = Program(main=parse_expr(body))
    return PROPERTY_CHECKS[prop](program, run_program(program), GenConfig()).result


class TestMutatedCompilers:
    def test_missing_deref_widening_breaks_simulation(self, monkeypatch):
        assert _verdict("simulation", WIDEN_PROGRAM) is True
        monkeypatch.setattr(Compiler, "widen_deref", _no_deref_widening)
        assert _verdict("simulation", WIDEN_PROGRAM) is False

    def test_lenient_write_check_changes_the_error(self, monkeypatch):
        assert _verdict("error-kind", WRITE_AT_BOUND_PROGRAM) is True
        monkeypatch.setattr(Compiler, "check_bounds_w", _lenient_write_check)
        assert _verdict("error-kind", WRITE_AT_BOUND_PROGRAM) is False

    def test_missing_null_check_changes_the_error(self, monkeypatch):
        assert _verdict("error-kind", NULL_PROGRAM) is True
        monkeypatch.setattr(Compiler, "check_null", _no_null_check)
        assert _verdict("error-kind", NULL_PROGRAM) is False

    @pytest.mark.parametrize("method", sorted(MUTANTS))
    def test_generated_programs_catch_the_mutant(self, monkeypatch, method):
        monkeypatch.setattr(Compiler, method, MUTANTS[method])
        monkeypatch.setattr("corechkc.genprop.harness.shrink", lambda program, fails: program)
        report = run_shard(_cfg(depth=5, unchecked_rate=0.0), list(range(150)))
        caught = report.tallies["simulation"].failed + report.tallies["error-kind"].failed
        assert caught > 0


# ---------------------------------------------------------------------------
# TestAtScale
# ---------------------------------------------------------------------------


class TestAtScale:
    def test_moderate_run_has_no_failures(self):
        report = run_properties(_cfg(seed=1000, count=150, depth=5))
        assert report.terms == 150
        assert not report.failed, report.to_text()
        assert report.if_nt_taken > 0

    def test_blame_holds_when_every_term_gets_unchecked_code(self):
        report = run_properties(_cfg(seed=2000, count=100, depth=5, unchecked_rate=1.0))
        tally = report.tallies["blame"]
        assert tally.failed == 0
        assert tally.passed > 0
        assert report.tallies["generator"].failed == 0
