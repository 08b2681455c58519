"""Tests for bounds ordering, subtyping, joins and the typing rules."""

from __future__ import annotations

from pathlib import Path

import pytest

from corechkc.checker import (
    Pred,
    TypeChecker,
    bound_le,
    check_program,
    subtype,
    type_join,
    type_literal,
)
from corechkc.core import close_type, subst_type, type_size, wf_type
from corechkc.errors import TypeCheckError, TypeSizeError, WellFormednessError
from corechkc.models.state import Heap
from corechkc.models.syntax import (
    INT,
    ConstBound,
    Lit,
    Mode,
    PtrType,
    StructDef,
    StructType,
    VarBound,
    array_ptr,
)
from corechkc.parser import parse_expr, parse_program, parse_type

PROGRAMS_DIR = Path(__file__).parent.parent / "programs"


def _check(text: str):
    return check_program(parse_program(text))


def _main(body: str):
    return _check(f"(defs (main {body}))")


# ---------------------------------------------------------------------------
# TestBounds
# ---------------------------------------------------------------------------


class TestBounds:
    def test_constants(self):
        assert bound_le(ConstBound(1), ConstBound(2))
        assert not bound_le(ConstBound(3), ConstBound(2))

    def test_same_variable_with_offsets(self):
        assert bound_le(VarBound("x", 0), VarBound("x", 2))
        assert not bound_le(VarBound("x", 0), VarBound("y", 2))

    def test_zero_below_nonnegative_variable(self):
        assert bound_le(ConstBound(0), VarBound("x", 0), {"x": Pred.GE_ZERO})
        assert not bound_le(ConstBound(0), VarBound("x", 0))

    def test_stack_resolves_variables(self):
        phi = {"x": Lit(4, INT)}
        assert bound_le(VarBound("x", 0), ConstBound(4), phi=phi)


# ---------------------------------------------------------------------------
# TestSubtype
# ---------------------------------------------------------------------------


class TestSubtype:
    def test_null_terminated_to_narrower_plain_array(self):
        assert subtype(array_ptr(0, 5, nt=True), array_ptr(1, 3))

    def test_plain_never_becomes_null_terminated(self):
        assert not subtype(array_ptr(0, 3), array_ptr(0, 3, nt=True))

    def test_wider_target_rejected(self):
        assert not subtype(array_ptr(0, 2), array_ptr(0, 3))

    def test_singleton_and_array_of_one(self):
        single = PtrType(Mode.CHECKED, INT)
        assert subtype(single, array_ptr(0, 1))
        assert subtype(array_ptr(0, 2), single)

    def test_modes_must_agree(self):
        unchecked = PtrType(Mode.UNCHECKED, INT)
        assert not subtype(unchecked, PtrType(Mode.CHECKED, INT))

    def test_struct_with_int_head_is_an_int_pointer(self):
        structs = {"pair": StructDef("pair", (("a", INT), ("b", INT)))}
        src = PtrType(Mode.CHECKED, StructType("pair"))
        assert subtype(src, PtrType(Mode.CHECKED, INT), structs=structs)


# ---------------------------------------------------------------------------
# TestJoin
# ---------------------------------------------------------------------------


class TestJoin:
    def test_identical(self):
        assert type_join(INT, INT) == INT

    def test_array_pointers_meet_on_common_bounds(self):
        joined = type_join(array_ptr(0, 2, nt=True), array_ptr(0, 1, nt=True))
        assert joined == array_ptr(0, 1, nt=True)

    def test_mixed_kinds_become_plain(self):
        assert type_join(array_ptr(0, 2, nt=True), array_ptr(0, 2)) == array_ptr(0, 2)

    def test_int_and_pointer_have_no_join(self):
        assert type_join(INT, PtrType(Mode.CHECKED, INT)) is None


# ---------------------------------------------------------------------------
# TestRelationProperties
# ---------------------------------------------------------------------------

CELL = StructDef("cell", (("val", INT), ("next", array_ptr(0, 0, nt=True))))
STRUCTS = {"cell": CELL}
NONNEG_N = {"n": Pred.GE_ZERO}
SAMPLE_TYPES = [
    INT,
    PtrType(Mode.CHECKED, INT),
    PtrType(Mode.UNCHECKED, INT),
    PtrType(Mode.CHECKED, StructType("cell")),
    array_ptr(0, 0),
    array_ptr(0, 1),
    array_ptr(0, 2),
    array_ptr(1, 2),
    array_ptr(0, 0, nt=True),
    array_ptr(0, 1, nt=True),
    array_ptr(0, 2, nt=True),
    array_ptr(0, VarBound("n", 0)),
    array_ptr(0, VarBound("n", 0), nt=True),
    array_ptr(0, VarBound("n", 1), nt=True),
]


def _sub(t1, t2, phi=None) -> bool:
    return subtype(t1, t2, NONNEG_N, phi, STRUCTS)


class TestRelationProperties:
    def test_subtype_is_reflexive(self):
        for ty in SAMPLE_TYPES:
            assert _sub(ty, ty), ty

    def test_subtype_is_transitive(self):
        for a in SAMPLE_TYPES:
            for b in SAMPLE_TYPES:
                if not _sub(a, b):
                    continue
                for c in SAMPLE_TYPES:
                    if _sub(b, c):
                        assert _sub(a, c), (a, b, c)

    @pytest.mark.parametrize("n", [0, 1, 3])
    def test_subtype_survives_a_consistent_stack(self, n):
        phi = {"n": Lit(n, INT)}
        for a in SAMPLE_TYPES:
            for b in SAMPLE_TYPES:
                if _sub(a, b):
                    assert _sub(a, b, phi), (a, b, n)

    def test_well_formedness_survives_a_larger_environment(self):
        env = {"n": INT}
        larger = {**env, "m": INT, "q": PtrType(Mode.CHECKED, INT)}
        for ty in SAMPLE_TYPES:
            assert wf_type(env, ty, STRUCTS), ty
            assert wf_type(larger, ty, STRUCTS), ty

    @pytest.mark.parametrize("k", [0, 2, 7])
    def test_constant_substitution_is_idempotent(self, k):
        mapping = {"n": ConstBound(k)}
        for ty in SAMPLE_TYPES:
            once = subst_type(ty, mapping)
            assert subst_type(once, mapping) == once

    def test_constant_substitution_closes_the_type(self):
        closed = subst_type(array_ptr(0, VarBound("n", 1), nt=True), {"n": ConstBound(4)})
        assert closed == array_ptr(0, 5, nt=True)


# ---------------------------------------------------------------------------
# TestSizesAndWellFormedness
# ---------------------------------------------------------------------------


class TestSizesAndWellFormedness:
    def test_null_terminated_array_has_terminator_cell(self):
        ty = parse_type("(ntarray 0 3 int)")
        assert type_size(ty, {}) == 4

    def test_dependent_size_needs_the_stack(self):
        ty = parse_type("(array 0 n int)")
        assert type_size(ty, {}, {"n": Lit(10, INT)}) == 10
        with pytest.raises(TypeSizeError):
            type_size(ty, {})

    def test_close_type_substitutes_stack_values(self):
        ty = parse_type("(ptr c (ntarray 0 x int))")
        assert close_type(ty, {"x": Lit(10, INT)}) == array_ptr(0, 10, nt=True)

    def test_bound_variable_must_be_an_int(self):
        ty = parse_type("(array 0 x int)")
        assert wf_type({"x": INT}, ty, {})
        assert not wf_type({}, ty, {})
        assert not wf_type({"x": PtrType(Mode.CHECKED, INT)}, ty, {})


# ---------------------------------------------------------------------------
# TestHeapLiterals
# ---------------------------------------------------------------------------


class TestHeapLiterals:
    def test_null_is_any_pointer(self):
        assert type_literal(None, frozenset(), 0, PtrType(Mode.CHECKED, INT), {})

    def test_checked_pointer_needs_its_cells(self):
        heap = Heap({1: Lit(0, INT), 2: Lit(0, INT)}, 3)
        assert type_literal(heap, frozenset(), 1, array_ptr(0, 2), {})
        assert not type_literal(heap, frozenset(), 2, array_ptr(0, 2), {})

    def test_unchecked_pointer_needs_nothing(self):
        assert type_literal(Heap(), frozenset(), 7, PtrType(Mode.UNCHECKED, INT), {})


# ---------------------------------------------------------------------------
# TestRules
# ---------------------------------------------------------------------------


class TestRules:
    def test_pointer_arithmetic_only_under_deref_or_assign(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(let p (malloc (array 0 2 int)) (+ p (lit 1 int)))")
        assert info.value.rule == "T-Add"

    def test_indexed_read(self):
        ty = _main("(let p (malloc (array 0 2 int)) (deref (+ p (lit 1 int))))")
        assert ty == INT

    def test_checked_cast_from_int_rejected(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(cast (ptr c int) (lit 5 int))")
        assert info.value.rule == "T-Cast"

    def test_unchecked_region_may_forge_checked_pointers(self):
        assert _main("(unchecked (cast (ptr c int) (lit 5 int)))") == PtrType(Mode.CHECKED, INT)

    def test_checked_code_cannot_use_unchecked_pointers(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(deref (lit 0 (ptr u int)))")
        assert info.value.rule == "T-Def"

    def test_cast_to_wider_array_rejected(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(cast (ptr c (array 0 4 int)) (malloc (array 0 2 int)))")
        assert info.value.rule == "T-CastCheckedPtr"

    def test_strlen_length_may_not_escape(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(let s (malloc (ntarray 0 1 int)) (let x (strlen s) s))")
        assert info.value.rule == "T-LetStr"

    def test_strlen_needs_null_terminated_array(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(let s (malloc (array 0 1 int)) (strlen s))")
        assert info.value.rule == "T-Str"

    def test_if_on_first_character_widens_then_branch(self):
        target = "(ptr c (ntarray 0 1 int))"
        ty = _main(
            "(let p (cast (ptr c (ntarray 0 0 int)) (malloc (ntarray 0 1 int)))"
            f" (if (deref p) (cast {target} p) (cast {target} (malloc (ntarray 0 1 int)))))"
        )
        assert ty == array_ptr(0, 1, nt=True)

    def test_else_branch_is_not_widened(self):
        target = "(ptr c (ntarray 0 1 int))"
        with pytest.raises(TypeCheckError):
            _main(
                "(let p (cast (ptr c (ntarray 0 0 int)) (malloc (ntarray 0 1 int)))"
                f" (if (deref p) (cast {target} (malloc (ntarray 0 1 int))) (cast {target} p)))"
            )

    def test_let_substitutes_bound_into_result_type(self):
        ty = _main("(let n (lit 3 int) (malloc (array 0 n int)))")
        assert ty == array_ptr(0, 3)

    def test_dyncast_to_null_terminated_needs_null_terminated_source(self):
        with pytest.raises(TypeCheckError) as info:
            _main("(dyncast (ptr c (ntarray 0 1 int)) (malloc (array 0 2 int)))")
        assert info.value.rule == "T-DynCast"

    def test_field_address(self):
        ty = _check(
            "(defs (struct pair (a int) (b (ptr c int)))"
            " (main (fieldaddr (malloc (struct pair)) b)))"
        )
        assert ty == PtrType(Mode.CHECKED, PtrType(Mode.CHECKED, INT))

    def test_rules_are_counted(self):
        checker = TypeChecker()
        checker.type_of({}, {}, Mode.CHECKED, parse_expr("(+ (lit 1 int) (lit 2 int))"))
        assert checker.coverage["T-Add"] == 1
        assert checker.coverage["T-Const"] == 2


# ---------------------------------------------------------------------------
# TestFunctions
# ---------------------------------------------------------------------------


class TestFunctions:
    _DEF = "(fun first ((n int) (p (ptr c (array 0 n int)))) int (deref p))"

    def test_dependent_call_substitutes_actual(self):
        ty = _check(f"(defs {self._DEF} (main (call first (lit 2 int) (malloc (array 0 2 int)))))")
        assert ty == INT

    def test_dependent_actual_must_be_a_bound(self):
        with pytest.raises(TypeCheckError, match="must be a bound"):
            _check(
                f"(defs {self._DEF}"
                " (main (call first (+ (lit 1 int) (lit 1 int)) (malloc (array 0 2 int)))))"
            )

    def test_argument_too_short(self):
        with pytest.raises(TypeCheckError) as info:
            _check(f"(defs {self._DEF} (main (call first (lit 3 int) (malloc (array 0 2 int)))))")
        assert info.value.rule == "T-Fun"

    def test_body_must_match_return_type(self):
        with pytest.raises(WellFormednessError):
            _check("(defs (fun f ((x int)) (ptr c int) x) (main (lit 0 int)))")

    def test_parameter_bound_must_come_earlier(self):
        with pytest.raises(WellFormednessError):
            _check(
                "(defs (fun f ((p (ptr c (array 0 n int))) (n int)) int n)"
                " (main (lit 0 int)))"
            )


# ---------------------------------------------------------------------------
# TestBundledPrograms
# ---------------------------------------------------------------------------


class TestBundledPrograms:
    @pytest.mark.parametrize(
        "name, expected",
        [
            ("null_deref.chkc", INT),
            ("strlen_widen.chkc", INT),
            ("shadow_persist.chkc", INT),
            ("deref_array.chkc", INT),
            ("strcat.chkc", INT),
        ],
    )
    def test_main_types(self, name, expected):
        program = parse_program((PROGRAMS_DIR / name).read_text(encoding="utf-8"))
        assert check_program(program) == expected
