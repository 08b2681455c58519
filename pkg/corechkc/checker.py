"""Typing: bound inequality, subtyping, joins, heap-literal typing and the expression rules.

Every rule failure raises :class:`TypeCheckError` carrying the rule name, so callers
and tests can assert on *which* premise failed. Source programs are checked with an
empty heap and no stack snapshot; the preservation oracle supplies both.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum

from corechkc.core import (
    as_bound,
    cell_layout,
    check_structs,
    stack_bounds,
    subst_bound,
    subst_type,
    type_free_vars,
    wf_type,
)
from corechkc.errors import TypeCheckError, TypeSizeError, WellFormednessError
from corechkc.models.state import Heap, Stack
from corechkc.models.syntax import (
    INT,
    Add,
    ArrayType,
    Assign,
    Bound,
    BoundPair,
    Call,
    Cast,
    ConstBound,
    Deref,
    DynCast,
    Expr,
    FieldAddr,
    FunDef,
    FunEnv,
    If,
    IntType,
    Let,
    Lit,
    Malloc,
    Mode,
    Program,
    PtrType,
    Ret,
    Strlen,
    StructEnv,
    StructType,
    Type,
    Unchecked,
    Var,
    VarBound,
    array_view,
)
from corechkc.printer import print_type

logger = logging.getLogger(__name__)


class Pred(str, Enum):
    TOP = "top"
    GE_ZERO = "ge0"


TypeEnv = Mapping[str, Type]
PredEnv = Mapping[str, Pred]
Snapshot = Mapping[str, Bound]


# ---------------------------------------------------------------------------
# Bounds and subtyping
# ---------------------------------------------------------------------------


def _bound_le(b1: Bound, b2: Bound, theta: PredEnv, snap: Snapshot) -> bool:
    b1 = subst_bound(b1, snap)
    b2 = subst_bound(b2, snap)
    match b1, b2:
        case ConstBound(n), ConstBound(m):
            return n <= m
        case VarBound(x, n), VarBound(y, m):
            return x == y and n <= m
        case ConstBound(n), VarBound(x, k):
            return theta.get(x) is Pred.GE_ZERO and n <= k
    return False


def bound_le(
    b1: Bound, b2: Bound, theta: PredEnv | None = None, phi: Stack | None = None
) -> bool:
    return _bound_le(b1, b2, theta or {}, stack_bounds(phi))


def _same_type(t1: Type, t2: Type, snap: Snapshot) -> bool:
    return t1 == t2 or subst_type(t1, snap) == subst_type(t2, snap)


def _subtype(t1: Type, t2: Type, theta: PredEnv, snap: Snapshot, structs: StructEnv) -> bool:
    if _same_type(t1, t2, snap):
        return True
    if not (isinstance(t1, PtrType) and isinstance(t2, PtrType)) or t1.mode != t2.mode:
        return False
    src, dst = t1.pointee, t2.pointee

    def le(a: Bound, b: Bound) -> bool:
        return _bound_le(a, b, theta, snap)

    zero, one = ConstBound(0), ConstBound(1)
    if isinstance(src, ArrayType) and isinstance(dst, ArrayType):
        if not _same_type(src.elem, dst.elem, snap):
            return False
        if dst.null_terminated and not src.null_terminated:
            return False
        return le(src.bounds.lo, dst.bounds.lo) and le(dst.bounds.hi, src.bounds.hi)
    if isinstance(src, ArrayType):
        # array to singleton
        return (
            not isinstance(dst, (ArrayType, StructType))
            and _same_type(src.elem, dst, snap)
            and le(src.bounds.lo, zero)
            and le(one, src.bounds.hi)
        )
    if isinstance(src, StructType):
        sdef = structs.get(src.name)
        if sdef is None or not isinstance(sdef.fields[0][1], IntType):
            return False
        if isinstance(dst, IntType):
            return True
        return (
            isinstance(dst, ArrayType)
            and not dst.null_terminated
            and isinstance(dst.elem, IntType)
            and le(zero, dst.bounds.lo)
            and le(dst.bounds.hi, one)
        )
    if isinstance(dst, ArrayType):
        # singleton to plain array
        return (
            not dst.null_terminated
            and _same_type(src, dst.elem, snap)
            and le(zero, dst.bounds.lo)
            and le(dst.bounds.hi, one)
        )
    return False


def subtype(
    t1: Type,
    t2: Type,
    theta: PredEnv | None = None,
    phi: Stack | None = None,
    structs: StructEnv | None = None,
) -> bool:
    return _subtype(t1, t2, theta or {}, stack_bounds(phi), structs or {})


def _join(t1: Type, t2: Type, theta: PredEnv, snap: Snapshot) -> Type | None:
    if _same_type(t1, t2, snap):
        return t1
    v1, v2 = array_view(t1), array_view(t2)
    if v1 is None or v2 is None:
        return None
    (m1, a1), (m2, a2) = v1, v2
    if m1 != m2 or not _same_type(a1.elem, a2.elem, snap):
        return None

    def pick(b1: Bound, b2: Bound, larger: bool) -> Bound | None:
        if _bound_le(b1, b2, theta, snap):
            return b2 if larger else b1
        if _bound_le(b2, b1, theta, snap):
            return b1 if larger else b2
        return None

    lo = pick(a1.bounds.lo, a2.bounds.lo, larger=True)
    hi = pick(a1.bounds.hi, a2.bounds.hi, larger=False)
    if lo is None or hi is None:
        return None
    nt = a1.null_terminated and a2.null_terminated
    return PtrType(m1, ArrayType(BoundPair(lo, hi), a1.elem, nt))


def type_join(
    t1: Type,
    t2: Type,
    theta: PredEnv | None = None,
    phi: Stack | None = None,
) -> Type | None:
    """Least common supertype of two same-shaped types, or None when there is none."""
    return _join(t1, t2, theta or {}, stack_bounds(phi))


# ---------------------------------------------------------------------------
# Heap literals
# ---------------------------------------------------------------------------


def type_literal(
    heap: Heap | None,
    scope: frozenset[tuple[int, Type]],
    n: int,
    ty: Type,
    structs: StructEnv,
) -> bool:
    if not isinstance(ty, PtrType) or ty.mode is Mode.UNCHECKED or n == 0:
        return True
    if (n, ty) in scope:
        return True
    try:
        layout = cell_layout(ty.pointee, structs)
    except TypeSizeError:
        return False
    cells = heap.cells if heap is not None else {}
    inner = scope | {(n, ty)}
    for offset, cell_ty in layout:
        cell = cells.get(n + offset)
        if cell is None or not type_literal(heap, inner, cell.value, cell_ty, structs):
            return False
    return True


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _Ctx:
    env: TypeEnv
    theta: PredEnv
    mode: Mode
    snap: Snapshot

    def bind(self, name: str, ty: Type, known: int | None = None) -> _Ctx:
        env = {**self.env, name: ty}
        theta = {k: v for k, v in self.theta.items() if k != name}
        snap = {k: v for k, v in self.snap.items() if k != name}
        if known is not None:
            snap[name] = ConstBound(known)
        return _Ctx(env, theta, self.mode, snap)


class TypeChecker:
    """Checks expressions against fixed function/struct environments, heap and snapshot."""

    def __init__(
        self,
        funs: FunEnv | None = None,
        structs: StructEnv | None = None,
        heap: Heap | None = None,
        phi: Stack | None = None,
    ):
        self.funs = funs or {}
        self.structs = structs or {}
        self.heap = heap
        self.runtime = phi is not None
        self.snapshot = stack_bounds(phi)
        self.coverage: Counter[str] = Counter()

    def type_of(
        self, env: TypeEnv, theta: PredEnv, mode: Mode, e: Expr
    ) -> Type:
        return self._check(_Ctx(dict(env), dict(theta), mode, dict(self.snapshot)), e)

    def subtype_in(self, t1: Type, t2: Type, theta: PredEnv | None = None) -> bool:
        return _subtype(t1, t2, theta or {}, self.snapshot, self.structs)

    # -- helpers ------------------------------------------------------------

    def _fired(self, rule: str) -> None:
        self.coverage[rule] += 1

    def _require_mode(self, ctx: _Ctx, ptr_mode: Mode, rule: str) -> None:
        if not ctx.mode.at_most(ptr_mode):
            raise TypeCheckError(
                rule, f"m ≤ m' violated: {ctx.mode.value} context uses a {ptr_mode.value} pointer"
            )

    def _require_sub(self, ctx: _Ctx, actual: Type, expected: Type, rule: str) -> None:
        if not _subtype(actual, expected, ctx.theta, ctx.snap, self.structs):
            raise TypeCheckError(
                rule, f"{print_type(actual)} is not a subtype of {print_type(expected)}"
            )

    def _require_wf(self, ctx: _Ctx, ty: Type, rule: str) -> None:
        if not wf_type(ctx.env, ty, self.structs):
            raise TypeCheckError(rule, f"ill-formed type {print_type(ty)}")

    def _require_int(self, ty: Type, rule: str, what: str) -> None:
        if not isinstance(ty, IntType):
            raise TypeCheckError(rule, f"{what} must be int, got {print_type(ty)}")

    # -- rules --------------------------------------------------------------

    def _check(self, ctx: _Ctx, e: Expr) -> Type:
        match e:
            case Lit(n, ty):
                self._fired("T-Const")
                if type_free_vars(ty):
                    raise TypeCheckError("T-Const", f"literal type {print_type(ty)} is not closed")
                if not type_literal(self.heap, frozenset(), n, ty, self.structs):
                    raise TypeCheckError(
                        "T-Const", f"{n} is not a valid literal of type {print_type(ty)}"
                    )
                return ty
            case Var(name):
                self._fired("T-Var")
                if name not in ctx.env:
                    raise TypeCheckError("T-Var", f"unbound variable {name}")
                return ctx.env[name]
            case Malloc(ty):
                self._fired("T-Mac")
                self._require_wf(ctx, ty, "T-Mac")
                return PtrType(Mode.CHECKED, ty)
            case Let(name, bound, body):
                return self._let(ctx, name, bound, body)
            case Cast(ty, inner):
                return self._cast(ctx, ty, inner)
            case DynCast(ty, inner):
                return self._dyncast(ctx, ty, inner)
            case Call(name, args):
                return self._call(ctx, name, args)
            case Strlen(name):
                self._strlen_ptr(ctx, name)
                return INT
            case Add(left, right):
                self._fired("T-Add")
                self._require_int(self._check(ctx, left), "T-Add", "left operand")
                self._require_int(self._check(ctx, right), "T-Add", "right operand")
                return INT
            case Deref(inner):
                return self._deref(ctx, inner)
            case Assign(target, value):
                return self._assign(ctx, target, value)
            case Unchecked(inner):
                self._fired("T-Unchecked")
                return self._check(_Ctx(ctx.env, ctx.theta, Mode.UNCHECKED, ctx.snap), inner)
            case If(cond, then, orelse):
                return self._if(ctx, cond, then, orelse)
            case FieldAddr(inner, field_name):
                return self._field(ctx, inner, field_name)
            case Ret(name, _, body):
                self._fired("T-Ret")
                if name not in ctx.env:
                    raise TypeCheckError("T-Ret", f"unbound variable {name}")
                return self._check(ctx, body)
        raise TypeCheckError("T-Unknown", f"unsupported expression {e!r}")

    def _strlen_ptr(self, ctx: _Ctx, name: str) -> tuple[Mode, ArrayType]:
        self._fired("T-Str")
        if name not in ctx.env:
            raise TypeCheckError("T-Str", f"unbound variable {name}")
        view = array_view(ctx.env[name])
        if view is None or not view[1].null_terminated:
            raise TypeCheckError(
                "T-Str",
                f"strlen needs a null-terminated array pointer, got {print_type(ctx.env[name])}",
            )
        self._require_mode(ctx, view[0], "T-Str")
        return view

    def _let(self, ctx: _Ctx, name: str, bound: Expr, body: Expr) -> Type:
        if isinstance(bound, Strlen) and bound.name != name:
            view = array_view(ctx.env.get(bound.name, INT))
            if view is not None and view[0] is Mode.CHECKED and view[1].null_terminated:
                self._strlen_ptr(ctx, bound.name)
                self._fired("T-LetStr")
                arr = view[1]
                widened = PtrType(
                    Mode.CHECKED,
                    ArrayType(BoundPair(arr.bounds.lo, VarBound(name, 0)), arr.elem, True),
                )
                inner = ctx.bind(name, INT)
                inner = _Ctx(
                    {**inner.env, bound.name: widened},
                    {**inner.theta, name: Pred.GE_ZERO},
                    inner.mode,
                    inner.snap,
                )
                ty = self._check(inner, body)
                if name in type_free_vars(ty):
                    raise TypeCheckError(
                        "T-LetStr", f"{name} escapes in result type {print_type(ty)}"
                    )
                return ty
        self._fired("T-Let")
        bound_ty = self._check(ctx, bound)
        known = None
        if self.runtime and isinstance(bound, Lit) and isinstance(bound.type, IntType):
            known = bound.value
        body_ty = self._check(ctx.bind(name, bound_ty, known), body)
        if name in type_free_vars(body_ty):
            b = as_bound(bound)
            if b is None:
                raise TypeCheckError(
                    "T-Let", f"{name} appears in {print_type(body_ty)} but its value is not a bound"
                )
            return subst_type(body_ty, {name: b})
        return body_ty

    def _cast(self, ctx: _Ctx, ty: Type, inner: Expr) -> Type:
        actual = self._check(ctx, inner)
        self._require_wf(ctx, ty, "T-Cast")
        if ctx.mode is Mode.CHECKED and isinstance(ty, PtrType) and ty.mode is Mode.CHECKED:
            if not (isinstance(actual, PtrType) and actual.mode is Mode.CHECKED):
                raise TypeCheckError(
                    "T-Cast",
                    f"m = c forbids casting {print_type(actual)} to checked {print_type(ty)}",
                )
            self._fired("T-CastCheckedPtr")
            self._require_sub(ctx, actual, ty, "T-CastCheckedPtr")
            return ty
        self._fired("T-Cast")
        return ty

    def _dyncast(self, ctx: _Ctx, ty: Type, inner: Expr) -> Type:
        self._fired("T-DynCast")
        actual = self._check(ctx, inner)
        self._require_wf(ctx, ty, "T-DynCast")
        target, source = array_view(ty), array_view(actual)
        if target is None or source is None:
            raise TypeCheckError("T-DynCast", "dynamic casts relate array pointers only")
        (t_mode, t_arr), (s_mode, s_arr) = target, source
        if t_mode != s_mode or not _same_type(t_arr.elem, s_arr.elem, ctx.snap):
            raise TypeCheckError(
                "T-DynCast", f"cannot cast {print_type(actual)} to {print_type(ty)}"
            )
        if t_arr.null_terminated and not s_arr.null_terminated:
            raise TypeCheckError(
                "T-DynCast", "a null-terminated target needs a null-terminated source"
            )
        self._require_mode(ctx, t_mode, "T-DynCast")
        return ty

    def _call(self, ctx: _Ctx, name: str, args: tuple[Expr, ...]) -> Type:
        self._fired("T-Fun")
        fdef = self.funs.get(name)
        if fdef is None:
            raise TypeCheckError("T-Fun", f"unknown function {name}")
        if len(args) != len(fdef.params):
            raise TypeCheckError(
                "T-Fun", f"{name} expects {len(fdef.params)} argument(s), got {len(args)}"
            )
        arg_types = [self._check(ctx, a) for a in args]
        mapping = param_substitution(fdef, args)
        dependent = set().union(
            type_free_vars(fdef.ret), *(type_free_vars(t) for _, t in fdef.params)
        )
        for (pname, _), arg in zip(fdef.params, args):
            if pname in dependent and pname not in mapping:
                raise TypeCheckError(
                    "T-Fun", f"argument for dependent parameter {pname} must be a bound"
                )
        for (pname, pty), aty in zip(fdef.params, arg_types):
            self._require_sub(ctx, aty, subst_type(pty, mapping), "T-Fun")
        return subst_type(fdef.ret, mapping)

    def _deref(self, ctx: _Ctx, inner: Expr) -> Type:
        if isinstance(inner, Add):
            base = self._check(ctx, inner.left)
            view = array_view(base)
            if view is not None:
                self._fired("T-Ind")
                self._require_int(self._check(ctx, inner.right), "T-Ind", "index")
                self._require_mode(ctx, view[0], "T-Ind")
                return view[1].elem
            self._fired("T-Add")
            self._require_int(base, "T-Add", "left operand")
            self._require_int(self._check(ctx, inner.right), "T-Add", "right operand")
            raise TypeCheckError("T-Def", "cannot dereference int")
        ty = self._check(ctx, inner)
        if isinstance(ty, PtrType):
            if isinstance(ty.pointee, ArrayType):
                self._fired("T-DefArr")
                self._require_mode(ctx, ty.mode, "T-DefArr")
                return ty.pointee.elem
            if not isinstance(ty.pointee, StructType):
                self._fired("T-Def")
                self._require_mode(ctx, ty.mode, "T-Def")
                return ty.pointee
        raise TypeCheckError("T-Def", f"cannot dereference {print_type(ty)}")

    def _assign(self, ctx: _Ctx, target: Expr, value: Expr) -> Type:
        if isinstance(target, Add):
            base = self._check(ctx, target.left)
            view = array_view(base)
            if view is not None:
                self._fired("T-IndAssign")
                self._require_int(self._check(ctx, target.right), "T-IndAssign", "index")
                value_ty = self._check(ctx, value)
                self._require_sub(ctx, value_ty, view[1].elem, "T-IndAssign")
                self._require_mode(ctx, view[0], "T-IndAssign")
                return view[1].elem
            self._require_int(base, "T-Add", "left operand")
            self._require_int(self._check(ctx, target.right), "T-Add", "right operand")
            raise TypeCheckError("T-Assign", "cannot assign through int")
        ty = self._check(ctx, target)
        value_ty = self._check(ctx, value)
        if isinstance(ty, PtrType):
            if isinstance(ty.pointee, ArrayType):
                self._fired("T-AssignArr")
                self._require_sub(ctx, value_ty, ty.pointee.elem, "T-AssignArr")
                self._require_mode(ctx, ty.mode, "T-AssignArr")
                return ty.pointee.elem
            if not isinstance(ty.pointee, StructType):
                self._fired("T-Assign")
                self._require_sub(ctx, value_ty, ty.pointee, "T-Assign")
                self._require_mode(ctx, ty.mode, "T-Assign")
                return ty.pointee
        raise TypeCheckError("T-Assign", f"cannot assign through {print_type(ty)}")

    def _if(self, ctx: _Ctx, cond: Expr, then: Expr, orelse: Expr) -> Type:
        rule = "T-If"
        then_ctx = ctx
        if isinstance(cond, Deref) and isinstance(cond.expr, Var):
            name = cond.expr.name
            view = array_view(ctx.env.get(name, INT))
            if (
                view is not None
                and view[0] is Mode.CHECKED
                and view[1].null_terminated
                and view[1].bounds.hi == ConstBound(0)
            ):
                rule = "T-IfNT"
                arr = view[1]
                widened = PtrType(
                    Mode.CHECKED,
                    ArrayType(BoundPair(arr.bounds.lo, ConstBound(1)), arr.elem, True),
                )
                then_ctx = _Ctx({**ctx.env, name: widened}, ctx.theta, ctx.mode, ctx.snap)
        self._fired(rule)
        self._check(ctx, cond)
        then_ty = self._check(then_ctx, then)
        else_ty = self._check(ctx, orelse)
        joined = _join(then_ty, else_ty, ctx.theta, ctx.snap)
        if joined is None:
            raise TypeCheckError(
                rule, f"branches {print_type(then_ty)} and {print_type(else_ty)} have no join"
            )
        return joined

    def _field(self, ctx: _Ctx, inner: Expr, field_name: str) -> Type:
        self._fired("T-Struct")
        ty = self._check(ctx, inner)
        if not (isinstance(ty, PtrType) and isinstance(ty.pointee, StructType)):
            raise TypeCheckError("T-Struct", f"field access on {print_type(ty)}")
        self._require_mode(ctx, ty.mode, "T-Struct")
        sdef = self.structs.get(ty.pointee.name)
        field_ty = sdef.field_type(field_name) if sdef else None
        if field_ty is None:
            raise TypeCheckError("T-Struct", f"struct {ty.pointee.name} has no field {field_name}")
        return PtrType(ty.mode, field_ty)


def param_substitution(fdef: FunDef, args: tuple[Expr, ...]) -> dict[str, Bound]:
    """Bounds for the integer parameters whose actuals are syntactic bounds."""
    mapping: dict[str, Bound] = {}
    for (pname, pty), arg in zip(fdef.params, args):
        if isinstance(pty, IntType):
            b = as_bound(arg)
            if b is not None:
                mapping[pname] = b
    return mapping


def type_expr(
    env: TypeEnv,
    theta: PredEnv,
    mode: Mode,
    e: Expr,
    funs: FunEnv | None = None,
    structs: StructEnv | None = None,
    heap: Heap | None = None,
    phi: Stack | None = None,
) -> Type:
    return TypeChecker(funs, structs, heap, phi).type_of(env, theta, mode, e)


# ---------------------------------------------------------------------------
# Functions and programs
# ---------------------------------------------------------------------------


def check_fun(fdef: FunDef, funs: FunEnv, structs: StructEnv) -> None:
    env: dict[str, Type] = {}
    for pname, pty in fdef.params:
        if not wf_type(env, pty, structs):
            raise WellFormednessError(fdef.name, f"parameter {pname} has an ill-formed type")
        env[pname] = pty
    if not wf_type(env, fdef.ret, structs):
        raise WellFormednessError(fdef.name, "return type is ill-formed")
    checker = TypeChecker(funs, structs)
    try:
        body_ty = checker.type_of(env, {}, Mode.CHECKED, fdef.body)
    except TypeCheckError as exc:
        raise WellFormednessError(fdef.name, str(exc)) from exc
    if not checker.subtype_in(body_ty, fdef.ret):
        raise WellFormednessError(
            fdef.name, f"body type {print_type(body_ty)} does not match {print_type(fdef.ret)}"
        )


def wf_fun(funs: FunEnv, structs: StructEnv) -> bool:
    try:
        for fdef in funs.values():
            check_fun(fdef, funs, structs)
    except WellFormednessError as exc:
        logger.debug("function not well formed: %s", exc)
        return False
    return True


def check_program(program: Program) -> Type:
    """Check structs, functions and main; returns the type of main."""
    check_structs(program.structs)
    for fdef in program.funs.values():
        check_fun(fdef, program.funs, program.structs)
    return type_expr({}, {}, Mode.CHECKED, program.main, program.funs, program.structs)
