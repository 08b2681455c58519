"""Abstract syntax of the checked core language: modes, bounds, types and expressions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union


class Mode(str, Enum):
    CHECKED = "c"
    UNCHECKED = "u"

    def at_most(self, other: Mode) -> bool:
        """Total order with unchecked below checked."""
        return self is Mode.UNCHECKED or other is Mode.CHECKED


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ConstBound:
    value: int


@dataclass(frozen=True, slots=True)
class VarBound:
    var: str
    offset: int = 0


Bound = Union[ConstBound, VarBound]


@dataclass(frozen=True, slots=True)
class BoundPair:
    lo: Bound
    hi: Bound


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class IntType:
    pass


@dataclass(frozen=True, slots=True)
class PtrType:
    mode: Mode
    pointee: Type


@dataclass(frozen=True, slots=True)
class ArrayType:
    bounds: BoundPair
    elem: WordType
    null_terminated: bool = False


@dataclass(frozen=True, slots=True)
class StructType:
    name: str


WordType = Union[IntType, PtrType]
Type = Union[IntType, PtrType, ArrayType, StructType]

INT = IntType()


def array_ptr(
    lo: int | Bound, hi: int | Bound, elem: WordType = INT, *, nt: bool = False,
    mode: Mode = Mode.CHECKED,
) -> PtrType:
    """Shorthand for ``ptr^m [(lo, hi) elem]^κ`` used heavily by tests and the generator."""
    lo_b = ConstBound(lo) if isinstance(lo, int) else lo
    hi_b = ConstBound(hi) if isinstance(hi, int) else hi
    return PtrType(mode, ArrayType(BoundPair(lo_b, hi_b), elem, nt))


def array_view(ty: Type) -> tuple[Mode, ArrayType] | None:
    """Return (mode, array) when ``ty`` is a pointer to an array."""
    if isinstance(ty, PtrType) and isinstance(ty.pointee, ArrayType):
        return ty.mode, ty.pointee
    return None


def is_checked_nt(ty: Type) -> bool:
    view = array_view(ty)
    return view is not None and view[0] is Mode.CHECKED and view[1].null_terminated


def is_checked_array(ty: Type) -> bool:
    view = array_view(ty)
    return view is not None and view[0] is Mode.CHECKED


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Lit:
    """A literal ``n : τ``; literals double as runtime values."""

    value: int
    type: WordType


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Malloc:
    type: Type


@dataclass(frozen=True, slots=True)
class Let:
    name: str
    bound: Expr
    body: Expr


@dataclass(frozen=True, slots=True)
class Cast:
    type: WordType
    expr: Expr


@dataclass(frozen=True, slots=True)
class DynCast:
    type: WordType
    expr: Expr


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True, slots=True)
class Strlen:
    name: str


@dataclass(frozen=True, slots=True)
class Add:
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Deref:
    expr: Expr


@dataclass(frozen=True, slots=True)
class Assign:
    target: Expr
    value: Expr


@dataclass(frozen=True, slots=True)
class Unchecked:
    expr: Expr


@dataclass(frozen=True, slots=True)
class If:
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True, slots=True)
class FieldAddr:
    expr: Expr
    field: str


@dataclass(frozen=True, slots=True)
class Ret:
    """Runtime-only frame restoring ``name`` to ``saved`` (None is ⊥) once ``body`` is a value."""

    name: str
    saved: Lit | None
    body: Expr


Expr = Union[
    Lit, Var, Malloc, Let, Cast, DynCast, Call, Strlen, Add, Deref, Assign, Unchecked, If,
    FieldAddr, Ret,
]


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FunDef:
    name: str
    params: tuple[tuple[str, WordType], ...]
    ret: WordType
    body: Expr


@dataclass(frozen=True, slots=True)
class StructDef:
    name: str
    fields: tuple[tuple[str, WordType], ...]

    def index(self, field_name: str) -> int | None:
        for i, (name, _) in enumerate(self.fields):
            if name == field_name:
                return i
        return None

    def field_type(self, field_name: str) -> WordType | None:
        for name, ty in self.fields:
            if name == field_name:
                return ty
        return None


FunEnv = dict[str, FunDef]
StructEnv = dict[str, StructDef]


@dataclass(slots=True)
class Program:
    funs: FunEnv = field(default_factory=dict)
    structs: StructEnv = field(default_factory=dict)
    main: Expr = field(default_factory=lambda: Lit(0, INT))


def expr_size(e: Expr) -> int:
    """Node count, used by the shrinker and generator statistics."""
    total = 0
    stack: list[Expr] = [e]
    while stack:
        node = stack.pop()
        total += 1
        stack.extend(children(node))
    return total


def children(e: Expr) -> tuple[Expr, ...]:
    match e:
        case Let(_, bound, body):
            return (bound, body)
        case Cast(_, inner) | DynCast(_, inner) | Deref(inner) | Unchecked(inner):
            return (inner,)
        case FieldAddr(inner, _):
            return (inner,)
        case Call(_, args):
            return args
        case Add(left, right):
            return (left, right)
        case Assign(target, value):
            return (target, value)
        case If(cond, then, orelse):
            return (cond, then, orelse)
        case Ret(_, _, body):
            return (body,)
        case _:
            return ()
