"""Erased target language: atoms, A-normal expressions, one-hole closures and programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union


class Op(str, Enum):
    ADD = "+"
    SUB = "-"
    LE = "<="


@dataclass(frozen=True, slots=True)
class Num:
    value: int


@dataclass(frozen=True, slots=True)
class Name:
    name: str


Atom = Union[Num, Name]


@dataclass(frozen=True, slots=True)
class CStrlen:
    arg: Atom


@dataclass(frozen=True, slots=True)
class CMalloc:
    size: Atom


@dataclass(frozen=True, slots=True)
class CCall:
    name: str
    args: tuple[Atom, ...] = ()


@dataclass(frozen=True, slots=True)
class Binop:
    left: Atom
    op: Op
    right: Atom


@dataclass(frozen=True, slots=True)
class CDeref:
    addr: Atom


@dataclass(frozen=True, slots=True)
class CAssign:
    addr: Atom
    value: Atom


@dataclass(frozen=True, slots=True)
class StackAssign:
    name: str
    value: Atom


@dataclass(frozen=True, slots=True)
class CIf:
    cond: Atom | Binop
    then: CExpr
    orelse: CExpr


@dataclass(frozen=True, slots=True)
class BoundsFail:
    pass


@dataclass(frozen=True, slots=True)
class NullFail:
    pass


@dataclass(frozen=True, slots=True)
class CRet:
    name: str
    saved: int | None
    body: CExpr


@dataclass(frozen=True, slots=True)
class CLet:
    """Compiled code binds a command; call expansion may nest a let while running."""

    name: str
    bound: CExpr
    body: CExpr


Command = Union[
    Num, Name, CStrlen, CMalloc, CCall, Binop, CDeref, CAssign, StackAssign, CIf, BoundsFail,
    NullFail, CRet,
]
CExpr = Union[Command, CLet]


# ---------------------------------------------------------------------------
# Closures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LetFrame:
    name: str
    bound: Command


@dataclass(frozen=True, slots=True)
class Closure:
    """A one-hole context kept as a flat frame list, outermost first."""

    frames: tuple[LetFrame, ...] = ()

    def then(self, *others: Closure) -> Closure:
        frames = list(self.frames)
        for other in others:
            frames.extend(other.frames)
        return Closure(tuple(frames))

    def plug(self, e: CExpr) -> CExpr:
        for frame in reversed(self.frames):
            e = CLet(frame.name, frame.bound, e)
        return e

    @property
    def is_hole(self) -> bool:
        return not self.frames


HOLE = Closure()


def let(name: str, bound: Command) -> Closure:
    return Closure((LetFrame(name, bound),))


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CFun:
    name: str
    params: tuple[str, ...]
    body: CExpr


@dataclass(slots=True)
class CProgram:
    funs: dict[str, CFun] = field(default_factory=dict)
    main: CExpr = field(default_factory=lambda: Num(0))


def _is_atom(a: object) -> bool:
    return isinstance(a, (Num, Name))


def is_anf(e: CExpr) -> bool:
    """Structural A-normal form check: lets bind commands and operands are atoms."""
    pending: list[CExpr] = [e]
    while pending:
        node = pending.pop()
        if isinstance(node, CLet):
            if isinstance(node.bound, CLet):
                return False
            pending.extend((node.bound, node.body))
            continue
        match node:
            case Num() | Name() | BoundsFail() | NullFail():
                pass
            case CStrlen(a) | CMalloc(a) | CDeref(a) | StackAssign(_, a):
                if not _is_atom(a):
                    return False
            case CAssign(a, b) | Binop(a, _, b):
                if not (_is_atom(a) and _is_atom(b)):
                    return False
            case CCall(_, args):
                if not all(_is_atom(a) for a in args):
                    return False
            case CIf(cond, then, orelse):
                guard_ok = _is_atom(cond) or (
                    isinstance(cond, Binop) and _is_atom(cond.left) and _is_atom(cond.right)
                )
                if not guard_ok:
                    return False
                pending.extend((then, orelse))
            case CRet(_, _, body):
                pending.append(body)
            case _:
                return False
    return True
