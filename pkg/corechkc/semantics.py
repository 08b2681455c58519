"""Small-step evaluation of the checked core language.

A step decomposes the expression into an evaluation context and a redex, contracts the
redex against the stack and heap, and plugs the result back. Bounds and null failures
halt the whole program; anything no rule covers is reported as stuck.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from corechkc.checker import Pred, subtype, type_literal
from corechkc.core import cell_layout, close_type, subst_type
from corechkc.errors import TypeSizeError
from corechkc.models.state import Heap, Stack
from corechkc.models.syntax import (
    INT,
    Add,
    ArrayType,
    Assign,
    BoundPair,
    Call,
    Cast,
    ConstBound,
    Deref,
    DynCast,
    Expr,
    FieldAddr,
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
    array_view,
)
from corechkc.printer import print_expr

logger = logging.getLogger(__name__)


class Halt(str, Enum):
    NULL = "null"
    BOUNDS = "bounds"


class Status(str, Enum):
    FINISHED = "finished"
    STUCK = "stuck"
    OUT_OF_FUEL = "fuel"


@dataclass(frozen=True, slots=True)
class Stuck:
    reason: str


@dataclass(frozen=True, slots=True)
class Step:
    phi: Stack
    heap: Heap
    result: Expr | Halt


# ---------------------------------------------------------------------------
# Evaluation contexts
# ---------------------------------------------------------------------------

Slot = str | int


@dataclass(frozen=True, slots=True)
class EvalContext:
    """Path from the root to the hole; each frame is (parent, slot of the hole)."""

    frames: tuple[tuple[Expr, Slot], ...] = ()

    def plug(self, e: Expr) -> Expr:
        for parent, slot in reversed(self.frames):
            e = _with_child(parent, slot, e)
        return e


@dataclass(frozen=True, slots=True)
class Decomposition:
    context: EvalContext
    redex: Expr
    mode: Mode


def _with_child(parent: Expr, slot: Slot, child: Expr) -> Expr:
    if isinstance(slot, int):
        args = list(parent.args)
        args[slot] = child
        return replace(parent, args=tuple(args))
    return replace(parent, **{slot: child})


def _is_value(e: Expr) -> bool:
    return isinstance(e, Lit)


def decompose(e: Expr) -> Decomposition | None:
    """Find the next redex; None when ``e`` is already a value."""
    if _is_value(e):
        return None
    frames: list[tuple[Expr, Slot]] = []
    mode = Mode.CHECKED
    node = e
    while True:
        slot: Slot | None = None
        match node:
            case Let(_, bound, _) if not _is_value(bound):
                slot = "bound"
            case Cast(_, inner) | DynCast(_, inner) | Deref(inner) if not _is_value(inner):
                slot = "expr"
            case FieldAddr(inner, _) if not _is_value(inner):
                slot = "expr"
            case Call(_, args):
                slot = next((i for i, a in enumerate(args) if not _is_value(a)), None)
            case Add(left, right) | Assign(left, right) if not _is_value(left):
                slot = "left" if isinstance(node, Add) else "target"
            case Add(_, right) if not _is_value(right):
                slot = "right"
            case Assign(_, value) if not _is_value(value):
                slot = "value"
            case Unchecked(inner) if not _is_value(inner):
                slot = "expr"
                mode = Mode.UNCHECKED
            case If(Deref(Var()), _, _):
                slot = None
            case If(cond, _, _) if not _is_value(cond):
                slot = "cond"
            case Ret(_, _, body) if not _is_value(body):
                slot = "body"
        if slot is None:
            return Decomposition(EvalContext(tuple(frames)), node, mode)
        frames.append((node, slot))
        node = node.args[slot] if isinstance(slot, int) else getattr(node, slot)


# ---------------------------------------------------------------------------
# Allocation
# ---------------------------------------------------------------------------


def alloc(heap: Heap, ty: Type, structs: StructEnv) -> tuple[int, Heap] | Halt:
    """Bump-allocate zeroed cells for closed ``ty``."""
    if isinstance(ty, ArrayType):
        lo, hi = ty.bounds.lo, ty.bounds.hi
        if not (isinstance(lo, ConstBound) and isinstance(hi, ConstBound)):
            raise TypeSizeError("allocation of an open array type")
        if lo.value != 0 or hi.value <= 0:
            return Halt.BOUNDS
    layout = cell_layout(ty, structs)
    new = heap.copy()
    base = heap.cursor
    for offset, cell_ty in layout:
        new.cells[base + offset] = Lit(0, cell_ty)
    new.cursor = base + len(layout)
    return base, new


# ---------------------------------------------------------------------------
# Computation rules
# ---------------------------------------------------------------------------


def _closed_bounds(arr: ArrayType) -> tuple[int, int] | None:
    lo, hi = arr.bounds.lo, arr.bounds.hi
    if isinstance(lo, ConstBound) and isinstance(hi, ConstBound):
        return lo.value, hi.value
    return None


def _with_bounds(ty: PtrType, lo: int, hi: int) -> PtrType:
    arr = ty.pointee
    bounds = BoundPair(ConstBound(lo), ConstBound(hi))
    return PtrType(ty.mode, ArrayType(bounds, arr.elem, arr.null_terminated))


def _read(heap: Heap, ptr: Lit) -> Expr | Halt | Stuck:
    ty = ptr.type
    if not isinstance(ty, PtrType):
        return Stuck("dereference of a non-pointer")
    checked = ty.mode is Mode.CHECKED
    if checked and ptr.value == 0:
        return Halt.NULL
    pointee = ty.pointee
    if isinstance(pointee, StructType):
        return Stuck("dereference of a struct pointer")
    if isinstance(pointee, ArrayType):
        if checked:
            bounds = _closed_bounds(pointee)
            if bounds is None:
                return Stuck("open array bounds")
            lo, hi = bounds
            inside = lo <= 0 <= hi if pointee.null_terminated else lo <= 0 < hi
            if not inside:
                return Halt.BOUNDS
        cell_ty = pointee.elem
    else:
        cell_ty = pointee
    cell = heap.get(ptr.value)
    if cell is None:
        return Stuck(f"no heap cell at {ptr.value}")
    return Lit(cell.value, cell_ty)


def _write(heap: Heap, ptr: Lit, value: Lit) -> tuple[Heap, Lit] | Halt | Stuck:
    ty = ptr.type
    if not isinstance(ty, PtrType):
        return Stuck("assignment through a non-pointer")
    checked = ty.mode is Mode.CHECKED
    if checked and ptr.value == 0:
        return Halt.NULL
    pointee = ty.pointee
    if isinstance(pointee, StructType):
        return Stuck("assignment through a struct pointer")
    if isinstance(pointee, ArrayType):
        if checked:
            bounds = _closed_bounds(pointee)
            if bounds is None:
                return Stuck("open array bounds")
            lo, hi = bounds
            if not lo <= 0 < hi:
                return Halt.BOUNDS
        cell_ty = pointee.elem
    else:
        cell_ty = pointee
    if ptr.value not in heap:
        return Stuck(f"no heap cell at {ptr.value}")
    stored = Lit(value.value, cell_ty)
    new = heap.copy()
    new.cells[ptr.value] = stored
    return new, stored


def _strlen(phi: Stack, heap: Heap, name: str) -> Step | Stuck:
    ptr = phi.get(name)
    if ptr is None:
        return Stuck(f"unbound variable {name}")
    view = array_view(ptr.type)
    if view is None:
        return Stuck("strlen of a non-array pointer")
    mode, arr = view
    checked = mode is Mode.CHECKED
    bounds = _closed_bounds(arr)
    if checked:
        if not arr.null_terminated or bounds is None:
            return Stuck("checked strlen needs a closed null-terminated array")
        if ptr.value == 0:
            return Step(phi, heap, Halt.NULL)
        if not bounds[0] <= 0 <= bounds[1]:
            return Step(phi, heap, Halt.BOUNDS)
    length = 0
    while True:
        cell = heap.get(ptr.value + length)
        if cell is None:
            return Stuck("strlen scanned past the heap")
        if cell.value == 0:
            break
        length += 1
    if checked and length > bounds[1]:
        phi = {**phi, name: Lit(ptr.value, _with_bounds(ptr.type, bounds[0], length))}
    return Step(phi, heap, Lit(length, INT))


def _if_deref(phi: Stack, heap: Heap, node: If) -> Step | Stuck:
    name = node.cond.expr.name
    ptr = phi.get(name)
    if ptr is None:
        return Stuck(f"unbound variable {name}")
    view = array_view(ptr.type)
    if view is not None and view[0] is Mode.CHECKED and view[1].null_terminated:
        bounds = _closed_bounds(view[1])
        if bounds is not None and bounds[1] == 0:
            if ptr.value == 0:
                return Step(phi, heap, Halt.NULL)
            if bounds[0] > 0:
                return Step(phi, heap, Halt.BOUNDS)
            cell = heap.get(ptr.value)
            if cell is None:
                return Stuck(f"no heap cell at {ptr.value}")
            if cell.value == 0:
                return Step(phi, heap, node.orelse)
            widened = Lit(ptr.value, _with_bounds(ptr.type, bounds[0], 1))
            return Step({**phi, name: widened}, heap, node.then)
    return Step(phi, heap, If(Deref(ptr), node.then, node.orelse))


def _call(phi: Stack, heap: Heap, node: Call, funs: FunEnv) -> Step | Stuck:
    fdef = funs.get(node.name)
    if fdef is None or len(fdef.params) != len(node.args):
        return Stuck(f"bad call to {node.name}")
    actuals = {
        pname: ConstBound(arg.value)
        for (pname, _), arg in zip(fdef.params, node.args)
        if isinstance(arg, Lit)
    }
    body: Expr = Cast(subst_type(fdef.ret, actuals), fdef.body)
    for (pname, pty), arg in reversed(list(zip(fdef.params, node.args))):
        body = Let(pname, Lit(arg.value, subst_type(pty, actuals)), body)
    return Step(phi, heap, body)


def step_computation(
    phi: Stack, heap: Heap, redex: Expr, funs: FunEnv, structs: StructEnv
) -> Step | Stuck:
    """Contract one redex; returns the new stack, heap and result, or Stuck."""
    match redex:
        case Var(name):
            if name not in phi:
                return Stuck(f"unbound variable {name}")
            return Step(phi, heap, phi[name])
        case Let(name, Lit() as value, body):
            return Step({**phi, name: value}, heap, Ret(name, phi.get(name), body))
        case Ret(name, saved, Lit() as value):
            restored = dict(phi)
            if saved is None:
                restored.pop(name, None)
            else:
                restored[name] = saved
            return Step(restored, heap, value)
        case Deref(Lit() as ptr):
            result = _read(heap, ptr)
            return result if isinstance(result, Stuck) else Step(phi, heap, result)
        case Assign(Lit() as ptr, Lit() as value):
            result = _write(heap, ptr, value)
            if isinstance(result, (Stuck, Halt)):
                return result if isinstance(result, Stuck) else Step(phi, heap, result)
            new_heap, stored = result
            return Step(phi, new_heap, stored)
        case Cast(ty, Lit(n, _)):
            try:
                return Step(phi, heap, Lit(n, close_type(ty, phi)))
            except TypeSizeError as exc:
                return Stuck(str(exc))
        case DynCast(ty, Lit(n, src_ty)):
            return _dyncast(phi, heap, ty, n, src_ty)
        case Call():
            return _call(phi, heap, redex, funs)
        case Malloc(ty):
            try:
                closed = close_type(ty, phi)
                result = alloc(heap, closed, structs)
            except TypeSizeError as exc:
                return Stuck(str(exc))
            if isinstance(result, Halt):
                return Step(phi, heap, result)
            addr, new_heap = result
            return Step(phi, new_heap, Lit(addr, PtrType(Mode.CHECKED, closed)))
        case If(Deref(Var()), _, _):
            return _if_deref(phi, heap, redex)
        case If(Lit(n, _), then, orelse):
            return Step(phi, heap, then if n != 0 else orelse)
        case Unchecked(Lit() as value):
            return Step(phi, heap, value)
        case Strlen(name):
            return _strlen(phi, heap, name)
        case Add(Lit(n1, t1), Lit(n2, t2)):
            return _add(phi, heap, n1, t1, n2, t2)
        case FieldAddr(Lit(n, PtrType(mode, StructType(sname))), field_name):
            sdef = structs.get(sname)
            index = sdef.index(field_name) if sdef else None
            if index is None:
                return Stuck(f"no field {field_name}")
            field_ty = sdef.fields[index][1]
            if mode is Mode.CHECKED:
                if n == 0:
                    return Step(phi, heap, Halt.NULL)
                if n < 0:
                    return Stuck("negative struct address")
            return Step(phi, heap, Lit(n + index, PtrType(mode, field_ty)))
    return Stuck(f"no rule for {print_expr(redex)}")


def _dyncast(phi: Stack, heap: Heap, ty: Type, n: int, src_ty: Type) -> Step | Stuck:
    try:
        target = close_type(ty, phi)
    except TypeSizeError as exc:
        return Stuck(str(exc))
    t_view, s_view = array_view(target), array_view(src_ty)
    if t_view is None or s_view is None:
        return Stuck("dynamic cast between non-array pointers")
    if t_view[0] is Mode.CHECKED:
        t_bounds, s_bounds = _closed_bounds(t_view[1]), _closed_bounds(s_view[1])
        if t_bounds is None or s_bounds is None:
            return Stuck("open bounds in dynamic cast")
        if not (s_bounds[0] <= t_bounds[0] and t_bounds[1] <= s_bounds[1]):
            return Step(phi, heap, Halt.BOUNDS)
    return Step(phi, heap, Lit(n, target))


def _add(phi: Stack, heap: Heap, n1: int, t1: Type, n2: int, t2: Type) -> Step | Stuck:
    if isinstance(t1, IntType) and isinstance(t2, IntType):
        return Step(phi, heap, Lit(n1 + n2, INT))
    view = array_view(t1)
    if view is None or not isinstance(t2, IntType):
        return Stuck("addition on incompatible operands")
    if view[0] is Mode.CHECKED and n1 == 0:
        return Step(phi, heap, Halt.NULL)
    bounds = _closed_bounds(view[1])
    if bounds is None:
        return Stuck("open array bounds")
    return Step(phi, heap, Lit(n1 + n2, _with_bounds(t1, bounds[0] - n2, bounds[1] - n2)))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TraceStep:
    mode: Mode
    redex: Expr
    result: Expr | Halt
    phi: Stack
    heap: Heap
    expr: Expr | Halt

    def line(self, index: int) -> str:
        shown = self.result.value if isinstance(self.result, Halt) else print_expr(self.result)
        return f"STEP {index} MODE {self.mode.value} REDEX {print_expr(self.redex)} -> {shown}"


@dataclass(slots=True)
class EvalOutcome:
    status: Status
    phi: Stack
    heap: Heap
    result: Expr | Halt
    trace: list[TraceStep] = field(default_factory=list)
    stuck: Stuck | None = None
    stuck_mode: Mode | None = None

    def describe(self) -> str:
        """One-word summary: ``value n``, ``null``, ``bounds``, ``stuck`` or ``fuel``."""
        if self.status is Status.STUCK:
            return "stuck"
        if self.status is Status.OUT_OF_FUEL:
            return "fuel"
        if isinstance(self.result, Halt):
            return self.result.value
        return f"value {self.result.value}"

    def trace_lines(self) -> list[str]:
        return [s.line(i) for i, s in enumerate(self.trace, start=1)]


def eval_expr(
    phi: Stack,
    heap: Heap,
    e: Expr,
    funs: FunEnv,
    structs: StructEnv,
    fuel: int = 10000,
) -> EvalOutcome:
    """Run to a value, a halting error, a stuck state, or until ``fuel`` steps are spent."""
    trace: list[TraceStep] = []
    while True:
        dec = decompose(e)
        if dec is None:
            return EvalOutcome(Status.FINISHED, phi, heap, e, trace)
        if len(trace) >= fuel:
            return EvalOutcome(Status.OUT_OF_FUEL, phi, heap, e, trace)
        result = step_computation(phi, heap, dec.redex, funs, structs)
        if isinstance(result, Stuck):
            logger.debug("stuck in %s mode: %s", dec.mode.value, result.reason)
            return EvalOutcome(Status.STUCK, phi, heap, e, trace, result, dec.mode)
        if isinstance(result.result, Halt):
            halted = result.result
            trace.append(TraceStep(dec.mode, dec.redex, halted, result.phi, result.heap, halted))
            return EvalOutcome(Status.FINISHED, result.phi, result.heap, result.result, trace)
        plugged = dec.context.plug(result.result)
        trace.append(
            TraceStep(dec.mode, dec.redex, result.result, result.phi, result.heap, plugged)
        )
        phi, heap, e = result.phi, result.heap, plugged


# ---------------------------------------------------------------------------
# Consistency oracles
# ---------------------------------------------------------------------------


def stack_consistent(
    env: dict[str, Type], theta: dict[str, Pred], phi: Stack, structs: StructEnv | None = None
) -> bool:
    for name, ty in env.items():
        value = phi.get(name)
        if value is None or not subtype(value.type, ty, theta, phi, structs):
            return False
        if theta.get(name) is Pred.GE_ZERO and value.value < 0:
            return False
    return True


def stack_heap_consistent(phi: Stack, heap: Heap, structs: StructEnv | None = None) -> bool:
    return all(
        type_literal(heap, frozenset(), v.value, v.type, structs or {}) for v in phi.values()
    )


def heap_consistent(
    before: Heap, after: Heap, lits: list[Lit], structs: StructEnv | None = None
) -> bool:
    """Every literal well typed under ``before`` stays well typed under ``after``."""
    structs = structs or {}
    for lit in lits:
        if type_literal(before, frozenset(), lit.value, lit.type, structs) and not type_literal(
            after, frozenset(), lit.value, lit.type, structs
        ):
            return False
    return True


def check_consistency(
    env: dict[str, Type],
    theta: dict[str, Pred],
    phi: Stack,
    heap: Heap,
    structs: StructEnv | None = None,
) -> bool:
    return stack_consistent(env, theta, phi, structs) and stack_heap_consistent(
        phi, heap, structs
    )


def run_program(program: Program, fuel: int = 10000) -> EvalOutcome:
    return eval_expr({}, Heap(), program.main, program.funs, program.structs, fuel)
