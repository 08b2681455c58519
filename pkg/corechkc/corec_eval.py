"""Interpreter for CoreC, the erased target language.

CoreC has no annotations and performs no implicit checks: a failed access is stuck, and
only the explicit ``boundsfail``/``nullfail`` commands halt with an error. Evaluation is a
refocusing machine over let/ret continuations so long let chains run without recursion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from corechkc.models.corec import (
    Atom,
    Binop,
    BoundsFail,
    CAssign,
    CCall,
    CDeref,
    CExpr,
    CFun,
    CIf,
    CLet,
    CMalloc,
    CRet,
    CStrlen,
    Name,
    NullFail,
    Num,
    Op,
    StackAssign,
)
from corechkc.models.state import CHeap, CStack, Heap, Stack
from corechkc.printer import print_command
from corechkc.semantics import Halt, Status, Stuck

logger = logging.getLogger(__name__)

CFunEnv = dict[str, CFun]


def erase(phi: Stack, heap: Heap) -> tuple[CStack, CHeap]:
    """Drop every annotation from a stack and heap."""
    return (
        {name: lit.value for name, lit in phi.items()},
        CHeap({addr: lit.value for addr, lit in heap.cells.items()}, heap.cursor),
    )


# ---------------------------------------------------------------------------
# Contraction
# ---------------------------------------------------------------------------


def _atom(phi: CStack, a: Atom) -> int | Stuck:
    if isinstance(a, Num):
        return a.value
    if a.name not in phi:
        return Stuck(f"unbound variable {a.name}")
    return phi[a.name]


def _binop(phi: CStack, b: Binop) -> int | Stuck:
    left, right = _atom(phi, b.left), _atom(phi, b.right)
    if isinstance(left, Stuck):
        return left
    if isinstance(right, Stuck):
        return right
    match b.op:
        case Op.ADD:
            return left + right
        case Op.SUB:
            return left - right
        case Op.LE:
            return 1 if left <= right else 0
    return Stuck(f"unknown operator {b.op}")


def contract(phi: CStack, heap: CHeap, c: CExpr, funs: CFunEnv) -> CExpr | Halt | Stuck:
    """Contract a non-let command in place on ``phi`` and ``heap``."""
    match c:
        case Name():
            value = _atom(phi, c)
            return value if isinstance(value, Stuck) else Num(value)
        case Binop():
            value = _binop(phi, c)
            return value if isinstance(value, Stuck) else Num(value)
        case CIf(cond, then, orelse):
            value = _binop(phi, cond) if isinstance(cond, Binop) else _atom(phi, cond)
            if isinstance(value, Stuck):
                return value
            return then if value != 0 else orelse
        case BoundsFail():
            return Halt.BOUNDS
        case NullFail():
            return Halt.NULL
        case CDeref(addr):
            n = _atom(phi, addr)
            if isinstance(n, Stuck):
                return n
            if n not in heap.cells:
                return Stuck(f"no heap cell at {n}")
            return Num(heap.cells[n])
        case CAssign(addr, value):
            n, v = _atom(phi, addr), _atom(phi, value)
            if isinstance(n, Stuck) or isinstance(v, Stuck):
                return n if isinstance(n, Stuck) else v
            if n not in heap.cells:
                return Stuck(f"no heap cell at {n}")
            heap.cells[n] = v
            return Num(v)
        case StackAssign(name, value):
            v = _atom(phi, value)
            if isinstance(v, Stuck):
                return v
            if name not in phi:
                return Stuck(f"unbound variable {name}")
            phi[name] = v
            return Num(v)
        case CStrlen(arg):
            n = _atom(phi, arg)
            if isinstance(n, Stuck):
                return n
            length = 0
            while True:
                cell = heap.cells.get(n + length)
                if cell is None:
                    return Stuck("strlen scanned past the heap")
                if cell == 0:
                    return Num(length)
                length += 1
        case CMalloc(size):
            k = _atom(phi, size)
            if isinstance(k, Stuck):
                return k
            if k <= 0:
                return Stuck(f"malloc of {k} cells")
            base = heap.cursor
            for addr in range(base, base + k):
                heap.cells[addr] = 0
            heap.cursor = base + k
            return Num(base)
        case CCall(name, args):
            fun = funs.get(name)
            if fun is None or len(fun.params) != len(args):
                return Stuck(f"bad call to {name}")
            values = [_atom(phi, a) for a in args]
            for v in values:
                if isinstance(v, Stuck):
                    return v
            body = fun.body
            for param, v in reversed(list(zip(fun.params, values))):
                body = CLet(param, Num(v), body)
            return body
    return Stuck(f"no rule for {print_command(c)}")


# ---------------------------------------------------------------------------
# Machine
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _LetK:
    name: str
    body: CExpr


@dataclass(frozen=True, slots=True)
class _RetK:
    name: str
    saved: int | None


class CoreCMachine:
    """Owns a private copy of the stack and heap and contracts one redex per ``step``."""

    def __init__(self, phi: CStack, heap: CHeap, e: CExpr, funs: CFunEnv):
        self.phi = dict(phi)
        self.heap = heap.copy()
        self.focus: CExpr = e
        self.konts: list[_LetK | _RetK] = []
        self.funs = funs
        self.steps = 0
        self.halt: Halt | None = None
        self.stuck: Stuck | None = None

    def _refocus(self) -> None:
        while True:
            e = self.focus
            if isinstance(e, CLet):
                self.konts.append(_LetK(e.name, e.body))
                self.focus = e.bound
            elif isinstance(e, CRet):
                self.konts.append(_RetK(e.name, e.saved))
                self.focus = e.body
            else:
                return

    def step(self) -> bool:
        """Perform one contraction; False once the machine is final."""
        if self.halt is not None or self.stuck is not None:
            return False
        self._refocus()
        e = self.focus
        if isinstance(e, Num):
            if not self.konts:
                return False
            k = self.konts.pop()
            if isinstance(k, _LetK):
                self.konts.append(_RetK(k.name, self.phi.get(k.name)))
                self.phi[k.name] = e.value
                self.focus = k.body
            elif k.saved is None:
                self.phi.pop(k.name, None)
            else:
                self.phi[k.name] = k.saved
            self.steps += 1
            return True
        result = contract(self.phi, self.heap, e, self.funs)
        if isinstance(result, Stuck):
            self.stuck = result
            return False
        self.steps += 1
        if isinstance(result, Halt):
            self.halt = result
            return False
        self.focus = result
        return True

    def expression(self) -> CExpr:
        """Rebuild the whole configuration expression around the focus."""
        e = self.focus
        for k in reversed(self.konts):
            e = CLet(k.name, e, k.body) if isinstance(k, _LetK) else CRet(k.name, k.saved, e)
        return e

    def run(self, fuel: int) -> CoreCOutcome:
        while self.steps < fuel:
            if not self.step():
                break
        if self.stuck is not None:
            logger.debug("corec stuck: %s", self.stuck.reason)
            return CoreCOutcome(Status.STUCK, self.phi, self.heap, None, self.steps, self.stuck)
        if self.halt is not None:
            return CoreCOutcome(Status.FINISHED, self.phi, self.heap, self.halt, self.steps)
        self._refocus()
        if isinstance(self.focus, Num) and not self.konts:
            return CoreCOutcome(
                Status.FINISHED, self.phi, self.heap, self.focus.value, self.steps
            )
        return CoreCOutcome(Status.OUT_OF_FUEL, self.phi, self.heap, None, self.steps)


@dataclass(slots=True)
class CoreCOutcome:
    status: Status
    phi: CStack
    heap: CHeap
    result: int | Halt | None
    steps: int
    stuck: Stuck | None = None

    def describe(self) -> str:
        if self.status is Status.STUCK:
            return "stuck"
        if self.status is Status.OUT_OF_FUEL:
            return "fuel"
        if isinstance(self.result, Halt):
            return self.result.value
        return f"value {self.result}"


@dataclass(frozen=True, slots=True)
class CStep:
    phi: CStack
    heap: CHeap
    result: CExpr | Halt


def step_corec(phi: CStack, heap: CHeap, e: CExpr, funs: CFunEnv) -> CStep | Stuck:
    """One CoreC reduction on a whole expression; inputs are left untouched."""
    machine = CoreCMachine(phi, heap, e, funs)
    if not machine.step():
        if machine.halt is not None:
            return CStep(machine.phi, machine.heap, machine.halt)
        return machine.stuck or Stuck("no step from a value")
    return CStep(machine.phi, machine.heap, machine.expression())


def eval_corec(
    phi: CStack, heap: CHeap, e: CExpr, funs: CFunEnv, fuel: int = 10000
) -> CoreCOutcome:
    return CoreCMachine(phi, heap, e, funs).run(fuel)
