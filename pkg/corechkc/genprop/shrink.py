"""Greedy shrinking of failing programs to a local minimum."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterator

from corechkc.checker import TypeChecker, check_program
from corechkc.core import (
    free_vars,
    literals,
    replace_subterm,
    subterm_at,
    subterm_paths,
    type_free_vars,
)
from corechkc.errors import ModelError
from corechkc.models.syntax import (
    INT,
    Expr,
    IntType,
    Let,
    Lit,
    Mode,
    Program,
    Type,
    children,
    expr_size,
)

logger = logging.getLogger(__name__)

MAX_ROUNDS = 500


class _TypeRecorder(TypeChecker):
    """A checker that remembers the type it concluded for every node it visits."""

    def __init__(self, program: Program):
        super().__init__(program.funs, program.structs)
        self.types: dict[int, Type] = {}

    def _check(self, ctx, e: Expr) -> Type:
        ty = super()._check(ctx, e)
        self.types[id(e)] = ty
        return ty


def subterm_types(program: Program) -> dict[int, Type]:
    """Types of main's subterms keyed by node identity; empty when main does not check."""
    recorder = _TypeRecorder(program)
    try:
        recorder.type_of({}, {}, Mode.CHECKED, program.main)
    except ModelError:
        return {}
    return recorder.types


def _measure(program: Program) -> tuple[int, int, int]:
    lits = list(literals(program.main))
    return (
        expr_size(program.main) + sum(expr_size(f.body) for f in program.funs.values()),
        sum(abs(lit.value) for lit in lits),
        sum(1 for lit in lits if not isinstance(lit.type, IntType)),
    )


def _toward_zero(n: int) -> int:
    return int(n / 2)


def _zero_of(node: Expr, types: dict[int, Type]) -> Lit:
    ty = types.get(id(node), INT)
    return Lit(0, INT) if type_free_vars(ty) else Lit(0, ty)


def _rewrites(main: Expr, types: dict[int, Type]) -> Iterator[Expr]:
    for path in subterm_paths(main):
        node = subterm_at(main, path)
        if isinstance(node, Let) and node.name not in free_vars(node.body):
            yield replace_subterm(main, path, node.body)
        for child in children(node):
            yield replace_subterm(main, path, child)
        zero = _zero_of(node, types)
        if node != zero:
            yield replace_subterm(main, path, zero)
        if isinstance(node, Lit) and isinstance(node.type, IntType) and node.value != 0:
            yield replace_subterm(main, path, Lit(_toward_zero(node.value), INT))


def _candidates(program: Program) -> Iterator[Program]:
    for name in program.funs:
        funs = {k: v for k, v in program.funs.items() if k != name}
        yield Program(funs, program.structs, program.main)
    for main in _rewrites(program.main, subterm_types(program)):
        yield Program(program.funs, program.structs, main)


def _well_typed(program: Program) -> bool:
    try:
        check_program(program)
    except ModelError:
        return False
    return True


def shrink(program: Program, still_fails: Callable[[Program], bool]) -> Program:
    """Apply the first size-reducing rewrite that keeps the failure, until none does."""
    current = program
    for _ in range(MAX_ROUNDS):
        measure = _measure(current)
        for candidate in _candidates(current):
            if _measure(candidate) >= measure:
                continue
            if _well_typed(candidate) and still_fails(candidate):
                current = candidate
                break
        else:
            break
    logger.debug("shrunk %s to %s", _measure(program), _measure(current))
    return current
