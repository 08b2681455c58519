"""Checked C surface text for source programs.

Expressions are flattened into statement lists: lets become declarations, conditionals and
``unchecked`` regions assign a declared result variable. Let binders that would shadow an
earlier declaration are renamed. The encoding is meant for an external Checked C compiler
and is not normative.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from jinja2 import Environment, FileSystemLoader

from corechkc.checker import Pred, type_expr
from corechkc.errors import EmitError, ModelError
from corechkc.models.syntax import (
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
    StructType,
    Type,
    Unchecked,
    Var,
    VarBound,
)

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"

ENTRY = "chkc_main"


@dataclass(frozen=True, slots=True)
class _Scope:
    names: dict[str, str]
    env: dict[str, Type]
    theta: dict[str, Pred]
    mode: Mode = Mode.CHECKED

    def bind(self, name: str, cname: str, ty: Type, pred: Pred | None = None) -> _Scope:
        theta = {k: v for k, v in self.theta.items() if k != name}
        if pred is not None:
            theta[name] = pred
        return _Scope({**self.names, name: cname}, {**self.env, name: ty}, theta, self.mode)

    def c_name(self, name: str) -> str:
        return self.names.get(name, name)


def c_bound(b: Bound, scope: _Scope | None = None) -> str:
    if isinstance(b, ConstBound):
        return str(b.value)
    var = scope.c_name(b.var) if scope else b.var
    if b.offset == 0:
        return var
    sign = "+" if b.offset > 0 else "-"
    return f"{var} {sign} {abs(b.offset)}"


def c_type(ty: Type) -> str:
    """The C type without any bounds annotation."""
    match ty:
        case IntType():
            return "int"
        case StructType(name):
            return f"struct {name}"
        case PtrType(Mode.UNCHECKED, ArrayType(_, elem, _)):
            return f"{c_type(elem)} *"
        case PtrType(Mode.UNCHECKED, pointee):
            return f"{c_type(pointee)} *"
        case PtrType(_, ArrayType(_, elem, nt)):
            head = "nt_array_ptr" if nt else "array_ptr"
            return f"{head}<{c_type(elem)}>"
        case PtrType(_, pointee):
            return f"ptr<{c_type(pointee)}>"
    raise EmitError(f"no C type for {ty!r}")


def c_count(ty: Type, scope: _Scope | None = None) -> str | None:
    """``count(n)`` for checked array pointers, None for everything else."""
    if not (isinstance(ty, PtrType) and ty.mode is Mode.CHECKED):
        return None
    if not isinstance(ty.pointee, ArrayType):
        return None
    bounds: BoundPair = ty.pointee.bounds
    if bounds.lo != ConstBound(0):
        raise EmitError("only zero lower bounds have a count() form")
    return f"count({c_bound(bounds.hi, scope)})"


def c_decl(ty: Type, name: str, scope: _Scope | None = None) -> str:
    count = c_count(ty, scope)
    base = c_type(ty)
    sep = "" if base.endswith("*") else " "
    return f"{base}{sep}{name}" + (f" : {count}" if count else "")


class _FunctionWriter:
    """Collects the statements of one C function body."""

    def __init__(self, program: Program, used: set[str]):
        self.program = program
        self.lines: list[str] = []
        self.depth = 0
        self.used = used
        self.counter = 0

    def line(self, text: str) -> None:
        self.lines.append("  " * self.depth + text)

    def fresh(self, hint: str = "tmp") -> str:
        while True:
            self.counter += 1
            name = f"{hint}_{self.counter}"
            if name not in self.used:
                self.used.add(name)
                return name

    def claim(self, name: str) -> str:
        if name not in self.used:
            self.used.add(name)
            return name
        return self.fresh(name)

    def type_of(self, scope: _Scope, e: Expr) -> Type:
        try:
            return type_expr(
                scope.env, scope.theta, scope.mode, e, self.program.funs, self.program.structs
            )
        except ModelError as exc:
            raise EmitError(f"cannot type subterm for emission: {exc}") from exc

    def spill(self, scope: _Scope, e: Expr, text: str) -> str:
        if isinstance(e, (Lit, Var)):
            return text
        name = self.fresh()
        self.line(f"{c_decl(self.type_of(scope, e), name, scope)} = {text};")
        return name

    def operands(self, scope: _Scope, exprs: tuple[Expr, ...]) -> list[str]:
        """Translate left to right, spilling earlier operands when a later one emits code."""
        texts: list[str] = []
        for i, e in enumerate(exprs):
            saved, self.lines = self.lines, []
            text = self.expr(scope, e)
            emitted, self.lines = self.lines, saved
            if emitted:
                texts = [self.spill(scope, prev, t) for prev, t in zip(exprs[:i], texts)]
                self.lines.extend(emitted)
            texts.append(text)
        return texts

    def block_result(self, scope: _Scope, e: Expr, target: str) -> None:
        self.depth += 1
        self.line(f"{target} = {self.expr(scope, e)};")
        self.depth -= 1

    def expr(self, scope: _Scope, e: Expr) -> str:
        match e:
            case Lit(0, PtrType()):
                return "0"
            case Lit(n, IntType()):
                return str(n)
            case Lit(n, PtrType(Mode.UNCHECKED) as ty):
                return f"(({c_type(ty)}){n})"
            case Lit():
                raise EmitError("a checked pointer literal other than null has no C form")
            case Var(name):
                return scope.c_name(name)
            case Let(name, Strlen(ptr) as bound, body):
                text = self.expr(scope, bound)
                cname = self.claim(name)
                self.line(f"int {cname} = {text};")
                inner = scope.bind(name, cname, IntType(), Pred.GE_ZERO)
                ptr_ty = scope.env[ptr]
                arr = ptr_ty.pointee
                widened = ArrayType(BoundPair(arr.bounds.lo, VarBound(name, 0)), arr.elem, True)
                inner = inner.bind(ptr, scope.c_name(ptr), PtrType(ptr_ty.mode, widened))
                return self.expr(inner, body)
            case Let(name, bound, body):
                ty = self.type_of(scope, bound)
                text = self.expr(scope, bound)
                cname = self.claim(name)
                self.line(f"{c_decl(ty, cname, scope)} = {text};")
                return self.expr(scope.bind(name, cname, ty), body)
            case Malloc(ty):
                return self.malloc(ty, scope)
            case Cast(ty, inner):
                text = self.expr(scope, inner)
                count = c_count(ty, scope)
                if count:
                    return f"assume_bounds_cast<{c_type(ty)}>({text}, {count})"
                return f"(({c_type(ty)}){text})"
            case DynCast(ty, inner):
                text = self.expr(scope, inner)
                count = c_count(ty, scope) or "count(1)"
                return f"dyn_bounds_cast<{c_type(ty)}>({text}, {count})"
            case Call(name, args):
                return f"{name}({', '.join(self.operands(scope, args))})"
            case Strlen(name):
                return f"strlen({scope.c_name(name)})"
            case Add(left, right):
                a, b = self.operands(scope, (left, right))
                return f"({a} + {b})"
            case Deref(inner):
                return f"*{self.atomic(self.expr(scope, inner))}"
            case Assign(target, value):
                a, b = self.operands(scope, (target, value))
                return f"(*{self.atomic(a)} = {b})"
            case FieldAddr(inner, field_name):
                return f"&{self.atomic(self.expr(scope, inner))}->{field_name}"
            case If(cond, then, orelse):
                return self.conditional(scope, e, cond, then, orelse)
            case Unchecked(inner):
                result = self.fresh()
                ty = self.type_of(scope, e)
                self.line(f"{c_decl(ty, result, scope)} = 0;")
                self.line("unchecked {")
                self.block_result(
                    _Scope(scope.names, scope.env, scope.theta, Mode.UNCHECKED), inner, result
                )
                self.line("}")
                return result
            case Ret():
                raise EmitError("runtime ret forms only occur during evaluation")
        raise EmitError(f"no C form for {e!r}")

    @staticmethod
    def atomic(text: str) -> str:
        if text.isidentifier() or (text.startswith("(") and text.endswith(")")):
            return text
        return f"({text})"

    def conditional(self, scope: _Scope, e: If, cond: Expr, then: Expr, orelse: Expr) -> str:
        ty = self.type_of(scope, e)
        guard = self.expr(scope, cond)
        result = self.fresh()
        self.line(f"{c_decl(ty, result, scope)} = 0;")
        self.line(f"if ({guard}) {{")
        then_scope = scope
        if isinstance(cond, Deref) and isinstance(cond.expr, Var):
            then_scope = _widened(scope, cond.expr.name)
        self.block_result(then_scope, then, result)
        self.line("} else {")
        self.block_result(scope, orelse, result)
        self.line("}")
        return result

    def malloc(self, ty: Type, scope: _Scope) -> str:
        match ty:
            case ArrayType(BoundPair(_, hi), elem, nt):
                count = c_bound(hi, scope)
                if nt:
                    count = f"{count} + 1"
                return f"calloc<{c_type(elem)}>({count}, sizeof({c_type(elem)}))"
            case _:
                return f"calloc<{c_type(ty)}>(1, sizeof({c_type(ty)}))"


def _widened(scope: _Scope, name: str) -> _Scope:
    ty = scope.env.get(name)
    if not (isinstance(ty, PtrType) and isinstance(ty.pointee, ArrayType)):
        return scope
    arr = ty.pointee
    if not arr.null_terminated or arr.bounds.hi != ConstBound(0):
        return scope
    widened = PtrType(ty.mode, ArrayType(BoundPair(arr.bounds.lo, ConstBound(1)), arr.elem, True))
    return scope.bind(name, scope.c_name(name), widened, scope.theta.get(name))


def _signature(name: str, params: tuple[tuple[str, Type], ...], ret: Type) -> str:
    args = ", ".join(c_decl(ty, pname) for pname, ty in params) or "void"
    count = c_count(ret)
    head = f"{c_type(ret)} {name}({args})"
    return f"{head} : {count}" if count else head


def _function(
    program: Program, name: str, params: tuple[tuple[str, Type], ...], ret: Type, body: Expr
) -> dict:
    used = {p for p, _ in params} | set(program.funs) | {ENTRY, "main"}
    writer = _FunctionWriter(program, used)
    scope = _Scope({p: p for p, _ in params}, dict(params), {})
    result = writer.expr(scope, body)
    writer.line(f"return {result};")
    return {"signature": _signature(name, params, ret), "body": writer.lines}


def emit_checkedc(program: Program) -> str:
    """Render ``program`` as Checked C text; the program is assumed to type-check."""
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        autoescape=False,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    template = env.get_template("program.c.j2")

    structs = [
        {"name": s.name, "fields": [c_decl(ty, fname) for fname, ty in s.fields]}
        for s in program.structs.values()
    ]
    functions = [
        _function(program, fdef.name, fdef.params, fdef.ret, fdef.body)
        for fdef in program.funs.values()
    ]
    main_ty = _main_type(program)
    functions.append(_function(program, ENTRY, (), main_ty, program.main))
    logger.debug("emitting %d struct(s), %d function(s)", len(structs), len(functions))
    return template.render(structs=structs, functions=functions, entry=ENTRY)


def _main_type(program: Program) -> Type:
    try:
        return type_expr({}, {}, Mode.CHECKED, program.main, program.funs, program.structs)
    except ModelError as exc:
        raise EmitError(f"main does not type-check: {exc}") from exc

