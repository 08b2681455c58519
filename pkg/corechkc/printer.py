"""Printers producing the normal form accepted back by :mod:`corechkc.parser`, plus CoreC."""

from __future__ import annotations

from corechkc.models.corec import (
    Atom,
    Binop,
    BoundsFail,
    CAssign,
    CCall,
    CDeref,
    CExpr,
    CIf,
    CLet,
    CMalloc,
    CProgram,
    CRet,
    CStrlen,
    Command,
    Name,
    NullFail,
    Num,
    StackAssign,
)
from corechkc.models.syntax import (
    Add,
    ArrayType,
    Assign,
    Bound,
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
    Program,
    PtrType,
    Ret,
    Strlen,
    StructType,
    Type,
    Unchecked,
    Var,
)


def print_bound(b: Bound) -> str:
    if isinstance(b, ConstBound):
        return str(b.value)
    return f"(+ {b.var} {b.offset})"


def print_type(ty: Type) -> str:
    match ty:
        case IntType():
            return "int"
        case PtrType(mode, pointee):
            return f"(ptr {mode.value} {print_type(pointee)})"
        case ArrayType(bounds, elem, nt):
            head = "ntarray" if nt else "array"
            return (
                f"({head} {print_bound(bounds.lo)} {print_bound(bounds.hi)} {print_type(elem)})"
            )
        case StructType(name):
            return f"(struct {name})"
    raise TypeError(f"not a type: {ty!r}")


def print_expr(e: Expr) -> str:
    match e:
        case Lit(n, ty):
            return f"(lit {n} {print_type(ty)})"
        case Var(name):
            return name
        case Malloc(ty):
            return f"(malloc {print_type(ty)})"
        case Let(name, bound, body):
            return f"(let {name} {print_expr(bound)} {print_expr(body)})"
        case Cast(ty, inner):
            return f"(cast {print_type(ty)} {print_expr(inner)})"
        case DynCast(ty, inner):
            return f"(dyncast {print_type(ty)} {print_expr(inner)})"
        case Call(name, args):
            return "(call " + " ".join([name, *(print_expr(a) for a in args)]) + ")"
        case Strlen(name):
            return f"(strlen {name})"
        case Add(left, right):
            return f"(+ {print_expr(left)} {print_expr(right)})"
        case Deref(inner):
            return f"(deref {print_expr(inner)})"
        case Assign(target, value):
            return f"(assign {print_expr(target)} {print_expr(value)})"
        case Unchecked(inner):
            return f"(unchecked {print_expr(inner)})"
        case If(cond, then, orelse):
            return f"(if {print_expr(cond)} {print_expr(then)} {print_expr(orelse)})"
        case FieldAddr(inner, field):
            return f"(fieldaddr {print_expr(inner)} {field})"
        case Ret(name, saved, body):
            saved_text = "bot" if saved is None else print_expr(saved)
            return f"(ret {name} {saved_text} {print_expr(body)})"
    raise TypeError(f"not an expression: {e!r}")


def print_program(program: Program) -> str:
    lines = ["(defs"]
    for sdef in program.structs.values():
        fields = " ".join(f"({name} {print_type(ty)})" for name, ty in sdef.fields)
        lines.append(f"  (struct {sdef.name} {fields})")
    for fdef in program.funs.values():
        params = " ".join(f"({name} {print_type(ty)})" for name, ty in fdef.params)
        lines.append(f"  (fun {fdef.name} ({params}) {print_type(fdef.ret)}")
        lines.append(f"    {print_expr(fdef.body)})")
    lines.append(f"  (main {print_expr(program.main)}))")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CoreC
# ---------------------------------------------------------------------------


def print_atom(a: Atom) -> str:
    return str(a.value) if isinstance(a, Num) else a.name


def print_command(c: Command) -> str:
    match c:
        case Num() | Name():
            return print_atom(c)
        case CStrlen(arg):
            return f"(strlen {print_atom(arg)})"
        case CMalloc(size):
            return f"(malloc {print_atom(size)})"
        case CCall(name, args):
            return "(call " + " ".join([name, *(print_atom(a) for a in args)]) + ")"
        case Binop(left, op, right):
            return f"({op.value} {print_atom(left)} {print_atom(right)})"
        case CDeref(addr):
            return f"(deref {print_atom(addr)})"
        case CAssign(addr, value):
            return f"(assign {print_atom(addr)} {print_atom(value)})"
        case StackAssign(name, value):
            return f"(stackassign {name} {print_atom(value)})"
        case CIf(cond, then, orelse):
            guard = print_command(cond)
            return f"(if {guard} {print_corec(then)} {print_corec(orelse)})"
        case BoundsFail():
            return "(boundsfail)"
        case NullFail():
            return "(nullfail)"
        case CRet(name, saved, body):
            saved_text = "bot" if saved is None else str(saved)
            return f"(ret {name} {saved_text} {print_corec(body)})"
    raise TypeError(f"not a CoreC command: {c!r}")


def print_corec(e: CExpr) -> str:
    # let chains can be thousands deep, so walk them iteratively
    parts: list[str] = []
    depth = 0
    while isinstance(e, CLet):
        parts.append(f"(let {e.name} {print_corec(e.bound)} ")
        depth += 1
        e = e.body
    parts.append(print_command(e))
    parts.append(")" * depth)
    return "".join(parts)


def print_corec_program(program: CProgram) -> str:
    lines = ["(defs"]
    for fun in program.funs.values():
        lines.append(f"  (fun {fun.name} ({' '.join(fun.params)})")
        lines.append(f"    {print_corec(fun.body)})")
    lines.append(f"  (main {print_corec(program.main)}))")
    return "\n".join(lines) + "\n"
