"""Substitution, sizing, free variables and well-formedness over the syntax."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import replace

from corechkc.errors import TypeSizeError, WellFormednessError
from corechkc.models.state import Stack
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
    PtrType,
    Ret,
    Strlen,
    StructEnv,
    StructType,
    Type,
    Unchecked,
    Var,
    VarBound,
    WordType,
    children,
)

# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def subst_bound(b: Bound, mapping: Mapping[str, Bound]) -> Bound:
    if isinstance(b, VarBound) and b.var in mapping:
        target = mapping[b.var]
        if isinstance(target, ConstBound):
            return ConstBound(target.value + b.offset)
        return VarBound(target.var, target.offset + b.offset)
    return b


def subst_type(ty: Type, mapping: Mapping[str, Bound]) -> Type:
    """Replace bound variables of ``ty`` according to ``mapping``."""
    if not mapping:
        return ty
    match ty:
        case PtrType(mode, pointee):
            return PtrType(mode, subst_type(pointee, mapping))
        case ArrayType(BoundPair(lo, hi), elem, nt):
            return ArrayType(
                BoundPair(subst_bound(lo, mapping), subst_bound(hi, mapping)),
                subst_type(elem, mapping),
                nt,
            )
        case _:
            return ty


def type_free_vars(ty: Type) -> set[str]:
    match ty:
        case PtrType(_, pointee):
            return type_free_vars(pointee)
        case ArrayType(BoundPair(lo, hi), elem, _):
            names = {b.var for b in (lo, hi) if isinstance(b, VarBound)}
            return names | type_free_vars(elem)
        case _:
            return set()


def stack_bounds(phi: Stack | None) -> dict[str, Bound]:
    """Substitution sending each integer stack variable to its value."""
    if not phi:
        return {}
    return {x: ConstBound(v.value) for x, v in phi.items() if isinstance(v.type, IntType)}


def close_type(ty: Type, phi: Stack) -> Type:
    """Apply the stack to a type; raises TypeSizeError if a bound variable is unbound."""
    closed = subst_type(ty, stack_bounds(phi))
    missing = type_free_vars(closed)
    if missing:
        raise TypeSizeError(f"unresolved bound variable(s): {', '.join(sorted(missing))}")
    return closed


def bound_value(b: Bound) -> int:
    if isinstance(b, ConstBound):
        return b.value
    raise TypeSizeError(f"unresolved bound variable: {b.var}")


# ---------------------------------------------------------------------------
# Sizing and cell layout
# ---------------------------------------------------------------------------


def cell_layout(ty: Type, structs: StructEnv) -> list[tuple[int, WordType]]:
    """Offsets and per-cell annotations covered by a pointer to closed ``ty``."""
    match ty:
        case ArrayType(BoundPair(lo, hi), elem, nt):
            lo_v, hi_v = bound_value(lo), bound_value(hi)
            end = hi_v + 1 if nt else hi_v
            return [(i, elem) for i in range(lo_v, end)]
        case StructType(name):
            sdef = structs.get(name)
            if sdef is None:
                raise TypeSizeError(f"unknown struct {name}")
            return [(i, fty) for i, (_, fty) in enumerate(sdef.fields)]
        case _:
            return [(0, ty)]


def type_size(ty: Type, structs: StructEnv, phi: Stack | None = None) -> int:
    closed = close_type(ty, phi or {})
    match closed:
        case ArrayType(BoundPair(lo, hi), _, nt):
            size = bound_value(hi) - bound_value(lo) + (1 if nt else 0)
            if size < 0:
                raise TypeSizeError(f"negative size {size}")
            return size
        case StructType():
            return len(cell_layout(closed, structs))
        case _:
            return 1


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


def wf_bound(env: Mapping[str, Type], b: Bound) -> bool:
    return isinstance(b, ConstBound) or isinstance(env.get(b.var), IntType)


def wf_type(env: Mapping[str, Type], ty: Type, structs: StructEnv) -> bool:
    match ty:
        case IntType():
            return True
        case PtrType(_, pointee):
            return wf_type(env, pointee, structs)
        case ArrayType(BoundPair(lo, hi), elem, _):
            return wf_bound(env, lo) and wf_bound(env, hi) and wf_type(env, elem, structs)
        case StructType(name):
            return name in structs
    return False


def check_structs(structs: StructEnv) -> None:
    for name, sdef in structs.items():
        if not sdef.fields:
            raise WellFormednessError(name, "struct has no fields")
        seen: set[str] = set()
        for fname, fty in sdef.fields:
            if fname in seen:
                raise WellFormednessError(name, f"duplicate field {fname}")
            seen.add(fname)
            if not wf_type({}, fty, structs):
                raise WellFormednessError(name, f"field {fname} has an ill-formed type")


# ---------------------------------------------------------------------------
# Free variables and the bound view of expressions
# ---------------------------------------------------------------------------


def free_vars(e: Expr) -> set[str]:
    match e:
        case Var(name):
            return {name}
        case Strlen(name):
            return {name}
        case Lit(_, ty):
            return type_free_vars(ty)
        case Malloc(ty):
            return type_free_vars(ty)
        case Let(name, bound, body):
            return free_vars(bound) | (free_vars(body) - {name})
        case Cast(ty, inner) | DynCast(ty, inner):
            return type_free_vars(ty) | free_vars(inner)
        case Call(_, args):
            return set().union(*(free_vars(a) for a in args))
        case Add(a, b) | Assign(a, b):
            return free_vars(a) | free_vars(b)
        case Deref(inner) | Unchecked(inner) | FieldAddr(inner, _):
            return free_vars(inner)
        case If(c, t, f):
            return free_vars(c) | free_vars(t) | free_vars(f)
        case Ret(name, _, body):
            return free_vars(body) | {name}
    return set()


def as_bound(e: Expr) -> Bound | None:
    """View ``e`` as a bounds expression when it syntactically is one."""
    match e:
        case Lit(n, IntType()):
            return ConstBound(n)
        case Var(name):
            return VarBound(name, 0)
        case Add(Var(name), Lit(n, IntType())):
            return VarBound(name, n)
    return None


def literals(e: Expr) -> Iterator[Lit]:
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Lit):
            yield node
        elif isinstance(node, Ret) and node.saved is not None:
            yield node.saved
        stack.extend(children(node))


# ---------------------------------------------------------------------------
# Subterm paths
# ---------------------------------------------------------------------------

Path = tuple[str | int, ...]


def _slots(e: Expr) -> tuple[str | int, ...]:
    match e:
        case Let():
            return ("bound", "body")
        case Cast() | DynCast() | Deref() | Unchecked() | FieldAddr():
            return ("expr",)
        case Call(_, args):
            return tuple(range(len(args)))
        case Add():
            return ("left", "right")
        case Assign():
            return ("target", "value")
        case If():
            return ("cond", "then", "orelse")
        case Ret():
            return ("body",)
    return ()


def _child(e: Expr, slot: str | int) -> Expr:
    return e.args[slot] if isinstance(slot, int) else getattr(e, slot)


def subterm_paths(e: Expr) -> list[Path]:
    """Every subterm position in pre-order, the root being ``()``."""
    paths: list[Path] = []
    stack: list[tuple[Path, Expr]] = [((), e)]
    while stack:
        path, node = stack.pop()
        paths.append(path)
        for slot in reversed(_slots(node)):
            stack.append(((*path, slot), _child(node, slot)))
    return paths


def subterm_at(e: Expr, path: Path) -> Expr:
    for slot in path:
        e = _child(e, slot)
    return e


def replace_subterm(e: Expr, path: Path, new: Expr) -> Expr:
    if not path:
        return new
    slot, rest = path[0], path[1:]
    child = replace_subterm(_child(e, slot), rest, new)
    if isinstance(slot, int):
        args = list(e.args)
        args[slot] = child
        return replace(e, args=tuple(args))
    return replace(e, **{slot: child})
