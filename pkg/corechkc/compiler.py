"""Type-directed compilation from the checked core language to CoreC.

Compilation converts to A-normal form, inserts explicit null and bounds checks, and keeps
the runtime bounds of null-terminated array pointers in shadow variables so that widening
by ``strlen`` and by ``if (*x)`` survives erasure. Every generated name contains ``$``,
which the parser rejects in source identifiers.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

from corechkc.checker import Pred, PredEnv, type_join
from corechkc.core import cell_layout, subst_type, type_free_vars
from corechkc.errors import CompileError
from corechkc.models.corec import (
    HOLE,
    Atom,
    Binop,
    BoundsFail,
    CAssign,
    CCall,
    CDeref,
    CExpr,
    CFun,
    CIf,
    Closure,
    CMalloc,
    Command,
    CProgram,
    CRet,
    CStrlen,
    Name,
    NullFail,
    Num,
    Op,
    StackAssign,
    let,
)
from corechkc.models.state import Stack
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
    is_checked_array,
    is_checked_nt,
)
from corechkc.printer import print_expr
from corechkc.semantics import decompose

logger = logging.getLogger(__name__)

ShadowMap = Mapping[str, tuple[str, str]]


@dataclass(frozen=True, slots=True)
class Compiled:
    """Code to run first, the atom holding the value, its type, and its ρ key if tracked."""

    closure: Closure
    atom: Atom
    type: Type
    track: str | None = None


@dataclass(frozen=True, slots=True)
class _Scope:
    """Source names mapped to their CoreC names, types over CoreC names, and facts about them."""

    names: Mapping[str, str]
    types: Mapping[str, Type]
    theta: PredEnv = field(default_factory=dict)

    def bind(self, name: str, cname: str, ty: Type) -> _Scope:
        theta = {k: v for k, v in self.theta.items() if k != cname}
        return _Scope({**self.names, name: cname}, {**self.types, name: ty}, theta)

    def assume(self, cname: str, pred: Pred) -> _Scope:
        return _Scope(self.names, self.types, {**self.theta, cname: pred})

    def lookup(self, name: str) -> tuple[str, Type]:
        if name not in self.names:
            raise CompileError(f"unbound variable {name}")
        return self.names[name], self.types[name]

    def rename(self, ty: Type) -> Type:
        mapping = {
            x: VarBound(self.names[x], 0) for x in type_free_vars(ty) if x in self.names
        }
        return subst_type(ty, mapping)


def _atom_bound(a: Atom) -> Bound:
    return ConstBound(a.value) if isinstance(a, Num) else VarBound(a.name, 0)


def _base(name: str) -> str:
    return name.split("$", 1)[0]


class Compiler:
    """One compilation unit; owns the fresh-name counter and the shadow map."""

    def __init__(self, funs: FunEnv, structs: StructEnv, start: int = 0):
        self.funs = funs
        self.structs = structs
        self.counter = start
        self.rho: dict[str, tuple[str, str]] = {}
        # stack literal seen inside each pending ret frame, keyed by node identity
        self.inside: dict[int, Lit] = {}
        self.phi: Stack | None = None

    def fresh(self, hint: str = "") -> str:
        name = f"{hint}${self.counter}"
        self.counter += 1
        return name

    # -- bound atoms ----------------------------------------------------------

    def _bound_atom(self, b: Bound) -> tuple[Closure, Atom]:
        if isinstance(b, ConstBound):
            return HOLE, Num(b.value)
        if b.offset == 0:
            return HOLE, Name(b.var)
        t = self.fresh()
        return let(t, Binop(Name(b.var), Op.ADD, Num(b.offset))), Name(t)

    def _bounds_atoms(
        self, rho: ShadowMap, key: str | None, ty: Type
    ) -> tuple[Closure, Atom, Atom]:
        if key is not None and key in rho:
            lo, hi = rho[key]
            return HOLE, Name(lo), Name(hi)
        view = array_view(ty)
        if view is None:
            raise CompileError(f"no bounds for {ty!r}")
        pre_lo, lo = self._bound_atom(view[1].bounds.lo)
        pre_hi, hi = self._bound_atom(view[1].bounds.hi)
        return pre_lo.then(pre_hi), lo, hi

    def _require(self, cond: Atom | Binop, fail: Command) -> Closure:
        return let(self.fresh(), CIf(cond, Num(0), fail))

    def _refute(self, cond: Atom | Binop, fail: Command) -> Closure:
        return let(self.fresh(), CIf(cond, fail, Num(0)))

    # -- dynamic checks -------------------------------------------------------

    def check_null(self, a: Atom, mode: Mode) -> Closure:
        if mode is Mode.UNCHECKED:
            return HOLE
        return self._require(a, NullFail())

    def check_bounds(self, rho: ShadowMap, key: str | None, ty: Type, index: Atom) -> Closure:
        """Read check: ``lo ≤ i`` and ``i < hi``, or ``i ≤ hi`` for null-terminated arrays."""
        view = array_view(ty)
        if view is None or view[0] is Mode.UNCHECKED:
            return HOLE
        pre, lo, hi = self._bounds_atoms(rho, key, ty)
        lower = self._require(Binop(lo, Op.LE, index), BoundsFail())
        if view[1].null_terminated:
            upper = self._require(Binop(index, Op.LE, hi), BoundsFail())
        else:
            upper = self._refute(Binop(hi, Op.LE, index), BoundsFail())
        return pre.then(lower, upper)

    def check_bounds_w(self, rho: ShadowMap, key: str | None, ty: Type, index: Atom) -> Closure:
        """Write check: the upper bound is strict for both array kinds."""
        view = array_view(ty)
        if view is None or view[0] is Mode.UNCHECKED:
            return HOLE
        pre, lo, hi = self._bounds_atoms(rho, key, ty)
        lower = self._require(Binop(lo, Op.LE, index), BoundsFail())
        upper = self._refute(Binop(hi, Op.LE, index), BoundsFail())
        return pre.then(lower, upper)

    def check_bounds_dyn(
        self, rho: ShadowMap, key: str | None, target: Type, source: Type
    ) -> Closure:
        view = array_view(target)
        if view is None or view[0] is Mode.UNCHECKED:
            return HOLE
        pre_s, s_lo, s_hi = self._bounds_atoms(rho, key, source)
        pre_t, t_lo, t_hi = self._bounds_atoms({}, None, target)
        return pre_s.then(
            pre_t,
            self._require(Binop(s_lo, Op.LE, t_lo), BoundsFail()),
            self._require(Binop(t_hi, Op.LE, s_hi), BoundsFail()),
        )

    # -- widening -------------------------------------------------------------

    def extend_rho(self, rho: ShadowMap, x: str, ty: Type) -> tuple[Closure, ShadowMap]:
        if not is_checked_nt(ty):
            return HOLE, rho
        bounds = ty.pointee.bounds
        pre_lo, lo = self._bound_atom(bounds.lo)
        pre_hi, hi = self._bound_atom(bounds.hi)
        x_lo, x_hi = self.fresh(f"{_base(x)}_lo"), self.fresh(f"{_base(x)}_hi")
        closure = pre_lo.then(pre_hi, let(x_lo, lo), let(x_hi, hi))
        return closure, {**rho, x: (x_lo, x_hi)}

    def widen_deref(self, rho: ShadowMap, x: str, ty: Type) -> Closure:
        if x not in rho or not is_checked_nt(ty):
            return HOLE
        _, x_hi = rho[x]
        return let(self.fresh(), CIf(Name(x_hi), Num(0), StackAssign(x_hi, Num(1))))

    def widen_strlen(self, rho: ShadowMap, key: str | None, a: Atom, ty: Type) -> Closure:
        if key is None or key not in rho or not is_checked_nt(ty):
            return HOLE
        _, x_hi = rho[key]
        return let(self.fresh(), CIf(Binop(a, Op.LE, Name(x_hi)), Num(0), StackAssign(x_hi, a)))

    # -- helpers --------------------------------------------------------------

    def extend(self, x: str, ty: Type) -> Closure:
        """Apply :meth:`extend_rho` to the unit's own shadow map."""
        closure, rho = self.extend_rho(self.rho, x, ty)
        self.rho = dict(rho)
        return closure

    def _copy_shadows(self, key: str, name: str) -> Closure:
        lo, hi = self.rho[key]
        new_lo, new_hi = self.fresh(f"{_base(name)}_lo"), self.fresh(f"{_base(name)}_hi")
        self.rho[name] = (new_lo, new_hi)
        return let(new_lo, Name(lo)).then(let(new_hi, Name(hi)))

    def _pin(self, c: Compiled) -> tuple[Compiled, Closure]:
        """Snapshot tracked bounds so later operands cannot widen them underneath us."""
        if c.track is None:
            return c, HOLE
        t = self.fresh()
        closure = let(t, c.atom).then(self._copy_shadows(c.track, t))
        return Compiled(c.closure, Name(t), c.type, t), closure

    def _publish(self, c: Compiled, r_lo: str, r_hi: str, fallback: Type) -> Closure:
        source = c.type if array_view(c.type) is not None else fallback
        pre, lo, hi = self._bounds_atoms(self.rho, c.track, source)
        return pre.then(
            let(self.fresh(), StackAssign(r_lo, lo)), let(self.fresh(), StackAssign(r_hi, hi))
        )

    def _arms(
        self, arms: list[tuple[Compiled, Closure]], ty: Type
    ) -> tuple[Closure, list[CExpr], str | None]:
        """Close each arm over its own code; checked arrays publish bounds to result vars."""
        if not is_checked_array(ty):
            return HOLE, [prefix.then(c.closure).plug(c.atom) for c, prefix in arms], None
        r_lo, r_hi = self.fresh("r_lo"), self.fresh("r_hi")
        pre = let(r_lo, Num(0)).then(let(r_hi, Num(0)))
        exprs = [
            prefix.then(c.closure, self._publish(c, r_lo, r_hi, ty)).plug(c.atom)
            for c, prefix in arms
        ]
        key = self.fresh()
        self.rho[key] = (r_lo, r_hi)
        return pre, exprs, key

    # -- expressions ----------------------------------------------------------

    def compile_expr(self, scope: _Scope, e: Expr) -> Compiled:
        match e:
            case Lit(n, ty):
                return Compiled(HOLE, Num(n), ty)
            case Var(name):
                cname, ty = scope.lookup(name)
                return Compiled(HOLE, Name(cname), ty, cname if cname in self.rho else None)
            case Cast(ty, inner):
                c = self.compile_expr(scope, inner)
                return Compiled(c.closure, c.atom, scope.rename(ty))
            case DynCast(ty, inner):
                c = self.compile_expr(scope, inner)
                target = scope.rename(ty)
                check = self.check_bounds_dyn(self.rho, c.track, target, c.type)
                return Compiled(c.closure.then(check), c.atom, target)
            case Strlen(name):
                return self._strlen(scope, name)
            case Let(name, Strlen(ptr), body) if ptr != name and is_checked_nt(
                scope.types.get(ptr, INT)
            ):
                return self._let_strlen(scope, name, ptr, body)
            case Let(name, bound, body):
                return self._let(scope, name, bound, body)
            case If(Deref(Var(name)) as cond, then, orelse) if is_checked_nt(
                scope.types.get(name, INT)
            ):
                return self._if_nt(scope, name, cond, then, orelse)
            case If(cond, then, orelse):
                c1 = self.compile_expr(scope, cond)
                c2, c3 = self.compile_expr(scope, then), self.compile_expr(scope, orelse)
                return self._branch(scope, c1, [(c2, HOLE), (c3, HOLE)])
            case Ret():
                return self._ret(scope, e)
            case Call(name, args):
                return self._call(scope, name, args)
            case Deref(Add(left, right)):
                return self._index(scope, left, right)
            case Deref(inner):
                return self._deref(scope, inner)
            case Assign(Add(left, right), value):
                return self._index_assign(scope, left, right, value)
            case Assign(target, value):
                return self._assign(scope, target, value)
            case Malloc(ty):
                return self._malloc(scope.rename(ty))
            case Add(left, right):
                c1 = self.compile_expr(scope, left)
                c2 = self.compile_expr(scope, right)
                t = self.fresh()
                closure = c1.closure.then(c2.closure, let(t, Binop(c1.atom, Op.ADD, c2.atom)))
                return Compiled(closure, Name(t), INT)
            case FieldAddr(inner, field_name):
                return self._field(scope, inner, field_name)
            case Unchecked(inner):
                return self.compile_expr(scope, inner)
        raise CompileError(f"cannot compile {print_expr(e)}")

    def _strlen(self, scope: _Scope, name: str) -> Compiled:
        cname, ty = scope.lookup(name)
        view = array_view(ty)
        if view is None:
            raise CompileError(f"strlen of {name}, which is not an array pointer")
        key = cname if cname in self.rho else None
        t = self.fresh()
        closure = self.check_null(Name(cname), view[0]).then(
            self.check_bounds(self.rho, key, ty, Num(0)),
            let(t, CStrlen(Name(cname))),
            self.widen_strlen(self.rho, key, Name(t), ty),
        )
        return Compiled(closure, Name(t), INT)

    def _let_strlen(self, scope: _Scope, name: str, ptr: str, body: Expr) -> Compiled:
        c1 = self._strlen(scope, ptr)
        cname = self.fresh(name)
        cptr, pty = scope.lookup(ptr)
        arr = pty.pointee
        widened = PtrType(
            Mode.CHECKED, ArrayType(BoundPair(arr.bounds.lo, VarBound(cname, 0)), arr.elem, True)
        )
        inner = scope.bind(name, cname, INT).bind(ptr, cptr, widened).assume(cname, Pred.GE_ZERO)
        c2 = self.compile_expr(inner, body)
        closure = c1.closure.then(let(cname, c1.atom), c2.closure)
        return Compiled(closure, c2.atom, c2.type, c2.track)

    def _let(self, scope: _Scope, name: str, bound: Expr, body: Expr) -> Compiled:
        c1 = self.compile_expr(scope, bound)
        cname = self.fresh(name)
        closure = c1.closure.then(let(cname, c1.atom))
        if c1.track is not None:
            closure = closure.then(self._copy_shadows(c1.track, cname))
        else:
            closure = closure.then(self.extend(cname, c1.type))
        c2 = self.compile_expr(scope.bind(name, cname, c1.type), body)
        ty = c2.type
        if isinstance(c1.type, IntType) and cname in type_free_vars(ty):
            ty = subst_type(ty, {cname: _atom_bound(c1.atom)})
        return Compiled(closure.then(c2.closure), c2.atom, ty, c2.track)

    def _branch(
        self, scope: _Scope, c1: Compiled, arms: list[tuple[Compiled, Closure]]
    ) -> Compiled:
        (c2, _), (c3, _) = arms
        ty = type_join(c2.type, c3.type, scope.theta, self.phi)
        if ty is None:
            raise CompileError(f"branches of types {c2.type!r} and {c3.type!r} do not join")
        pre, (then_e, else_e), key = self._arms(arms, ty)
        t = self.fresh()
        closure = c1.closure.then(pre, let(t, CIf(c1.atom, then_e, else_e)))
        return Compiled(closure, Name(t), ty, key)

    def _if_nt(
        self, scope: _Scope, name: str, cond: Deref, then: Expr, orelse: Expr
    ) -> Compiled:
        cname, ty = scope.lookup(name)
        c1 = self.compile_expr(scope, cond)
        then_scope = scope
        arr = ty.pointee
        if arr.bounds.hi == ConstBound(0):
            widened = PtrType(
                Mode.CHECKED, ArrayType(BoundPair(arr.bounds.lo, ConstBound(1)), arr.elem, True)
            )
            then_scope = scope.bind(name, cname, widened)
        widen = self.widen_deref(self.rho, cname, ty)
        c2 = self.compile_expr(then_scope, then)
        c3 = self.compile_expr(scope, orelse)
        return self._branch(scope, c1, [(c2, widen), (c3, HOLE)])

    def _ret(self, scope: _Scope, node: Ret) -> Compiled:
        name = node.name
        inner_lit = self.inside.get(id(node))
        outer = self.rho.pop(name, None) if inner_lit is not None else None
        pre = HOLE
        if inner_lit is None:
            cname, _ = scope.lookup(name)
            body_scope = scope
        else:
            cname = name
            body_scope = scope.bind(name, name, inner_lit.type)
            pre = self.extend(name, inner_lit.type)
        c = self.compile_expr(body_scope, node.body)
        arms_pre, (inner,), key = self._arms([(c, HOLE)], c.type)
        if inner_lit is not None:
            self.rho.pop(name, None)
            if outer is not None:
                self.rho[name] = outer
        t = self.fresh()
        restored = None if node.saved is None else node.saved.value
        closure = pre.then(arms_pre, let(t, CRet(cname, restored, inner)))
        return Compiled(closure, Name(t), c.type, key)

    def _call(self, scope: _Scope, name: str, args: tuple[Expr, ...]) -> Compiled:
        fdef = self.funs.get(name)
        if fdef is None or len(fdef.params) != len(args):
            raise CompileError(f"bad call to {name}")
        closure = HOLE
        atoms: list[Atom] = []
        for arg in args:
            c = self.compile_expr(scope, arg)
            closure = closure.then(c.closure)
            atoms.append(c.atom)
        mapping = {
            pname: _atom_bound(a)
            for (pname, pty), a in zip(fdef.params, atoms)
            if isinstance(pty, IntType)
        }
        t = self.fresh()
        closure = closure.then(let(t, CCall(name, tuple(atoms))))
        return Compiled(closure, Name(t), subst_type(fdef.ret, mapping))

    def _deref(self, scope: _Scope, inner: Expr) -> Compiled:
        c = self.compile_expr(scope, inner)
        if not isinstance(c.type, PtrType) or isinstance(c.type.pointee, StructType):
            raise CompileError(f"cannot dereference {print_expr(inner)}")
        t = self.fresh()
        closure = c.closure.then(self.check_null(c.atom, c.type.mode))
        view = array_view(c.type)
        if view is not None:
            closure = closure.then(self.check_bounds(self.rho, c.track, c.type, Num(0)))
            result_ty = view[1].elem
        else:
            result_ty = c.type.pointee
        return Compiled(closure.then(let(t, CDeref(c.atom))), Name(t), result_ty)

    def _array_operand(self, scope: _Scope, left: Expr) -> Compiled:
        c = self.compile_expr(scope, left)
        if array_view(c.type) is None:
            raise CompileError(f"pointer arithmetic on {print_expr(left)}")
        return c

    def _index(self, scope: _Scope, left: Expr, right: Expr) -> Compiled:
        c1 = self._array_operand(scope, left)
        c2 = self.compile_expr(scope, right)
        pin = HOLE
        if not c2.closure.is_hole:
            c1, pin = self._pin(c1)
        mode, arr = array_view(c1.type)
        addr, t = self.fresh(), self.fresh()
        closure = c1.closure.then(
            pin,
            c2.closure,
            self.check_null(c1.atom, mode),
            let(addr, Binop(c1.atom, Op.ADD, c2.atom)),
            self.check_bounds(self.rho, c1.track, c1.type, c2.atom),
            let(t, CDeref(Name(addr))),
        )
        return Compiled(closure, Name(t), arr.elem)

    def _index_assign(self, scope: _Scope, left: Expr, right: Expr, value: Expr) -> Compiled:
        c1 = self._array_operand(scope, left)
        c2 = self.compile_expr(scope, right)
        c3 = self.compile_expr(scope, value)
        pin = HOLE
        if not (c2.closure.is_hole and c3.closure.is_hole):
            c1, pin = self._pin(c1)
        mode, arr = array_view(c1.type)
        addr, t = self.fresh(), self.fresh()
        closure = c1.closure.then(
            pin,
            c2.closure,
            self.check_null(c1.atom, mode),
            c3.closure,
            let(addr, Binop(c1.atom, Op.ADD, c2.atom)),
            self.check_bounds_w(self.rho, c1.track, c1.type, c2.atom),
            let(t, CAssign(Name(addr), c3.atom)),
        )
        return Compiled(closure, Name(t), arr.elem)

    def _assign(self, scope: _Scope, target: Expr, value: Expr) -> Compiled:
        c1 = self.compile_expr(scope, target)
        c2 = self.compile_expr(scope, value)
        if not isinstance(c1.type, PtrType) or isinstance(c1.type.pointee, StructType):
            raise CompileError(f"cannot assign through {print_expr(target)}")
        view = array_view(c1.type)
        t = self.fresh()
        if view is None:
            closure = c1.closure.then(
                c2.closure,
                self.check_null(c1.atom, c1.type.mode),
                let(t, CAssign(c1.atom, c2.atom)),
            )
            return Compiled(closure, Name(t), c1.type.pointee)
        pin = HOLE
        if not c2.closure.is_hole:
            c1, pin = self._pin(c1)
        closure = c1.closure.then(
            pin,
            c2.closure,
            self.check_null(c1.atom, view[0]),
            self.check_bounds_w(self.rho, c1.track, c1.type, Num(0)),
            let(t, CAssign(c1.atom, c2.atom)),
        )
        return Compiled(closure, Name(t), view[1].elem)

    def _malloc(self, ty: Type) -> Compiled:
        closure = HOLE
        if isinstance(ty, ArrayType):
            pre_lo, lo = self._bound_atom(ty.bounds.lo)
            pre_hi, hi = self._bound_atom(ty.bounds.hi)
            closure = pre_lo.then(pre_hi)
            if isinstance(lo, Name):
                closure = closure.then(self._refute(lo, BoundsFail()))
            elif lo.value != 0:
                closure = closure.then(let(self.fresh(), BoundsFail()))
            if isinstance(hi, Name):
                closure = closure.then(self._refute(Binop(hi, Op.LE, Num(0)), BoundsFail()))
            elif hi.value <= 0:
                closure = closure.then(let(self.fresh(), BoundsFail()))
            if not ty.null_terminated:
                size: Atom = hi
            elif isinstance(hi, Num):
                size = Num(hi.value + 1)
            else:
                s = self.fresh()
                closure = closure.then(let(s, Binop(hi, Op.ADD, Num(1))))
                size = Name(s)
        else:
            size = Num(len(cell_layout(ty, self.structs)))
        t = self.fresh()
        closure = closure.then(let(t, CMalloc(size)))
        return Compiled(closure, Name(t), PtrType(Mode.CHECKED, ty))

    def _field(self, scope: _Scope, inner: Expr, field_name: str) -> Compiled:
        c = self.compile_expr(scope, inner)
        if not (isinstance(c.type, PtrType) and isinstance(c.type.pointee, StructType)):
            raise CompileError(f"field access on {print_expr(inner)}")
        sdef = self.structs.get(c.type.pointee.name)
        index = sdef.index(field_name) if sdef else None
        if index is None:
            raise CompileError(f"no field {field_name}")
        t = self.fresh()
        closure = c.closure.then(
            self.check_null(c.atom, c.type.mode), let(t, Binop(c.atom, Op.ADD, Num(index)))
        )
        return Compiled(closure, Name(t), PtrType(c.type.mode, sdef.fields[index][1]))

    # -- units ----------------------------------------------------------------

    def close(self, scope: _Scope, prelude: Closure, e: Expr) -> CExpr:
        c = self.compile_expr(scope, e)
        return prelude.then(c.closure).plug(c.atom)

    def compile_fun_body(self, params: tuple[tuple[str, Type], ...], body: Expr) -> CExpr:
        self.rho = {}
        scope = _Scope({}, {})
        prelude = HOLE
        for pname, pty in params:
            scope = scope.bind(pname, pname, pty)
            prelude = prelude.then(self.extend(pname, pty))
        return self.close(scope, prelude, body)


def compile_expr(
    env: Mapping[str, Type],
    rho: ShadowMap,
    e: Expr,
    funs: FunEnv | None = None,
    structs: StructEnv | None = None,
    start: int = 0,
) -> Compiled:
    """Compile ``e`` under Γ (names map to themselves) and shadow map ρ."""
    compiler = Compiler(funs or {}, structs or {}, start)
    compiler.rho = dict(rho)
    scope = _Scope({x: x for x in env}, dict(env))
    return compiler.compile_expr(scope, e)


def compile_fun(funs: FunEnv, structs: StructEnv, start: int = 0) -> dict[str, CFun]:
    return _compile_funs(Compiler(funs, structs, start))


def _compile_funs(compiler: Compiler) -> dict[str, CFun]:
    compiled = {}
    for fdef in compiler.funs.values():
        body = compiler.compile_fun_body(fdef.params, fdef.body)
        compiled[fdef.name] = CFun(fdef.name, tuple(p for p, _ in fdef.params), body)
    return compiled


def compile_program(program: Program) -> CProgram:
    compiler = Compiler(program.funs, program.structs)
    funs = _compile_funs(compiler)
    compiler.rho = {}
    main = compiler.close(_Scope({}, {}), HOLE, program.main)
    logger.debug("compiled %d function(s), %d fresh names", len(funs), compiler.counter)
    return CProgram(funs, main)


def compile_config(
    phi: Stack, e: Expr, funs: FunEnv, structs: StructEnv, start: int = 0
) -> CExpr:
    """Compile a runtime configuration's expression against its stack annotations.

    ``phi`` is the stack seen by the redex. Each pending ``ret`` frame on the way to it
    restores a binding, so code outside that frame is compiled against the restored one.
    """
    compiler = Compiler(funs, structs, start)
    compiler.phi = phi
    dec = decompose(e)
    path = [parent for parent, _ in dec.context.frames] + [dec.redex] if dec else []
    stack = dict(phi)
    for node in reversed([n for n in path if isinstance(n, Ret)]):
        if node.name in stack:
            compiler.inside[id(node)] = stack[node.name]
        if node.saved is None:
            stack.pop(node.name, None)
        else:
            stack[node.name] = node.saved
    scope = _Scope({x: x for x in stack}, {x: lit.type for x, lit in stack.items()})
    prelude = HOLE
    for x, lit in stack.items():
        prelude = prelude.then(compiler.extend(x, lit.type))
    return compiler.close(scope, prelude, e)
