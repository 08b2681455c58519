"""Random generation of typed terms by running the typing rules backwards.

Each goal type offers a list of weighted alternatives, one per rule whose conclusion can
produce it. An alternative builds its premises recursively and returns the finished node
together with the type its rule concludes, so no term is ever handed to the checker here;
whether that type really is the checker's is what the ``generator`` property measures.
When a premise comes back with a type the rule cannot consume as is, the node is
coerced with a static cast to the requested goal. Terminal rules get more weight as the
depth budget runs out and after every failed attempt, so generation always finishes.
"""

from __future__ import annotations

import itertools
import logging
import random
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

from corechkc.checker import Pred, TypeChecker, subtype, type_join
from corechkc.core import (
    Path,
    replace_subterm,
    subst_type,
    subterm_at,
    subterm_paths,
    type_free_vars,
)
from corechkc.errors import TypeCheckError, TypeSizeError, WellFormednessError
from corechkc.models.report import TERMINAL_RULES, GenConfig
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
    Strlen,
    StructDef,
    StructEnv,
    StructType,
    Type,
    Unchecked,
    Var,
    VarBound,
    array_ptr,
    array_view,
    is_checked_nt,
)

logger = logging.getLogger(__name__)

NT_EMPTY = array_ptr(0, 0, nt=True)

STRUCTS: StructEnv = {
    "cell": StructDef("cell", (("val", INT), ("str", NT_EMPTY))),
}

# chance that an indexed write targets the upper bound itself
WRITE_AT_BOUND = 0.25
# chance that a widening rule reads at the bound it just widened to
READ_AT_WIDENED = 0.6


class Unsynthesizable(Exception):
    pass


class Relaxation(str, Enum):
    """The single premise a near-ill-typed term is allowed to break."""

    DEREF_MODE = "T-Def"
    DEREF_ARRAY_MODE = "T-DefArr"
    CAST_CHECKED = "T-Cast"
    ASSIGN_SUBTYPE = "T-Assign"
    ASSIGN_ARRAY_SUBTYPE = "T-AssignArr"
    CALL_ARGUMENT = "T-Fun"
    STRING_OFF_BY_ONE = "G-ASTR"


@dataclass(frozen=True, slots=True)
class _Ctx:
    env: dict[str, Type]
    theta: dict[str, Pred]
    mode: Mode = Mode.CHECKED

    def bind(self, name: str, ty: Type, pred: Pred | None = None) -> _Ctx:
        theta = {k: v for k, v in self.theta.items() if k != name}
        if pred is not None:
            theta[name] = pred
        return _Ctx({**self.env, name: ty}, theta, self.mode)


@dataclass(slots=True)
class GeneratedProgram:
    program: Program
    goal: Type
    relaxation: Relaxation | None = None
    site: Path | None = None

    def describe_site(self) -> str:
        if self.site is None:
            return ""
        return "/".join(str(slot) for slot in self.site) or "main"


Typed = tuple[Expr, Type]
Alternative = tuple[str, Callable[[], Typed]]


def _closed(ty: Type) -> bool:
    return not type_free_vars(ty)


def _widen_hi(ty: PtrType, hi) -> PtrType:
    arr = ty.pointee
    bounds = BoundPair(arr.bounds.lo, hi)
    return PtrType(ty.mode, ArrayType(bounds, arr.elem, arr.null_terminated))


def _cell(ty: PtrType) -> Type:
    """What a dereference of ``ty`` yields."""
    if isinstance(ty.pointee, ArrayType):
        return ty.pointee.elem
    return ty.pointee


def _takes_pointer(fdef: FunDef) -> bool:
    return any(isinstance(t, PtrType) for _, t in fdef.params)


class TermGenerator:
    def __init__(
        self,
        cfg: GenConfig,
        rng: random.Random,
        funs: FunEnv | None = None,
        structs: StructEnv | None = None,
    ):
        self.cfg = cfg
        self.rng = rng
        self.funs: FunEnv = funs or {}
        self.structs = structs if structs is not None else STRUCTS
        self._names = itertools.count()

    def fresh(self, prefix: str = "v") -> str:
        return f"{prefix}{next(self._names)}"

    # -- driver -------------------------------------------------------------

    def gen(self, ctx: _Ctx, goal: Type, depth: int) -> Expr:
        return self.typed(ctx, goal, depth)[0]

    def typed(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        """A term below ``goal`` and the type its outermost rule concludes for it."""
        alternatives = self._alternatives(ctx, goal, depth)
        weights = {rule: self.cfg.weights.get(rule, 0.0) for rule, _ in alternatives}
        if depth <= 2:
            for rule in TERMINAL_RULES:
                if rule in weights:
                    weights[rule] *= 2
        for _ in range(self.cfg.retries):
            live = [(rule, build) for rule, build in alternatives if weights[rule] > 0]
            if not live:
                break
            rule, build = self._pick(live, weights)
            try:
                e, ty = build()
            except Unsynthesizable as exc:
                logger.debug("regenerating %s for goal %r: %s", rule, goal, exc)
            else:
                if subtype(ty, goal, ctx.theta, None, self.structs):
                    return e, ty
                logger.debug("%s concluded %r, which misses goal %r", rule, ty, goal)
            for terminal in TERMINAL_RULES:
                if terminal in weights:
                    weights[terminal] = max(weights[terminal], 0.5) * 2
        logger.warning("generator fell back to a terminal after %d tries", self.cfg.retries)
        return self._terminal(ctx, goal)

    def _pick(self, live: list[Alternative], weights: dict[str, float]) -> Alternative:
        total = sum(weights[rule] for rule, _ in live)
        point = self.rng.uniform(0, total)
        for rule, build in live:
            point -= weights[rule]
            if point <= 0:
                return rule, build
        return live[-1]

    def _terminal(self, ctx: _Ctx, goal: Type) -> Typed:
        if _closed(goal):
            return self._literal(goal), goal
        candidates = self._vars(ctx, goal)
        if candidates:
            x = self.rng.choice(candidates)
            return Var(x), ctx.env[x]
        raise Unsynthesizable(f"no terminal for {goal!r}")

    # -- alternatives -------------------------------------------------------

    def _alternatives(self, ctx: _Ctx, goal: Type, depth: int) -> list[Alternative]:
        alts: list[Alternative] = []
        if _closed(goal):
            alts.append(("T-Const", lambda: (self._literal(goal), goal)))
        if self._vars(ctx, goal):
            alts.append(("T-Var", lambda: self._var(ctx, goal)))
        if depth <= 0:
            return alts
        d = depth - 1
        nt_vars = self._nt_vars(ctx)
        alts.append(("T-Let", lambda: self._let(ctx, goal, d)))
        alts.append(("T-If", lambda: self._if(ctx, goal, d)))
        alts.append(("T-IfNT", lambda: self._if_nt(ctx, goal, d)))
        if nt_vars:
            alts.append(("T-LetStr", lambda: self._let_strlen(ctx, goal, d)))
        if self._callable(goal):
            alts.append(("T-Fun", lambda: self._call(ctx, goal, d)))
        if isinstance(goal, (IntType, PtrType)):
            alts.append(("T-Def", lambda: self._deref(ctx, PtrType(Mode.CHECKED, goal), d)))
            alts.append(("T-DefArr", lambda: self._deref(ctx, self._array_of(goal), d)))
            alts.append(("T-Ind", lambda: self._index(ctx, goal, d)))
            alts.append(("T-Assign", lambda: self._assign(ctx, PtrType(Mode.CHECKED, goal), d)))
            alts.append(("T-AssignArr", lambda: self._assign(ctx, self._array_of(goal), d)))
            alts.append(("T-IndAssign", lambda: self._index_assign(ctx, goal, d)))
            alts.append(("T-Cast", lambda: self._cast(ctx, goal, d)))
        if isinstance(goal, IntType):
            alts.append(("T-Add", lambda: (Add(self.gen(ctx, INT, d), self.gen(ctx, INT, d)), INT)))
            if nt_vars:
                alts.append(("T-Str", lambda: (Strlen(self.rng.choice(nt_vars)), INT)))
        if isinstance(goal, PtrType) and goal.mode is Mode.CHECKED:
            alts.append(("T-Mac", lambda: self._malloc(goal)))
            if self._fields_for(goal):
                alts.append(("T-Struct", lambda: self._field(ctx, goal, d)))
            if isinstance(goal.pointee, ArrayType):
                alts.append(("T-DynCast", lambda: self._dyncast(ctx, goal, d)))
            if subtype(NT_EMPTY, goal, ctx.theta, None, self.structs):
                alts.append(("G-ASTR", lambda: (self.string_literal(ctx), NT_EMPTY)))
        return alts

    # -- helpers ------------------------------------------------------------

    def _vars(self, ctx: _Ctx, goal: Type) -> list[str]:
        return sorted(
            x for x, ty in ctx.env.items() if subtype(ty, goal, ctx.theta, None, self.structs)
        )

    def _nt_vars(self, ctx: _Ctx) -> list[str]:
        return sorted(x for x, ty in ctx.env.items() if is_checked_nt(ty))

    def _literal(self, goal: Type) -> Lit:
        if isinstance(goal, IntType):
            return Lit(self.rng.choice((0, 0, 1, 1, 2, 3, 4, 7, -1)), INT)
        return Lit(0, goal)

    def random_type(self, ctx: _Ctx) -> Type:
        roll = self.rng.random()
        if roll < 0.4:
            return INT
        if roll < 0.65:
            return array_ptr(0, self.rng.randint(0, 2), nt=True)
        if roll < 0.8:
            return array_ptr(0, self.rng.randint(1, 3))
        if roll < 0.9:
            return PtrType(Mode.CHECKED, INT)
        return PtrType(Mode.CHECKED, StructType("cell"))

    def _array_of(self, elem: Type) -> PtrType:
        k = self.rng.randint(1, 3)
        return array_ptr(0, k, elem, nt=self.rng.random() < 0.4 and isinstance(elem, IntType))

    def _index_for(
        self, ctx: _Ctx, arr: PtrType, depth: int, *, at_bound: bool = False
    ) -> Expr:
        hi = arr.pointee.bounds.hi
        if isinstance(hi, ConstBound):
            if at_bound:
                return Lit(hi.value, INT)
            if self.rng.random() < 0.7:
                return Lit(self.rng.randint(0, max(hi.value - 1, 0)), INT)
        return self.gen(ctx, INT, depth)

    def _fields_for(self, goal: PtrType) -> list[tuple[str, str]]:
        found = []
        for sdef in self.structs.values():
            for fname, fty in sdef.fields:
                if PtrType(Mode.CHECKED, fty) == goal:
                    found.append((sdef.name, fname))
        return found

    def _callable(self, goal: Type) -> list[str]:
        return sorted(
            name
            for name, fdef in self.funs.items()
            if _closed(fdef.ret) and subtype(fdef.ret, goal, {}, None, self.structs)
        )

    def _coerce(self, e: Expr, ty: Type, goal: Type) -> Typed:
        """Statically cast a checked pointer already below ``goal`` up to ``goal``."""
        if ty == goal:
            return e, ty
        return Cast(goal, e), goal

    def _scoped(self, e: Expr, ty: Type, name: str, goal: Type) -> Typed:
        """Keep ``name`` out of the type of the binding that introduced it."""
        if name in type_free_vars(ty):
            return self._coerce(e, ty, goal)
        return e, ty

    def _pointer(self, ctx: _Ctx, target: PtrType, depth: int) -> tuple[Expr, PtrType]:
        """A pointer below ``target`` that can be dereferenced and assigned through."""
        e, ty = self.typed(ctx, target, depth)
        if isinstance(ty.pointee, StructType) and not isinstance(target.pointee, StructType):
            return self._coerce(e, ty, target)
        return e, ty

    def _array_base(self, ctx: _Ctx, target: PtrType, depth: int) -> tuple[Expr, PtrType]:
        """An array pointer below ``target``; indexing needs an array view."""
        e, ty = self.typed(ctx, target, depth)
        if array_view(ty) is None:
            return self._coerce(e, ty, target)
        return e, ty

    def _guarded(self, ctx: _Ctx, cond: Expr) -> _Ctx:
        """The then-branch context: ``if (*x)`` on an empty string widens ``x`` by one."""
        if isinstance(cond, Deref) and isinstance(cond.expr, Var):
            x = cond.expr.name
            ty = ctx.env.get(x, INT)
            if is_checked_nt(ty) and ty.pointee.bounds.hi == ConstBound(0):
                return ctx.bind(x, _widen_hi(ty, ConstBound(1)), ctx.theta.get(x))
        return ctx

    def _joined(self, ctx: _Ctx, goal: Type, cond: Expr, then: Typed, orelse: Typed) -> Typed:
        joined = type_join(then[1], orelse[1], ctx.theta)
        if joined is None or not subtype(joined, goal, ctx.theta, None, self.structs):
            then, orelse = self._coerce(*then, goal), self._coerce(*orelse, goal)
            joined = goal
        return If(cond, then[0], orelse[0]), joined

    # -- rules --------------------------------------------------------------

    def _var(self, ctx: _Ctx, goal: Type) -> Typed:
        x = self.rng.choice(self._vars(ctx, goal))
        return Var(x), ctx.env[x]

    def _let(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        bound, bound_ty = self.typed(ctx, self.random_type(ctx), depth)
        if isinstance(bound, Strlen):
            return self._let_strlen_of(ctx, bound.name, goal, depth)
        name = self.fresh()
        body, ty = self._scoped(*self.typed(ctx.bind(name, bound_ty), goal, depth), name, goal)
        return Let(name, bound, body), ty

    def _if(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        nt_vars = self._nt_vars(ctx)
        if nt_vars and self.rng.random() < 0.3:
            cond: Expr = Deref(Var(self.rng.choice(nt_vars)))
        else:
            cond = self.gen(ctx, INT, depth)
        then = self.typed(self._guarded(ctx, cond), goal, depth)
        return self._joined(ctx, goal, cond, then, self.typed(ctx, goal, depth))

    def _if_nt(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        empty = [
            x for x in self._nt_vars(ctx) if ctx.env[x].pointee.bounds.hi == ConstBound(0)
        ]
        if empty and self.rng.random() < 0.5:
            return self._if_nt_on(ctx, self.rng.choice(empty), goal, depth)
        s = self.fresh("t")
        bound = self.string_literal(ctx)
        body, ty = self._if_nt_on(ctx.bind(s, NT_EMPTY), s, goal, depth)
        body, ty = self._scoped(body, ty, s, goal)
        return Let(s, bound, body), ty

    def _if_nt_on(self, ctx: _Ctx, x: str, goal: Type, depth: int) -> Typed:
        cond = Deref(Var(x))
        then_ctx = self._guarded(ctx, cond)
        if self.rng.random() < READ_AT_WIDENED:
            r = self.fresh()
            then = self.typed(then_ctx.bind(r, INT), goal, depth)
            body, then_ty = self._scoped(*then, r, goal)
            then = (Let(r, Deref(Add(Var(x), Lit(1, INT))), body), then_ty)
        else:
            then = self.typed(then_ctx, goal, depth)
        return self._joined(ctx, goal, cond, then, self.typed(ctx, goal, depth))

    def _let_strlen(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        return self._let_strlen_of(ctx, self.rng.choice(self._nt_vars(ctx)), goal, depth)

    def _let_strlen_of(self, ctx: _Ctx, x: str, goal: Type, depth: int) -> Typed:
        name = self.fresh()
        inner = ctx.bind(name, INT, Pred.GE_ZERO)
        inner = inner.bind(x, _widen_hi(ctx.env[x], VarBound(name, 0)), ctx.theta.get(x))
        if self.rng.random() < READ_AT_WIDENED:
            r = self.fresh()
            body, ty = self._scoped(*self.typed(inner.bind(r, INT), goal, depth), r, goal)
            body = Let(r, Deref(Add(Var(x), Var(name))), body)
        else:
            body, ty = self.typed(inner, goal, depth)
        body, ty = self._scoped(body, ty, name, goal)
        return Let(name, Strlen(x), body), ty

    def _call(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        fdef = self.funs[self.rng.choice(self._callable(goal))]
        dependent = set().union(*(type_free_vars(t) for _, t in fdef.params))
        mapping = {}
        args: list[Expr] = []
        for pname, pty in fdef.params:
            if pname in dependent:
                arg: Expr = Lit(self.rng.randint(0, 3), INT)
                mapping[pname] = ConstBound(arg.value)
            else:
                arg = self.gen(ctx, subst_type(pty, mapping), depth)
            args.append(arg)
        return Call(fdef.name, tuple(args)), fdef.ret

    def _deref(self, ctx: _Ctx, target: PtrType, depth: int) -> Typed:
        e, ty = self._pointer(ctx, target, depth)
        return Deref(e), _cell(ty)

    def _index(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        base, ty = self._array_base(ctx, self._array_of(goal), depth)
        return Deref(Add(base, self._index_for(ctx, ty, depth))), _cell(ty)

    def _assign(self, ctx: _Ctx, target: PtrType, depth: int) -> Typed:
        e, ty = self._pointer(ctx, target, depth)
        return Assign(e, self.gen(ctx, _cell(target), depth)), _cell(ty)

    def _index_assign(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        base, ty = self._array_base(ctx, self._array_of(goal), depth)
        at_bound = self.rng.random() < WRITE_AT_BOUND
        index = self._index_for(ctx, ty, depth, at_bound=at_bound)
        return Assign(Add(base, index), self.gen(ctx, goal, depth)), _cell(ty)

    def _cast(self, ctx: _Ctx, goal: Type, depth: int) -> Typed:
        if isinstance(goal, IntType):
            return Cast(INT, self.gen(ctx, self.random_type(ctx), depth)), INT
        if goal.mode is Mode.UNCHECKED:
            return Cast(goal, self.gen(ctx, INT, depth)), goal
        source: Type = goal
        view = array_view(goal)
        if view is not None and isinstance(view[1].bounds.hi, ConstBound):
            hi = view[1].bounds.hi.value + self.rng.randint(0, 2)
            source = _widen_hi(goal, ConstBound(hi))
        return Cast(goal, self.gen(ctx, source, depth)), goal

    def _dyncast(self, ctx: _Ctx, goal: PtrType, depth: int) -> Typed:
        arr = goal.pointee
        nt = arr.null_terminated or (self.rng.random() < 0.3 and isinstance(arr.elem, IntType))
        source = array_ptr(0, self.rng.randint(0, 4), arr.elem, nt=nt)
        base, _ = self._array_base(ctx, source, depth)
        return DynCast(goal, base), goal

    def _malloc(self, goal: PtrType) -> Typed:
        pointee = goal.pointee
        if isinstance(pointee, ArrayType) and isinstance(pointee.bounds.hi, ConstBound):
            if pointee.bounds.lo == ConstBound(0) and self.rng.random() >= 0.1:
                size = max(pointee.bounds.hi.value, 1) + self.rng.randint(0, 2)
                pointee = _widen_hi(goal, ConstBound(size)).pointee
        return Malloc(pointee), PtrType(Mode.CHECKED, pointee)

    def _field(self, ctx: _Ctx, goal: PtrType, depth: int) -> Typed:
        sname, fname = self.rng.choice(self._fields_for(goal))
        inner = self.gen(ctx, PtrType(Mode.CHECKED, StructType(sname)), depth)
        return FieldAddr(inner, fname), goal

    def string_literal(self, ctx: _Ctx, *, off_by_one: bool = False) -> Expr:
        """An initialized null-terminated string, cast down to bounds (0, 0)."""
        length = self.rng.randint(1, 5)
        s = self.fresh("s")
        writes = length + 1 if off_by_one else length
        body: Expr = Cast(NT_EMPTY, Var(s))
        for j in reversed(range(writes)):
            cell = Assign(Add(Var(s), Lit(j, INT)), Lit(self.rng.randint(1, 9), INT))
            body = Let(self.fresh("w"), cell, body)
        return Let(s, Malloc(array_ptr(0, length, nt=True).pointee), body)

    # -- programs -----------------------------------------------------------

    def gen_functions(self) -> FunEnv:
        templates = [
            FunDef(
                "f0",
                (("n0", INT), ("p0", array_ptr(0, VarBound("n0"), nt=True))),
                INT,
                Lit(0, INT),
            ),
            FunDef("f1", (("q1", NT_EMPTY), ("k1", INT)), INT, Lit(0, INT)),
        ]
        chosen = templates[: self.rng.randint(0, 2)]
        funs: FunEnv = {}
        saved, self.funs = self.funs, {}
        try:
            for fdef in chosen:
                ctx = _Ctx(dict(fdef.params), {})
                body = self.gen(ctx, fdef.ret, min(self.cfg.depth, 4))
                funs[fdef.name] = FunDef(fdef.name, fdef.params, fdef.ret, body)
        finally:
            self.funs = saved
        return funs

    def top_goal(self) -> Type:
        if self.rng.random() < 0.7:
            return INT
        return self.random_type(_Ctx({}, {}))

    def relaxed_node(self, ctx: _Ctx, kind: Relaxation, depth: int) -> Expr:
        """Build one rule application with ``kind``'s premise dropped."""
        d = max(depth - 1, 0)
        match kind:
            case Relaxation.DEREF_MODE:
                return Deref(Cast(PtrType(Mode.UNCHECKED, INT), self.gen(ctx, INT, d)))
            case Relaxation.DEREF_ARRAY_MODE:
                arr = array_ptr(0, self.rng.randint(1, 3), mode=Mode.UNCHECKED)
                return Deref(Cast(arr, self.gen(ctx, INT, d)))
            case Relaxation.CAST_CHECKED:
                return Cast(PtrType(Mode.CHECKED, INT), self.gen(ctx, INT, d))
            case Relaxation.ASSIGN_SUBTYPE:
                target = self.gen(ctx, PtrType(Mode.CHECKED, INT), d)
                return Assign(target, self.string_literal(ctx))
            case Relaxation.ASSIGN_ARRAY_SUBTYPE:
                target = self.gen(ctx, array_ptr(0, self.rng.randint(1, 3)), d)
                return Assign(target, self.gen(ctx, PtrType(Mode.CHECKED, INT), d))
            case Relaxation.CALL_ARGUMENT:
                fdef = next(f for f in self.funs.values() if _takes_pointer(f))
                args = tuple(
                    Lit(self.rng.randint(1, 9), INT) if isinstance(t, PtrType) else Lit(1, INT)
                    for _, t in fdef.params
                )
                return Call(fdef.name, args)
            case Relaxation.STRING_OFF_BY_ONE:
                return self.string_literal(ctx, off_by_one=True)
        raise ValueError(kind)

    def near_ill_typed(
        self, ctx: _Ctx, goal: Type, depth: int
    ) -> tuple[Expr, Relaxation, Path]:
        """A well-typed term with one relaxed rule application bound at a random subterm."""
        kinds = list(Relaxation)
        if not any(_takes_pointer(f) for f in self.funs.values()):
            kinds.remove(Relaxation.CALL_ARGUMENT)
        kind = self.rng.choice(kinds)
        main = self.gen(ctx, goal, depth)
        node = self.relaxed_node(ctx, kind, depth)
        site = self.rng.choice(subterm_paths(main))
        wrapped = Let(self.fresh(), node, subterm_at(main, site))
        return replace_subterm(main, site, wrapped), kind, site


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def gen_well_typed(
    cfg: GenConfig,
    env: dict[str, Type],
    theta: dict[str, Pred],
    mode: Mode,
    goal: Type,
    rng: random.Random | None = None,
    funs: FunEnv | None = None,
    structs: StructEnv | None = None,
) -> Expr:
    generator = TermGenerator(cfg, rng or random.Random(cfg.seed), funs, structs)
    return generator.gen(_Ctx(dict(env), dict(theta), mode), goal, cfg.depth)


def gen_near_ill_typed(
    cfg: GenConfig,
    env: dict[str, Type],
    theta: dict[str, Pred],
    mode: Mode,
    goal: Type,
    rng: random.Random | None = None,
    funs: FunEnv | None = None,
    structs: StructEnv | None = None,
) -> tuple[Expr, Relaxation, Path]:
    generator = TermGenerator(cfg, rng or random.Random(cfg.seed), funs, structs)
    return generator.near_ill_typed(_Ctx(dict(env), dict(theta), mode), goal, cfg.depth)


def gen_program(cfg: GenConfig, seed: int, *, near_ill_typed: bool = False) -> GeneratedProgram:
    """One replayable program: ``seed`` alone determines the result."""
    rng = random.Random(seed)
    generator = TermGenerator(cfg, rng)
    funs = generator.gen_functions()
    generator.funs = funs
    goal = generator.top_goal()
    if near_ill_typed:
        main, relaxation, site = generator.near_ill_typed(_Ctx({}, {}), goal, cfg.depth)
        return GeneratedProgram(Program(funs, dict(STRUCTS), main), goal, relaxation, site)
    main = generator.gen(_Ctx({}, {}), goal, cfg.depth)
    return GeneratedProgram(Program(funs, dict(STRUCTS), main), goal)


def inject_unchecked(program: Program, rng: random.Random) -> Program | None:
    """Wrap one random subterm of main in ``unchecked``, or turn it into a wild read.

    Returns None when neither variant type checks at the chosen position.
    """
    paths = subterm_paths(program.main)
    path = rng.choice(paths)
    sub = subterm_at(program.main, path)
    candidates = [Unchecked(sub)]
    if rng.random() < 0.5:
        candidates.insert(0, Unchecked(Deref(Cast(PtrType(Mode.UNCHECKED, INT), sub))))
    for candidate in candidates:
        main = replace_subterm(program.main, path, candidate)
        injected = Program(program.funs, program.structs, main)
        checker = TypeChecker(injected.funs, injected.structs)
        try:
            checker.type_of({}, {}, Mode.CHECKED, injected.main)
        except (TypeCheckError, TypeSizeError, WellFormednessError):
            continue
        return injected
    return None
