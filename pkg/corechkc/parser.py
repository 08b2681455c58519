"""Reader for the parenthesized prefix syntax of programs, expressions and types."""

from __future__ import annotations

import re
from dataclasses import dataclass

from corechkc.errors import ParseError
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
    FunDef,
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
    StructDef,
    StructType,
    Type,
    Unchecked,
    Var,
    VarBound,
    WordType,
)

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")
_INT = re.compile(r"-?\d+")


@dataclass(frozen=True, slots=True)
class SAtom:
    text: str
    line: int
    column: int


@dataclass(frozen=True, slots=True)
class SList:
    items: tuple[SAtom | SList, ...]
    line: int
    column: int


SExpr = SAtom | SList


def read_sexprs(text: str) -> list[SExpr]:
    """Tokenize and group ``text`` into s-expressions."""
    stack: list[list[SExpr]] = [[]]
    opens: list[tuple[int, int]] = []
    line, line_start = 1, 0
    for match in _TOKEN.finditer(text):
        tok = match.group()
        col = match.start() - line_start + 1
        if tok == "(":
            stack.append([])
            opens.append((line, col))
        elif tok == ")":
            if not opens:
                raise ParseError("unbalanced ')'", line, col)
            items = stack.pop()
            o_line, o_col = opens.pop()
            stack[-1].append(SList(tuple(items), o_line, o_col))
        elif not tok[0].isspace() and tok[0] != ";":
            stack[-1].append(SAtom(tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            line_start = match.start() + tok.rindex("\n") + 1
    if opens:
        o_line, o_col = opens[-1]
        raise ParseError("unclosed '('", o_line, o_col)
    return stack[0]


def _read_one(text: str) -> SExpr:
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise ParseError(f"expected exactly one form, found {len(forms)}", 1, 1)
    return forms[0]


def _fail(node: SExpr, message: str) -> ParseError:
    return ParseError(message, node.line, node.column)


def _head(node: SExpr) -> str | None:
    if isinstance(node, SList) and node.items and isinstance(node.items[0], SAtom):
        return node.items[0].text
    return None


def _arity(node: SList, n: int) -> None:
    if len(node.items) != n + 1:
        raise _fail(node, f"'{_head(node)}' expects {n} argument(s), got {len(node.items) - 1}")


def _int(node: SExpr) -> int:
    if isinstance(node, SAtom) and _INT.fullmatch(node.text):
        return int(node.text)
    raise _fail(node, "expected an integer")


def _name(node: SExpr) -> str:
    if not isinstance(node, SAtom) or _INT.fullmatch(node.text):
        raise _fail(node, "expected an identifier")
    if "$" in node.text:
        raise _fail(node, f"identifier '{node.text}' uses the reserved '$' character")
    return node.text


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


def _bound(node: SExpr) -> Bound:
    if isinstance(node, SAtom):
        if _INT.fullmatch(node.text):
            return ConstBound(int(node.text))
        return VarBound(_name(node), 0)
    if _head(node) == "+" and len(node.items) == 3:
        return VarBound(_name(node.items[1]), _int(node.items[2]))
    raise _fail(node, "expected a bound: n, x or (+ x n)")


def _mode(node: SExpr) -> Mode:
    if isinstance(node, SAtom) and node.text in ("c", "u"):
        return Mode(node.text)
    raise _fail(node, "expected a mode: c or u")


def _word_type(node: SExpr) -> WordType:
    ty = _type(node)
    if not isinstance(ty, (IntType, PtrType)):
        raise _fail(node, "expected a word type: int or (ptr m ω)")
    return ty


def _type(node: SExpr) -> Type:
    if isinstance(node, SAtom):
        if node.text == "int":
            return INT
        raise _fail(node, f"unknown type '{node.text}'")
    head = _head(node)
    if head == "ptr":
        _arity(node, 2)
        return PtrType(_mode(node.items[1]), _type(node.items[2]))
    if head in ("array", "ntarray"):
        nt = head == "ntarray"
        if len(node.items) == 3 and _head(node.items[1]) == "count":
            count = node.items[1]
            _arity(count, 1)
            bounds = BoundPair(ConstBound(0), _bound(count.items[1]))
            return ArrayType(bounds, _word_type(node.items[2]), nt)
        _arity(node, 3)
        bounds = BoundPair(_bound(node.items[1]), _bound(node.items[2]))
        return ArrayType(bounds, _word_type(node.items[3]), nt)
    if head == "struct":
        _arity(node, 1)
        return StructType(_name(node.items[1]))
    raise _fail(node, f"unknown type form '{head}'")


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


def _expr(node: SExpr, runtime: bool) -> Expr:
    if isinstance(node, SAtom):
        return Var(_name(node))
    head = _head(node)
    items = node.items
    match head:
        case "lit":
            _arity(node, 2)
            return Lit(_int(items[1]), _word_type(items[2]))
        case "malloc":
            _arity(node, 1)
            return Malloc(_type(items[1]))
        case "let":
            _arity(node, 3)
            return Let(_name(items[1]), _expr(items[2], runtime), _expr(items[3], runtime))
        case "cast":
            _arity(node, 2)
            return Cast(_word_type(items[1]), _expr(items[2], runtime))
        case "dyncast":
            _arity(node, 2)
            return DynCast(_word_type(items[1]), _expr(items[2], runtime))
        case "call":
            if len(items) < 2:
                raise _fail(node, "'call' expects a function name")
            return Call(_name(items[1]), tuple(_expr(a, runtime) for a in items[2:]))
        case "strlen":
            _arity(node, 1)
            return Strlen(_name(items[1]))
        case "+":
            _arity(node, 2)
            return Add(_expr(items[1], runtime), _expr(items[2], runtime))
        case "deref":
            _arity(node, 1)
            return Deref(_expr(items[1], runtime))
        case "assign":
            _arity(node, 2)
            return Assign(_expr(items[1], runtime), _expr(items[2], runtime))
        case "unchecked":
            _arity(node, 1)
            return Unchecked(_expr(items[1], runtime))
        case "if":
            _arity(node, 3)
            return If(
                _expr(items[1], runtime), _expr(items[2], runtime), _expr(items[3], runtime)
            )
        case "fieldaddr":
            _arity(node, 2)
            return FieldAddr(_expr(items[1], runtime), _name(items[2]))
        case "ret":
            if not runtime:
                raise _fail(node, "'ret' is a runtime form and cannot appear in programs")
            _arity(node, 3)
            saved_node = items[2]
            if isinstance(saved_node, SAtom) and saved_node.text == "bot":
                saved = None
            else:
                saved = _expr(saved_node, runtime)
                if not isinstance(saved, Lit):
                    raise _fail(saved_node, "saved binding must be a literal or bot")
            return Ret(_name(items[1]), saved, _expr(items[3], runtime))
    raise _fail(node, f"unknown expression form '{head}'")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def parse_type(text: str) -> Type:
    return _type(_read_one(text))


def parse_expr(text: str) -> Expr:
    """Parse one expression; runtime ``ret`` frames are accepted."""
    return _expr(_read_one(text), runtime=True)


def parse_program(text: str) -> Program:
    top = _read_one(text)
    if _head(top) != "defs":
        raise _fail(top, "a program must be a (defs …) form")
    program = Program()
    main: Expr | None = None
    for item in top.items[1:]:
        head = _head(item)
        if head == "struct":
            sdef = _struct(item)
            if sdef.name in program.structs:
                raise _fail(item, f"duplicate struct '{sdef.name}'")
            program.structs[sdef.name] = sdef
        elif head == "fun":
            fdef = _fun(item)
            if fdef.name in program.funs:
                raise _fail(item, f"duplicate function '{fdef.name}'")
            program.funs[fdef.name] = fdef
        elif head == "main":
            if main is not None:
                raise _fail(item, "duplicate main")
            _arity(item, 1)
            main = _expr(item.items[1], runtime=False)
        else:
            raise _fail(item, "expected struct, fun or main")
    if main is None:
        raise _fail(top, "missing (main e)")
    program.main = main
    return program


def _struct(node: SList) -> StructDef:
    if len(node.items) < 2:
        raise _fail(node, "'struct' expects a name")
    fields = []
    for fnode in node.items[2:]:
        if not isinstance(fnode, SList) or len(fnode.items) != 2:
            raise _fail(fnode, "expected a field (f τ)")
        fields.append((_name(fnode.items[0]), _word_type(fnode.items[1])))
    return StructDef(_name(node.items[1]), tuple(fields))


def _fun(node: SList) -> FunDef:
    _arity(node, 4)
    _, name_node, params_node, ret_node, body_node = node.items
    if not isinstance(params_node, SList):
        raise _fail(params_node, "expected a parameter list")
    params = []
    seen: set[str] = set()
    for pnode in params_node.items:
        if not isinstance(pnode, SList) or len(pnode.items) != 2:
            raise _fail(pnode, "expected a parameter (x τ)")
        pname = _name(pnode.items[0])
        if pname in seen:
            raise _fail(pnode, f"duplicate parameter '{pname}'")
        seen.add(pname)
        params.append((pname, _word_type(pnode.items[1])))
    return FunDef(
        _name(name_node), tuple(params), _word_type(ret_node), _expr(body_node, runtime=False)
    )
