"""Language-neutral intermediate representation of test cases and subject classes.

All IR values are immutable after construction (frozen dataclasses with tuple
fields) and safe to share across threads.  The canonical serialized form is a
JSON document (extension ``.mrir``, ``ir_version: 1``); the schema is described
in docs/ir_schema.md and enforced by :func:`parse_ir`.

Semantic types are plain strings: the primitives ``int``, ``float``, ``bool``,
``string`` or a fully qualified class name.  ``None`` stands for ``void``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

IR_VERSION = 1

PRIMITIVE_TYPES = ("int", "float", "bool", "string")

ASSERTION_APIS = (
    "assertTrue",
    "assertFalse",
    "assertEquals",
    "assertNotEquals",
    "assertSame",
    "assertNotSame",
    "assertArrayEquals",
)

# APIs accepted as comparison-style assertions when carrying exactly two
# operands; otherwise the frontend drops them with a warning.
EXTRA_COMP_APIS = (
    "assertThat",
    "failNotSame",
    "failNotEqual",
    "assertIterableEquals",
    "assertLinesMatch",
)

COMPARISON_OPS = ("==", "!=", "<", ">", "<=", ">=")
ARITH_OPS = ("+", "-", "*", "/")
LOGICAL_OPS = ("&&", "||")


class IrError(Exception):
    """Invariant violation detected while building or validating IR."""


class SchemaError(IrError):
    """Malformed serialized document; ``path`` points at the offending node."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: Union[int, float, bool, str, None]
    # one of int/float/bool/string/null
    type: str = "int"


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class FieldAccess:
    base: "Expr"
    field: str


@dataclass(frozen=True)
class BinaryOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class UnaryOp:
    op: str  # '-' or '!'
    operand: "Expr"


@dataclass(frozen=True)
class MethodInvocation:
    """One call site.  ``receiver`` is a variable name, or None for static
    calls.  ``binding_type`` preserves the declared type of the binding
    variable so rendering round-trips."""

    receiver: Optional[str]
    class_fqn: str
    method: str
    args: tuple["Expr", ...] = ()
    return_binding: Optional[str] = None
    binding_type: Optional[str] = None


@dataclass(frozen=True)
class CallExpr:
    """A method call kept inline inside an expression tree."""

    invocation: MethodInvocation


@dataclass(frozen=True)
class NewExpr:
    class_fqn: str
    args: tuple["Expr", ...] = ()


Expr = Union[Literal, VarRef, FieldAccess, BinaryOp, UnaryOp, CallExpr, NewExpr]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarDecl:
    name: str
    declared_type: str
    init: Expr


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr


@dataclass(frozen=True)
class SetField:
    """Field store ``base.field = value``; subject-class bodies only."""

    base: str  # 'this' or a variable name
    field: str
    value: Expr


@dataclass(frozen=True)
class InvocationStmt:
    invocation: MethodInvocation


@dataclass(frozen=True)
class AssertionStmt:
    api: str
    operands: tuple[Expr, ...]


@dataclass(frozen=True)
class ThrowStmt:
    message: Expr


@dataclass(frozen=True)
class ReturnStmt:
    value: Optional[Expr] = None


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then_body: tuple["Stmt", ...]
    else_body: tuple["Stmt", ...] = ()


@dataclass(frozen=True)
class WhileStmt:
    cond: Expr
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr


@dataclass(frozen=True)
class OpaqueRegion:
    """Control flow the frontend does not model; analyses treat every
    variable it mentions conservatively."""

    text: str


Stmt = Union[
    VarDecl,
    Assign,
    SetField,
    InvocationStmt,
    AssertionStmt,
    ThrowStmt,
    ReturnStmt,
    IfStmt,
    WhileStmt,
    ExprStmt,
    OpaqueRegion,
]

# Statement kinds allowed in straight-line test-case bodies.
TEST_STMT_KINDS = (
    VarDecl,
    Assign,
    InvocationStmt,
    AssertionStmt,
    ThrowStmt,
    OpaqueRegion,
)


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceSpan:
    file_id: str
    line_start: int = 0
    line_end: int = 0


@dataclass(frozen=True)
class TestCaseIR:
    name: str
    statements: tuple[Stmt, ...]
    source_span: SourceSpan = SourceSpan("<none>")
    # Non-empty only for parameterized (codified) methods.
    params: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class MethodDecl:
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: Optional[str]
    body: tuple[Stmt, ...] = ()


@dataclass(frozen=True)
class ClassDecl:
    fqn: str
    fields: tuple[tuple[str, str], ...] = ()
    methods: tuple[MethodDecl, ...] = ()

    def method(self, name: str, arity: int | None = None) -> Optional[MethodDecl]:
        for m in self.methods:
            if m.name == name and (arity is None or len(m.params) == arity):
                return m
        return None


@dataclass(frozen=True)
class TestSuite:
    file_id: str
    test_cases: tuple[TestCaseIR, ...] = ()


@dataclass(frozen=True)
class ProjectModel:
    internal_prefixes: tuple[str, ...] = ()
    classes: tuple[ClassDecl, ...] = ()
    test_suites: tuple[TestSuite, ...] = ()

    def class_by_fqn(self, fqn: str) -> Optional[ClassDecl]:
        for c in self.classes:
            if c.fqn == fqn:
                return c
        return None

    def is_internal(self, fqn: str) -> bool:
        return any(fqn == p or fqn.startswith(p + ".") for p in self.internal_prefixes)


# ---------------------------------------------------------------------------
# Walking helpers
# ---------------------------------------------------------------------------


def expr_children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, FieldAccess):
        return (e.base,)
    if isinstance(e, BinaryOp):
        return (e.lhs, e.rhs)
    if isinstance(e, UnaryOp):
        return (e.operand,)
    if isinstance(e, CallExpr):
        rec = (VarRef(e.invocation.receiver),) if e.invocation.receiver else ()
        return rec + e.invocation.args
    if isinstance(e, NewExpr):
        return e.args
    return ()


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    for c in expr_children(e):
        yield from walk_expr(c)


def stmt_exprs(s: Stmt) -> tuple[Expr, ...]:
    if isinstance(s, VarDecl):
        return (s.init,)
    if isinstance(s, (Assign, SetField)):
        return (s.value,)
    if isinstance(s, InvocationStmt):
        inv = s.invocation
        rec = (VarRef(inv.receiver),) if inv.receiver else ()
        return rec + inv.args
    if isinstance(s, AssertionStmt):
        return s.operands
    if isinstance(s, ThrowStmt):
        return (s.message,)
    if isinstance(s, ReturnStmt):
        return (s.value,) if s.value is not None else ()
    if isinstance(s, (IfStmt, WhileStmt)):
        return (s.cond,)
    if isinstance(s, ExprStmt):
        return (s.expr,)
    return ()


def used_vars(e: Expr) -> set[str]:
    return {n.name for n in walk_expr(e) if isinstance(n, VarRef)}


def stmt_used_vars(s: Stmt) -> set[str]:
    out: set[str] = set()
    for e in stmt_exprs(s):
        out |= used_vars(e)
    return out


def stmt_defined_var(s: Stmt) -> Optional[str]:
    """Variable (re)defined by a straight-line statement, if any."""
    if isinstance(s, VarDecl):
        return s.name
    if isinstance(s, Assign):
        return s.name
    if isinstance(s, InvocationStmt) and s.invocation.return_binding:
        return s.invocation.return_binding
    return None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_assertion(a: AssertionStmt, path: str) -> None:
    if a.api not in ASSERTION_APIS:
        raise SchemaError(path, f"unknown assertion api {a.api!r}")
    want = 1 if a.api in ("assertTrue", "assertFalse") else 2
    if len(a.operands) != want:
        raise SchemaError(
            path, f"{a.api} takes {want} operand(s), found {len(a.operands)}"
        )


def validate_model(model: ProjectModel) -> None:
    """Raise IrError/SchemaError on any type-invariant violation."""
    seen_fqn: set[str] = set()
    for i, c in enumerate(model.classes):
        if c.fqn in seen_fqn:
            raise IrError(f"duplicate class fqn {c.fqn!r}")
        seen_fqn.add(c.fqn)
        sigs = set()
        for m in c.methods:
            sig = (m.name, len(m.params))
            if sig in sigs:
                raise IrError(f"{c.fqn}: duplicate method {m.name}/{len(m.params)}")
            sigs.add(sig)
    for si, suite in enumerate(model.test_suites):
        names = set()
        for ti, tc in enumerate(suite.test_cases):
            if tc.name in names:
                raise IrError(f"{suite.file_id}: duplicate test case {tc.name!r}")
            names.add(tc.name)
            for k, s in enumerate(tc.statements):
                path = f"test_suites[{si}].test_cases[{ti}].statements[{k}]"
                if not isinstance(s, TEST_STMT_KINDS):
                    raise IrError(f"{path}: {type(s).__name__} not allowed in tests")
                if isinstance(s, AssertionStmt):
                    _check_assertion(s, path)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _expr_to_json(e: Expr) -> dict:
    if isinstance(e, Literal):
        return {"kind": "literal", "type": e.type, "value": e.value}
    if isinstance(e, VarRef):
        return {"kind": "var", "name": e.name}
    if isinstance(e, FieldAccess):
        return {"kind": "field", "base": _expr_to_json(e.base), "field": e.field}
    if isinstance(e, BinaryOp):
        return {
            "kind": "binop",
            "op": e.op,
            "lhs": _expr_to_json(e.lhs),
            "rhs": _expr_to_json(e.rhs),
        }
    if isinstance(e, UnaryOp):
        return {"kind": "unop", "op": e.op, "operand": _expr_to_json(e.operand)}
    if isinstance(e, CallExpr):
        return {"kind": "call", "invocation": _inv_to_json(e.invocation)}
    if isinstance(e, NewExpr):
        return {
            "kind": "new",
            "class": e.class_fqn,
            "args": [_expr_to_json(a) for a in e.args],
        }
    raise IrError(f"unserializable expression {e!r}")


def _inv_to_json(inv: MethodInvocation) -> dict:
    return {
        "receiver": inv.receiver,
        "class": inv.class_fqn,
        "method": inv.method,
        "args": [_expr_to_json(a) for a in inv.args],
        "return_binding": inv.return_binding,
        "binding_type": inv.binding_type,
    }


def _stmt_to_json(s: Stmt, index: Optional[int] = None) -> dict:
    d: dict
    if isinstance(s, VarDecl):
        d = {
            "kind": "var_decl",
            "name": s.name,
            "type": s.declared_type,
            "init": _expr_to_json(s.init),
        }
    elif isinstance(s, Assign):
        d = {"kind": "assign", "name": s.name, "value": _expr_to_json(s.value)}
    elif isinstance(s, SetField):
        d = {
            "kind": "set_field",
            "base": s.base,
            "field": s.field,
            "value": _expr_to_json(s.value),
        }
    elif isinstance(s, InvocationStmt):
        d = {"kind": "invocation", "invocation": _inv_to_json(s.invocation)}
    elif isinstance(s, AssertionStmt):
        d = {
            "kind": "assertion",
            "api": s.api,
            "operands": [_expr_to_json(o) for o in s.operands],
        }
    elif isinstance(s, ThrowStmt):
        d = {"kind": "throw", "message": _expr_to_json(s.message)}
    elif isinstance(s, ReturnStmt):
        d = {
            "kind": "return",
            "value": _expr_to_json(s.value) if s.value is not None else None,
        }
    elif isinstance(s, IfStmt):
        d = {
            "kind": "if",
            "cond": _expr_to_json(s.cond),
            "then": [_stmt_to_json(t) for t in s.then_body],
            "else": [_stmt_to_json(t) for t in s.else_body],
        }
    elif isinstance(s, WhileStmt):
        d = {
            "kind": "while",
            "cond": _expr_to_json(s.cond),
            "body": [_stmt_to_json(t) for t in s.body],
        }
    elif isinstance(s, ExprStmt):
        d = {"kind": "expr", "expr": _expr_to_json(s.expr)}
    elif isinstance(s, OpaqueRegion):
        d = {"kind": "opaque", "text": s.text}
    else:
        raise IrError(f"unserializable statement {s!r}")
    if index is not None:
        d = {"index": index, **d}
    return d


def serialize_ir(model: ProjectModel) -> str:
    """Canonical, deterministic serialization; round-trips via parse_ir."""
    validate_model(model)
    doc = {
        "ir_version": IR_VERSION,
        "internal_prefixes": list(model.internal_prefixes),
        "classes": [
            {
                "fqn": c.fqn,
                "fields": [{"name": n, "type": t} for n, t in c.fields],
                "methods": [
                    {
                        "name": m.name,
                        "params": [{"name": n, "type": t} for n, t in m.params],
                        "return_type": m.return_type,
                        "body": [_stmt_to_json(s) for s in m.body],
                    }
                    for m in c.methods
                ],
            }
            for c in model.classes
        ],
        "test_suites": [
            {
                "file_id": suite.file_id,
                "test_cases": [
                    {
                        "name": tc.name,
                        "params": [{"name": n, "type": t} for n, t in tc.params],
                        "source_span": {
                            "file_id": tc.source_span.file_id,
                            "line_start": tc.source_span.line_start,
                            "line_end": tc.source_span.line_end,
                        },
                        "statements": [
                            _stmt_to_json(s, index=i)
                            for i, s in enumerate(tc.statements)
                        ],
                    }
                    for tc in suite.test_cases
                ],
            }
            for suite in model.test_suites
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _expect(obj, key: str, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected object, found {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(path, f"missing field {key!r}")
    return obj[key]


def _expr_from_json(d, path: str) -> Expr:
    kind = _expect(d, "kind", path)
    if kind == "literal":
        t = _expect(d, "type", path)
        v = _expect(d, "value", path)
        if t not in ("int", "float", "bool", "string", "null"):
            raise SchemaError(path, f"bad literal type {t!r}")
        return Literal(v, t)
    if kind == "var":
        return VarRef(_expect(d, "name", path))
    if kind == "field":
        return FieldAccess(
            _expr_from_json(_expect(d, "base", path), path + ".base"),
            _expect(d, "field", path),
        )
    if kind == "binop":
        op = _expect(d, "op", path)
        if op not in COMPARISON_OPS + ARITH_OPS + LOGICAL_OPS:
            raise SchemaError(path, f"bad operator {op!r}")
        return BinaryOp(
            op,
            _expr_from_json(_expect(d, "lhs", path), path + ".lhs"),
            _expr_from_json(_expect(d, "rhs", path), path + ".rhs"),
        )
    if kind == "unop":
        op = _expect(d, "op", path)
        if op not in ("-", "!"):
            raise SchemaError(path, f"bad unary operator {op!r}")
        return UnaryOp(op, _expr_from_json(_expect(d, "operand", path), path + ".operand"))
    if kind == "call":
        return CallExpr(_inv_from_json(_expect(d, "invocation", path), path + ".invocation"))
    if kind == "new":
        return NewExpr(
            _expect(d, "class", path),
            tuple(
                _expr_from_json(a, f"{path}.args[{i}]")
                for i, a in enumerate(_expect(d, "args", path))
            ),
        )
    raise SchemaError(path, f"unknown expression kind {kind!r}")


def _inv_from_json(d, path: str) -> MethodInvocation:
    return MethodInvocation(
        receiver=_expect(d, "receiver", path),
        class_fqn=_expect(d, "class", path),
        method=_expect(d, "method", path),
        args=tuple(
            _expr_from_json(a, f"{path}.args[{i}]")
            for i, a in enumerate(_expect(d, "args", path))
        ),
        return_binding=d.get("return_binding"),
        binding_type=d.get("binding_type"),
    )


def _stmt_from_json(d, path: str) -> Stmt:
    kind = _expect(d, "kind", path)
    if kind == "var_decl":
        return VarDecl(
            _expect(d, "name", path),
            _expect(d, "type", path),
            _expr_from_json(_expect(d, "init", path), path + ".init"),
        )
    if kind == "assign":
        return Assign(
            _expect(d, "name", path),
            _expr_from_json(_expect(d, "value", path), path + ".value"),
        )
    if kind == "set_field":
        return SetField(
            _expect(d, "base", path),
            _expect(d, "field", path),
            _expr_from_json(_expect(d, "value", path), path + ".value"),
        )
    if kind == "invocation":
        return InvocationStmt(
            _inv_from_json(_expect(d, "invocation", path), path + ".invocation")
        )
    if kind == "assertion":
        stmt = AssertionStmt(
            _expect(d, "api", path),
            tuple(
                _expr_from_json(o, f"{path}.operands[{i}]")
                for i, o in enumerate(_expect(d, "operands", path))
            ),
        )
        _check_assertion(stmt, path)
        return stmt
    if kind == "throw":
        return ThrowStmt(_expr_from_json(_expect(d, "message", path), path + ".message"))
    if kind == "return":
        v = _expect(d, "value", path)
        return ReturnStmt(_expr_from_json(v, path + ".value") if v is not None else None)
    if kind == "if":
        return IfStmt(
            _expr_from_json(_expect(d, "cond", path), path + ".cond"),
            tuple(
                _stmt_from_json(s, f"{path}.then[{i}]")
                for i, s in enumerate(_expect(d, "then", path))
            ),
            tuple(
                _stmt_from_json(s, f"{path}.else[{i}]")
                for i, s in enumerate(_expect(d, "else", path))
            ),
        )
    if kind == "while":
        return WhileStmt(
            _expr_from_json(_expect(d, "cond", path), path + ".cond"),
            tuple(
                _stmt_from_json(s, f"{path}.body[{i}]")
                for i, s in enumerate(_expect(d, "body", path))
            ),
        )
    if kind == "expr":
        return ExprStmt(_expr_from_json(_expect(d, "expr", path), path + ".expr"))
    if kind == "opaque":
        return OpaqueRegion(_expect(d, "text", path))
    raise SchemaError(path, f"unknown statement kind {kind!r}")


def _pairs_from_json(lst, path: str) -> tuple[tuple[str, str], ...]:
    if not isinstance(lst, list):
        raise SchemaError(path, "expected list")
    return tuple(
        (_expect(p, "name", f"{path}[{i}]"), _expect(p, "type", f"{path}[{i}]"))
        for i, p in enumerate(lst)
    )


def parse_ir(text: str) -> ProjectModel:
    """Parse a canonical .mrir document; inverse of serialize_ir on its image."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"not valid JSON: {e}") from e
    version = _expect(doc, "ir_version", "$")
    if version != IR_VERSION:
        raise SchemaError("$.ir_version", f"unsupported ir_version {version!r}")

    classes = []
    for ci, c in enumerate(_expect(doc, "classes", "$")):
        cpath = f"$.classes[{ci}]"
        methods = []
        for mi, m in enumerate(_expect(c, "methods", cpath)):
            mpath = f"{cpath}.methods[{mi}]"
            methods.append(
                MethodDecl(
                    name=_expect(m, "name", mpath),
                    params=_pairs_from_json(_expect(m, "params", mpath), mpath + ".params"),
                    return_type=_expect(m, "return_type", mpath),
                    body=tuple(
                        _stmt_from_json(s, f"{mpath}.body[{i}]")
                        for i, s in enumerate(_expect(m, "body", mpath))
                    ),
                )
            )
        classes.append(
            ClassDecl(
                fqn=_expect(c, "fqn", cpath),
                fields=_pairs_from_json(_expect(c, "fields", cpath), cpath + ".fields"),
                methods=tuple(methods),
            )
        )

    suites = []
    for si, s in enumerate(_expect(doc, "test_suites", "$")):
        spath = f"$.test_suites[{si}]"
        cases = []
        for ti, tc in enumerate(_expect(s, "test_cases", spath)):
            tpath = f"{spath}.test_cases[{ti}]"
            span = _expect(tc, "source_span", tpath)
            stmts = []
            for i, st in enumerate(_expect(tc, "statements", tpath)):
                stpath = f"{tpath}.statements[{i}]"
                idx = _expect(st, "index", stpath)
                if idx != i:
                    raise SchemaError(stpath, f"statement index {idx!r}, expected {i}")
                stmts.append(_stmt_from_json(st, stpath))
            cases.append(
                TestCaseIR(
                    name=_expect(tc, "name", tpath),
                    params=_pairs_from_json(_expect(tc, "params", tpath), tpath + ".params"),
                    source_span=SourceSpan(
                        _expect(span, "file_id", tpath + ".source_span"),
                        _expect(span, "line_start", tpath + ".source_span"),
                        _expect(span, "line_end", tpath + ".source_span"),
                    ),
                    statements=tuple(stmts),
                )
            )
        suites.append(TestSuite(file_id=_expect(s, "file_id", spath), test_cases=tuple(cases)))

    model = ProjectModel(
        internal_prefixes=tuple(_expect(doc, "internal_prefixes", "$")),
        classes=tuple(classes),
        test_suites=tuple(suites),
    )
    validate_model(model)
    return model


__all__ = [
    "IR_VERSION",
    "PRIMITIVE_TYPES",
    "ASSERTION_APIS",
    "EXTRA_COMP_APIS",
    "COMPARISON_OPS",
    "ARITH_OPS",
    "LOGICAL_OPS",
    "IrError",
    "SchemaError",
    "Literal",
    "VarRef",
    "FieldAccess",
    "BinaryOp",
    "UnaryOp",
    "MethodInvocation",
    "CallExpr",
    "NewExpr",
    "Expr",
    "VarDecl",
    "Assign",
    "SetField",
    "InvocationStmt",
    "AssertionStmt",
    "ThrowStmt",
    "ReturnStmt",
    "IfStmt",
    "WhileStmt",
    "ExprStmt",
    "OpaqueRegion",
    "Stmt",
    "SourceSpan",
    "TestCaseIR",
    "MethodDecl",
    "ClassDecl",
    "TestSuite",
    "ProjectModel",
    "expr_children",
    "walk_expr",
    "stmt_exprs",
    "used_vars",
    "stmt_used_vars",
    "stmt_defined_var",
    "validate_model",
    "serialize_ir",
    "parse_ir",
]
