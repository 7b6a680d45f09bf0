"""Intraprocedural dataflow over straight-line test bodies.

Provides reaching definitions with opaque-region poisoning, bounded
interprocedural method effect summaries (receiver/argument field writes),
and per-invocation input/output element sets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field

from .ir import (
    Assign,
    AssertionStmt,
    BinaryOp,
    CallExpr,
    ClassDecl,
    Expr,
    ExprStmt,
    FieldAccess,
    IfStmt,
    InvocationStmt,
    Literal,
    MethodDecl,
    MethodInvocation,
    NewExpr,
    OpaqueRegion,
    PRIMITIVE_TYPES,
    ProjectModel,
    ReturnStmt,
    SetField,
    Stmt,
    TestCaseIR,
    ThrowStmt,
    UnaryOp,
    VarDecl,
    VarRef,
    WhileStmt,
    stmt_defined_var,
    stmt_used_vars,
    walk_expr,
)

# Sentinel for "unknown" reaching definitions (undefined use, or anything
# touched by an OpaqueRegion at or before the use site).
BOTTOM = "⊥"

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class DefUseGraph:
    """Reaching definitions for one straight-line test case.

    ``reaching[(i, v)]`` is the statement index defining the value of ``v``
    observed at statement ``i``, or BOTTOM when unknown.  Variables never
    defined before their use (e.g. parameters of codified methods) are
    absent from the map.
    """

    defs: dict[str, frozenset[int]]
    uses: dict[int, frozenset[str]]
    reaching: dict[tuple[int, str], int | str]

    def reaching_def(self, index: int, var: str) -> int | str | None:
        return self.reaching.get((index, var))


def _opaque_vars(region: OpaqueRegion) -> set[str]:
    """Identifiers mentioned in raw opaque text; over-approximates touch set."""
    return set(_IDENT_RE.findall(region.text))


def build_def_use(tc: TestCaseIR) -> DefUseGraph:
    defs: dict[str, set[int]] = {}
    uses: dict[int, frozenset[str]] = {}
    reaching: dict[tuple[int, str], int | str] = {}
    current: dict[str, int | str] = {}  # var -> defining index or BOTTOM
    for i, stmt in enumerate(tc.statements):
        used = stmt_used_vars(stmt)
        if isinstance(stmt, OpaqueRegion):
            touched = _opaque_vars(stmt)
            uses[i] = frozenset(touched)
            for v in touched:
                if v in current or True:
                    reaching[(i, v)] = current.get(v, BOTTOM)
            for v in touched:
                current[v] = BOTTOM
                defs.setdefault(v, set()).add(i)
            continue
        uses[i] = frozenset(used)
        for v in used:
            if v in current:
                reaching[(i, v)] = current[v]
        d = stmt_defined_var(stmt)
        if d is not None:
            defs.setdefault(d, set()).add(i)
            current[d] = i
    return DefUseGraph(
        defs={v: frozenset(s) for v, s in defs.items()},
        uses=uses,
        reaching=reaching,
    )


def resolve_alias(graph: DefUseGraph, tc: TestCaseIR, index: int, var: str) -> tuple[int | str | None, str]:
    """Follow plain variable-copy chains (``a = b``) back to the origin.

    Returns (defining index or BOTTOM or None, origin variable name).
    ``a = b`` between object variables makes both names aliases of one
    abstract object; the origin name is the first variable in the chain.
    """
    seen = set()
    while True:
        if var in seen:
            return BOTTOM, var
        seen.add(var)
        d = graph.reaching_def(index, var)
        if d is None or d == BOTTOM:
            return d, var
        stmt = tc.statements[d]
        src: Expr | None = None
        if isinstance(stmt, VarDecl):
            src = stmt.init
        elif isinstance(stmt, Assign):
            src = stmt.value
        if isinstance(src, VarRef):
            index, var = d, src.name
            continue
        return d, var


# ---------------------------------------------------------------------------
# Method effect summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSummary:
    reads_receiver_fields: bool
    writes_receiver_fields: bool
    writes_arg_fields: frozenset[int]
    inconclusive: bool


_INCONCLUSIVE = MethodSummary(True, True, frozenset(), True)
_PURE = MethodSummary(True, False, frozenset(), False)  # string builtins read their value


def method_writes_summary(model: ProjectModel, depth_k: int) -> dict[tuple[str, str, int], MethodSummary]:
    """Effect summaries for every internal method, keyed by (class, method, arity).

    Transitive over the call chain up to ``depth_k`` levels; external calls,
    unknown callees, or recursion within reach yield an inconclusive summary.
    """
    analyzer = _SummaryAnalyzer(model, depth_k)
    out: dict[tuple[str, str, int], MethodSummary] = {}
    for cls in model.classes:
        for m in cls.methods:
            out[(cls.fqn, m.name, len(m.params))] = analyzer.summarize(cls, m, depth_k)
    return out


class _SummaryAnalyzer:
    def __init__(self, model: ProjectModel, depth_k: int):
        self.model = model
        self.depth_k = depth_k
        self.memo: dict[tuple[str, str, int, int], MethodSummary] = {}
        self.in_progress: set[tuple[str, str, int]] = set()

    def summarize(self, cls: ClassDecl, m: MethodDecl, depth: int) -> MethodSummary:
        key = (cls.fqn, m.name, len(m.params))
        mkey = key + (depth,)
        if mkey in self.memo:
            return self.memo[mkey]
        if key in self.in_progress or depth < 0:
            return _INCONCLUSIVE
        self.in_progress.add(key)
        try:
            s = self._analyze_body(cls, m, depth)
        finally:
            self.in_progress.discard(key)
        self.memo[mkey] = s
        return s

    def _callee_summary(self, class_fqn: str, method: str, arity: int, depth: int) -> MethodSummary:
        from .frontend import STRING_BUILTINS

        if class_fqn == "string":
            return _PURE if method in STRING_BUILTINS else _INCONCLUSIVE
        cls = self.model.class_by_fqn(class_fqn)
        if cls is None:
            return _INCONCLUSIVE
        m = cls.method(method, arity)
        if m is None:
            return _INCONCLUSIVE
        if depth <= 0:
            return _INCONCLUSIVE
        return self.summarize(cls, m, depth - 1)

    def _analyze_body(self, cls: ClassDecl, m: MethodDecl, depth: int) -> MethodSummary:
        reads = False
        writes_recv = False
        writes_args: set[int] = set()
        inconclusive = False
        # names aliasing `this` or a specific parameter (index)
        param_index = {name: i for i, (name, _t) in enumerate(m.params)}
        alias_this = {"this"}
        alias_param: dict[str, int] = dict(param_index)

        def track_alias(name: str, value: Expr) -> None:
            if isinstance(value, VarRef):
                if value.name in alias_this:
                    alias_this.add(name)
                elif value.name in alias_param:
                    alias_param[name] = alias_param[value.name]
                else:
                    alias_this.discard(name)
                    alias_param.pop(name, None)
            else:
                alias_this.discard(name)
                alias_param.pop(name, None)

        def visit_expr(e: Expr) -> None:
            nonlocal reads, writes_recv, inconclusive
            for sub in walk_expr(e):
                if isinstance(sub, FieldAccess):
                    base = sub.base
                    if isinstance(base, VarRef) and base.name in alias_this:
                        reads = True
                    elif not isinstance(base, VarRef):
                        inconclusive = True  # field path aliasing: give up
                elif isinstance(sub, CallExpr):
                    visit_call(sub.invocation)

        def visit_call(inv: MethodInvocation) -> None:
            nonlocal reads, writes_recv, inconclusive
            cs = self._callee_summary(inv.class_fqn, inv.method, len(inv.args), depth)
            if cs.inconclusive:
                # external call, unknown callee, recursion, or exhausted depth:
                # the summary as a whole cannot be trusted
                inconclusive = True
                return
            if inv.receiver is not None:
                if inv.receiver in alias_this:
                    reads = reads or cs.reads_receiver_fields
                    writes_recv = writes_recv or cs.writes_receiver_fields
                elif inv.receiver in alias_param:
                    if cs.writes_receiver_fields:
                        writes_args.add(alias_param[inv.receiver])
            for pos, a in enumerate(inv.args):
                if pos in cs.writes_arg_fields and isinstance(a, VarRef):
                    if a.name in alias_this:
                        writes_recv = True
                    elif a.name in alias_param:
                        writes_args.add(alias_param[a.name])

        def visit_stmts(stmts: tuple[Stmt, ...]) -> None:
            nonlocal reads, writes_recv, inconclusive
            for s in stmts:
                if isinstance(s, OpaqueRegion):
                    inconclusive = True
                elif isinstance(s, VarDecl):
                    visit_expr(s.init)
                    track_alias(s.name, s.init)
                elif isinstance(s, Assign):
                    visit_expr(s.value)
                    track_alias(s.name, s.value)
                elif isinstance(s, SetField):
                    visit_expr(s.value)
                    if s.base in alias_this:
                        writes_recv = True
                    elif s.base in alias_param:
                        writes_args.add(alias_param[s.base])
                    else:
                        inconclusive = True
                elif isinstance(s, InvocationStmt):
                    for a in s.invocation.args:
                        visit_expr(a)
                    visit_call(s.invocation)
                    if s.invocation.return_binding:
                        alias_this.discard(s.invocation.return_binding)
                        alias_param.pop(s.invocation.return_binding, None)
                elif isinstance(s, AssertionStmt):
                    for o in s.operands:
                        visit_expr(o)
                elif isinstance(s, ThrowStmt):
                    visit_expr(s.message)
                elif isinstance(s, ReturnStmt):
                    if s.value is not None:
                        visit_expr(s.value)
                elif isinstance(s, IfStmt):
                    visit_expr(s.cond)
                    visit_stmts(s.then_body)
                    visit_stmts(s.else_body)
                elif isinstance(s, WhileStmt):
                    visit_expr(s.cond)
                    visit_stmts(s.body)
                elif isinstance(s, ExprStmt):
                    visit_expr(s.expr)

        visit_stmts(m.body)
        return MethodSummary(reads, writes_recv, frozenset(writes_args), inconclusive)


# ---------------------------------------------------------------------------
# Input/output element sets
# ---------------------------------------------------------------------------

ELEMENT_KINDS = (
    "arg_literal",
    "arg_var",
    "receiver_pre",
    "receiver_post",
    "return_value",
    "arg_object_post",
)


@dataclass(frozen=True)
class Element:
    """One input or output constituent of an invocation.

    ``anchor`` is (statement index of the invocation, argument position);
    position -1 marks receiver/return elements.  ``variable`` is the name
    carrying the value, or None for literals.
    """

    kind: str
    anchor: tuple[int, int]
    variable: str | None = None
    literal: object = None


@dataclass(frozen=True)
class IoSets:
    invocation_index: int
    X: tuple[Element, ...]
    Y: tuple[Element, ...]
    low_confidence: bool = False


def _is_object_type(model: ProjectModel, type_name: str | None) -> bool:
    return type_name is not None and type_name not in PRIMITIVE_TYPES


def compute_io_sets(
    index: int,
    inv: MethodInvocation,
    model: ProjectModel,
    summaries: dict[tuple[str, str, int], MethodSummary],
    policy: str = "conservative",
    arg_types: dict[str, str] | None = None,
) -> IoSets:
    """Element sets X (inputs) and Y (outputs) for one invocation.

    ``policy`` resolves inconclusive effect summaries: ``conservative``
    keeps the receiver out of Y, ``assume-mutated`` includes it flagged
    low-confidence.  ``arg_types`` optionally maps argument variable names
    to declared types so object-typed arguments can surface as
    arg_object_post outputs.
    """
    key = (inv.class_fqn, inv.method, len(inv.args))
    summary = summaries.get(key, _INCONCLUSIVE)
    arg_types = arg_types or {}

    X: list[Element] = []
    Y: list[Element] = []
    low_confidence = False

    for pos, a in enumerate(inv.args):
        if isinstance(a, Literal):
            X.append(Element("arg_literal", (index, pos), None, a.value))
        elif isinstance(a, VarRef):
            X.append(Element("arg_var", (index, pos), a.name))
        else:
            # composite argument expressions contribute their variables
            for sub in walk_expr(a):
                if isinstance(sub, VarRef):
                    X.append(Element("arg_var", (index, pos), sub.name))

    if inv.receiver is not None:
        include_x = summary.reads_receiver_fields or (
            summary.inconclusive and policy == "conservative"
        )
        if include_x:
            X.append(Element("receiver_pre", (index, -1), inv.receiver))
        if summary.writes_receiver_fields and not summary.inconclusive:
            Y.append(Element("receiver_post", (index, -1), inv.receiver))
        elif summary.inconclusive and policy == "assume-mutated":
            Y.append(Element("receiver_post", (index, -1), inv.receiver))
            low_confidence = True

    return_type = _return_type(model, inv)
    if inv.return_binding is not None and return_type is not None:
        Y.append(Element("return_value", (index, -1), inv.return_binding))

    for pos, a in enumerate(inv.args):
        if isinstance(a, VarRef) and pos in summary.writes_arg_fields:
            if _is_object_type(model, arg_types.get(a.name)):
                Y.append(Element("arg_object_post", (index, pos), a.name))

    return IoSets(index, tuple(X), tuple(Y), low_confidence)


def _return_type(model: ProjectModel, inv: MethodInvocation) -> str | None:
    from .frontend import STRING_BUILTINS

    if inv.class_fqn == "string":
        return STRING_BUILTINS.get(inv.method)
    cls = model.class_by_fqn(inv.class_fqn)
    if cls is None:
        # external call: trust the binding when present
        return inv.binding_type
    m = cls.method(inv.method, len(inv.args))
    if m is None:
        return inv.binding_type
    return m.return_type


__all__ = [
    "BOTTOM",
    "DefUseGraph",
    "build_def_use",
    "resolve_alias",
    "MethodSummary",
    "method_writes_summary",
    "Element",
    "IoSets",
    "compute_io_sets",
]
