"""Synthesis of parameterized, executable methods from MR instances.

An MR instance with exactly two invocations and an explicit input
transformation is rewritten into a standalone method: the source inputs
become parameters, the transformation chain and both invocations are kept,
and the relation assertion becomes the method's single assertion.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .ir import (
    Assign,
    AssertionStmt,
    BinaryOp,
    CallExpr,
    Expr,
    FieldAccess,
    InvocationStmt,
    IrError,
    Literal,
    MethodInvocation,
    NewExpr,
    OpaqueRegion,
    ProjectModel,
    SourceSpan,
    Stmt,
    TestCaseIR,
    UnaryOp,
    VarDecl,
    VarRef,
    stmt_used_vars,
)
from .dataflow import BOTTOM, Element, MethodSummary, _opaque_vars, build_def_use, resolve_alias
from .discovery import DiscoveryResult, MRInstance, SiteKey


class SliceError(IrError):
    """Raised when codification would need statements inside an opaque region."""


@dataclass(frozen=True)
class MRConstituents:
    target_methods: tuple[tuple[str, str], ...]
    source_input: tuple[Element, ...]      # x_s
    followup_input: tuple[Element, ...]    # x_f
    transform_chain: tuple[int, ...]       # statement indices
    source_output: tuple[Element, ...]     # y_s
    followup_output: tuple[Element, ...]   # y_f
    relation_assertion: int
    mi1: SiteKey
    mi2: SiteKey
    crosses_opaque: bool = False


@dataclass(frozen=True)
class ParamOrigin:
    """How a parameter's value is recovered from the origin test."""

    kind: str  # 'var' | 'literal'
    name: str
    literal: object = None
    literal_type: str = ""


@dataclass(frozen=True)
class CodifiedMR:
    name: str
    params: tuple[tuple[str, str], ...]
    body: TestCaseIR
    provenance: tuple[str, int]  # (origin test name, instance index)
    cut: str
    status: str = "candidate"
    param_origins: tuple[ParamOrigin, ...] = ()
    # origin-test statement index before which parameter values are captured
    capture_index: int = -1


def deduce_constituents(
    instance: MRInstance, result: DiscoveryResult, tc: TestCaseIR
) -> MRConstituents | None:
    """Constituent tuple for a two-invocation instance, or None.

    None signals refusal: more than two invocations feed the assertion, or
    the follow-up input has no explicit transformation from the source
    input/output (hard-coded follow-up inputs are out of scope).
    """
    if len(instance.MI) != 2:
        return None
    mi1, mi2 = instance.alpha.mi1, instance.alpha.mi2
    io1, io2 = result.io[mi1], result.io[mi2]
    graph = result.graph

    xs_origins = _element_origins(tc, graph, io1.X, mi1[0])
    chain, connected, crosses = _slice_transform_chain(
        tc, graph, result, instance, xs_origins
    )
    if not connected or not chain:
        return None
    inv1 = result.sites[mi1].invocation
    inv2 = result.sites[mi2].invocation
    return MRConstituents(
        target_methods=tuple(
            dict.fromkeys([(inv1.class_fqn, inv1.method), (inv2.class_fqn, inv2.method)])
        ),
        source_input=io1.X,
        followup_input=io2.X,
        transform_chain=tuple(sorted(chain)),
        source_output=io1.Y,
        followup_output=io2.Y,
        relation_assertion=instance.alpha.assertion_index,
        mi1=mi1,
        mi2=mi2,
        crosses_opaque=crosses,
    )


def _element_origins(
    tc: TestCaseIR, graph, elements, at_index: int
) -> set[tuple[int | str | None, str]]:
    """Terminal (definition index, variable) identities of variable elements."""
    origins: set[tuple[int | str | None, str]] = set()
    for e in elements:
        if e.variable is not None:
            origins.add(resolve_alias(graph, tc, at_index, e.variable))
    return origins


def _slice_transform_chain(
    tc: TestCaseIR,
    graph,
    result: DiscoveryResult,
    instance: MRInstance,
    xs_origins: set,
) -> tuple[set[int], bool, bool]:
    """Def-use slice from x_s ∪ y_s to x_f, excluding mi1 and mi2.

    Returns (chain statement indices, connected, crosses_opaque).  A path is
    connected when it terminates at mi1 (a y_s value) or at a source-input
    origin; statements on unconnected paths (fresh literals) are not
    transformation steps.
    """
    mi1_idx, mi2_idx = instance.alpha.mi1[0], instance.alpha.mi2[0]
    chain: set[int] = set()
    crosses = False
    memo: dict[tuple[int, str], bool] = {}
    # objects mutated by mi1: reading them after mi1 reads mi1's output state
    ys_object_origins = _element_origins(
        tc,
        graph,
        [e for e in result.io[instance.alpha.mi1].Y
         if e.kind in ("receiver_post", "arg_object_post")],
        mi1_idx,
    )

    def visit(use_idx: int, var: str) -> bool:
        nonlocal crosses
        key = (use_idx, var)
        if key in memo:
            return memo[key]
        memo[key] = False  # cycle guard
        d = graph.reaching_def(use_idx, var)
        if d == BOTTOM:
            # the chain enters an opaque region: include the latest opaque
            # statement touching the variable so codify can refuse precisely
            crosses = True
            for i in range(use_idx - 1, -1, -1):
                s = tc.statements[i]
                if isinstance(s, OpaqueRegion) and var in _opaque_vars(s):
                    chain.add(i)
                    break
            memo[key] = True
            return True
        if d is None:
            return False
        if d == mi1_idx:
            memo[key] = True
            return True
        terminal = resolve_alias(graph, tc, use_idx, var)
        if terminal in xs_origins and terminal[0] == d:
            memo[key] = True
            return True
        if terminal in ys_object_origins and terminal[0] == d and use_idx > mi1_idx:
            memo[key] = True
            return True
        if d == mi2_idx:
            return False
        stmt = tc.statements[d]
        connected = False
        for u in stmt_used_vars(stmt):
            if visit(d, u):
                connected = True
        if connected:
            chain.add(d)
        memo[key] = connected
        return connected

    followup = result.io[instance.alpha.mi2].X
    connected_any = False
    for e in followup:
        if e.variable is None:
            continue
        if visit(mi2_idx, e.variable):
            connected_any = True
    # receiver-carrying objects mutated by intermediate calls: those calls
    # are part of reproducing the follow-up state
    _add_mutating_calls(tc, graph, result, instance, chain, followup)
    return chain, connected_any, crosses


def _add_mutating_calls(tc, graph, result, instance, chain: set[int], followup) -> None:
    mi1_idx, mi2_idx = instance.alpha.mi1[0], instance.alpha.mi2[0]
    origins = _element_origins(tc, graph, followup, mi2_idx)
    for key, io in result.io.items():
        idx = key[0]
        if key in (instance.alpha.mi1, instance.alpha.mi2) or key[1] != -1:
            continue
        if not (0 <= idx < mi2_idx) or idx == mi1_idx:
            continue
        site = result.sites[key]
        mutates = any(e.kind in ("receiver_post", "arg_object_post") for e in io.Y)
        if not mutates:
            continue
        recv = site.invocation.receiver
        touched = [recv] if recv else []
        touched += [a.name for a in site.invocation.args if isinstance(a, VarRef)]
        for v in touched:
            if resolve_alias(graph, tc, idx, v) in origins:
                chain.add(idx)
                break


# ---------------------------------------------------------------------------
# Codification
# ---------------------------------------------------------------------------


def codify(
    tc: TestCaseIR,
    constituents: MRConstituents,
    result: DiscoveryResult,
    model: ProjectModel,
    instance_index: int,
) -> CodifiedMR:
    """Rewrite the origin test into a parameterized method.

    Source-input variables/literals become parameters, their defining
    statements are dropped, irrelevant assertions and dead statements are
    removed, and the remaining statements are reindexed.
    """
    if constituents.crosses_opaque:
        raise SliceError(
            f"{tc.name}: transformation chain crosses an opaque control-flow region"
        )
    graph = result.graph
    mi1_idx, mi2_idx = constituents.mi1[0], constituents.mi2[0]
    a_idx = constituents.relation_assertion
    var_types = _declared_types(tc)

    # -- parameters from source-input elements, in statement/position order --
    params: list[tuple[str, str]] = []
    param_origins: list[ParamOrigin] = []
    param_decl_indices: set[int] = set()
    literal_params: dict[tuple[object, str], str] = {}
    seen_vars: set[str] = set()
    fresh = _fresh_namer(tc)

    # receiver first, then arguments in position order (statement order)
    for e in sorted(constituents.source_input, key=lambda e: e.anchor[1]):
        if e.kind == "arg_literal":
            lk = (e.literal, _literal_type(e.literal))
            if lk in literal_params:
                continue
            name = fresh()
            literal_params[lk] = name
            params.append((name, lk[1]))
            param_origins.append(ParamOrigin("literal", name, e.literal, lk[1]))
        elif e.variable is not None:
            d, origin_var = resolve_alias(graph, tc, mi1_idx, e.variable)
            if d == BOTTOM:
                raise SliceError(f"{tc.name}: source input {e.variable!r} is opaque")
            if origin_var in seen_vars:
                continue
            seen_vars.add(origin_var)
            ptype = var_types.get(origin_var, "?")
            params.append((origin_var, ptype))
            param_origins.append(ParamOrigin("var", origin_var))
            if isinstance(d, int):
                param_decl_indices.add(d)

    if not params:
        raise SliceError(f"{tc.name}: no parameterizable source input")

    # -- statement selection: backward slice of chain + invocations + assertion
    keep: set[int] = set(constituents.transform_chain) | {mi1_idx, mi2_idx, a_idx}
    work = list(keep)
    while work:
        i = work.pop()
        if isinstance(tc.statements[i], OpaqueRegion):
            raise SliceError(f"{tc.name}: required statement {i} is opaque")
        for v in stmt_used_vars(tc.statements[i]):
            d = graph.reaching_def(i, v)
            if d == BOTTOM:
                raise SliceError(f"{tc.name}: value of {v!r} flows through opaque code")
            if d is None or d in keep or d in param_decl_indices:
                continue
            if _defines_only_param(tc, graph, d, param_decl_indices, seen_vars):
                continue
            keep.add(d)
            work.append(d)
    _keep_mutations(tc, graph, result, constituents, keep, param_decl_indices)

    # -- rebuild statements -------------------------------------------------
    alias_to_param = _param_alias_map(tc, graph, keep, param_decl_indices, seen_vars)
    body: list[Stmt] = []
    for i in sorted(keep):
        if i in param_decl_indices:
            continue
        stmt = tc.statements[i]
        if isinstance(stmt, AssertionStmt) and i != a_idx:
            continue
        body.append(_rewrite_stmt(stmt, literal_params, alias_to_param, i == a_idx or i == mi1_idx))
    name = f"{tc.name}_MR{instance_index}"
    body_tc = TestCaseIR(
        name=name,
        statements=tuple(body),
        source_span=tc.source_span,
        params=tuple(params),
    )
    _check_closed(body_tc)
    return CodifiedMR(
        name=name,
        params=tuple(params),
        body=body_tc,
        provenance=(tc.name, instance_index),
        cut=_instance_cut(result, constituents),
        param_origins=tuple(param_origins),
        capture_index=max(param_decl_indices) + 1 if param_decl_indices else 0,
    )


def _instance_cut(result: DiscoveryResult, constituents: MRConstituents) -> str:
    return result.sites[constituents.mi1].invocation.class_fqn


def _declared_types(tc: TestCaseIR) -> dict[str, str]:
    types: dict[str, str] = dict(tc.params)
    for s in tc.statements:
        if isinstance(s, VarDecl):
            types[s.name] = s.declared_type
        elif isinstance(s, InvocationStmt) and s.invocation.return_binding:
            if s.invocation.binding_type:
                types[s.invocation.return_binding] = s.invocation.binding_type
    return types


def _literal_type(value: object) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    return "?"


def _fresh_namer(tc: TestCaseIR):
    taken = set()
    for s in tc.statements:
        taken.update(stmt_used_vars(s))
        for v in (getattr(s, "name", None),):
            if isinstance(v, str):
                taken.add(v)
    counter = [-1]

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = "v" if counter[0] == 0 else f"v{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    return fresh


def _defines_only_param(tc, graph, d: int, param_decls: set[int], param_vars: set[str]) -> bool:
    stmt = tc.statements[d]
    if isinstance(stmt, (VarDecl, Assign)):
        name = stmt.name
        value = stmt.init if isinstance(stmt, VarDecl) else stmt.value
        # pure alias of a parameter variable needs no statement
        if isinstance(value, VarRef):
            _, origin = resolve_alias(graph, tc, d + 1, name)
            return origin in param_vars
        return name in param_vars and d in param_decls
    return False


def _keep_mutations(tc, graph, result, constituents, keep: set[int], param_decls: set[int]) -> None:
    """Mutating calls on objects used by kept statements must be kept too."""
    a_idx = constituents.relation_assertion
    object_origins: set = set()
    for i in list(keep):
        for v in stmt_used_vars(tc.statements[i]):
            object_origins.add(resolve_alias(graph, tc, i, v))
    changed = True
    while changed:
        changed = False
        for key, io in result.io.items():
            idx = key[0]
            if key[1] != -1 or idx in keep or idx in param_decls or idx >= a_idx:
                continue
            site = result.sites[key]
            mutated_vars = [
                e.variable for e in io.Y if e.kind in ("receiver_post", "arg_object_post")
            ]
            for v in mutated_vars:
                if v and resolve_alias(graph, tc, idx, v) in object_origins:
                    keep.add(idx)
                    for u in stmt_used_vars(tc.statements[idx]):
                        object_origins.add(resolve_alias(graph, tc, idx, u))
                    changed = True
                    break


def _param_alias_map(tc, graph, keep: set[int], param_decls: set[int], param_vars: set[str]):
    """Variables that are pure aliases of parameters map to the param name."""
    alias: dict[str, str] = {}
    for i in sorted(keep):
        stmt = tc.statements[i]
        if isinstance(stmt, (VarDecl, Assign)):
            value = stmt.init if isinstance(stmt, VarDecl) else stmt.value
            if isinstance(value, VarRef):
                _, origin = resolve_alias(graph, tc, i + 1, stmt.name)
                if origin in param_vars and i in param_decls:
                    alias[stmt.name] = origin
    return alias


def _rewrite_stmt(stmt: Stmt, literal_params: dict, aliases: dict, replace_literals: bool) -> Stmt:
    def rw(e: Expr) -> Expr:
        if isinstance(e, Literal) and replace_literals:
            key = (e.value, _literal_type(e.value))
            if key in literal_params:
                return VarRef(literal_params[key])
            return e
        if isinstance(e, VarRef):
            return VarRef(aliases.get(e.name, e.name))
        if isinstance(e, BinaryOp):
            return BinaryOp(e.op, rw(e.lhs), rw(e.rhs))
        if isinstance(e, UnaryOp):
            return UnaryOp(e.op, rw(e.operand))
        if isinstance(e, FieldAccess):
            return FieldAccess(rw(e.base), e.field)
        if isinstance(e, CallExpr):
            return CallExpr(rw_inv(e.invocation))
        if isinstance(e, NewExpr):
            return NewExpr(e.class_fqn, tuple(rw(a) for a in e.args))
        return e

    def rw_inv(inv: MethodInvocation) -> MethodInvocation:
        recv = aliases.get(inv.receiver, inv.receiver) if inv.receiver else None
        return replace(inv, receiver=recv, args=tuple(rw(a) for a in inv.args))

    if isinstance(stmt, VarDecl):
        return VarDecl(stmt.name, stmt.declared_type, rw(stmt.init))
    if isinstance(stmt, Assign):
        return Assign(stmt.name, rw(stmt.value))
    if isinstance(stmt, InvocationStmt):
        return InvocationStmt(rw_inv(stmt.invocation))
    if isinstance(stmt, AssertionStmt):
        return AssertionStmt(stmt.api, tuple(rw(o) for o in stmt.operands))
    return stmt


def _check_closed(tc: TestCaseIR) -> None:
    graph = build_def_use(tc)
    param_names = {n for n, _t in tc.params}
    for i, stmt in enumerate(tc.statements):
        for v in stmt_used_vars(stmt):
            d = graph.reaching_def(i, v)
            if d is None and v not in param_names:
                raise SliceError(f"{tc.name}: free variable {v!r} is not a parameter")
    from .ir import stmt_defined_var

    for n, _t in tc.params:
        for i, stmt in enumerate(tc.statements):
            if stmt_defined_var(stmt) == n:
                raise SliceError(f"{tc.name}: statement {i} redefines parameter {n!r}")


def render(mr: CodifiedMR) -> str:
    """Deterministic MiniTest source for one codified MR.

    The method is wrapped in a carrier class so the output is a complete,
    reparsable compilation unit.
    """
    from .frontend import print_class
    from .ir import ClassDecl

    if not mr.params:
        raise IrError(f"{mr.name}: codified methods must have parameters")
    shell = ClassDecl(f"mr.codified.{mr.name}", (), ())
    return print_class(shell, (mr.body,))


def synthesize_all(
    model: ProjectModel,
    results: list[DiscoveryResult],
) -> tuple[list[CodifiedMR], list[str]]:
    """Codify every synthesizable instance; returns (MRs, refusal notes)."""
    mrs: list[CodifiedMR] = []
    notes: list[str] = []
    tests = {tc.name: tc for suite in model.test_suites for tc in suite.test_cases}
    for result in results:
        tc = tests[result.test_name]
        for idx, instance in enumerate(result.instances):
            constituents = deduce_constituents(instance, result, tc)
            if constituents is None:
                reason = (
                    "more than two invocations feed the assertion"
                    if len(instance.MI) != 2
                    else "no explicit input transformation"
                )
                notes.append(f"{tc.name}[{idx}]: skipped — {reason}")
                continue
            try:
                mrs.append(codify(tc, constituents, result, model, idx))
            except SliceError as e:
                notes.append(f"{tc.name}[{idx}]: refused — {e}")
    return mrs, notes


__all__ = [
    "SliceError",
    "MRConstituents",
    "ParamOrigin",
    "CodifiedMR",
    "deduce_constituents",
    "codify",
    "render",
    "synthesize_all",
]
