"""Detection of metamorphic-relation-encoded test cases.

A test case qualifies when (P1) it invokes methods of one internal class at
least twice and (P2) it contains a relation assertion whose two related
elements originate — via exact reaching definitions — from two different
invocations of that class.  Each qualifying (assertion, invocation pair)
yields one MR instance.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (
    AssertionStmt,
    BinaryOp,
    CallExpr,
    Assign,
    COMPARISON_OPS,
    Expr,
    InvocationStmt,
    Literal,
    LOGICAL_OPS,
    MethodInvocation,
    OpaqueRegion,
    ProjectModel,
    TestCaseIR,
    UnaryOp,
    VarDecl,
    VarRef,
    stmt_exprs,
    walk_expr,
)
from .dataflow import (
    BOTTOM,
    DefUseGraph,
    Element,
    IoSets,
    MethodSummary,
    build_def_use,
    compute_io_sets,
    resolve_alias,
)

# Invocation sites are ordered by (statement index, inline position); the
# statement's own invocation sorts before calls embedded in its expressions.
SiteKey = tuple[int, int]


@dataclass(frozen=True)
class InvocationSite:
    key: SiteKey
    invocation: MethodInvocation


@dataclass(frozen=True)
class CutInvocations:
    """Ordered invocation sites per internal class; P1 holds at ≥ 2."""

    per_class: dict[str, tuple[InvocationSite, ...]]

    def p1_classes(self) -> tuple[str, ...]:
        return tuple(sorted(c for c, sites in self.per_class.items() if len(sites) >= 2))


@dataclass(frozen=True)
class RelationAssertionMatch:
    assertion_index: int
    pattern: str  # 'A1_BoolAssert' | 'A2_CompAssert'
    e1: Element
    e2: Element
    mi1: SiteKey
    mi2: SiteKey
    operator: str
    # every invocation contributing an element to either operand; for an
    # internal boolean connective this deliberately excludes the connective
    # invocation itself (it plays the comparison operator's role)
    feeding: tuple[SiteKey, ...] = ()


@dataclass(frozen=True)
class MRInstance:
    alpha: RelationAssertionMatch
    MI: tuple[SiteKey, ...]
    cut: str


@dataclass(frozen=True)
class DiscoveryResult:
    test_name: str
    is_mtc: bool
    instances: tuple[MRInstance, ...]
    sites: dict[SiteKey, InvocationSite]
    graph: DefUseGraph
    io: dict[SiteKey, IoSets]


def collect_sites(tc: TestCaseIR) -> list[InvocationSite]:
    """All method invocations in a test body, in program order.

    Calls embedded in expressions (assertion operands, composite
    initializers) are separate sites after the statement's own invocation.
    """
    sites: list[InvocationSite] = []
    for i, stmt in enumerate(tc.statements):
        if isinstance(stmt, InvocationStmt):
            sites.append(InvocationSite((i, -1), stmt.invocation))
        pos = 0
        for e in stmt_exprs(stmt):
            for sub in walk_expr(e):
                if isinstance(sub, CallExpr):
                    sites.append(InvocationSite((i, pos), sub.invocation))
                    pos += 1
    return sites


def identify_method_invocations(tc: TestCaseIR, model: ProjectModel) -> CutInvocations:
    per_class: dict[str, list[InvocationSite]] = {}
    for site in collect_sites(tc):
        fqn = site.invocation.class_fqn
        if model.is_internal(fqn):
            per_class.setdefault(fqn, []).append(site)
    return CutInvocations({c: tuple(s) for c, s in per_class.items()})


def _var_types(tc: TestCaseIR) -> dict[str, str]:
    types: dict[str, str] = dict(tc.params)
    for s in tc.statements:
        if isinstance(s, VarDecl):
            types[s.name] = s.declared_type
        elif isinstance(s, InvocationStmt) and s.invocation.return_binding:
            if s.invocation.binding_type:
                types[s.invocation.return_binding] = s.invocation.binding_type
    return types


class _Analysis:
    """Shared per-test-case context for classification."""

    def __init__(
        self,
        tc: TestCaseIR,
        model: ProjectModel,
        summaries: dict[tuple[str, str, int], MethodSummary],
        policy: str,
    ):
        self.tc = tc
        self.model = model
        self.policy = policy
        self.graph = build_def_use(tc)
        self.var_types = _var_types(tc)
        self.cut = identify_method_invocations(tc, model)
        self.sites: dict[SiteKey, InvocationSite] = {}
        for site in collect_sites(tc):
            self.sites[site.key] = site
        self.io: dict[SiteKey, IoSets] = {}
        for key, site in self.sites.items():
            if model.is_internal(site.invocation.class_fqn):
                self.io[key] = compute_io_sets(
                    key[0], site.invocation, model, summaries, policy, self.var_types
                )

    # -- element resolution -------------------------------------------------

    def site_output(self, key: SiteKey, kind: str, variable: str | None = None) -> Element | None:
        io = self.io.get(key)
        if io is None:
            return None
        for e in io.Y:
            if e.kind == kind and (variable is None or e.variable == variable):
                return e
        return None

    def site_input(self, key: SiteKey, kind: str, **match) -> Element | None:
        io = self.io.get(key)
        if io is None:
            return None
        for e in io.X:
            if e.kind != kind:
                continue
            if "literal" in match and e.literal != match["literal"]:
                continue
            if "position" in match and e.anchor[1] != match["position"]:
                continue
            if "variable" in match and e.variable != match["variable"]:
                continue
            return e
        return None

    def operand_elements(
        self, expr: Expr, at_index: int
    ) -> tuple[list[tuple[SiteKey, Element]], bool]:
        """Elements of internal-class invocations feeding an operand.

        Returns (matches, poisoned).  A ⊥ reaching definition anywhere on
        the operand's def chain poisons the whole operand.
        """
        found: list[tuple[SiteKey, Element]] = []
        poisoned = False
        seen: set[tuple[str, object]] = set()

        def add(key: SiteKey, el: Element) -> None:
            tag = (el.kind, key, el.variable, repr(el.literal))
            if tag not in seen:
                seen.add(tag)
                found.append((key, el))

        def visit(e: Expr, idx: int) -> None:
            nonlocal poisoned
            if isinstance(e, Literal):
                self._match_literal(e, idx, add)
                return
            if isinstance(e, VarRef):
                self._resolve_var(e.name, idx, add, self._poison)
                return
            if isinstance(e, BinaryOp):
                if e.op in LOGICAL_OPS:
                    # logical combinations are rejected at the connective
                    # level; inside deeper operand positions treat their
                    # variables as ordinary uses
                    pass
                visit(e.lhs, idx)
                visit(e.rhs, idx)
                return
            if isinstance(e, UnaryOp):
                visit(e.operand, idx)
                return
            if isinstance(e, CallExpr):
                inv = e.invocation
                key = self._inline_key(inv, idx)
                if key is not None and key in self.io:
                    el = self.site_output(key, "return_value")
                    if el is None:
                        # inline internal call: return is still its output
                        el = Element("return_value", (idx, -1), None)
                    add(key, el)
                    return
                # external call: elements come from its receiver and args
                if inv.receiver is not None:
                    self._resolve_var(inv.receiver, idx, add, self._poison)
                for a in inv.args:
                    visit(a, idx)
                return
            # field access or other composites: visit variable leaves
            for sub in walk_expr(e):
                if isinstance(sub, VarRef) and sub is not e:
                    self._resolve_var(sub.name, idx, add, self._poison)

        self._poisoned_flag = False

        def _orig_visit(e: Expr) -> None:
            visit(e, at_index)

        _orig_visit(expr)
        return found, self._poisoned_flag

    def _poison(self) -> None:
        self._poisoned_flag = True

    def _inline_key(self, inv: MethodInvocation, stmt_index: int) -> SiteKey | None:
        for key, site in self.sites.items():
            if key[0] == stmt_index and site.invocation is inv:
                return key
        return None

    def _match_literal(self, lit: Literal, at_index: int, add) -> None:
        for key in self.io:
            el = self.site_input(key, "arg_literal", literal=lit.value)
            if el is not None and type(el.literal) is type(lit.value):
                add(key, el)

    def _resolve_var(self, var: str, at_index: int, add, poison) -> None:
        """Chase the reaching-definition chain of a variable use."""
        graph, tc = self.graph, self.tc
        idx, name = at_index, var
        hops = 0
        while True:
            hops += 1
            if hops > len(tc.statements) + 2:
                poison()
                return
            d = graph.reaching_def(idx, name)
            if d == BOTTOM or d is None:
                poison()
                return
            stmt = tc.statements[d]
            if isinstance(stmt, OpaqueRegion):
                poison()
                return
            if isinstance(stmt, InvocationStmt):
                key = (d, -1)
                if key in self.io:
                    el = self.site_output(key, "return_value", stmt.invocation.return_binding)
                    if el is not None:
                        add(key, el)
                # external definitions end the chain without a CUT element,
                # but the bound value may still feed CUT invocations as input
                self._match_uses_as_input(d, name, add, origin=(d, name))
                self._match_object_state((d, name), at_index, add)
                return
            init: Expr | None = None
            if isinstance(stmt, VarDecl):
                init = stmt.init
            elif isinstance(stmt, Assign):
                init = stmt.value
            if isinstance(init, VarRef):
                idx, name = d, init.name
                continue
            if isinstance(init, (Literal,)) or init is None:
                self._match_uses_as_input(d, name, add, origin=(d, name))
                self._match_object_state((d, name), at_index, add)
                return
            # composite initializer: recurse into its leaves at the def site
            for sub in walk_expr(init):
                if isinstance(sub, VarRef):
                    self._resolve_var(sub.name, d, add, poison)
                elif isinstance(sub, Literal):
                    self._match_literal(sub, d, add)
                elif isinstance(sub, CallExpr):
                    key = self._inline_key(sub.invocation, d)
                    if key is not None and key in self.io:
                        el = self.site_output(key, "return_value")
                        if el is not None:
                            add(key, el)
            self._match_uses_as_input(d, name, add, origin=(d, name))
            self._match_object_state((d, name), at_index, add)
            return

    def _match_uses_as_input(self, def_index: int, var: str, add, origin: tuple[int, str]) -> None:
        """Variables defined outside the CUT may still be its inputs."""
        for key, io in self.io.items():
            site = self.sites[key]
            for pos, a in enumerate(site.invocation.args):
                if isinstance(a, VarRef):
                    od, ov = resolve_alias(self.graph, self.tc, key[0], a.name)
                    if (od, ov) == origin:
                        el = self.site_input(key, "arg_var", position=pos)
                        if el is not None:
                            add(key, el)
            recv = site.invocation.receiver
            if recv is not None:
                od, ov = resolve_alias(self.graph, self.tc, key[0], recv)
                if (od, ov) == origin:
                    el = self.site_input(key, "receiver_pre")
                    if el is not None:
                        add(key, el)

    def _match_object_state(
        self, origin: tuple[int, str], use_index: int, add
    ) -> None:
        """An object variable read after a mutating CUT call is that call's
        post-state output; the latest such call before the use wins."""
        best: tuple[SiteKey, Element] | None = None
        for key in sorted(self.io):
            if key[0] >= use_index:
                continue
            site = self.sites[key]
            recv = site.invocation.receiver
            if recv is not None:
                if resolve_alias(self.graph, self.tc, key[0], recv) == origin:
                    el = self.site_output(key, "receiver_post")
                    if el is not None:
                        best = (key, el)
            for pos, a in enumerate(site.invocation.args):
                if isinstance(a, VarRef):
                    if resolve_alias(self.graph, self.tc, key[0], a.name) == origin:
                        el = self.site_output(key, "arg_object_post")
                        if el is not None and el.anchor[1] == pos:
                            best = (key, el)
        if best is not None:
            add(*best)


def _is_internal_bool_call(inv: MethodInvocation, model: ProjectModel) -> bool:
    if not model.is_internal(inv.class_fqn):
        return False
    cls = model.class_by_fqn(inv.class_fqn)
    if cls is None:
        return False
    m = cls.method(inv.method, len(inv.args))
    return m is not None and m.return_type == "bool"


def classify_assertion(
    analysis: _Analysis, index: int, assertion: AssertionStmt
) -> list[RelationAssertionMatch]:
    """Relation-assertion matches for one assertion, one per (mi1, mi2) pair."""
    model = analysis.model
    sides: list[Expr] = []
    pattern = ""
    operator = ""
    connective_key: SiteKey | None = None

    if assertion.api in ("assertTrue", "assertFalse"):
        operand = assertion.operands[0]
        # one step of reaching-definition lookup exposes the connective of
        # boolean flags (`bool ok = a < b; assertTrue(ok);`)
        seen_hops = 0
        at = index
        while isinstance(operand, VarRef) and seen_hops < len(analysis.tc.statements):
            seen_hops += 1
            d = analysis.graph.reaching_def(at, operand.name)
            if d is None or d == BOTTOM:
                return []
            stmt = analysis.tc.statements[d]
            if isinstance(stmt, VarDecl):
                operand, at = stmt.init, d
            elif isinstance(stmt, Assign):
                operand, at = stmt.value, d
            elif isinstance(stmt, InvocationStmt):
                operand, at = CallExpr(stmt.invocation), d
            else:
                return []
        index_for_sides = at if seen_hops else index

        if isinstance(operand, BinaryOp) and operand.op in COMPARISON_OPS:
            sides = [operand.lhs, operand.rhs]
            pattern, operator = "A1_BoolAssert", operand.op
        elif isinstance(operand, BinaryOp) and operand.op in LOGICAL_OPS:
            return []
        elif isinstance(operand, UnaryOp):
            return []
        elif isinstance(operand, CallExpr) and _is_internal_bool_call(operand.invocation, model):
            inv = operand.invocation
            recv: list[Expr] = [VarRef(inv.receiver)] if inv.receiver else []
            sides = recv + list(inv.args)
            pattern, operator = "A1_BoolAssert", inv.method
            # the connective call itself plays the operator's role; its own
            # invocation site must not count as a related invocation
            connective_key = analysis._inline_key(inv, index_for_sides)
        else:
            return []
        side_index = index_for_sides
    else:
        if len(assertion.operands) != 2:
            return []
        op1, op2 = assertion.operands
        for o in (op1, op2):
            if isinstance(o, BinaryOp) and o.op in LOGICAL_OPS:
                return []
        sides = [op1, op2]
        pattern, operator = "A2_CompAssert", assertion.api
        side_index = index

    resolved: list[list[tuple[SiteKey, Element]]] = []
    for side in sides:
        elems, poisoned = analysis.operand_elements(side, side_index)
        if poisoned:
            return []
        resolved.append([(k, el) for k, el in elems if k != connective_key])

    matches: list[RelationAssertionMatch] = []
    seen_pairs: set[tuple[SiteKey, SiteKey]] = set()
    for i in range(len(resolved)):
        for j in range(len(resolved)):
            if i == j:
                continue
            for k1, el1 in resolved[i]:
                for k2, el2 in resolved[j]:
                    if k1 == k2:
                        continue
                    c1 = analysis.sites[k1].invocation.class_fqn
                    c2 = analysis.sites[k2].invocation.class_fqn
                    if c1 != c2 or not model.is_internal(c1):
                        continue
                    if not k1 < k2:
                        continue
                    # e2 must be an output of mi2
                    if el2.kind not in ("return_value", "receiver_post", "arg_object_post"):
                        continue
                    pair = (k1, k2)
                    if pair in seen_pairs:
                        continue
                    seen_pairs.add(pair)
                    feeding = tuple(sorted({k for side in resolved for k, _el in side}))
                    matches.append(
                        RelationAssertionMatch(
                            index, pattern, el1, el2, k1, k2, operator, feeding
                        )
                    )
    matches.sort(key=lambda m: (m.mi1, m.mi2))
    return matches


def discover_mtc(
    tc: TestCaseIR,
    model: ProjectModel,
    summaries: dict[tuple[str, str, int], MethodSummary],
    policy: str = "conservative",
) -> DiscoveryResult:
    analysis = _Analysis(tc, model, summaries, policy)
    p1 = set(analysis.cut.p1_classes())
    instances: list[MRInstance] = []
    for i, stmt in enumerate(tc.statements):
        if not isinstance(stmt, AssertionStmt):
            continue
        for match in classify_assertion(analysis, i, stmt):
            cut = analysis.sites[match.mi1].invocation.class_fqn
            if cut not in p1:
                continue
            mi = _instance_mi(analysis, match, cut)
            instances.append(MRInstance(match, mi, cut))
    return DiscoveryResult(
        test_name=tc.name,
        is_mtc=bool(instances),
        instances=tuple(instances),
        sites=analysis.sites,
        graph=analysis.graph,
        io=analysis.io,
    )


def _instance_mi(analysis: _Analysis, match: RelationAssertionMatch, cut: str) -> tuple[SiteKey, ...]:
    """All CUT invocations feeding the assertion's operands."""
    keys: set[SiteKey] = {match.mi1, match.mi2}
    for key in match.feeding:
        if analysis.sites[key].invocation.class_fqn == cut:
            keys.add(key)
    return tuple(sorted(keys))


__all__ = [
    "SiteKey",
    "InvocationSite",
    "CutInvocations",
    "RelationAssertionMatch",
    "MRInstance",
    "DiscoveryResult",
    "collect_sites",
    "identify_method_invocations",
    "classify_assertion",
    "discover_mtc",
]
