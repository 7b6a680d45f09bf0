"""Relation-encoded test discovery: P1/P2 classification and elements."""

from mrminer.dataflow import method_writes_summary
from mrminer.discovery import discover_mtc
from mrminer.frontend import SourceFile, link_project, parse_source


def test_corpus_positives_and_negatives_match_labels(discovery_results, labels):
    found = {name for name, r in discovery_results.items() if r.is_mtc}
    assert found == set(labels["positive"])
    assert not found & set(labels["negative"])


def test_reassignment_trap_is_rejected(discovery_results):
    # operands are redefined from external calls after the internal
    # invocations; exact reaching definitions must see through the names
    assert not discovery_results["absTrap"].is_mtc


def test_bool_connective_instance_relates_exactly_two_invocations(discovery_results):
    r = discovery_results["doubleNegateSame"]
    assert r.is_mtc and len(r.instances) == 1
    inst = r.instances[0]
    assert len(inst.MI) == 2
    assert inst.alpha.pattern == "A1_BoolAssert"
    assert inst.alpha.operator == "sameValue"
    assert inst.cut == "com.demo.p08.Num"


def test_two_relations_in_one_test_yield_two_instances(discovery_results):
    r = discovery_results["twoRelations"]
    assert len(r.instances) == 2
    assert [i.alpha.assertion_index for i in r.instances] == sorted(
        i.alpha.assertion_index for i in r.instances
    )


def test_three_feeding_invocations_detected(discovery_results):
    # before/after both come from current(), the literal 7 from add():
    # every instance relates more than two invocations
    r = discovery_results["addSevenRaisesBySeven"]
    assert r.is_mtc
    assert all(len(i.MI) == 3 for i in r.instances)


def test_element_kinds_for_push_pop(discovery_results):
    inst = discovery_results["pushPop"].instances[0]
    a = inst.alpha
    assert a.pattern == "A2_CompAssert"
    kinds = {a.e1.kind, a.e2.kind}
    assert a.e1.kind == "arg_literal" and a.e1.literal == 3
    assert a.e2.kind == "return_value"
    assert a.mi1[0] < a.mi2[0]


def test_mutated_argument_surfaces_as_object_state(discovery_results):
    inst = discovery_results["fillThenRead"].instances[0]
    assert inst.alpha.e1.kind == "arg_literal"
    assert inst.alpha.e2.kind == "return_value"
    assert inst.cut == "com.demo.p18.Filler"


def _discover(src: str, prefixes=("com.x",)):
    frag = parse_source(SourceFile("in.mt", src))
    model = link_project([frag], list(prefixes))
    summaries = method_writes_summary(model, 3)
    out = {}
    for suite in model.test_suites:
        for tc in suite.test_cases:
            out[tc.name] = discover_mtc(tc, model, summaries)
    return out


def test_logical_connective_disqualifies():
    r = _discover(
        """
class com.x.C {
    int id(int a) { return a; }
}

class com.x.T {
    @Test
    void t() {
        com.x.C c = new com.x.C();
        int a = c.id(1);
        int b = c.id(2);
        assertTrue(a < b && b > 0);
    }
}
"""
    )
    assert not r["t"].is_mtc


def test_single_invocation_fails_p1():
    r = _discover(
        """
class com.x.C {
    int id(int a) { return a; }
}

class com.x.T {
    @Test
    void t() {
        com.x.C c = new com.x.C();
        int a = c.id(1);
        assertTrue(a < 2);
    }
}
"""
    )
    assert not r["t"].is_mtc


def test_external_only_invocations_fail_p1():
    r = _discover(
        """
class com.x.T {
    @Test
    void t() {
        int a = org.other.Lib.f(1);
        int b = org.other.Lib.f(2);
        assertTrue(a < b);
    }
}
"""
    )
    assert not r["t"].is_mtc


def test_same_invocation_on_both_sides_rejected():
    r = _discover(
        """
class com.x.C {
    int id(int a) { return a; }
}

class com.x.T {
    @Test
    void t() {
        com.x.C c = new com.x.C();
        int a = c.id(1);
        int b = c.id(2);
        assertTrue(a <= a);
    }
}
"""
    )
    assert not r["t"].is_mtc


def test_operand_poisoned_by_opaque_region_rejected():
    r = _discover(
        """
class com.x.C {
    int id(int a) { return a; }
}

class com.x.T {
    @Test
    void t() {
        com.x.C c = new com.x.C();
        int a = c.id(1);
        int b = c.id(2);
        if (a > 0) {
            b = 0;
        }
        assertTrue(a < b);
    }
}
"""
    )
    assert not r["t"].is_mtc
