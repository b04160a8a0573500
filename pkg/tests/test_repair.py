import copy

import pytest

from helpers import audit_flags
from taprepair.automaton import Label, Model
from taprepair.bench import FIXTURES, fixture, load, run_fixture
from taprepair.checker import Verdict, check, involved_rules
from taprepair.properties import catalog_by_id, load_catalog, property_constants
from taprepair.repair import (ITER_LIMIT, ROUND_LIMIT, FlagKind, PatchClass, Predicate,
                              RepairConfig, RuleEdit, TooManyPredicates, abstract_model,
                              apply_edits, check_local_feasibility, emit_rule_edits,
                              flag_sums_ok, in_scope, reason_patch, refine, repair)
from taprepair.rules import Constraint, Op, format_rule, parse_document

RESULTS = {f.name: run_fixture(f) for f in FIXTURES}


def _model(name, rules=None):
    doc, sc, prop = load(fixture(name))
    rules = doc.rules if rules is None else rules
    m = Model(doc.decls, rules, prop.attributes(), sc,
              extra_values=property_constants(prop, sc.placeholders))
    return doc, sc, prop, m


@pytest.mark.parametrize("name", list(RESULTS))
def test_every_offered_assignment_passes_an_independent_audit(name):
    rep = RESULTS[name].report
    assert rep.offered
    assert [a for a in rep.offered if not audit_flags(a)] == []
    assert rep.examined >= len(rep.offered)


@pytest.mark.parametrize("name", list(RESULTS))
def test_iterations_and_rounds_stay_bounded(name):
    rep = RESULTS[name].report
    assert rep.iterations <= ROUND_LIMIT * ITER_LIMIT
    assert rep.rounds <= ROUND_LIMIT


@pytest.mark.parametrize("name", list(RESULTS))
def test_patched_rules_reparse_and_pass(name):
    doc, sc, prop = load(fixture(name))
    rep = RESULTS[name].report
    text = "\n".join(format_rule(r) for r in rep.rules)
    rules = parse_document(text, doc.decls).rules
    assert rules == rep.rules
    m = Model(doc.decls, rules, prop.attributes(), sc,
              extra_values=property_constants(prop, sc.placeholders))
    assert check(m, prop).verdict is Verdict.PASS


@pytest.mark.parametrize("name", list(RESULTS))
def test_edits_touch_only_rules_on_a_counterexample(name):
    # later rounds start from partly patched rules, so take the union over
    # the counterexamples of every partial edit set
    doc, sc, prop = load(fixture(name))
    edits = RESULTS[name].report.edits
    on_path = set()
    for mask in range(2 ** len(edits)):
        part = [e for i, e in enumerate(edits) if mask >> i & 1]
        _, _, _, m = _model(name, apply_edits(doc.rules, part))
        res = check(m, prop)
        if res.counterexample is not None:
            on_path |= set(involved_rules(res.counterexample, m))
    for e in edits:
        if e.kind == "AddRule":
            assert e.rule_id not in {r.id for r in doc.rules}
        else:
            assert e.rule_id in on_path


@pytest.mark.parametrize("name", list(RESULTS))
def test_edits_rebuild_the_patched_rules(name):
    doc, _, _ = load(fixture(name))
    rep = RESULTS[name].report
    assert apply_edits(doc.rules, rep.edits) == rep.rules
    assert emit_rule_edits(doc.rules, rep.rules) == rep.edits


def test_passing_property_needs_no_repair():
    doc = parse_document("ATTR presence.state {present, not_present} ENV\n"
                         "ATTR heater.switch {on, off}\n"
                         "RULE a: IF presence = not_present THEN heater.switch = off\n")
    from taprepair.scenario import parse_scenario
    sc = parse_scenario("INIT heater=off\n", doc.decls)
    assert repair(doc.rules, doc.decls, catalog_by_id()["P.23"], sc) is None


def test_in_scope_shares_the_scenario_group_and_declared_attributes():
    doc, _, prop = load(fixture("Group 1"))
    scope = in_scope(prop, load_catalog(), doc.decls)
    assert scope and prop not in scope
    for q in scope:
        assert prop.scenario_group in q.groups
        assert q.attributes() <= set(doc.decls)


def test_flag_sums():
    heat = Constraint(*parse_document("ATTR presence.state {present, not_present} ENV\n")
                      .decls.keys(), Op.EQ, "present")
    away = Constraint(heat.attr, Op.EQ, "not_present")
    cond = Predicate(FlagKind.CONDITION, "r1", heat)
    assert flag_sums_ok(frozenset({cond}))
    assert not flag_sums_ok(frozenset({cond, Predicate(FlagKind.CONDITION, "r1", away)}))
    assert not flag_sums_ok(frozenset({cond, Predicate(FlagKind.REMOVE, "r1")}))
    assert not flag_sums_ok(frozenset({Predicate(FlagKind.NEW_CONDITION, "*new*", heat)}))
    trig = Predicate(FlagKind.TRIGGER, "*new*", away)
    assert flag_sums_ok(frozenset({trig}))
    assert not flag_sums_ok(frozenset({trig, Predicate(FlagKind.NEW_CONDITION, "*new*", heat)}))


def _first_patch(name):
    doc, sc, prop, m = _model(name)
    cex = check(m, prop).counterexample
    am = abstract_model(doc.rules, cex, m, prop, RepairConfig())
    patch = reason_patch(am, RepairConfig(), 2 * len(cex.states))
    patch.cls = check_local_feasibility(patch, am)
    return am, patch


def test_patch_needing_other_environment_is_p_i():
    am, patch = _first_patch("Group 1")
    assert patch.cls is PatchClass.P_I
    refine(am, patch)
    assert am.frozen


def test_patch_replaying_into_violation_is_p_x():
    am, patch = _first_patch("Group 4")
    assert patch.cls is PatchClass.P_X
    refine(am, patch)
    assert patch.assignment in am.blocked and am.frozen


def test_environment_made_success_bans_the_move():
    am, patch = _first_patch("Group 3")
    patch = copy.copy(patch)
    patch.cls = PatchClass.P_X
    patch.banned = Label("EnvChange", "presence.state=not_present")
    before = am.build(patch.assignment)
    assert any(l == patch.banned for s in before.explore().states
               for l, _ in before.successors(s))
    refine(am, patch)
    assert patch.banned in am.invariants
    m = am.build(patch.assignment)
    for s in m.explore().states:
        assert all(l != patch.banned for l, _ in m.successors(s))


@pytest.mark.parametrize("name", ["Group 1", "Group 4"])
def test_refine_is_idempotent(name):
    am, patch = _first_patch(name)
    refine(am, patch)
    once = (am.frozen, set(am.invariants), set(am.blocked))
    refine(am, patch)
    assert (am.frozen, set(am.invariants), set(am.blocked)) == once


def test_flag_cap():
    doc, sc, prop, m = _model("Group 1")
    cex = check(m, prop).counterexample
    with pytest.raises(TooManyPredicates):
        abstract_model(doc.rules, cex, m, prop, RepairConfig(flag_cap=2))


def test_limits_stop_the_search():
    doc, sc, prop = load(fixture("Group 1"))
    rep = repair(doc.rules, doc.decls, prop, sc, cfg=RepairConfig(iter_limit=1, round_limit=1))
    assert not rep.fixed and rep.rounds == 1 and rep.iterations == 1 and rep.edits == []


def test_edit_strings():
    doc, _, _ = load(fixture("Group 4"))
    rep = RESULTS["Group 4"].report
    assert [str(e) for e in rep.edits] == ["ModifyLatency r2: UNTIL co2.level = low",
                                           "ModifyLatency r3: UNTIL co2.level = low"]
    assert str(RuleEdit("RemoveRule", "r1")) == "RemoveRule r1"
