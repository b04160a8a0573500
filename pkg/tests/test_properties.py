import time

import pytest
from hypothesis import given, settings, strategies as st

import templates
from taprepair.bench import fixture, load
from taprepair.properties import (Atom, PropertyError, Shape, Template, catalog_by_id,
                                  catalog_declarations, format_property, load_catalog,
                                  load_priority_tables, negate, negate_atom, normalize,
                                  parse_properties, prioritize, priority_key, timer_atoms)
from taprepair.rules import AttributeId

DECLS = catalog_declarations()
CATALOG = load_catalog()


def test_catalog_has_all_properties():
    assert len(CATALOG) == 53
    assert [p.id for p in CATALOG] == [f"P.{i}" for i in range(1, 54)]


def test_catalog_round_trips_through_text():
    again = parse_properties("\n".join(format_property(p) for p in CATALOG), DECLS)
    assert again == CATALOG


def test_every_catalog_property_has_a_scenario_group():
    assert all(p.scenario_group for p in CATALOG)


def test_templates_match_their_normal_forms():
    t0 = time.perf_counter()
    checked, bad = templates.compare(max_len=6)
    assert bad == []
    assert checked > 10 ** 7
    assert time.perf_counter() - t0 < 5


def test_template_comparison_catches_a_wrong_mapping():
    traces = templates.all_traces(3)
    desc = ("s", 0, True, (1,))
    p = normalize(Template.STATE_STATE_NEVER, "T", state=templates.atom(0),
                  states=(templates.atom(1),), decls=templates.DOC.decls)
    wrong = templates.surface(Template.STATE_STATE_ALWAYS, desc, traces)
    assert (wrong != templates.normal_form(p, traces)).any()


def test_trace_evaluator_agrees_with_letter_tables():
    assert templates.cross_check_evaluator(max_len=4) == []


def test_event_template_over_unsensed_tardy_attribute_is_rejected():
    smoke = Atom(AttributeId("smoke", "state"), "=", "detected", event=True)
    with pytest.raises(PropertyError):
        normalize(Template.ONE_EVENT_NEVER, event=smoke, decls=DECLS)


@given(st.sampled_from(CATALOG))
def test_negation_is_an_involution(p):
    assert negate(negate(p, DECLS), DECLS) == p


@given(st.sampled_from(CATALOG))
def test_negation_flips_the_post_on_every_value(p):
    n = negate(p, DECLS)
    for post, neg in zip([p.post], [n.post]):
        d = DECLS[post.attr]
        for v in (d.values() if not d.numeric else range(d.lo, d.hi + 1)):
            if isinstance(post.value, str) and post.value.startswith("${"):
                continue
            assert post.holds(v, d) != neg.holds(v, d)


def test_negating_a_three_valued_atom_gives_a_set():
    a = Atom(AttributeId("co2", "level"), "=", "high")
    n = negate_atom(a, DECLS)
    assert n.op == "in" and n.value == frozenset({"low", "moderate"})


@settings(max_examples=50)
@given(st.lists(st.sampled_from(CATALOG), unique_by=lambda p: p.id), st.integers(0, 100))
def test_prioritize_is_a_sorted_permutation(props, seed):
    tables = load_priority_tables()
    out = prioritize(props, tables, seed)
    assert sorted(p.id for p in out) == sorted(p.id for p in props)
    keys = [priority_key(p, tables) for p in out]
    assert keys == sorted(keys)


def test_prioritize_is_reproducible():
    assert prioritize(CATALOG, seed=3) == prioritize(CATALOG, seed=3)


def test_carbon_monoxide_outranks_rain():
    by_id = catalog_by_id()
    for seed in range(20):
        order = [p.id for p in prioritize([by_id["P.49"], by_id["P.53"]], seed=seed)]
        assert order == ["P.53", "P.49"]


def test_temperature_properties_use_their_own_table():
    tables = load_priority_tables()
    key = priority_key(catalog_by_id()["P.21"], tables)
    assert key.pre == tables.pre_temperature["ac.switch=on"]


def test_unknown_priority_falls_back_to_lowest(caplog):
    p = parse_properties("PROP X STATE WHEN motion.state = active THEN light.switch = on",
                         DECLS)[0]
    key = priority_key(p, load_priority_tables())
    assert key.pre == 99
    assert "lowest" in caplog.text


def test_permitted_latency_compiles_to_a_timer_atom():
    doc, sc, prop = load(fixture("Group 4"))
    atoms = timer_atoms(prop, doc.rules, 300)
    # only r1 is triggered by the CO2 precondition; 15min run, 10min allowance
    assert atoms == [Atom(None, ">=", 1, timer_rule="r1")]
    assert prop.shape is Shape.STATE


@pytest.mark.parametrize("line", [
    "PROP X STATE WHEN nothing.here = 1 THEN light.switch = on",
    "PROP X STATE WHEN presence = present THEN @light.switch = on",
    "PROP X SOMETIMES WHEN presence = present THEN light.switch = on",
])
def test_bad_property_lines(line):
    with pytest.raises(PropertyError):
        parse_properties(line, DECLS)
