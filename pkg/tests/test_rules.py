import pytest
from hypothesis import given, settings, strategies as st

from taprepair.properties import catalog_declarations
from taprepair.rules import (AttributeId, DslError, Op, format_document, format_duration,
                             format_rule, parse_constraint, parse_document, parse_duration)

DECLS = catalog_declarations()
ENUMS = sorted((a for a, d in DECLS.items() if not d.numeric), key=str)
CONTROLLABLE = [a for a in ENUMS if DECLS[a].controllable]
NUMERIC = sorted((a for a, d in DECLS.items() if d.numeric), key=str)


@st.composite
def constraints(draw, attrs=None):
    a = draw(st.sampled_from(attrs or ENUMS + NUMERIC))
    d = DECLS[a]
    if d.numeric:
        op = draw(st.sampled_from(["<", "<=", ">", ">=", "=", "!="]))
        return f"{a} {op} {draw(st.integers(d.lo, d.hi))}"
    op = draw(st.sampled_from(["=", "!="]))
    return f"{a} {op} {draw(st.sampled_from(d.labels))}"


durations = st.integers(1, 180).map(lambda m: f"{m}min")


@st.composite
def rule_texts(draw):
    parts = [f"IF {draw(constraints())}"]
    conds = draw(st.lists(constraints(), max_size=2))
    if conds:
        parts.append("WHILE " + " AND ".join(conds))
    target = draw(st.sampled_from(CONTROLLABLE))
    parts.append(f"THEN {target} = {draw(st.sampled_from(DECLS[target].labels))}")
    if draw(st.booleans()):
        parts.append(f"FOR {draw(durations)}")
    tail = draw(st.sampled_from(["", "after", "until"]))
    if tail == "after":
        parts.append(f"AFTER {draw(durations)}")
    elif tail == "until":
        parts.append(f"UNTIL {draw(constraints(ENUMS))}")
    return " ".join(parts)


@settings(max_examples=150, deadline=None)
@given(st.lists(rule_texts(), min_size=1, max_size=4))
def test_format_parse_round_trip(texts):
    rules = parse_document("\n".join(texts), DECLS).rules
    again = parse_document("\n".join(format_rule(r) for r in rules), DECLS).rules
    assert again == rules


def test_document_round_trip_keeps_declarations():
    doc = parse_document("ATTR co2.level {low, moderate, high} TARDY LEVELS 800 1000\n"
                         "ATTR fan.switch {on, off}\n"
                         "RULE a: IF co2 > 1000 THEN fan.switch = on FOR 15min\n")
    again = parse_document(format_document(doc))
    assert again.decls == doc.decls and again.rules == doc.rules


def test_leveled_threshold_maps_to_label():
    c = parse_constraint("co2 > 1000", DECLS)
    assert (c.attr, c.op, c.value) == (AttributeId("co2", "level"), Op.EQ, "high")


def test_auto_ids_skip_explicit_ones():
    rules = parse_document("RULE r1: IF presence = present THEN light.switch = on\n"
                           "IF presence = not_present THEN light.switch = off\n", DECLS).rules
    assert [r.id for r in rules] == ["r1", "r2"]


@pytest.mark.parametrize("text", [
    "IF nothing.here = 1 THEN light.switch = on",
    "IF presence = present THEN presence.state = present",
    "IF presence < present THEN light.switch = on",
    "IF temperature < 99 THEN light.switch = on",
    "IF presence = present THEN light.switch = on AFTER 1min UNTIL presence = present",
    "IF co2 > 900 THEN fan.switch = on",
])
def test_bad_rules_raise(text):
    with pytest.raises(DslError):
        parse_document(text, DECLS)


def test_duplicate_ids_rejected():
    with pytest.raises(DslError):
        parse_document("RULE a: IF presence = present THEN light.switch = on\n"
                       "RULE a: IF presence = present THEN light.switch = off\n", DECLS)


@given(st.integers(0, 10 ** 6))
def test_duration_round_trip(sec):
    assert parse_duration(format_duration(sec)) == sec


def test_durations_round_half_up():
    assert parse_duration("1.5s") == 2
    assert parse_duration("2.5s") == 3
    assert parse_duration("0.5min") == 30
