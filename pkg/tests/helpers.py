"""Shared test utilities: random rule sets and an independent flag audit."""
from __future__ import annotations

import random

from taprepair.automaton import Model, StateCapExceeded
from taprepair.properties import catalog_declarations, load_catalog, property_constants
from taprepair.rules import parse_document
from taprepair.scenario import parse_scenario

POOL = ["presence.state", "weather.state", "temperature.value", "heater.switch",
        "ac.switch", "window.switch", "light.switch"]
SENSED = ["presence.state", "weather.state", "temperature.value"]
DEVICES = ["heater.switch", "ac.switch", "window.switch", "light.switch"]
LABELS = {"presence.state": ("present", "not_present"),
          "weather.state": ("raining", "not_raining"),
          "heater.switch": ("on", "off"), "ac.switch": ("on", "off"),
          "window.switch": ("open", "closed"), "light.switch": ("on", "off")}


def pool_header() -> str:
    from taprepair.rules import format_decl
    decls = catalog_declarations()
    return "\n".join(format_decl(d) for d in decls.values() if str(d.id) in POOL) + "\n"


def _constraint(rng: random.Random, attr: str) -> str:
    if attr == "temperature.value":
        return f"temperature.value {rng.choice('<>')} {rng.choice([16, 20, 24])}"
    return f"{attr} = {rng.choice(LABELS[attr])}"


def random_rule_text(rng: random.Random) -> str:
    lines = []
    for k in range(1, rng.randint(1, 3) + 1):
        trig = rng.choice(SENSED + DEVICES)
        target = rng.choice([d for d in DEVICES if d != trig])
        text = f"RULE r{k}: IF {_constraint(rng, trig)}"
        if rng.random() < 0.4:
            cond = rng.choice([a for a in SENSED + DEVICES if a not in (trig, target)])
            text += f" WHILE {_constraint(rng, cond)}"
        text += f" THEN {target} = {rng.choice(LABELS[target])}"
        roll = rng.random()
        if roll < 0.2:
            text += " AFTER 10min"
        elif roll < 0.35:
            text += " FOR 10min"
        lines.append(text)
    return "\n".join(lines) + "\n"


def random_scenario_text(rng: random.Random) -> str:
    lines = [f"INIT {d}={rng.choice(LABELS[d])}" for d in DEVICES if rng.random() < 0.7]
    if rng.random() < 0.5:
        lines.append(f"INIT temperature={rng.choice([14, 18, 22, 26])}")
    if rng.random() < 0.3:
        lines.append(f"OUTDOOR temperature={rng.choice([10, 30])}")
    return "\n".join(lines) + "\n"


def applicable_properties(decls):
    return [p for p in load_catalog() if all(a in decls for a in p.attributes())]


def random_models(seed: int, count: int, cap: int = 10 ** 4):
    """Yield (doc, scenario, [(prop, model)]) with every model under ``cap`` states."""
    rng = random.Random(seed)
    header = pool_header()
    made = 0
    while made < count:
        doc = parse_document(header + random_rule_text(rng))
        sc = parse_scenario(random_scenario_text(rng), doc.decls)
        pairs = []
        try:
            for p in applicable_properties(doc.decls):
                m = Model(doc.decls, doc.rules, p.attributes(), sc, tick_sec=600,
                          extra_values=property_constants(p, sc.placeholders))
                m.explore(cap)
                pairs.append((p, m))
        except StateCapExceeded:
            continue
        made += 1
        yield doc, sc, pairs


def audit_flags(assignment) -> bool:
    """Flag-sum invariants written out independently of the engine.

    One status value per (rule, attribute); one trigger, one latency wait and
    one action change per rule; a removed rule carries no other flag; the
    synthesized rule, if used, has exactly one trigger and no condition on the
    trigger's attribute."""
    from collections import Counter
    from taprepair.repair import NEW_RULE, FlagKind

    kinds = Counter()
    status = Counter()
    for p in assignment:
        if p.kind in (FlagKind.CONDITION, FlagKind.NEW_CONDITION):
            status[(p.rule, p.constraint.attr)] += 1
        else:
            kinds[(p.rule, p.kind)] += 1
    if any(n > 1 for n in status.values()):
        return False
    if any(n > 1 for (rule, kind), n in kinds.items() if kind is not FlagKind.REMOVE):
        return False
    removed = {p.rule for p in assignment if p.kind is FlagKind.REMOVE}
    for p in assignment:
        if p.rule in removed and p.kind is not FlagKind.REMOVE:
            return False
    new = [p for p in assignment if p.rule == NEW_RULE]
    if new:
        triggers = [p for p in new if p.kind is FlagKind.TRIGGER]
        if len(triggers) != 1:
            return False
        if any(p.kind is FlagKind.NEW_CONDITION and p.constraint.attr == triggers[0].constraint.attr
               for p in new):
            return False
    return True
