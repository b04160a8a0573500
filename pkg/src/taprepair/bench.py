"""Built-in flawed rule groups used by ``bench`` and the acceptance tests."""
from __future__ import annotations

import time
from dataclasses import dataclass

from .properties import catalog_by_id, load_catalog, prioritize
from .repair import RepairConfig, RepairReport, in_scope, repair
from .rules import parse_document
from .scenario import parse_scenario


@dataclass(frozen=True)
class Fixture:
    name: str
    rules: str
    scenario: str
    prop: str
    pattern: str | None


FIXTURES = [
    Fixture(
        "Group 1",
        """\
ATTR presence.state {present, not_present} ENV
ATTR temperature.value [0..40] C TARDY
ATTR heater.switch {on, off}
ATTR window.switch {open, closed}
RULE r3: IF temperature < 16 THEN heater.switch = on
RULE r5: IF temperature > 24 THEN heater.switch = off
RULE r4: IF temperature > 20 THEN window.switch = open
""",
        """\
OUTDOOR temperature=12
PIN temperature
INIT temperature=21
INIT heater=off
INIT window=closed
BOOT
""",
        "P.22", "V4"),
    Fixture(
        "Group 2",
        """\
ATTR presence.state {present, not_present} ENV
ATTR ac.switch {on, off}
RULE r1: IF presence = present THEN ac.switch = on AFTER 10min
RULE r2: IF presence = present THEN ac.switch = off
""",
        "INIT ac=off\n",
        "P.18", "V5"),
    Fixture(
        "Group 3",
        """\
ATTR presence.state {present, not_present} ENV
ATTR electric_blanket.switch {on, off}
RULE r1: IF presence = present THEN electric_blanket.switch = on AFTER 10min
RULE r2: IF presence = not_present THEN electric_blanket.switch = off
""",
        "INIT electric_blanket=off\n",
        "P.27", "V6"),
    Fixture(
        "Group 4",
        """\
ATTR presence.state {present, not_present} ENV
ATTR co2.level {low, moderate, high} TARDY LEVELS 800 1000
ATTR humidity.value [0..100] % TARDY
ATTR fan.switch {on, off}
RULE r1: IF co2 > 1000 THEN fan.switch = on FOR 15min
RULE r2: IF humidity > 80 THEN fan.switch = on FOR 10min
RULE r3: IF presence = present THEN fan.switch = on FOR 5min
""",
        "INIT fan=off\nINIT co2=moderate\nINIT humidity=70\n",
        "P.34", "V7"),
    Fixture(
        "Group 5",
        """\
ATTR presence.state {present, not_present} ENV
ATTR temperature.value [0..40] C TARDY
ATTR heater.switch {on, off}
ATTR window.switch {open, closed}
RULE r1: IF temperature < 18 WHILE presence = present THEN heater.switch = on
RULE r2: IF temperature < 25 WHILE temperature < 25 AND presence = present AND window.switch = closed THEN heater.switch = off AFTER 20min
RULE r3: IF temperature > 27 THEN window.switch = open
RULE r4: IF temperature < 16 THEN window.switch = closed
""",
        """\
OUTDOOR temperature=12
PIN temperature
INIT temperature=17
INIT heater=off
INIT window=closed
BOOT
""",
        "P.23", "V8"),
    Fixture(
        "N/A 1",
        """\
ATTR smoke.state {none, detected} TARDY
ATTR alarm.state {activated, unactivated}
""",
        "INIT smoke=none\nINIT alarm=unactivated\n",
        "P.28", None),
    Fixture(
        "N/A 2",
        """\
ATTR ac.switch {on, off} ENV
ATTR heater.switch {on, off}
""",
        "INIT ac=off\n",
        "P.21", None),
]


def fixture(name: str) -> Fixture:
    for f in FIXTURES:
        if f.name.lower().replace(" ", "") == name.lower().replace(" ", ""):
            return f
    raise KeyError(name)


def load(f: Fixture):
    doc = parse_document(f.rules)
    sc = parse_scenario(f.scenario, doc.decls)
    return doc, sc, catalog_by_id()[f.prop]


@dataclass
class BenchResult:
    fixture: Fixture
    report: RepairReport | None
    seconds: float

    @property
    def repaired(self) -> bool:
        return self.report is not None and self.report.fixed and bool(self.report.edits)


def run_fixture(f: Fixture, cfg: RepairConfig | None = None) -> BenchResult:
    doc, sc, prop = load(f)
    t0 = time.perf_counter()
    rep = repair(doc.rules, doc.decls, prop, sc, cfg=cfg)
    return BenchResult(f, rep, time.perf_counter() - t0)


def run_bench(cfg: RepairConfig | None = None) -> list[BenchResult]:
    return [run_fixture(f, cfg) for f in FIXTURES]


@dataclass
class ScopeResult:
    """Rules after the target repair plus follow-up repairs for the rest of
    the target's scope, with the final verdict of every property checked."""
    rules: list
    follow_ups: list[RepairReport]
    holds: dict[str, bool]

    @property
    def all_pass(self) -> bool:
        return all(self.holds.values())


def settle_scope(result: BenchResult, cfg: RepairConfig | None = None) -> ScopeResult:
    """Repair the remaining in-scope violations one by one in priority order,
    then re-verify the target and its whole scope on the final rules."""
    doc, sc, prop = load(result.fixture)
    catalog = load_catalog()
    rules = list(result.report.rules if result.report else doc.rules)
    follow_ups = []
    scope = prioritize(in_scope(prop, catalog, doc.decls))
    for q in scope:
        rep = repair(rules, doc.decls, q, sc, catalog=catalog, cfg=cfg)
        if rep is not None:
            follow_ups.append(rep)
            if rep.fixed:
                rules = rep.rules
    holds = {q.id: repair(rules, doc.decls, q, sc, catalog=catalog, cfg=cfg) is None
             for q in [prop, *scope]}
    return ScopeResult(rules, follow_ups, holds)
