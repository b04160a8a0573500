"""Negated-property reasoning: search for rule patches that remove a violation.

One round works on a fixed rule set and one counterexample.  The abstract
model adds boolean selector flags to it: extra conditions on rules of the
counterexample, completion waits for extended rules, a synthesized rule, and,
as later tiers, changed actions and removed rules.  A patch is a flag
assignment together with a path that satisfies the property at the point where
the counterexample failed.  Patches are screened locally (does the path rely
on the environment behaving differently?) and then globally on the concrete
patched model.  A patch that fixes this violation but leaves another one opens
the next round on the patched rules.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

from .automaton import (DEFAULT_STATE_CAP, STUTTER, TICK, Label, Model, auto_tick,
                        rule_constants)
from .checker import (Counterexample, Verdict, _stable_step, check, classify_pattern,
                      involved_rules, locate_violating_state, render_counterexample)
from .env import ChannelTable, load_channel_table
from .properties import (Atom, CompiledProperty, Property, Shape, compile_property, negate,
                         post_atoms, property_constants)
from .rules import (Action, ActionKind, AttributeDecl, AttributeId, Constraint, Kind, Op,
                    TapRule, Trigger, format_rule)
from .scenario import Scenario

log = logging.getLogger(__name__)

ITER_LIMIT = 50
ROUND_LIMIT = 15
FLAG_CAP = 64
MAX_FLAGS = 3
ABSTRACT_MARGIN = 3
NEW_RULE = "*new*"


class PatchClass(enum.Enum):
    P_C = "P_C"
    P_I = "P_I"
    P_X = "P_X"
    UNCLASSIFIED = "Unclassified"


class FlagKind(enum.Enum):
    LATENCY = 0      # completion waits for a constraint (UNTIL)
    CONDITION = 1    # extra status condition on an existing rule
    TRIGGER = 2      # trigger of the synthesized rule
    NEW_CONDITION = 3  # status condition of the synthesized rule
    ACTION = 4       # existing rule writes the desired value instead
    REMOVE = 5       # existing rule is dropped


TIER = {FlagKind.LATENCY: 0, FlagKind.CONDITION: 0, FlagKind.TRIGGER: 0,
        FlagKind.NEW_CONDITION: 0, FlagKind.ACTION: 1, FlagKind.REMOVE: 2}
FAMILY = {FlagKind.LATENCY: 0, FlagKind.CONDITION: 1, FlagKind.TRIGGER: 2,
          FlagKind.NEW_CONDITION: 2, FlagKind.ACTION: 3, FlagKind.REMOVE: 4}


@dataclass(frozen=True)
class Predicate:
    """A selector flag.  ``status`` predicates take a value, ``trigger``
    predicates mark the synthesized rule's trigger."""

    kind: FlagKind
    rule: str
    constraint: Constraint | None = None
    assignment: tuple | None = None

    @property
    def status(self) -> bool:
        return self.kind in (FlagKind.CONDITION, FlagKind.NEW_CONDITION)

    def __str__(self) -> str:
        if self.kind is FlagKind.REMOVE:
            return f"remove({self.rule})"
        if self.kind is FlagKind.ACTION:
            a, v = self.assignment
            return f"{self.rule}.action({a}={v})"
        name = {FlagKind.LATENCY: "until", FlagKind.CONDITION: "takeValue",
                FlagKind.TRIGGER: "isTrigger", FlagKind.NEW_CONDITION: "takeValue"}[self.kind]
        return f"{self.rule}.{name}({self.constraint})"


Assignment = frozenset  # of Predicate


def flag_sums_ok(assignment: Assignment) -> bool:
    """At most one status flag per (rule, attribute), one trigger flag and one
    latency flag per rule; removal excludes every other flag on the rule."""
    status: dict = {}
    trig: dict = {}
    lat: dict = {}
    act: dict = {}
    removed = set()
    for p in assignment:
        if p.status:
            key = (p.rule, p.constraint.attr)
            status[key] = status.get(key, 0) + 1
        elif p.kind is FlagKind.TRIGGER:
            trig[p.rule] = trig.get(p.rule, 0) + 1
        elif p.kind is FlagKind.LATENCY:
            lat[p.rule] = lat.get(p.rule, 0) + 1
        elif p.kind is FlagKind.ACTION:
            act[p.rule] = act.get(p.rule, 0) + 1
        else:
            removed.add(p.rule)
    if any(v > 1 for d in (status, trig, lat, act) for v in d.values()):
        return False
    if any(p.rule in removed and p.kind is not FlagKind.REMOVE for p in assignment):
        return False
    new = [p for p in assignment if p.rule == NEW_RULE]
    if new and trig.get(NEW_RULE, 0) != 1:
        return False
    trigger = next((p.constraint.attr for p in new if p.kind is FlagKind.TRIGGER), None)
    if any(p.kind is FlagKind.NEW_CONDITION and p.constraint.attr == trigger for p in new):
        return False
    return True


# ------------------------------------------------------------ records


@dataclass(frozen=True)
class RuleEdit:
    kind: str  # AddRule, AddCondition, ModifyAction, ModifyLatency, RemoveRule
    rule_id: str
    rule: TapRule | None = None
    constraint: Constraint | None = None
    action: Action | None = None
    latency: Constraint | None = None

    def __str__(self) -> str:
        if self.kind == "AddRule":
            return f"AddRule {format_rule(self.rule)}"
        if self.kind == "AddCondition":
            return f"AddCondition {self.rule_id}: {self.constraint}"
        if self.kind == "ModifyLatency":
            return f"ModifyLatency {self.rule_id}: UNTIL {self.latency}"
        if self.kind == "ModifyAction":
            return f"ModifyAction {self.rule_id}: " + ", ".join(
                f"{a} = {v}" for a, v in self.action.assignments)
        return f"RemoveRule {self.rule_id}"


@dataclass
class Patch:
    assignment: Assignment
    states: list
    labels: list
    model: Model
    cls: PatchClass = PatchClass.UNCLASSIFIED
    reason: str = ""
    banned: Label | None = None


@dataclass
class RepairReport:
    property_id: str
    patterns: list
    cex: list[str]
    edits: list[RuleEdit]
    class_history: list[str]
    iterations: int
    rounds: int
    fixed: bool
    rules: list[TapRule]
    # every flag assignment the enumerator handed out, for auditing
    offered: list = field(default_factory=list)
    examined: int = 0

    def to_dict(self) -> dict:
        return {
            "propertyId": self.property_id,
            "vulnPatterns": sorted({p.tag for p in self.patterns}),
            "cexTrace": self.cex,
            "edits": [str(e) for e in self.edits],
            "classHistory": self.class_history,
            "iterations": self.iterations,
            "roundCount": self.rounds,
            "fixed": self.fixed,
        }


@dataclass
class RepairConfig:
    iter_limit: int = ITER_LIMIT
    round_limit: int = ROUND_LIMIT
    flag_cap: int = FLAG_CAP
    max_flags: int = MAX_FLAGS
    state_cap: int = DEFAULT_STATE_CAP
    seed: int = 0


# ------------------------------------------------------------ the script of a counterexample


def unaffected_attrs(model: Model) -> list[AttributeId]:
    """Attributes no device action sets directly: tardy and environment ones."""
    return [a for a in model.attrs
            if model.decls[a].kind is Kind.TARDY or model.decls[a].env]


def _projector(model: Model, attrs: Sequence[AttributeId]):
    slots = [model.slot[a] for a in attrs]
    o = model.outdoor_slot

    def proj(state):
        vals = tuple(state[s] for s in slots)
        return vals + ((state[o],) if o is not None else ())

    return proj


@dataclass(frozen=True)
class Script:
    """Timed sequence of non-urgent steps of a counterexample and the
    unaffected values after each of them."""

    attrs: tuple
    init: tuple  # attribute values of the first state, aligned with ``init_attrs``
    init_attrs: tuple
    steps: tuple  # (Label, projection)


def extract_script(cex: Counterexample, model: Model, end: int | None = None) -> Script:
    attrs = tuple(unaffected_attrs(model))
    proj = _projector(model, attrs)
    end = len(cex.states) - 1 if end is None else end
    steps = []
    for i in range(end):
        lab = cex.labels[i]
        if lab.urgent or lab == STUTTER:
            continue
        steps.append((lab, proj(cex.states[i + 1])))
    first = cex.states[0]
    return Script(attrs, tuple(first[model.slot[a]] for a in model.attrs),
                  tuple(model.attrs), tuple(steps))


# ------------------------------------------------------------ abstract model


@dataclass
class AbstractModel:
    rules: list[TapRule]
    decls: dict[AttributeId, AttributeDecl]
    scenario: Scenario
    table: ChannelTable
    tick: int
    prop: Property
    attrs: set
    universal: list[Predicate]
    flags: list[Predicate]
    script: Script
    frozen: bool = False
    invariants: set = field(default_factory=set)
    blocked: set = field(default_factory=set)
    audit: list = field(default_factory=list)

    # -- concretization

    def patched_rules(self, assignment: Assignment) -> list[TapRule]:
        return apply_assignment(self.rules, assignment, self.prop, self.decls)

    def build(self, assignment: Assignment, concrete: bool = False) -> Model:
        rules = self.patched_rules(assignment)
        extra = property_constants(self.prop, self.scenario.placeholders)
        guard = None
        if self.invariants and not concrete:
            banned = set(self.invariants)
            guard = lambda s, label, t: label not in banned  # noqa: E731
        outdoor = None
        if not concrete and self.scenario.outdoor is not None and not self.frozen:
            consts = rule_constants(rules).get(_temperature_attr(self.attrs), set())
            outdoor = sorted({self.scenario.outdoor} | {v for v in consts if isinstance(v, int)})
        return Model(self.decls, rules, self.attrs, self.scenario, self.table, self.tick,
                     extra_values=extra, margin_steps=1 if concrete else ABSTRACT_MARGIN,
                     outdoor_values=outdoor, env_guard=guard)

    # -- enumeration

    def assignments(self, max_flags: int):
        """Flag assignments in preference order: tier, size, family, position."""
        order = {p: i for i, p in enumerate(self.flags)}
        for tier in sorted({TIER[p.kind] for p in self.flags}):
            pool = [p for p in self.flags if TIER[p.kind] <= tier]
            for size in range(1, max_flags + 1):
                combos = []
                for combo in itertools.combinations(pool, size):
                    if max(TIER[p.kind] for p in combo) != tier:
                        continue
                    a = Assignment(combo)
                    ok = flag_sums_ok(a)
                    self.audit.append((a, ok))
                    if not ok:
                        continue
                    combos.append(a)
                combos.sort(key=lambda a: (min(FAMILY[p.kind] for p in a),
                                           sorted(order[p] for p in a)))
                yield from combos


def _temperature_attr(attrs) -> AttributeId | None:
    for a in attrs:
        if a.entity == "temperature":
            return a
    return None


def apply_assignment(rules: Sequence[TapRule], assignment: Assignment, prop: Property,
                     decls) -> list[TapRule]:
    out = []
    by_rule: dict[str, list[Predicate]] = {}
    for p in sorted(assignment, key=lambda p: (p.kind.value, str(p))):
        by_rule.setdefault(p.rule, []).append(p)
    for r in rules:
        ps = by_rule.get(r.id, [])
        if any(p.kind is FlagKind.REMOVE for p in ps):
            continue
        for p in ps:
            if p.kind is FlagKind.CONDITION:
                r = replace(r, conditions=r.conditions + (p.constraint,))
            elif p.kind is FlagKind.LATENCY:
                r = replace(r, wait_trigger=p.constraint)
            elif p.kind is FlagKind.ACTION:
                a, v = p.assignment
                assigns = tuple((x, v if x == a else w) for x, w in r.action.assignments)
                comp = r.action.completion
                if comp is not None:
                    comp = tuple((x, decls[x].complement(v) if x == a else w) for x, w in comp)
                r = replace(r, action=replace(r.action, assignments=assigns, completion=comp))
        out.append(r)
    new = by_rule.get(NEW_RULE)
    if new:
        trig = next(p.constraint for p in new if p.kind is FlagKind.TRIGGER)
        conds = tuple(p.constraint for p in new if p.kind is FlagKind.NEW_CONDITION)
        post = post_atoms(prop.post)[0]
        taken = {r.id for r in rules}
        k = 1
        while f"n{k}" in taken:
            k += 1
        out.append(TapRule(f"n{k}", Trigger(trig), conds,
                           Action(((post.attr, post.value),))))
    return out


def _falsifying(atoms: Sequence[Atom], decls, domains) -> list[Constraint]:
    """Constraints that make some precondition atom false, farthest first."""
    out = []
    for a in atoms:
        if a.attr is None:
            continue
        d = decls[a.attr]
        if d.numeric:
            flip = {"<": Op.GEQ, "<=": Op.GT, ">": Op.LEQ, ">=": Op.LT, "=": Op.NEQ,
                    "!=": Op.EQ}.get(a.op)
            if flip is not None and isinstance(a.value, int):
                out.append(Constraint(a.attr, flip, a.value))
            continue
        vals = [v for v in d.labels if not a.holds(v, d)]
        if a.op == "=" and a.value in d.labels:
            ref = d.labels.index(a.value)
            vals.sort(key=lambda v: -abs(d.labels.index(v) - ref))
        out.extend(Constraint(a.attr, Op.EQ, v) for v in vals)
    return out


def abstract_model(rules: Sequence[TapRule], cex: Counterexample, model: Model,
                   prop: Property, cfg: RepairConfig) -> AbstractModel:
    """Selector flags for one round."""
    decls = model.decls
    cp_post = post_atoms(prop.post)
    post_attrs = {a.attr for a in cp_post}
    involved = involved_rules(cex, model)
    by_id = {r.id: r for r in rules}
    writes_post = [rid for rid in involved
                   if any(a in post_attrs for a, _ in _writes(by_id[rid]))]
    ordered = writes_post + [rid for rid in involved if rid not in writes_post]
    pre_fix = _falsifying(prop.pre, decls, model.domain)
    flags: list[Predicate] = []
    # latency: extended rules on the path wait for the precondition to clear
    for rid in ordered:
        r = by_id[rid]
        if not r.action.extended or rid not in writes_post:
            continue
        for c in pre_fix:
            if c != r.wait_trigger:
                flags.append(Predicate(FlagKind.LATENCY, rid, c))
    # conditions on rules of the counterexample
    for rid in ordered:
        r = by_id[rid]
        for c in pre_fix:
            if c.attr == r.trigger.constraint.attr and r.delay_sec is None:
                continue
            if c in r.conditions or any(x.attr == c.attr for x in r.conditions):
                continue
            flags.append(Predicate(FlagKind.CONDITION, rid, c))
    # synthesized rule writing the desired post value
    post = cp_post[0] if len(cp_post) == 1 else None
    if post is not None and post.op == "=" and post.attr in decls \
            and decls[post.attr].controllable:
        consts = rule_constants(rules)
        for a, vs in property_constants(prop, model.scenario.placeholders).items():
            consts.setdefault(a, set()).update(vs)
        pre_vals = {(a.attr, a.value) for a in prop.pre}
        trig, conds = [], []
        for a in sorted(model.attrs):
            if a in post_attrs:
                continue
            d = decls[a]
            if d.numeric:
                for v in sorted(v for v in consts.get(a, ()) if isinstance(v, int)):
                    trig.append(Constraint(a, Op.LT, v))
                    trig.append(Constraint(a, Op.GT, v))
                continue
            for v in d.labels:
                trig.append(Constraint(a, Op.EQ, v))
                conds.append(Constraint(a, Op.EQ, v))
        pre_atoms = [a for a in prop.pre if a.attr is not None]

        def aligned(c: Constraint) -> int:
            for a in pre_atoms:
                if a.attr == c.attr and a.op == c.op.value and a.value == c.value:
                    return 0
            if (c.attr, c.value) in pre_vals:
                return 0
            return 1 if any(a.attr == c.attr for a in pre_atoms) else 2

        trig.sort(key=aligned)
        conds.sort(key=aligned)
        flags += [Predicate(FlagKind.TRIGGER, NEW_RULE, c) for c in trig]
        flags += [Predicate(FlagKind.NEW_CONDITION, NEW_RULE, c) for c in conds]
        # later tiers
        for rid in writes_post:
            r = by_id[rid]
            for a, v in r.action.assignments:
                if a == post.attr and v != post.value:
                    flags.append(Predicate(FlagKind.ACTION, rid, assignment=(a, post.value)))
    for rid in writes_post:
        flags.append(Predicate(FlagKind.REMOVE, rid))
    universal = [Predicate(FlagKind.CONDITION, "*", Constraint(a, Op.EQ, v))
                 for a in sorted(model.attrs) if not decls[a].numeric
                 for v in decls[a].labels]
    if len(flags) > cfg.flag_cap:
        raise TooManyPredicates(f"{len(flags)} selector flags exceed the cap of {cfg.flag_cap}")
    return AbstractModel(list(rules), decls, model.scenario, model.table, model.tick, prop,
                         set(model.attrs), universal, flags, extract_script(cex, model))


class TooManyPredicates(RuntimeError):
    pass


def _writes(rule: TapRule) -> list:
    return list(rule.action.assignments) + list(rule.action.completion or ())


# ------------------------------------------------------------ reasoning


def _start_states(m: Model, script: Script) -> list[tuple]:
    want = dict(zip(script.init_attrs, script.init))
    out = []
    for s in m.initial_states():
        if all(s[m.slot[a]] == v for a, v in want.items() if a in m.slot):
            out.append(s)
    return out


def _search_free(m: Model, cp: CompiledProperty, starts, depth: int):
    """Shortest path from ``starts`` on which the property holds throughout and
    that ends in a success: pre and post together (state form) or pre followed
    by post at the next stable state (event form)."""
    parent = {}
    q = deque()
    for s in starts:
        node = (s, None, False)
        parent[node] = None
        q.append((node, 0))
    while q:
        node, d = q.popleft()
        s, prev, pend = node
        if m.is_stable(s):
            if pend and cp.post_holds(s):
                return _unwind(parent, node)
            bad, _, mon, moves = _stable_step(m, cp, s, prev, pend)
            if bad:
                continue
            if cp.shape is Shape.STATE and cp.pre(s, prev) and cp.post_holds(s):
                return _unwind(parent, node)
            children = [(l, (t,) + mon) for l, t in moves]
        else:
            children = [(l, (t, prev, pend)) for l, t in m.successors(s) if l != STUTTER]
        if d >= depth:
            continue
        for l, child in children:
            if child not in parent:
                parent[child] = (node, l)
                q.append((child, d + 1))
    return None


def _unwind(parent, node):
    states, labels = [node[0]], []
    while parent[node] is not None:
        node, l = parent[node]
        states.append(node[0])
        labels.append(l)
    return states[::-1], labels[::-1]


def replay_script(m: Model, cp: CompiledProperty, script: Script, starts=None):
    """Follow the counterexample's timed environment under ``m``.

    Returns (a path that completes the script without a violation or None,
    whether some interleaving still violates the property)."""
    proj = _projector(m, script.attrs)
    starts = _start_states(m, script) if starts is None else starts
    parent = {}
    q = deque()
    for s in starts:
        node = (s, 0, None, False)
        parent[node] = None
        q.append(node)
    done = None
    violated = False
    n = len(script.steps)
    while q:
        node = q.popleft()
        s, i, prev, pend = node
        if m.is_stable(s):
            bad, _, mon, moves = _stable_step(m, cp, s, prev, pend)
            if bad:
                violated = True
                continue
            if i == n:
                if done is None:
                    done = node
                continue
            lab, want = script.steps[i]
            children = [(l, (t, i + 1) + mon) for l, t in moves
                        if l == lab and proj(t) == want]
            if not children and lab == TICK and proj(s) == want:
                # the tick changes nothing under the patched rules
                children = [(TICK, (s, i + 1) + mon)]
        else:
            children = [(l, (t, i, prev, pend)) for l, t in m.successors(s) if l != STUTTER]
        for l, child in children:
            if child not in parent:
                parent[child] = (node, l)
                q.append(child)
    if done is None:
        return None, violated
    states, labels = [done[0]], []
    node = done
    while parent[node] is not None:
        node, l = parent[node]
        states.append(node[0])
        labels.append(l)
    return (states[::-1], labels[::-1]), violated


def reason_patch(am: AbstractModel, cfg: RepairConfig, depth: int) -> Patch | None:
    """First non-blocked assignment whose abstract model has a path reaching
    the property's good side."""
    for a in am.assignments(cfg.max_flags):
        if a in am.blocked:
            continue
        try:
            m = am.build(a)
            cp = compile_property(am.prop, m)
        except (ValueError, KeyError) as exc:
            log.debug("assignment %s rejected: %s", _fmt(a), exc)
            continue
        if am.frozen:
            found, _ = replay_script(m, cp, am.script)
        else:
            found = _search_free(m, cp, _start_states(m, am.script), depth)
        if found is not None:
            return Patch(a, found[0], found[1], m)
    return None


def _fmt(a: Assignment) -> str:
    return "{" + ", ".join(sorted(map(str, a))) + "}"


def check_local_feasibility(patch: Patch, am: AbstractModel) -> PatchClass:
    """P_X: the success is produced by the environment, or the counterexample's
    own environment still leads to a violation.  P_I: the patch path needs the
    unaffected attributes to evolve differently from the counterexample."""
    m = patch.model
    cp = compile_property(am.prop, m)
    # which transition produced the success
    labels = patch.labels
    if labels:
        if cp.shape is Shape.EVENT:
            idx = max((i for i, l in enumerate(labels) if not l.urgent), default=None)
        else:
            idx = _last_post_change(m, cp, patch.states, labels)
        if idx is not None and labels[idx].kind == "EnvChange":
            attr = labels[idx].arg.split("=", 1)[0]
            if AttributeId.parse(attr) in {a.attr for a in post_atoms(am.prop.post)}:
                patch.reason = f"success produced by {labels[idx]}"
                patch.banned = labels[idx]
                return PatchClass.P_X
    # timed unaffected values against the counterexample
    proj = _projector(m, am.script.attrs)
    mine = [(l, proj(t)) for l, t in zip(labels, patch.states[1:])
            if not l.urgent and l != STUTTER]
    theirs = list(am.script.steps[:len(mine)])
    if not am.frozen and mine != theirs:
        for k, (x, y) in enumerate(zip(mine, theirs)):
            if x != y:
                patch.reason = f"unaffected values differ at step {k}: {x[0]} vs {y[0]}"
                break
        else:
            patch.reason = "patch path outruns the counterexample"
        return PatchClass.P_I
    _, violated = replay_script(m, cp, am.script)
    if violated:
        patch.reason = "violating state persists under the counterexample's environment"
        return PatchClass.P_X
    return PatchClass.P_C


def _last_post_change(m, cp, states, labels):
    slots = {m.slot[a.attr] for a in post_atoms(cp.post)}
    for i in range(len(labels) - 1, -1, -1):
        if any(states[i][s] != states[i + 1][s] for s in slots):
            return i
    return None


def refine(am: AbstractModel, patch: Patch) -> None:
    if patch.cls is PatchClass.P_I:
        am.frozen = True
    elif patch.cls is PatchClass.P_X:
        if patch.banned is not None:
            am.invariants.add(patch.banned)
        else:
            am.blocked.add(patch.assignment)
            am.frozen = True


# ------------------------------------------------------------ global check


def in_scope(prop: Property, catalog: Sequence[Property], decls) -> list[Property]:
    group = prop.scenario_group
    out = []
    for q in catalog:
        if q.id == prop.id or group is None or group not in q.groups:
            continue
        if all(a in decls for a in q.attributes()):
            out.append(q)
    return out


def concrete_model(decls, rules, prop_attrs, scenario, table, tick, extra=None) -> Model:
    attrs = set(prop_attrs) | {a for r in rules for a in r.attributes()}
    return Model(decls, rules, attrs, scenario, table, tick, extra_values=extra)


def verify_global_feasibility(rules: Sequence[TapRule], prop: Property, others: Sequence[Property],
                              decls, scenario, table, tick, cap: int):
    """Check the property and the other in-scope ones on the patched rules.
    Returns (failing property or None, its counterexample, its model)."""
    for q in [prop, *others]:
        m = concrete_model(decls, rules, _model_attrs(prop, others), scenario, table, tick,
                           property_constants(q, scenario.placeholders))
        res = check(m, q, cap)
        if res.verdict is not Verdict.PASS:
            return q, res.counterexample, m
    return None, None, None


def attrs_of(prop, catalog, decls):
    return _model_attrs(prop, in_scope(prop, catalog, decls))


def _model_attrs(prop, others):
    attrs = set(prop.attributes())
    for q in others:
        attrs |= q.attributes()
    return attrs


# ------------------------------------------------------------ edits


def emit_rule_edits(original: Sequence[TapRule], final: Sequence[TapRule]) -> list[RuleEdit]:
    before = {r.id: r for r in original}
    after = {r.id: r for r in final}
    edits = []
    for rid, r in before.items():
        if rid not in after:
            edits.append(RuleEdit("RemoveRule", rid))
            continue
        n = after[rid]
        for c in n.conditions:
            if c not in r.conditions:
                edits.append(RuleEdit("AddCondition", rid, constraint=c))
        if n.wait_trigger != r.wait_trigger:
            edits.append(RuleEdit("ModifyLatency", rid, latency=n.wait_trigger))
        if n.action != r.action:
            edits.append(RuleEdit("ModifyAction", rid, action=n.action))
    for rid, r in after.items():
        if rid not in before:
            edits.append(RuleEdit("AddRule", rid, rule=r))
    return edits


def apply_edits(rules: Sequence[TapRule], edits: Sequence[RuleEdit]) -> list[TapRule]:
    out = {r.id: r for r in rules}
    for e in edits:
        if e.kind == "AddRule":
            out[e.rule_id] = e.rule
        elif e.kind == "RemoveRule":
            out.pop(e.rule_id, None)
        elif e.kind == "AddCondition":
            r = out[e.rule_id]
            out[e.rule_id] = replace(r, conditions=r.conditions + (e.constraint,))
        elif e.kind == "ModifyLatency":
            out[e.rule_id] = replace(out[e.rule_id], wait_trigger=e.latency)
        elif e.kind == "ModifyAction":
            out[e.rule_id] = replace(out[e.rule_id], action=e.action)
    return list(out.values())


# ------------------------------------------------------------ driver


def search_spurious_indicator(cex: Counterexample, prop, model) -> int:
    return locate_violating_state(cex, prop, model)


@dataclass
class _Stats:
    iterations: int = 0
    rounds: int = 0
    history: list = field(default_factory=list)
    offered: list = field(default_factory=list)
    examined: int = 0


def npr(rules: Sequence[TapRule], cex: Counterexample, model: Model, prop: Property,
        others: Sequence[Property], cfg: RepairConfig, rnd: int = 0,
        stats: _Stats | None = None) -> list[TapRule] | None:
    """One round of reasoning.  Returns the patched rule set or None."""
    stats = stats or _Stats()
    if rnd >= cfg.round_limit:
        return None
    stats.rounds = max(stats.rounds, rnd + 1)
    search_spurious_indicator(cex, prop, model)
    try:
        am = abstract_model(rules, cex, model, prop, cfg)
    except TooManyPredicates as exc:
        log.warning("%s: %s", prop.id, exc)
        return None
    depth = 2 * len(cex.states)
    scn, table, tick = model.scenario, model.table, model.tick
    try:
        for _ in range(cfg.iter_limit):
            stats.iterations += 1
            patch = reason_patch(am, cfg, depth)
            if patch is None:
                if not am.frozen:
                    am.frozen = True
                    stats.history.append(f"r{rnd + 1}: no patch in the free model, freezing")
                    continue
                break
            patch.cls = check_local_feasibility(patch, am)
            stats.history.append(f"r{rnd + 1}: {patch.cls.value} {_fmt(patch.assignment)}"
                                 + (f" ({patch.reason})" if patch.reason else ""))
            if patch.cls is not PatchClass.P_C:
                refine(am, patch)
                continue
            patched = am.patched_rules(patch.assignment)
            bad, cex2, m2 = verify_global_feasibility(patched, prop, others, model.decls, scn,
                                                      table, tick, cfg.state_cap)
            if bad is None:
                return patched
            if cex2 is None:
                stats.history.append(f"r{rnd + 1}: {bad.id} inconclusive at the state cap")
            elif bad.id == prop.id:
                stats.history.append(f"r{rnd + 1}: residual violation, next round")
                deeper = npr(patched, cex2, m2, prop, others, cfg, rnd + 1, stats)
                if deeper is not None:
                    return deeper
            else:
                stats.history.append(f"r{rnd + 1}: breaks {bad.id}")
            am.blocked.add(patch.assignment)
    finally:
        stats.offered += [a for a, ok in am.audit if ok]
        stats.examined += len(am.audit)
    return None


def repair(doc_rules: Sequence[TapRule], decls, prop: Property, scenario: Scenario,
           table: ChannelTable | None = None, tick: int | None = None,
           catalog: Sequence[Property] | None = None, cfg: RepairConfig | None = None
           ) -> RepairReport | None:
    """Detect and, if violated, repair ``prop``.  Returns None when it holds."""
    from .properties import load_catalog

    cfg = cfg or RepairConfig()
    table = table or load_channel_table()
    catalog = load_catalog() if catalog is None else catalog
    tick = tick or scenario.tick_sec or auto_tick(
        doc_rules, table, attrs_of(prop, catalog, decls),
        [prop.within_sec] if prop.within_sec else [])
    candidates = in_scope(prop, catalog, decls)
    attrs = _model_attrs(prop, candidates)
    m = concrete_model(decls, doc_rules, attrs, scenario, table, tick,
                       property_constants(prop, scenario.placeholders))
    res = check(m, prop, cfg.state_cap)
    if res.verdict is Verdict.PASS:
        return None
    if res.verdict is Verdict.INCONCLUSIVE:
        return RepairReport(prop.id, [], [], [], ["state cap reached"], 0, 0, False,
                            list(doc_rules))
    others = []
    for q in candidates:
        mq = concrete_model(decls, doc_rules, attrs, scenario, table, tick,
                            property_constants(q, scenario.placeholders))
        if check(mq, q, cfg.state_cap).verdict is Verdict.PASS:
            others.append(q)
    cex = res.counterexample
    patterns = classify_pattern(cex, m, prop)
    stats = _Stats()
    final = npr(doc_rules, cex, m, prop, others, cfg, 0, stats)
    edits = emit_rule_edits(doc_rules, final) if final is not None else []
    return RepairReport(prop.id, patterns, render_counterexample(cex, m), edits,
                        stats.history, stats.iterations, stats.rounds, final is not None,
                        list(final) if final is not None else list(doc_rules),
                        stats.offered, stats.examined)
