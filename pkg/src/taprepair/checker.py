"""Explicit-state checking of compiled properties, counterexamples and
interaction-pattern tagging.

The search runs over pairs (automaton state, monitor).  The monitor remembers
what the property needs from the previous stable state: the values read by
event atoms and, for event-shaped properties, whether the precondition held
there.  Unstable states are passed through without evaluation.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .automaton import DEFAULT_STATE_CAP, IDLE, STUTTER, TICK, Label, Model
from .env import CHANNELS, ChannelTable, channel_of, joint_effect
from .properties import CompiledProperty, Property, Shape, compile_property


class Verdict(enum.Enum):
    PASS = "Pass"
    VIOLATION = "Violation"
    INCONCLUSIVE = "Inconclusive"


class CheckerError(RuntimeError):
    pass


@dataclass
class Counterexample:
    """``states[i+1]`` is reached from ``states[i]`` by ``labels[i]``."""

    states: list[tuple]
    labels: list[Label]
    violating_index: int
    lasso_start: int | None = None
    property_id: str = ""

    def __len__(self) -> int:
        return len(self.states)

    @property
    def path(self) -> list[tuple[tuple, Label | None]]:
        return [(s, self.labels[i] if i < len(self.labels) else None)
                for i, s in enumerate(self.states)]


@dataclass
class CheckResult:
    verdict: Verdict
    counterexample: Counterexample | None
    states_explored: int
    bound: int

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


# ------------------------------------------------------------ monitor


def _stable_step(model: Model, cp: CompiledProperty, s: tuple, prev, pend):
    """Evaluate a stable state.  Returns (violated, kind, next monitor, moves)."""
    succ = model.successors(s)
    moves = [(l, t) for l, t in succ if l != STUTTER]
    post = cp.post_holds(s)
    if pend and not post:
        return True, "pair", None, moves
    pre = cp.pre(s, prev)
    if cp.shape is Shape.STATE:
        if pre and not post:
            return True, "state", None, moves
        return False, None, (cp.event_values(s), False), moves
    if pre and not moves and not post:
        # nothing but stutter: the next stable state is this one
        return True, "self", None, moves
    return False, None, (cp.event_values(s), pre), moves


def check(model, prop: Property | CompiledProperty, cap: int = DEFAULT_STATE_CAP
          ) -> CheckResult:
    """Breadth-first search for the shortest violating path."""
    model = getattr(model, "model", None) or model
    cp = prop if isinstance(prop, CompiledProperty) else compile_property(prop, model)
    parent: dict = {}
    q = deque()
    for s in model.initial_states():
        node = (s, None, False)
        if node not in parent:
            parent[node] = None
            q.append(node)
    depth = 0
    while q:
        node = q.popleft()
        s, prev, pend = node
        if model.is_stable(s):
            bad, kind, mon, moves = _stable_step(model, cp, s, prev, pend)
            if bad:
                cex = _build_cex(model, cp, parent, node, kind)
                return CheckResult(Verdict.VIOLATION, cex, len(parent), len(cex.states))
            children = [(l, (t,) + mon) for l, t in moves]
        else:
            children = [(l, (t, prev, pend)) for l, t in model.successors(s) if l != STUTTER]
        for label, child in children:
            if child in parent:
                continue
            if len(parent) >= cap:
                return CheckResult(Verdict.INCONCLUSIVE, None, len(parent), depth)
            parent[child] = (node, label)
            q.append(child)
        depth += 1
    return CheckResult(Verdict.PASS, None, len(parent), 0)


def _build_cex(model, cp, parent, node, kind) -> Counterexample:
    states, labels = [node[0]], []
    while parent[node] is not None:
        node, label = parent[node]
        states.append(node[0])
        labels.append(label)
    states.reverse()
    labels.reverse()
    k = len(states) - 1
    if kind == "pair":
        idx = _pair_start(model, states, labels)
    else:
        idx = k
    lasso = k if model.is_stable(states[-1]) else None
    return Counterexample(states, labels, idx, lasso, cp.prop.id)


def _pair_start(model, states, labels) -> int:
    """Index of the stable state that the last non-urgent step left."""
    for i in range(len(labels) - 1, -1, -1):
        if not labels[i].urgent and model.is_stable(states[i]):
            return i
    raise CheckerError("event violation without a preceding stable state")


def locate_violating_state(cex: Counterexample, prop, model) -> int:
    """Re-evaluate the path state by state and return the index of the first
    state at which the property fails (the start of the pair for event
    properties).  A lasso tail is unrolled once."""
    model = getattr(model, "model", None) or model
    cp = prop if isinstance(prop, CompiledProperty) else compile_property(prop, model)
    states = list(cex.states)
    if cex.lasso_start is not None and cex.lasso_start < len(states) - 1:
        states += states[cex.lasso_start + 1:]
    prev, pend_at = None, None
    for i, s in enumerate(states):
        if not model.is_stable(s):
            continue
        post = cp.post_holds(s)
        if pend_at is not None and not post:
            return pend_at % len(cex.states)
        pre = cp.pre(s, prev)
        if cp.shape is Shape.STATE:
            if pre and not post:
                return i % len(cex.states)
        else:
            pend_at = i if pre else None
            moves = [l for l, _ in model.successors(s) if l != STUTTER]
            if pre and not moves and not post:
                return i % len(cex.states)
        prev = cp.event_values(s)
    raise CheckerError(f"{cp.prop.id}: counterexample shows no violation")


def replays(cex: Counterexample, model) -> bool:
    """Every step of the path is a transition of the model."""
    model = getattr(model, "model", None) or model
    if cex.states[0] not in model.initial_states():
        return False
    for s, l, t in zip(cex.states, cex.labels, cex.states[1:]):
        if (l, t) not in model.successors(s):
            return False
    return True


# ------------------------------------------------------------ oracle


def oracle_violates(model, prop) -> bool:
    """Independent reference verdict.

    Builds the stable-to-stable step relation from the explored automaton
    (one environment/tick move plus every interleaving of urgent moves), then
    enumerates windows (previous stable, stable, next stable) reachable from
    the initial states and evaluates the property on each window directly.
    """
    model = getattr(model, "model", None) or model
    cp = prop if isinstance(prop, CompiledProperty) else compile_property(prop, model)
    aut = model.explore()
    out: dict[tuple, list] = {}
    for t in aut.transitions:
        if t.label != STUTTER:
            out.setdefault(t.source, []).append(t.target)

    def settle(s):
        seen, todo, done = {s}, [s], set()
        while todo:
            x = todo.pop()
            if model.is_stable(x):
                done.add(x)
                continue
            for y in out.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return done

    step: dict[tuple, set] = {}
    for s in aut.states:
        if model.is_stable(s):
            nxt = set()
            for t in out.get(s, ()):
                nxt |= settle(t)
            step[s] = nxt if out.get(s) else {s}
    firsts = set()
    for s0 in aut.initial:
        firsts |= settle(s0)
    # pairs (previous stable or None, stable)
    seen = {(None, s) for s in firsts}
    todo = list(seen)
    while todo:
        p, s = todo.pop()
        for t in step[s]:
            if (s, t) not in seen:
                seen.add((s, t))
                todo.append((s, t))
    for p, s in seen:
        prev = None if p is None else cp.event_values(p)
        pre = cp.pre(s, prev)
        if not pre:
            continue
        if cp.shape is Shape.STATE:
            if not cp.post_holds(s):
                return True
        elif any(not cp.post_holds(t) for t in step[s]):
            return True
    return False


# ------------------------------------------------------------ rendering


def render_counterexample(cex: Counterexample, model) -> list[str]:
    """One line per step; changed attributes are written as ``@attr=value``.
    Three or more quiet steps with the same label share one line."""
    model = getattr(model, "model", None) or model
    lines = []
    nattr = len(model.attrs)
    first = cex.states[0]
    init = ", ".join(f"{a}={first[model.slot[a]]}" for a in model.attrs)
    lines.append(f"[0] init: {init}")
    run: list[int] = []  # consecutive quiet steps with the same label

    def flush():
        if len(run) >= 3:
            lines.append(f"[{run[0]}..{run[-1]}] {cex.labels[run[0] - 1]} x{len(run)}: -")
        else:
            lines.extend(f"[{k}] {cex.labels[k - 1]}: -" for k in run)
        run.clear()

    for i, (l, s) in enumerate(zip(cex.labels, cex.states[1:]), 1):
        before = cex.states[i - 1]
        ev = [f"@{model.vars[j].name}={s[j]}" for j in range(nattr) if s[j] != before[j]]
        marked = i == cex.violating_index or i == cex.lasso_start
        if not ev and not marked and (not run or cex.labels[run[0] - 1] == l):
            run.append(i)
            continue
        flush()
        if not ev and not marked:
            run.append(i)
            continue
        mark = "  <-- violation" if i == cex.violating_index else ""
        lines.append(f"[{i}] {l}: {' '.join(ev) if ev else '-'}{mark}")
    flush()
    if cex.violating_index == 0:
        lines[0] += "  <-- violation"
    if cex.lasso_start is not None:
        lines.append(f"loop back to [{cex.lasso_start}]")
    return lines


# ------------------------------------------------------------ patterns


@dataclass(frozen=True)
class VulnPattern:
    tag: str
    rules: tuple[str, str]
    attribute: str
    channel: str  # "immediate", "tardy" or "latency"


def involved_rules(cex: Counterexample, model) -> list[str]:
    ids = []
    for l in cex.labels:
        if l.kind in ("RuleFire", "ActionComplete") and l.arg not in ids:
            ids.append(l.arg)
    for ri in model.rinfo:
        rid = ri.rule.id
        if rid in ids:
            continue
        if any(s[ri.phase] != IDLE for s in cex.states):
            ids.append(rid)
    return ids


def _writes(rule) -> list:
    return list(rule.action.assignments) + list(rule.action.completion or ())


def _conflict(ri, rj):
    for a, v in _writes(ri):
        for b, w in _writes(rj):
            if a == b and v != w:
                return a
    return None


def _effect_signs(model, actuator, value, channel_attr) -> set[int]:
    ch = channel_of(channel_attr)
    signs = set()
    dom = model.domain.get(channel_attr, ())
    outdoor = model.scenario.outdoor
    for e in model.table.effects:
        if e.action != (actuator, value) or e.channel != ch.name:
            continue
        if e.conditional == "outdoor" and outdoor is not None and dom:
            for v in dom:
                lo, hi = joint_effect([e.action], ch.name, model.table, model.tick,
                                      outdoor=outdoor, indoor=v)
                signs |= {(x > 0) - (x < 0) for x in (lo, hi)}
        else:
            lo, hi = joint_effect([e.action], ch.name, model.table, model.tick)
            signs |= {(x > 0) - (x < 0) for x in (lo, hi)}
    signs.discard(0)
    return signs


def _tardy_hits(model, ri, constraint) -> tuple[bool, bool]:
    """(changes satisfaction, can make it true) for a tardy-channel effect of
    ``ri``'s actions on the attribute of ``constraint``."""
    attr = constraint.attr
    ch = channel_of(attr)
    if ch is None or ch.immediate or not ch.actuator_affected:
        return False, False
    decl = model.decls[attr]
    dom = list(model.domain.get(attr) or decl.values())
    changes = toward = False
    for a, v in _writes(ri):
        signs = _effect_signs(model, a, v, attr)
        if not signs:
            continue
        changes = True
        for i, x in enumerate(dom):
            for d in signs:
                j = i + d
                if 0 <= j < len(dom) and not constraint.holds(x, decl) \
                        and constraint.holds(dom[j], decl):
                    toward = True
    return changes, toward


def _trigger_set(model, r) -> frozenset:
    c = r.trigger.constraint
    dom = model.domain.get(c.attr) or model.decls[c.attr].values()
    return frozenset((c.attr, v) for v in c.satisfying(model.decls[c.attr], dom))


def classify_pattern(cex: Counterexample, model, prop: Property | None = None,
                     table: ChannelTable | None = None) -> list[VulnPattern]:
    """Pairwise interaction tests over the rules that act on the path.

    Only pairs whose second rule writes an attribute of the property's
    postcondition are considered when a property is given; the first rule is
    the interfering one.
    """
    model = getattr(model, "model", None) or model
    ids = involved_rules(cex, model)
    rules = {r.id: r for r in model.rules}
    targets = None
    if prop is not None:
        from .properties import post_atoms

        targets = {a.attr for a in post_atoms(prop.post)}
    found: list[VulnPattern] = []

    def add(tag, i, j, attr, kind):
        p = VulnPattern(tag, (i, j), str(attr), kind)
        if p not in found:
            found.append(p)

    for i in ids:
        for j in ids:
            if i == j:
                continue
            ri, rj = rules[i], rules[j]
            if targets is not None and not ({a for a, _ in _writes(rj)} & targets):
                continue
            wi = {a for a, _ in _writes(ri)}
            tj = rj.trigger.constraint
            cj = list(rj.conditions) + ([rj.wait_trigger] if rj.wait_trigger else [])
            if tj.attr in wi and model.decls[tj.attr].controllable:
                add("V1", i, j, tj.attr, "immediate")
            for c in cj:
                if c.attr in wi and model.decls[c.attr].controllable:
                    add("V2", i, j, c.attr, "immediate")
            if _tardy_hits(model, ri, tj)[1]:
                add("V4", i, j, tj.attr, "tardy")
            for c in cj:
                if _tardy_hits(model, ri, c)[0]:
                    add("V8", i, j, c.attr, "tardy")
            clash = _conflict(ri, rj)
            if clash is None:
                continue
            ext = ri.action.extended or rj.action.extended
            delayed = ri.delay_sec is not None or rj.delay_sec is not None
            if ext:
                add("V7", i, j, clash, "latency")
                continue
            if not delayed:
                add("V3", i, j, clash, "immediate")
                continue
            if ri.trigger.constraint == rj.trigger.constraint:
                add("V5", i, j, clash, "latency")
            elif not (_trigger_set(model, ri) & _trigger_set(model, rj)) \
                    and (ri.delay_sec or 0) != (rj.delay_sec or 0):
                add("V6", i, j, clash, "latency")
    found.sort(key=lambda p: (p.tag, p.rules))
    return found


def pattern_tags(patterns: Sequence[VulnPattern]) -> list[str]:
    return sorted({p.tag for p in patterns})
