"""Finite automaton of a rule set: relevance closure, domain compression and
the transition function.

A state is a flat tuple.  Slots hold, in order: attribute values, sensor
mirrors (logical value and staleness), per-rule bookkeeping (trigger shadow,
phase, timer), per-channel progress counters and the outdoor temperature.

Time is discrete.  Rule firings, action completions and sensor updates are
urgent: while one is pending nothing else happens.  Environment changes and
the passage of a tick only leave stable states.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .env import CHANNELS, ChannelTable, channel_of, joint_effect
from .rules import AttributeDecl, AttributeId, Constraint, Kind, TapRule
from .scenario import Scenario

log = logging.getLogger(__name__)

IDLE, DELAY, PENDING, RUN, HOLD, DONE, GATE = range(7)
PHASE_NAMES = ("idle", "delay", "pending", "run", "hold", "done", "gate")

DEFAULT_TICK = 60
DEFAULT_STATE_CAP = 10 ** 6
# platform update delays used when sensor mirroring is switched on globally
DEFAULT_SENSOR_SEC = {"presence": 10, "temperature": 600}
DEFAULT_SENSOR_OTHER = 60


class StateCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Label:
    kind: str
    arg: str = ""

    def __str__(self) -> str:
        return f"{self.kind}({self.arg})" if self.arg else self.kind

    @property
    def urgent(self) -> bool:
        return self.kind in ("RuleFire", "ActionComplete", "SensorUpdate")


STUTTER = Label("Stutter")
TICK = Label("PhysicalTick")


@dataclass(frozen=True)
class VariableSpec:
    name: str
    role: str  # Physical, LogicalMirror, Staleness, Shadow, Phase, Timer, Progress, Outdoor
    domain: tuple
    attr: AttributeId | None = None


@dataclass(frozen=True)
class Transition:
    source: tuple
    label: Label
    target: tuple


# ------------------------------------------------------------ relevance


def select_relevant(rules: Sequence[TapRule], prop_attrs: Iterable[AttributeId],
                    table: ChannelTable, decls: dict[AttributeId, AttributeDecl]
                    ) -> tuple[list[TapRule], set[AttributeId]]:
    """Grow the property's attribute set through rules and physical coupling."""
    attrs = set(prop_attrs)
    chosen: list[TapRule] = []
    remaining = list(rules)
    while True:
        grew = False
        for attr in list(attrs):
            for ch in table.channels_of_actuator(attr):
                for other in decls:
                    c = channel_of(other)
                    if c is not None and c.name == ch and other not in attrs:
                        attrs.add(other)
                        grew = True
        keep = []
        for r in remaining:
            if r.attributes() & attrs:
                chosen.append(r)
                attrs |= r.attributes()
                grew = True
            else:
                keep.append(r)
        remaining = keep
        if not grew:
            break
    order = {r.id: i for i, r in enumerate(rules)}
    chosen.sort(key=lambda r: order[r.id])
    return chosen, attrs


def auto_tick(rules: Iterable[TapRule], table: ChannelTable, attrs: Iterable[AttributeId],
              extra_secs: Iterable[int] = ()) -> int:
    """Coarsest tick that divides every delay, duration and extra timing
    constant and the fastest interval of each modelled effect, so no channel
    can move more than one step per tick."""
    secs = [x for x in extra_secs if x]
    attrs = set(attrs)
    for r in rules:
        secs += [x for x in (r.delay_sec, r.action.duration_sec) if x]
        attrs |= r.attributes()
    chans = {c.name for c in (channel_of(a) for a in attrs) if c is not None}
    secs += [e.interval[0] for e in table.effects
             if e.channel in chans and e.action[0] in attrs and e.interval[0] > 0]
    if not secs:
        return DEFAULT_TICK
    return math.gcd(*secs)


# ------------------------------------------------------------ compression


def attr_step(decl: AttributeDecl) -> int:
    ch = channel_of(decl.id)
    if decl.numeric and ch is not None and not ch.leveled:
        return ch.step
    return 1


def rule_constants(rules: Iterable[TapRule]) -> dict[AttributeId, set]:
    out: dict[AttributeId, set] = {}
    for r in rules:
        cs = [r.trigger.constraint, *r.conditions]
        if r.wait_trigger is not None:
            cs.append(r.wait_trigger)
        for c in cs:
            out.setdefault(c.attr, set()).add(c.value)
        for a, v in r.action.assignments + (r.action.completion or ()):
            out.setdefault(a, set()).add(v)
    return out


def compress_domains(rules: Sequence[TapRule], attrs: Iterable[AttributeId],
                     decls: dict[AttributeId, AttributeDecl],
                     extra: dict[AttributeId, set] | None = None,
                     margin_steps: int = 1) -> list[VariableSpec]:
    """Numeric domains shrink to the configured values plus a margin of
    ``margin_steps`` channel steps on either side, clipped to the declaration."""
    consts = rule_constants(rules)
    for a, vs in (extra or {}).items():
        consts.setdefault(a, set()).update(vs)
    specs = []
    for a in sorted(attrs):
        d = decls[a]
        if not d.numeric:
            specs.append(VariableSpec(str(a), "Physical", tuple(d.labels), a))
            continue
        step = attr_step(d)
        vals = sorted(v for v in consts.get(a, ()) if isinstance(v, int))
        if not vals:
            log.warning("%s has no configured values; keeping the declared range", a)
            lo, hi = d.lo, d.hi
            anchor = d.lo
        else:
            lo = max(d.lo, vals[0] - margin_steps * step)
            hi = min(d.hi, vals[-1] + margin_steps * step)
            anchor = vals[0]
        grid = set(vals)
        start = anchor - ((anchor - lo) // step) * step
        v = start
        while v <= hi:
            grid.add(v)
            v += step
        grid = sorted(x for x in grid if lo <= x <= hi)
        specs.append(VariableSpec(str(a), "Physical", tuple(grid), a))
    return specs


# ------------------------------------------------------------ model


@dataclass
class _RuleInfo:
    rule: TapRule
    shadow: int
    phase: int
    timer: int
    trig_slot: int
    trig_ok: frozenset
    conds: list
    assigns: list
    completion: list
    delay_ticks: int | None
    run_ticks: int | None
    wait: tuple | None  # (slot, ok-set)


@dataclass
class _ChannelInfo:
    name: str
    attr: AttributeId
    slot: int
    progress: int
    actuators: list  # (slot, value, AttributeId)
    step: int


class Model:
    """Successor function over compressed states.  ``env_guard`` may veto
    environment transitions (used by refinement)."""

    def __init__(self, decls: dict[AttributeId, AttributeDecl], rules: Sequence[TapRule],
                 attrs: Iterable[AttributeId], scenario: Scenario | None = None,
                 table: ChannelTable | None = None, tick_sec: int | None = None,
                 extra_values: dict[AttributeId, set] | None = None, margin_steps: int = 1,
                 outdoor_values: Sequence[int] | None = None,
                 env_guard: Callable | None = None, sensor_defaults: bool = False,
                 domains: dict[AttributeId, tuple] | None = None):
        from .env import load_channel_table

        self.decls = decls
        self.rules = list(rules)
        self.scenario = scenario or Scenario()
        self.table = table or load_channel_table()
        self.attrs = sorted(set(attrs) | {a for r in self.rules for a in r.attributes()})
        self.tick = tick_sec or self.scenario.tick_sec or auto_tick(self.rules, self.table,
                                                                    self.attrs)
        if self.tick <= 0:
            raise ValueError("tick must be positive")
        for a in self.attrs:
            if a not in decls:
                raise KeyError(f"undeclared attribute {a}")
        specs = compress_domains(self.rules, self.attrs, decls, extra_values, margin_steps)
        self.domain: dict[AttributeId, tuple] = {s.attr: s.domain for s in specs}
        if domains:
            self.domain.update(domains)
        for a, v in self.scenario.init.items():
            if a in self.domain and v not in self.domain[a]:
                self.domain[a] = tuple(sorted(set(self.domain[a]) | {v}))
        self.env_guard = env_guard
        self.vars: list[VariableSpec] = []
        self.slot: dict[AttributeId, int] = {}
        for a in self.attrs:
            self.slot[a] = self._add(VariableSpec(str(a), "Physical", self.domain[a], a))
        # sensor mirrors
        self.mirror: dict[AttributeId, tuple[int, int, int]] = {}
        for a in self.attrs:
            d = decls[a]
            sec = d.sensor_sec
            if sec is None and sensor_defaults and not d.controllable:
                sec = DEFAULT_SENSOR_SEC.get(a.entity, DEFAULT_SENSOR_OTHER)
            if sec is None:
                continue
            k = math.ceil(sec / self.tick)
            ls = self._add(VariableSpec(f"{a}.log", "LogicalMirror", self.domain[a], a))
            ag = self._add(VariableSpec(f"{a}.age", "Staleness", tuple(range(k + 1)), a))
            self.mirror[a] = (ls, ag, k)
        self._mirror_of_slot = {self.slot[a]: m for a, m in self.mirror.items()}
        self.read_slot = {a: (self.mirror[a][0] if a in self.mirror else self.slot[a])
                          for a in self.attrs}
        # rules
        self.rinfo: list[_RuleInfo] = []
        self.rule_index: dict[str, int] = {}
        for r in self.rules:
            delay = None if r.delay_sec is None else math.ceil(r.delay_sec / self.tick)
            run = None
            if r.action.extended:
                run = math.ceil(r.action.duration_sec / self.tick)
            tmax = max(delay or 0, run or 0)
            sh = self._add(VariableSpec(f"{r.id}.shadow", "Shadow", (False, True)))
            ph = self._add(VariableSpec(f"{r.id}.phase", "Phase", tuple(range(7))))
            tm = self._add(VariableSpec(f"{r.id}.timer", "Timer", tuple(range(tmax + 1))))
            t = r.trigger.constraint
            info = _RuleInfo(
                r, sh, ph, tm, self.read_slot[t.attr], self._ok(t),
                [(self.read_slot[c.attr], self._ok(c)) for c in r.conditions],
                [(self.slot[a], v) for a, v in r.action.assignments],
                [(self.slot[a], v) for a, v in (r.action.completion or ())],
                delay, run,
                None if r.wait_trigger is None else
                (self.read_slot[r.wait_trigger.attr], self._ok(r.wait_trigger)),
            )
            self.rule_index[r.id] = len(self.rinfo)
            self.rinfo.append(info)
        # tardy channels with a modelled attribute
        self.channels: list[_ChannelInfo] = []
        for a in self.attrs:
            ch = channel_of(a)
            if ch is None or ch.immediate or decls[a].kind is not Kind.TARDY:
                continue
            acts = [(self.slot[e.action[0]], e.action[1], e.action[0])
                    for e in self.table.effects
                    if e.channel == ch.name and e.action[0] in self.slot]
            if not acts:
                continue
            pr = self._add(VariableSpec(f"{a}.progress", "Progress", ()))
            self.channels.append(_ChannelInfo(ch.name, a, self.slot[a], pr, acts, 1))
        self.actuator_channels: dict[int, list[_ChannelInfo]] = {}
        for c in self.channels:
            for s, _, _ in c.actuators:
                self.actuator_channels.setdefault(s, []).append(c)
        self.channel_by_slot = {c.slot: c for c in self.channels}
        # immediate channels (light -> illuminance, window -> sound)
        self.instant: dict[int, list[tuple[object, int, int]]] = {}
        for a in self.attrs:
            ch = channel_of(a)
            if ch is None or not ch.immediate:
                continue
            for e in self.table.effects:
                if e.channel == ch.name and e.action[0] in self.slot:
                    self.instant.setdefault(self.slot[e.action[0]], []).append(
                        (e.action[1], self.slot[a], e.delta))
        # outdoor temperature
        self.outdoor_slot = None
        temp = [c for c in self.channels if c.name == "temperature"]
        if temp:
            vals = tuple(outdoor_values) if outdoor_values else (self.scenario.outdoor,)
            self.outdoor_slot = self._add(VariableSpec("outdoor.temperature", "Outdoor", vals))
        self.nslots = len(self.vars)
        self._rate_cache: dict = {}
        for c in self.channels:
            bound = self._progress_bound(c)
            spec = self.vars[c.progress]
            self.vars[c.progress] = replace(spec, domain=tuple(range(bound + 1)))
        # who may change spontaneously
        self.env_attrs = [a for a in self.attrs
                          if (decls[a].env or decls[a].kind is Kind.TARDY)
                          and a not in self.scenario.pins]
        self._succ: dict[tuple, list] = {}

    # -- construction helpers

    def _progress_bound(self, c: _ChannelInfo) -> int:
        """Largest tick count the channel's progress counter can reach."""
        by_slot: dict[int, list] = {}
        for s, v, aid in c.actuators:
            by_slot.setdefault(s, []).append((aid, v))
        signs = [None]
        if c.name == "temperature" and self.outdoor_slot is not None \
                and any(o is not None for o in self.vars[self.outdoor_slot].domain):
            signs = [-1, 0, 1]
        best = 0
        for combo in itertools.product(*[[None] + opts for opts in by_slot.values()]):
            acts = [x for x in combo if x is not None]
            for sign in signs:
                best = max(best, self._rates_for(c, acts, sign)[1])
        return best

    def _add(self, spec: VariableSpec) -> int:
        self.vars.append(spec)
        return len(self.vars) - 1

    def _ok(self, c: Constraint) -> frozenset:
        return frozenset(c.satisfying(self.decls[c.attr], self.domain[c.attr]))

    # -- reading states

    def value(self, state: tuple, attr: AttributeId):
        return state[self.slot[attr]]

    def phase(self, state: tuple, rule_id: str) -> int:
        return state[self.rinfo[self.rule_index[rule_id]].phase]

    def timer(self, state: tuple, rule_id: str) -> int:
        """Remaining ticks of a running extended action, 0 otherwise."""
        ri = self.rinfo[self.rule_index[rule_id]]
        return state[ri.timer] if state[ri.phase] == RUN else 0

    def is_stable(self, state: tuple) -> bool:
        for ri in self.rinfo:
            if state[ri.phase] in (PENDING, DONE):
                return False
        for a, (ls, ag, k) in self.mirror.items():
            if state[ls] != state[self.slot[a]] and state[ag] >= k:
                return False
        return True

    def describe(self, state: tuple) -> dict[str, object]:
        out = {}
        for spec, v in zip(self.vars, state):
            if spec.role == "Phase":
                v = PHASE_NAMES[v]
            out[spec.name] = v
        return out

    # -- initial states

    def initial_states(self) -> list[tuple]:
        choices = []
        for spec in self.vars[: len(self.attrs)]:
            a = spec.attr
            if a in self.scenario.init:
                choices.append([self.scenario.init[a]])
            else:
                choices.append(list(spec.domain))
        out = []
        seen = set()
        for combo in _product(choices):
            vals = list(combo) + [None] * (self.nslots - len(self.attrs))
            for a, (ls, ag, _) in self.mirror.items():
                vals[ls] = vals[self.slot[a]]
                vals[ag] = 0
            for ri in self.rinfo:
                vals[ri.phase] = IDLE
                vals[ri.timer] = 0
                vals[ri.shadow] = False if self.scenario.boot else vals[ri.trig_slot] in ri.trig_ok
            for c in self.channels:
                vals[c.progress] = 0
            if self.outdoor_slot is not None:
                for o in self.vars[self.outdoor_slot].domain:
                    v2 = list(vals)
                    v2[self.outdoor_slot] = o
                    self._settle(v2)
                    t = tuple(v2)
                    if t not in seen:
                        seen.add(t)
                        out.append(t)
                continue
            self._settle(vals)
            t = tuple(vals)
            if t not in seen:
                seen.add(t)
                out.append(t)
        return out

    # -- mutation helpers (operate on lists)

    def _assign(self, vals: list, slot: int, value) -> None:
        if vals[slot] == value:
            return
        vals[slot] = value
        for c in self.actuator_channels.get(slot, ()):
            vals[c.progress] = 0
        c = self.channel_by_slot.get(slot)
        if c is not None:
            vals[c.progress] = 0
        for trigger_value, target, delta in self.instant.get(slot, ()):
            if trigger_value == value:
                dom = self.vars[target].domain
                goal = vals[target] + delta
                vals[target] = min(dom, key=lambda x: (abs(x - goal), x))
        m = self._mirror_of_slot.get(slot)
        if m is not None and vals[m[0]] == value:
            vals[m[1]] = 0

    def _settle(self, vals: list) -> None:
        """Edge detection and wait-trigger release after any value change."""
        for ri in self.rinfo:
            t = vals[ri.trig_slot] in ri.trig_ok
            if t and not vals[ri.shadow]:
                if all(vals[s] in ok for s, ok in ri.conds):
                    r = ri.rule
                    if ri.delay_ticks is not None:
                        if ri.delay_ticks == 0:
                            vals[ri.phase] = PENDING
                            vals[ri.timer] = 0
                        else:
                            vals[ri.phase] = DELAY
                            vals[ri.timer] = ri.delay_ticks
                    elif ri.wait is not None and not r.action.extended:
                        vals[ri.phase] = GATE
                        vals[ri.timer] = 0
                    else:
                        vals[ri.phase] = PENDING
                        vals[ri.timer] = 0
            vals[ri.shadow] = t
            if ri.wait is not None:
                ws, wok = ri.wait
                if vals[ri.phase] == GATE and vals[ws] in wok:
                    vals[ri.phase] = PENDING
                elif vals[ri.phase] == HOLD and vals[ws] in wok:
                    vals[ri.phase] = DONE

    def _finish_run(self, vals: list, ri: _RuleInfo) -> None:
        vals[ri.timer] = 0
        if ri.wait is not None:
            ws, wok = ri.wait
            vals[ri.phase] = DONE if vals[ws] in wok else HOLD
        else:
            vals[ri.phase] = DONE

    # -- rates

    def _rates(self, c: _ChannelInfo, vals) -> tuple:
        acts = [(aid, v) for s, v, aid in c.actuators if vals[s] == v]
        sign = None
        if c.name == "temperature" and self.outdoor_slot is not None:
            o = vals[self.outdoor_slot]
            sign = None if o is None else (o > vals[c.slot]) - (o < vals[c.slot])
        return self._rates_for(c, acts, sign)

    def _rates_for(self, c: _ChannelInfo, acts, sign) -> tuple:
        key = (c.name, tuple(sorted((str(aid), v) for aid, v in acts)), sign)
        hit = self._rate_cache.get(key)
        if hit is not None:
            return hit
        if sign is None:
            lo, hi = joint_effect(acts, c.name, self.table, self.tick)
        else:
            # indoor/outdoor only matter through their sign
            lo, hi = joint_effect(acts, c.name, self.table, self.tick, outdoor=sign, indoor=0)
        step = CHANNELS[c.name].step if not CHANNELS[c.name].leveled else 1
        rates = sorted({lo, (lo + hi) / 2, hi})
        thresholds = {}
        zero = False
        for r in rates:
            if r == 0:
                zero = True
                continue
            t = math.ceil(Fraction(step) / abs(r))
            thresholds.setdefault(t, set()).add(1 if r > 0 else -1)
        tmax = max(thresholds) if thresholds else 0
        out = (thresholds, tmax, zero)
        self._rate_cache[key] = out
        return out

    # -- successors

    def successors(self, state: tuple) -> list[tuple[Label, tuple]]:
        hit = self._succ.get(state)
        if hit is not None:
            return hit
        out = self._compute(state)
        self._succ[state] = out
        return out

    def _compute(self, state: tuple) -> list[tuple[Label, tuple]]:
        res: dict[tuple[Label, tuple], None] = {}
        urgent = []
        for ri in self.rinfo:
            ph = state[ri.phase]
            if ph == PENDING:
                vals = list(state)
                for s, v in ri.assigns:
                    self._assign(vals, s, v)
                if ri.run_ticks is not None:
                    if ri.run_ticks > 0:
                        vals[ri.phase] = RUN
                        vals[ri.timer] = ri.run_ticks
                    else:
                        self._finish_run(vals, ri)
                else:
                    vals[ri.phase] = IDLE
                    vals[ri.timer] = 0
                self._settle(vals)
                urgent.append((Label("RuleFire", ri.rule.id), tuple(vals)))
            elif ph == DONE:
                vals = list(state)
                for s, v in ri.completion:
                    self._assign(vals, s, v)
                vals[ri.phase] = IDLE
                vals[ri.timer] = 0
                self._settle(vals)
                urgent.append((Label("ActionComplete", ri.rule.id), tuple(vals)))
        for a, (ls, ag, k) in self.mirror.items():
            phys = state[self.slot[a]]
            if state[ls] != phys and state[ag] >= k:
                vals = list(state)
                vals[ls] = phys
                vals[ag] = 0
                self._settle(vals)
                urgent.append((Label("SensorUpdate", str(a)), tuple(vals)))
        if urgent:
            urgent.sort(key=lambda p: p[0])
            return urgent + [(STUTTER, state)]
        for nxt in self._tick(state):
            if nxt != state:
                res[(TICK, nxt)] = None
        for label, nxt in self._env(state):
            if nxt != state:
                res[(label, nxt)] = None
        out = sorted(res, key=lambda p: p[0])
        out.append((STUTTER, state))
        return out

    def _tick(self, state: tuple) -> list[tuple]:
        base = list(state)
        for ri in self.rinfo:
            ph = base[ri.phase]
            if ph == DELAY:
                base[ri.timer] -= 1
                if base[ri.timer] <= 0:
                    base[ri.timer] = 0
                    # conditions are checked again when the delay runs out
                    ok = all(base[s] in cok for s, cok in ri.conds)
                    base[ri.phase] = PENDING if ok else IDLE
            elif ph == RUN:
                base[ri.timer] -= 1
                if base[ri.timer] <= 0:
                    self._finish_run(base, ri)
        for a, (ls, ag, k) in self.mirror.items():
            if base[ls] != base[self.slot[a]]:
                base[ag] = min(base[ag] + 1, k)
            else:
                base[ag] = 0
        branches = [base]
        for c in self.channels:
            thresholds, tmax, zero = self._rates(c, state)
            if tmax == 0:
                continue
            nb = []
            for vals in branches:
                k = min(vals[c.progress] + 1, tmax)
                dom = self.vars[c.slot].domain
                idx = dom.index(vals[c.slot])
                moved = False
                for d in sorted(thresholds.get(k, ())):
                    j = idx + d
                    if 0 <= j < len(dom):
                        v2 = list(vals)
                        v2[c.slot] = dom[j]
                        v2[c.progress] = 0
                        nb.append(v2)
                        moved = True
                if k < tmax or zero or not moved:
                    v2 = list(vals)
                    v2[c.progress] = k
                    nb.append(v2)
            branches = nb
        out = []
        for vals in branches:
            # a tardy step may change which actions are active; counters of
            # other channels stay, only the moved channel restarts
            self._settle(vals)
            out.append(tuple(vals))
        return out

    def _env(self, state: tuple) -> list[tuple[Label, tuple]]:
        out = []
        for a in self.env_attrs:
            s = self.slot[a]
            dom = self.vars[s].domain
            cur = state[s]
            if self.decls[a].kind is Kind.TARDY:
                i = dom.index(cur)
                cands = [dom[j] for j in (i - 1, i + 1) if 0 <= j < len(dom)]
            else:
                cands = [v for v in dom if v != cur]
            for v in cands:
                vals = list(state)
                self._assign(vals, s, v)
                self._settle(vals)
                label = Label("EnvChange", f"{a}={v}")
                nxt = tuple(vals)
                if self.env_guard is None or self.env_guard(state, label, nxt):
                    out.append((label, nxt))
        if self.outdoor_slot is not None and len(self.vars[self.outdoor_slot].domain) > 1:
            for v in self.vars[self.outdoor_slot].domain:
                if v == state[self.outdoor_slot]:
                    continue
                vals = list(state)
                vals[self.outdoor_slot] = v
                label = Label("EnvChange", f"outdoor.temperature={v}")
                nxt = tuple(vals)
                if self.env_guard is None or self.env_guard(state, label, nxt):
                    out.append((label, nxt))
        return out

    # -- explicit construction

    def explore(self, cap: int = DEFAULT_STATE_CAP) -> "Automaton":
        init = self.initial_states()
        seen = set(init)
        order = list(init)
        edges: list[Transition] = []
        q = deque(init)
        while q:
            s = q.popleft()
            for label, t in self.successors(s):
                edges.append(Transition(s, label, t))
                if t not in seen:
                    if len(seen) >= cap:
                        raise StateCapExceeded(f"more than {cap} states")
                    seen.add(t)
                    order.append(t)
                    q.append(t)
        return Automaton(order, init, edges, self.tick, list(self.vars), self)


def _product(choices):
    if not choices:
        yield ()
        return
    idx = [0] * len(choices)
    while True:
        yield tuple(c[i] for c, i in zip(choices, idx))
        k = len(choices) - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] < len(choices[k]):
                break
            idx[k] = 0
            k -= 1
        if k < 0:
            return


@dataclass
class Automaton:
    states: list[tuple]
    initial: list[tuple]
    transitions: list[Transition]
    tick_sec: int
    vars: list[VariableSpec]
    model: Model = field(repr=False, default=None)

    def dump(self) -> str:
        ids = {s: i for i, s in enumerate(self.states)}
        return "\n".join(f"{ids[t.source]} -{t.label}-> {ids[t.target]}" for t in self.transitions)


def build_model(decls, rules, attrs, scenario=None, table=None, tick_sec=None,
                cap: int = DEFAULT_STATE_CAP, **kw) -> Automaton:
    return Model(decls, rules, attrs, scenario, table, tick_sec, **kw).explore(cap)


def successors(automaton: Automaton, state: tuple) -> list[tuple[Label, tuple]]:
    return automaton.model.successors(state)
