"""Correctness properties: atoms, the two normal forms, negation, the built-in
catalog and priority ordering.

Normal forms (over stable states of a model):

* state-based  ``G(pre -> post)``
* event-based  ``G(pre -> X post)``

``pre`` is a conjunction of atoms.  An atom marked as an event holds when its
constraint has just become true.  ``post`` is an atom or an and/or of atoms.
"""
from __future__ import annotations

import enum
import logging
import math
import random
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Sequence

from .rules import AttributeDecl, AttributeId, Op, parse_document, parse_duration

log = logging.getLogger(__name__)

PLACEHOLDER_DEFAULTS = {"low_temp": 16, "high_temp": 27, "high_humidity": 80, "dry_soil": 30}


class Shape(enum.Enum):
    EVENT = "EVENT"
    STATE = "STATE"


class PropertyError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    """``attr op value``; ``op`` may be ``in`` with a frozenset value.
    Timer atoms read ``rule.timer >= ticks`` and have ``attr`` None."""

    attr: AttributeId | None
    op: str
    value: object
    event: bool = False
    timer_rule: str | None = None

    def __str__(self) -> str:
        if self.timer_rule is not None:
            return f"{self.timer_rule}.timer >= {self.value}"
        v = self.value
        if isinstance(v, frozenset):
            v = "{" + ", ".join(sorted(map(str, v))) + "}"
        return f"{'@' if self.event else ''}{self.attr} {self.op} {v}"

    def resolved(self, placeholders: dict[str, int]) -> "Atom":
        if isinstance(self.value, str) and self.value.startswith("${"):
            name = self.value[2:-1]
            table = {**PLACEHOLDER_DEFAULTS, **placeholders}
            if name not in table:
                raise PropertyError(f"no value for placeholder {self.value}")
            return replace(self, value=table[name])
        return self

    def holds(self, value, decl: AttributeDecl | None) -> bool:
        if self.op == "in":
            return value in self.value
        op = Op(self.op)
        if op.ordered and decl is not None:
            return op.apply(decl.rank(value), decl.rank(self.value))
        return op.apply(value, self.value)


@dataclass(frozen=True)
class AllOf:
    parts: tuple

    def __str__(self) -> str:
        return "(" + " AND ".join(map(str, self.parts)) + ")"


@dataclass(frozen=True)
class AnyOf:
    parts: tuple

    def __str__(self) -> str:
        return "(" + " OR ".join(map(str, self.parts)) + ")"


@dataclass(frozen=True)
class Property:
    id: str
    shape: Shape
    pre: tuple[Atom, ...]
    post: object  # Atom | AllOf | AnyOf
    within_sec: int | None = None
    groups: tuple[str, ...] = ()
    negated: bool = False

    def attributes(self) -> set[AttributeId]:
        out = {a.attr for a in self.pre if a.attr is not None}
        out |= {a.attr for a in post_atoms(self.post) if a.attr is not None}
        return out

    @property
    def scenario_group(self) -> str | None:
        for g in self.groups:
            if g in {f"G{i}" for i in range(1, 8)}:
                return g
        return None

    def __str__(self) -> str:
        pre = " AND ".join(map(str, self.pre)) or "TRUE"
        post = f"X {self.post}" if self.shape is Shape.EVENT else str(self.post)
        tag = "NOT " if self.negated else ""
        return f"{self.id}: {tag}G({pre} => {post})"


NegatedProperty = Property  # a Property with negated=True


def post_atoms(f) -> list[Atom]:
    if isinstance(f, Atom):
        return [f]
    return [a for p in f.parts for a in post_atoms(p)]


# ------------------------------------------------------------ negation

_FLIP = {"<": ">=", ">=": "<", ">": "<=", "<=": ">", "=": "!=", "!=": "="}


def negate_atom(a: Atom, decls: dict[AttributeId, AttributeDecl] | None = None) -> Atom:
    """Complement of an atom.  On enumerated domains the result is the set of
    remaining labels (a single label for binary domains)."""
    decl = decls.get(a.attr) if decls and a.attr is not None else None
    if decl is not None and not decl.numeric and a.timer_rule is None:
        keep = frozenset(v for v in decl.labels if not a.holds(v, decl))
        if len(keep) == 1:
            return replace(a, op="=", value=next(iter(keep)))
        return replace(a, op="in", value=keep)
    if a.op == "in":
        raise PropertyError(f"cannot negate set atom {a} without declarations")
    return replace(a, op=_FLIP[a.op])


def negate_formula(f, decls=None):
    if isinstance(f, Atom):
        return negate_atom(f, decls)
    if isinstance(f, AllOf):
        return AnyOf(tuple(negate_formula(p, decls) for p in f.parts))
    return AllOf(tuple(negate_formula(p, decls) for p in f.parts))


def negate(p: Property, decls: dict[AttributeId, AttributeDecl] | None = None) -> Property:
    """G(pre => post) becomes G(pre => not post); X commutes with negation."""
    decls = decls if decls is not None else catalog_declarations()
    return replace(p, post=negate_formula(p.post, decls), negated=not p.negated)


# ------------------------------------------------------------ parsing

_ATOM = re.compile(r"\s*(@?)\s*([\w.]+)\s*(!=|<=|>=|=|<|>)\s*(\$\{\w+\}|-?\d+|\w+)\s*$")
_PROP = re.compile(
    r"PROP\s+(?P<id>\S+)\s+(?P<shape>EVENT|STATE)\s+WHEN\s+(?P<pre>.+?)\s+THEN\s+(?P<post>.+?)"
    r"(?:\s+WITHIN\s+(?P<within>\d+\s*[A-Za-z]*))?(?:\s+GROUP\s+(?P<groups>[\w\s]+))?\s*$",
    re.IGNORECASE,
)


def parse_atom(text: str, decls: dict[AttributeId, AttributeDecl] | None = None) -> Atom:
    m = _ATOM.match(text)
    if not m:
        raise PropertyError(f"bad atom {text!r}")
    ev, name, op, val = m.groups()
    aid = AttributeId.parse(name) if "." in name else None
    if decls is not None:
        from .rules import resolve_name

        aid = resolve_name(decls, name)
        if aid is None:
            raise PropertyError(f"undeclared attribute {name!r}")
    if aid is None:
        raise PropertyError(f"attribute {name!r} needs entity.capability form")
    value: object = val
    if re.fullmatch(r"-?\d+", val):
        value = int(val)
    return Atom(aid, op, value, bool(ev))


def parse_properties(text: str, decls: dict[AttributeId, AttributeDecl] | None = None
                     ) -> list[Property]:
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _PROP.match(line)
        if not m:
            raise PropertyError(f"line {n}: malformed property {line!r}")
        pre_txt = m["pre"].strip()
        pre = () if pre_txt.upper() == "TRUE" else tuple(
            parse_atom(t, decls) for t in re.split(r"\s+AND\s+", pre_txt, flags=re.I))
        post = parse_atom(m["post"], decls)
        if post.event:
            raise PropertyError(f"line {n}: post atoms take no '@'")
        within = parse_duration(m["within"]) if m["within"] else None
        groups = tuple(m["groups"].split()) if m["groups"] else ()
        out.append(Property(m["id"], Shape(m["shape"].upper()), pre, post, within, groups))
    return out


def format_property(p: Property) -> str:
    pre = " AND ".join(map(str, p.pre)) or "TRUE"
    s = f"PROP {p.id} {p.shape.value} WHEN {pre} THEN {p.post}"
    if p.within_sec is not None:
        s += f" WITHIN {p.within_sec}s"
    if p.groups:
        s += " GROUP " + " ".join(p.groups)
    return s


def _data(name: str) -> str:
    return resources.files("taprepair").joinpath("data").joinpath(name).read_text(encoding="utf-8")


_CATALOG_DECLS: dict | None = None


def catalog_declarations() -> dict[AttributeId, AttributeDecl]:
    global _CATALOG_DECLS
    if _CATALOG_DECLS is None:
        _CATALOG_DECLS = parse_document(_data("attributes.tap")).decls
    return dict(_CATALOG_DECLS)


def load_catalog() -> list[Property]:
    return parse_properties(_data("catalog.props"), catalog_declarations())


def catalog_by_id() -> dict[str, Property]:
    return {p.id: p for p in load_catalog()}


# ------------------------------------------------------------ templates


class Template(enum.Enum):
    ONE_EVENT_NEVER = enum.auto()
    EVENT_STATE_ALWAYS = enum.auto()
    EVENT_STATE_NEVER = enum.auto()
    ONE_STATE_ALWAYS = enum.auto()
    ONE_STATE_NEVER = enum.auto()
    MULTI_STATE_ALWAYS = enum.auto()
    MULTI_STATE_NEVER = enum.auto()
    STATE_STATE_ALWAYS = enum.auto()
    STATE_STATE_NEVER = enum.auto()


def normalize(template: Template, pid: str = "P", *, event: Atom | None = None,
              state: Atom | None = None, states: Sequence[Atom] = (),
              decls: dict[AttributeId, AttributeDecl] | None = None) -> Property:
    """Map a surface template onto one of the two normal forms.

    Unconditional forms get an empty (true) precondition, ``never`` forms
    negate their atom, and "never together" moves all but the last state into
    the precondition.
    """
    T = Template
    neg = lambda a: negate_atom(a, decls)  # noqa: E731
    if template in (T.ONE_EVENT_NEVER, T.EVENT_STATE_ALWAYS, T.EVENT_STATE_NEVER):
        if event is None:
            raise PropertyError("event template needs an event atom")
        if decls is not None and event.attr in decls and decls[event.attr].kind.value == "tardy" \
                and decls[event.attr].sensor_sec is None:
            raise PropertyError(f"event over tardy attribute {event.attr} without a sensor mirror")
        pre = tuple(states) if template is not T.ONE_EVENT_NEVER else ()
        post = event if template is T.EVENT_STATE_ALWAYS else neg(event)
        return Property(pid, Shape.EVENT, pre, replace(post, event=False))
    if template is T.ONE_STATE_ALWAYS:
        return Property(pid, Shape.STATE, (), state)
    if template is T.ONE_STATE_NEVER:
        return Property(pid, Shape.STATE, (), neg(state))
    if template is T.MULTI_STATE_ALWAYS:
        parts = tuple(states)
        return Property(pid, Shape.STATE, (), parts[0] if len(parts) == 1 else AllOf(parts))
    if template is T.MULTI_STATE_NEVER:
        parts = tuple(states)
        return Property(pid, Shape.STATE, parts[:-1], neg(parts[-1]))
    if template is T.STATE_STATE_ALWAYS:
        return Property(pid, Shape.STATE, tuple(states), state)
    if template is T.STATE_STATE_NEVER:
        return Property(pid, Shape.STATE, tuple(states), neg(state))
    raise PropertyError(f"unknown template {template}")


# ------------------------------------------------------------ trace semantics


def formula_holds(f, valuation: dict, decls=None) -> bool:
    if isinstance(f, Atom):
        if f.timer_rule is not None:
            return valuation.get(f"{f.timer_rule}.timer", 0) >= f.value
        d = decls.get(f.attr) if decls else None
        return f.holds(valuation[f.attr], d)
    if isinstance(f, AllOf):
        return all(formula_holds(p, valuation, decls) for p in f.parts)
    return any(formula_holds(p, valuation, decls) for p in f.parts)


def pre_holds(p: Property, trace: Sequence[dict], i: int, decls=None) -> bool:
    for a in p.pre:
        now = formula_holds(replace(a, event=False), trace[i], decls)
        if not now:
            return False
        if a.event:
            if i == 0 or formula_holds(replace(a, event=False), trace[i - 1], decls):
                return False
    return True


def evaluate_trace(p: Property, trace: Sequence[dict], decls=None) -> bool:
    """Finite-trace reading of the normal form; X at the last position is weak."""
    for i in range(len(trace)):
        if not pre_holds(p, trace, i, decls):
            continue
        if p.shape is Shape.STATE:
            if not formula_holds(p.post, trace[i], decls):
                return False
        elif i + 1 < len(trace) and not formula_holds(p.post, trace[i + 1], decls):
            return False
    return True


# ------------------------------------------------------------ priority


@dataclass
class PriorityTables:
    pre_general: dict[str, int] = field(default_factory=dict)
    pre_temperature: dict[str, int] = field(default_factory=dict)
    post: dict[str, int] = field(default_factory=dict)


def load_priority_tables(text: str | None = None) -> PriorityTables:
    text = _data("priority.txt") if text is None else text
    tables = PriorityTables()
    section = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            section = {"[pre general]": tables.pre_general,
                       "[pre temperature]": tables.pre_temperature,
                       "[post]": tables.post}.get(line.lower())
            if section is None:
                raise PropertyError(f"unknown priority section {line}")
            continue
        key, rank = line.rsplit(None, 1)
        section[key] = int(rank)
    return tables


LOWEST = 99
_TEMPERATURE_KEYS = ("temperature.", "heater.switch", "ac.switch")


def _lookup(table: dict[str, int], a: Atom) -> int | None:
    if a.attr is None:
        return None
    key = f"{a.attr}={a.value}"
    if key in table:
        return table[key]
    return table.get(str(a.attr))


@dataclass(frozen=True, order=True)
class PriorityKey:
    pre: int
    post: int


def priority_key(p: Property, tables: PriorityTables) -> PriorityKey:
    temp = any(str(a.attr).startswith(_TEMPERATURE_KEYS) for a in p.pre if a.attr)
    table = tables.pre_temperature if temp else tables.pre_general
    ranks = [r for r in (_lookup(table, a) for a in p.pre) if r is not None]
    if not ranks:
        if p.pre:
            log.warning("%s: no pre-proposition priority entry, using lowest", p.id)
        pre_rank = LOWEST
    else:
        pre_rank = min(ranks)
    posts = [r for r in (_lookup(tables.post, a) for a in post_atoms(p.post)) if r is not None]
    if not posts:
        log.warning("%s: no post-proposition priority entry, using lowest", p.id)
    return PriorityKey(pre_rank, min(posts) if posts else LOWEST)


def prioritize(props: Sequence[Property], tables: PriorityTables | None = None,
               seed: int = 0) -> list[Property]:
    tables = tables or load_priority_tables()
    rng = random.Random(seed)
    jitter = {p.id: rng.random() for p in sorted(props, key=lambda q: q.id)}
    return sorted(props, key=lambda p: (priority_key(p, tables), jitter[p.id]))


# ------------------------------------------------------------ compilation


@dataclass
class CompiledProperty:
    """A property bound to a model's slots."""

    prop: Property
    pre_state: list  # (slot, okset)
    pre_event: list  # (slot, okset)
    timer_any: list  # (phase slot, timer slot, min ticks); disjunction, empty = no clause
    post: object  # Atom | AllOf | AnyOf with values resolved
    model: object
    decls: dict

    @property
    def shape(self) -> Shape:
        return self.prop.shape

    def event_values(self, state: tuple) -> tuple:
        """What an event atom needs to remember about the previous stable state."""
        return tuple(state[s] for s, _ in self.pre_event)

    def pre(self, state: tuple, prev: tuple | None = None) -> bool:
        """``prev`` holds :meth:`event_values` of the previous stable state."""
        for s, ok in self.pre_state:
            if state[s] not in ok:
                return False
        for i, (s, ok) in enumerate(self.pre_event):
            if state[s] not in ok or prev is None or prev[i] in ok:
                return False
        if self.timer_any:
            from .automaton import RUN

            if not any(state[ph] == RUN and state[tm] >= n for ph, tm, n in self.timer_any):
                return False
        return True

    def post_holds(self, state: tuple) -> bool:
        return self._eval(self.post, state)

    def _eval(self, f, state) -> bool:
        if isinstance(f, Atom):
            s = self.model.slot[f.attr]
            return f.holds(state[s], self.decls[f.attr])
        if isinstance(f, AllOf):
            return all(self._eval(p, state) for p in f.parts)
        return any(self._eval(p, state) for p in f.parts)


def timer_atoms(p: Property, rules, tick_sec: int) -> list[Atom]:
    """Timer atoms for a permitted-latency property: one per rule triggered on
    a precondition attribute whose extended action sets the post value."""
    if p.within_sec is None:
        return []
    pre_attrs = {a.attr for a in p.pre if a.attr is not None}
    posts = post_atoms(p.post)
    out = []
    for r in rules:
        if not r.action.extended or r.trigger.constraint.attr not in pre_attrs:
            continue
        if not any(a == post.attr and post.op == "=" and v == post.value
                   for a, v in r.action.assignments for post in posts):
            continue
        need = math.ceil((r.action.duration_sec - p.within_sec) / tick_sec)
        out.append(Atom(None, ">=", max(1, need), timer_rule=r.id))
    return out


def compile_property(p: Property, model, placeholders: dict[str, int] | None = None
                     ) -> CompiledProperty:
    ph = dict(model.scenario.placeholders)
    ph.update(placeholders or {})
    decls = model.decls
    pre_state, pre_event = [], []
    for a in p.pre:
        a = a.resolved(ph)
        if a.attr not in model.slot:
            raise PropertyError(f"{p.id}: attribute {a.attr} is not in the model")
        dom = model.domain[a.attr]
        ok = frozenset(v for v in dom if a.holds(v, decls[a.attr]))
        (pre_event if a.event else pre_state).append((model.slot[a.attr], ok))
    timers = []
    for t in timer_atoms(p, model.rules, model.tick):
        ri = model.rinfo[model.rule_index[t.timer_rule]]
        timers.append((ri.phase, ri.timer, t.value))

    def res(f):
        if isinstance(f, Atom):
            f = f.resolved(ph)
            if f.attr not in model.slot:
                raise PropertyError(f"{p.id}: attribute {f.attr} is not in the model")
            return f
        return type(f)(tuple(res(x) for x in f.parts))

    return CompiledProperty(p, pre_state, pre_event, timers, res(p.post), model, decls)


def property_constants(p: Property, placeholders: dict[str, int] | None = None
                       ) -> dict[AttributeId, set]:
    out: dict[AttributeId, set] = {}
    for a in list(p.pre) + post_atoms(p.post):
        if a.attr is None:
            continue
        a = a.resolved(placeholders or {})
        if isinstance(a.value, int):
            out.setdefault(a.attr, set()).add(a.value)
    return out
