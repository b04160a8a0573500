"""TAP rule data model and the line-oriented rule DSL.

A document is a sequence of attribute declarations followed by rules::

    ATTR heater.switch {on, off}
    ATTR temperature.value [0..40] C TARDY
    RULE r1: IF temperature < 16 THEN heater.switch = on

Rules read ``IF trigger [WHILE c {AND c}] THEN assignment {, assignment}
[FOR duration [REVERT assignment {, assignment}]] [AFTER duration | UNTIL c]``.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence


class DslError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True, order=True)
class AttributeId:
    entity: str
    capability: str

    def __post_init__(self):
        if not self.entity or not self.capability:
            raise ValueError("attribute id parts must be non-empty")

    def __str__(self) -> str:
        return f"{self.entity}.{self.capability}"

    @classmethod
    def parse(cls, text: str) -> "AttributeId":
        entity, _, cap = text.partition(".")
        return cls(entity, cap)


class Kind(enum.Enum):
    IMMEDIATE = "immediate"
    TARDY = "tardy"


@dataclass(frozen=True)
class AttributeDecl:
    id: AttributeId
    kind: Kind = Kind.IMMEDIATE
    labels: tuple[str, ...] | None = None
    lo: int | None = None
    hi: int | None = None
    unit: str = ""
    env: bool = False
    sensor_sec: int | None = None
    # numeric cut points for leveled attributes, so "co2 > 1000" can be written
    levels: tuple[int, ...] = ()

    def __post_init__(self):
        if self.labels is not None:
            if len(self.labels) < 2 or len(set(self.labels)) != len(self.labels):
                raise ValueError(f"{self.id}: enumerated domain needs >=2 distinct labels")
            if self.levels and len(self.levels) != len(self.labels) - 1:
                raise ValueError(f"{self.id}: LEVELS needs {len(self.labels) - 1} cut points")
        else:
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError(f"{self.id}: integer range needs min < max")
        if self.sensor_sec is not None and self.sensor_sec < 0:
            raise ValueError(f"{self.id}: negative sensor interval")

    @property
    def numeric(self) -> bool:
        return self.labels is None

    @property
    def controllable(self) -> bool:
        return not self.env and self.kind is Kind.IMMEDIATE

    def values(self) -> list:
        if self.labels is not None:
            return list(self.labels)
        return list(range(self.lo, self.hi + 1))

    def contains(self, value) -> bool:
        if self.labels is not None:
            return value in self.labels
        return isinstance(value, int) and self.lo <= value <= self.hi

    def rank(self, value) -> int:
        """Position of a value on the attribute's order (labels are ordinal)."""
        if self.labels is not None:
            return self.labels.index(value)
        return value

    def complement(self, value):
        """Default reversion target for an assignment of ``value``."""
        if self.labels is None:
            raise ValueError(f"{self.id}: numeric assignment needs an explicit REVERT")
        others = [v for v in self.labels if v != value]
        return others[0]


class Op(enum.Enum):
    EQ = "="
    NEQ = "!="
    LT = "<"
    LEQ = "<="
    GT = ">"
    GEQ = ">="

    @property
    def ordered(self) -> bool:
        return self in (Op.LT, Op.LEQ, Op.GT, Op.GEQ)

    def apply(self, a, b) -> bool:
        if self is Op.EQ:
            return a == b
        if self is Op.NEQ:
            return a != b
        if self is Op.LT:
            return a < b
        if self is Op.LEQ:
            return a <= b
        if self is Op.GT:
            return a > b
        return a >= b


@dataclass(frozen=True)
class Constraint:
    attr: AttributeId
    op: Op
    value: object

    def holds(self, value, decl: AttributeDecl) -> bool:
        if self.op.ordered:
            return self.op.apply(decl.rank(value), decl.rank(self.value))
        return self.op.apply(value, self.value)

    def satisfying(self, decl: AttributeDecl, domain: Iterable | None = None) -> list:
        return [v for v in (decl.values() if domain is None else domain) if self.holds(v, decl)]

    def __str__(self) -> str:
        return f"{self.attr} {self.op.value} {self.value}"


@dataclass(frozen=True)
class Trigger:
    constraint: Constraint


class ActionKind(enum.Enum):
    IMMEDIATE = "immediate"
    EXTENDED = "extended"


Assignment = tuple  # (AttributeId, value)


@dataclass(frozen=True)
class Action:
    assignments: tuple[Assignment, ...]
    kind: ActionKind = ActionKind.IMMEDIATE
    duration_sec: int | None = None
    completion: tuple[Assignment, ...] | None = None

    def __post_init__(self):
        if not self.assignments:
            raise ValueError("action needs at least one assignment")
        if self.kind is ActionKind.EXTENDED and self.duration_sec is None:
            raise ValueError("extended action needs a duration")

    @property
    def extended(self) -> bool:
        return self.kind is ActionKind.EXTENDED

    def targets(self) -> list[AttributeId]:
        return [a for a, _ in self.assignments]


@dataclass(frozen=True)
class TapRule:
    id: str
    trigger: Trigger
    conditions: tuple[Constraint, ...]
    action: Action
    delay_sec: int | None = None
    wait_trigger: Constraint | None = None

    def __post_init__(self):
        if self.delay_sec is not None and self.wait_trigger is not None:
            raise ValueError(f"{self.id}: AFTER and UNTIL are mutually exclusive")
        if self.delay_sec is not None and self.delay_sec < 0:
            raise ValueError(f"{self.id}: negative delay")

    def attributes(self) -> set[AttributeId]:
        out = {self.trigger.constraint.attr}
        out.update(c.attr for c in self.conditions)
        out.update(self.action.targets())
        if self.action.completion:
            out.update(a for a, _ in self.action.completion)
        if self.wait_trigger is not None:
            out.add(self.wait_trigger.attr)
        return out


@dataclass(frozen=True)
class RuleSemantics:
    trigger: tuple[AttributeId, ...]
    conditions: tuple[AttributeId, ...]
    actions: tuple[AttributeId, ...]


@dataclass(frozen=True)
class RuleConfiguration:
    trigger: tuple[tuple[Op, object], ...]
    conditions: tuple[tuple[Op, object], ...]
    actions: tuple[object, ...]
    # latency part of the configuration: (delay, duration, completion, wait)
    latency: tuple = ()


def project_semantics(rule: TapRule) -> RuleSemantics:
    return RuleSemantics(
        (rule.trigger.constraint.attr,),
        tuple(c.attr for c in rule.conditions),
        tuple(rule.action.targets()),
    )


def project_configuration(rule: TapRule) -> RuleConfiguration:
    t = rule.trigger.constraint
    return RuleConfiguration(
        ((t.op, t.value),),
        tuple((c.op, c.value) for c in rule.conditions),
        tuple(v for _, v in rule.action.assignments),
        (rule.delay_sec, rule.action.duration_sec, rule.action.completion,
         rule.action.kind, rule.wait_trigger),
    )


def rebuild_rule(rule_id: str, sem: RuleSemantics, conf: RuleConfiguration) -> TapRule:
    """Inverse of the two projections."""
    (t_attr,), ((t_op, t_val),) = sem.trigger, conf.trigger
    conds = tuple(Constraint(a, op, v) for a, (op, v) in zip(sem.conditions, conf.conditions))
    delay, duration, completion, kind, wait = conf.latency
    action = Action(tuple(zip(sem.actions, conf.actions)), kind, duration, completion)
    return TapRule(rule_id, Trigger(Constraint(t_attr, t_op, t_val)), conds, action, delay, wait)


# ---------------------------------------------------------------- documents


@dataclass
class Document:
    decls: dict[AttributeId, AttributeDecl] = field(default_factory=dict)
    rules: list[TapRule] = field(default_factory=list)

    def decl(self, attr: AttributeId) -> AttributeDecl:
        return self.decls[attr]

    def resolve(self, name: str) -> AttributeId | None:
        return resolve_name(self.decls, name)

    def with_rules(self, rules: Sequence[TapRule]) -> "Document":
        return Document(dict(self.decls), list(rules))


def resolve_name(decls: dict[AttributeId, AttributeDecl], name: str) -> AttributeId | None:
    if "." in name:
        aid = AttributeId.parse(name)
        return aid if aid in decls else None
    hits = [a for a in decls if a.entity == name]
    if len(hits) == 1:
        return hits[0]
    return None


_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d+)?)|(?P<op>!=|<=|>=|=|<|>)|(?P<name>\$\{\w+\}|[A-Za-z_%][\w.%]*)"
    r"|(?P<punct>[{}\[\],:])|(?P<range>\.\.))"
)

KEYWORDS = {"IF", "WHILE", "AND", "THEN", "FOR", "AFTER", "UNTIL", "REVERT", "RULE", "ATTR",
            "TARDY", "ENV", "SENSOR", "LEVELS"}

_UNITS = {"s": 1, "sec": 1, "secs": 1, "second": 1, "seconds": 1, "m": 60, "min": 60,
          "mins": 60, "minute": 60, "minutes": 60, "h": 3600, "hr": 3600, "hour": 3600,
          "hours": 3600}


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def parse_duration(text: str) -> int:
    """'15min' -> 900. Bare numbers are seconds."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([A-Za-z]*)\s*", text)
    if not m or (m.group(2) and m.group(2).lower() not in _UNITS):
        raise DslError(f"bad duration {text!r}")
    scale = _UNITS[m.group(2).lower()] if m.group(2) else 1
    return round_half_up(float(m.group(1)) * scale)


def format_duration(sec: int) -> str:
    if sec and sec % 3600 == 0:
        return f"{sec // 3600}h"
    if sec and sec % 60 == 0:
        return f"{sec // 60}min"
    return f"{sec}s"


class _Line:
    """Token cursor over one source line."""

    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise DslError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
            kind = m.lastgroup
            start = m.start(kind)
            self.toks.append((kind, m.group(kind), start + 1))
            pos = m.end()
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else ("eol", "", len(self.text) + 1)

    def at_kw(self, *words) -> bool:
        kind, val, _ = self.peek()
        return kind == "name" and val.upper() in words

    def take(self, kind: str | None = None, value: str | None = None):
        tok = self.peek()
        if tok[0] == "eol":
            self.fail(f"unexpected end of line, expected {value or kind}")
        if kind and tok[0] != kind:
            self.fail(f"expected {value or kind}, found {tok[1]!r}")
        if value is not None and tok[1].upper() != value:
            self.fail(f"expected {value}, found {tok[1]!r}")
        self.i += 1
        return tok

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def fail(self, msg: str):
        raise DslError(msg, self.lineno, self.peek()[2])


def _parse_decl(cur: _Line) -> AttributeDecl:
    cur.take("name", "ATTR")
    _, name, col = cur.take("name")
    if "." not in name:
        raise DslError(f"declaration needs entity.capability, got {name!r}", cur.lineno, col)
    aid = AttributeId.parse(name)
    labels = lo = hi = None
    unit = ""
    kind, tok, _ = cur.peek()
    if tok == "{":
        cur.take()
        labels = []
        while True:
            labels.append(cur.take("name")[1])
            if cur.peek()[1] == ",":
                cur.take()
                continue
            cur.take("punct")
            break
    elif tok == "[":
        cur.take()
        lo = round_half_up(float(cur.take("num")[1]))
        cur.take("range")
        hi = round_half_up(float(cur.take("num")[1]))
        cur.take("punct")
        if cur.peek()[0] == "name" and not cur.at_kw(*KEYWORDS):
            unit = cur.take()[1]
    else:
        cur.fail("expected {labels} or [min..max]")
    tardy = env = False
    sensor = None
    levels: list[int] = []
    while not cur.done():
        word = cur.take("name")[1].upper()
        if word == "TARDY":
            tardy = True
        elif word == "ENV":
            env = True
        elif word == "SENSOR":
            sensor = parse_duration(cur.take("num")[1] + _unit_suffix(cur))
        elif word == "LEVELS":
            while cur.peek()[0] == "num":
                levels.append(round_half_up(float(cur.take()[1])))
        else:
            cur.i -= 1
            cur.fail(f"unknown declaration flag {word!r}")
    try:
        return AttributeDecl(aid, Kind.TARDY if tardy else Kind.IMMEDIATE,
                             tuple(labels) if labels is not None else None, lo, hi, unit, env,
                             sensor, tuple(levels))
    except ValueError as exc:
        raise DslError(str(exc), cur.lineno, 1) from None


def _unit_suffix(cur: _Line) -> str:
    if cur.peek()[0] == "name" and cur.peek()[1].lower() in _UNITS:
        return cur.take()[1]
    return ""


class _RuleParser:
    def __init__(self, decls: dict[AttributeId, AttributeDecl]):
        self.decls = decls

    def attr(self, cur: _Line) -> AttributeId:
        _, name, col = cur.take("name")
        aid = resolve_name(self.decls, name)
        if aid is None:
            raise DslError(f"undeclared attribute {name!r}", cur.lineno, col)
        return aid

    def value(self, cur: _Line, aid: AttributeId):
        kind, tok, col = cur.take()
        decl = self.decls[aid]
        if kind == "num":
            v = round_half_up(float(tok))
            if not decl.numeric:
                raise DslError(f"{aid} takes labels, got number {tok}", cur.lineno, col)
        elif kind == "name":
            v = tok
        else:
            raise DslError(f"expected a value, found {tok!r}", cur.lineno, col)
        if not decl.contains(v):
            raise DslError(f"value {tok!r} outside the domain of {aid}", cur.lineno, col)
        return v

    def constraint(self, cur: _Line) -> Constraint:
        aid = self.attr(cur)
        _, optok, col = cur.take("op")
        op = Op(optok)
        decl = self.decls[aid]
        if decl.levels and cur.peek()[0] == "num":
            # numeric threshold against a leveled attribute
            _, tok, vcol = cur.take()
            return self._leveled(aid, decl, op, round_half_up(float(tok)), cur.lineno, vcol)
        value = self.value(cur, aid)
        if op.ordered and not (decl.numeric or decl.kind is Kind.TARDY):
            raise DslError(f"ordering comparison on unordered attribute {aid}", cur.lineno, col)
        return Constraint(aid, op, value)

    def _leveled(self, aid, decl, op, x, line, col) -> Constraint:
        # level i covers the integers in (cut[i-1], cut[i]]
        big = 10 ** 12
        cuts = [-big, *decl.levels, big]
        good = []
        for i, label in enumerate(decl.labels):
            a, b = cuts[i] + 1, cuts[i + 1]
            if op in (Op.EQ, Op.NEQ):
                inside = a <= x <= b
                if inside and a != b:
                    raise DslError(f"threshold {x} splits level {label!r} of {aid}", line, col)
                verdict = {op.apply(a, x)}
            else:
                verdict = {op.apply(a, x), op.apply(b, x)}
            if len(verdict) != 1:
                raise DslError(f"threshold {x} splits level {label!r} of {aid}", line, col)
            if verdict.pop():
                good.append(i)
        if not good:
            raise DslError(f"no level of {aid} satisfies {op.value} {x}", line, col)
        if len(good) == 1:
            return Constraint(aid, Op.EQ, decl.labels[good[0]])
        if good[-1] == len(decl.labels) - 1 and good == list(range(good[0], len(decl.labels))):
            return Constraint(aid, Op.GEQ, decl.labels[good[0]])
        if good[0] == 0 and good == list(range(0, good[-1] + 1)):
            return Constraint(aid, Op.LEQ, decl.labels[good[-1]])
        raise DslError(f"threshold on {aid} does not map to a level range", line, col)

    def assignment(self, cur: _Line) -> Assignment:
        aid = self.attr(cur)
        cur.take("op", "=")
        if not self.decls[aid].controllable:
            raise DslError(f"{aid} is not controllable", cur.lineno, cur.peek()[2])
        return (aid, self.value(cur, aid))

    def assignments(self, cur: _Line) -> tuple:
        out = [self.assignment(cur)]
        while cur.peek()[1] == ",":
            cur.take()
            out.append(self.assignment(cur))
        return tuple(out)

    def rule(self, cur: _Line, default_id: str) -> TapRule:
        rid = default_id
        if cur.at_kw("RULE"):
            cur.take()
            rid = cur.take("name")[1]
            cur.take("punct")
        cur.take("name", "IF")
        trig = self.constraint(cur)
        conds = []
        if cur.at_kw("WHILE"):
            cur.take()
            conds.append(self.constraint(cur))
            while cur.at_kw("AND"):
                cur.take()
                conds.append(self.constraint(cur))
        cur.take("name", "THEN")
        assigns = self.assignments(cur)
        duration = completion = delay = wait = None
        if cur.at_kw("FOR"):
            cur.take()
            duration = self._duration(cur)
            if cur.at_kw("REVERT"):
                cur.take()
                completion = self.assignments(cur)
            else:
                try:
                    completion = tuple((a, self.decls[a].complement(v)) for a, v in assigns)
                except ValueError as exc:
                    cur.fail(str(exc))
        if cur.at_kw("AFTER"):
            cur.take()
            delay = self._duration(cur)
        elif cur.at_kw("UNTIL"):
            cur.take()
            wait = self.constraint(cur)
        if not cur.done():
            cur.fail(f"unexpected {cur.peek()[1]!r}")
        kind = ActionKind.EXTENDED if duration is not None else ActionKind.IMMEDIATE
        return TapRule(rid, Trigger(trig), tuple(conds),
                       Action(assigns, kind, duration, completion), delay, wait)

    def _duration(self, cur: _Line) -> int:
        _, num, col = cur.take("num")
        try:
            return parse_duration(num + _unit_suffix(cur))
        except DslError as exc:
            raise DslError(str(exc), cur.lineno, col) from None


def parse_document(text: str, decls: dict[AttributeId, AttributeDecl] | None = None) -> Document:
    """Parse declarations and rules. ``decls`` seeds the declaration table."""
    doc = Document(dict(decls or {}))
    pending: list[tuple[_Line, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        cur = _Line(line, lineno)
        if cur.at_kw("ATTR"):
            if pending:
                raise DslError("declarations must precede rules", lineno, 1)
            d = _parse_decl(cur)
            doc.decls[d.id] = d
        else:
            pending.append((cur, lineno))
    parser = _RuleParser(doc.decls)
    explicit = set()
    for cur, lineno in pending:
        if cur.at_kw("RULE"):
            rid = cur.peek(1)[1]
            if rid in explicit:
                raise DslError(f"duplicate rule id {rid!r}", lineno, 1)
            explicit.add(rid)
    seen: set[str] = set()
    for pos, (cur, lineno) in enumerate(pending, 1):
        # unnamed rules are numbered by position, skipping ids already taken
        k = pos
        while f"r{k}" in explicit or f"r{k}" in seen:
            k += 1
        auto = f"r{k}"
        rule = parser.rule(cur, auto)
        if rule.id in seen:
            raise DslError(f"duplicate rule id {rule.id!r}", lineno, 1)
        seen.add(rule.id)
        doc.rules.append(rule)
    return doc


def parse_rules(text: str, decls: dict[AttributeId, AttributeDecl] | None = None) -> list[TapRule]:
    return parse_document(text, decls).rules


def parse_constraint(text: str, decls: dict[AttributeId, AttributeDecl]) -> Constraint:
    cur = _Line(text, 1)
    c = _RuleParser(decls).constraint(cur)
    if not cur.done():
        cur.fail(f"unexpected {cur.peek()[1]!r}")
    return c


# ---------------------------------------------------------------- printing


def format_decl(d: AttributeDecl) -> str:
    if d.labels is not None:
        dom = "{" + ", ".join(d.labels) + "}"
    else:
        dom = f"[{d.lo}..{d.hi}]" + (f" {d.unit}" if d.unit else "")
    parts = ["ATTR", str(d.id), dom]
    if d.kind is Kind.TARDY:
        parts.append("TARDY")
    if d.env:
        parts.append("ENV")
    if d.sensor_sec is not None:
        parts.append(f"SENSOR {d.sensor_sec}s")
    if d.levels:
        parts.append("LEVELS " + " ".join(map(str, d.levels)))
    return " ".join(parts)


def _fmt_assigns(assigns) -> str:
    return ", ".join(f"{a} = {v}" for a, v in assigns)


def format_rule(rule: TapRule) -> str:
    out = [f"RULE {rule.id}: IF {rule.trigger.constraint}"]
    if rule.conditions:
        out.append("WHILE " + " AND ".join(map(str, rule.conditions)))
    out.append("THEN " + _fmt_assigns(rule.action.assignments))
    if rule.action.extended:
        out.append(f"FOR {format_duration(rule.action.duration_sec)}")
        if rule.action.completion is not None:
            out.append("REVERT " + _fmt_assigns(rule.action.completion))
    if rule.delay_sec is not None:
        out.append(f"AFTER {format_duration(rule.delay_sec)}")
    if rule.wait_trigger is not None:
        out.append(f"UNTIL {rule.wait_trigger}")
    return " ".join(out)


def format_document(doc: Document, with_decls: bool = True) -> str:
    lines = [format_decl(d) for d in doc.decls.values()] if with_decls else []
    lines += [format_rule(r) for r in doc.rules]
    return "\n".join(lines) + ("\n" if lines else "")


def with_condition(rule: TapRule, c: Constraint) -> TapRule:
    return replace(rule, conditions=rule.conditions + (c,))
