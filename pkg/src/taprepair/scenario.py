"""Scenario files: initial values, pinned attributes and fixed outdoor conditions.

    INIT temperature=21
    PIN temperature          # no spontaneous change
    PIN heater.switch=off    # pinned and initialised
    OUTDOOR temperature=12
    BOOT                     # triggers already true at start count as fresh edges
    TICK 60s
    SET low_temp=16          # value for a ${low_temp} placeholder
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .rules import AttributeDecl, AttributeId, DslError, parse_duration, resolve_name, round_half_up


@dataclass
class Scenario:
    init: dict[AttributeId, object] = field(default_factory=dict)
    pins: set[AttributeId] = field(default_factory=set)
    outdoor: int | None = None
    boot: bool = False
    tick_sec: int | None = None
    placeholders: dict[str, int] = field(default_factory=dict)

    def copy(self) -> "Scenario":
        return Scenario(dict(self.init), set(self.pins), self.outdoor, self.boot,
                        self.tick_sec, dict(self.placeholders))


def _value(decl: AttributeDecl, text: str, line: int):
    text = text.strip()
    if decl.numeric:
        try:
            v = round_half_up(float(text))
        except ValueError:
            raise DslError(f"{decl.id} expects a number, got {text!r}", line) from None
    else:
        v = text
    if not decl.contains(v):
        raise DslError(f"value {text!r} outside the domain of {decl.id}", line)
    return v


def parse_scenario(text: str, decls: dict[AttributeId, AttributeDecl]) -> Scenario:
    sc = Scenario()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        head = head.upper()
        rest = rest.strip()
        if head == "BOOT":
            sc.boot = True
            continue
        if head == "TICK":
            sc.tick_sec = parse_duration(rest)
            continue
        if head == "SET":
            name, _, val = rest.partition("=")
            sc.placeholders[name.strip()] = round_half_up(float(val))
            continue
        if head == "OUTDOOR":
            val = rest.split("=", 1)[-1]
            sc.outdoor = round_half_up(float(val))
            continue
        if head not in ("INIT", "PIN"):
            raise DslError(f"unknown scenario directive {head!r}", n)
        name, eq, val = rest.partition("=")
        aid = resolve_name(decls, name.strip())
        if aid is None:
            # scenarios are shared between rule files; unknown names are skipped
            continue
        if eq:
            sc.init[aid] = _value(decls[aid], val, n)
        elif head == "INIT":
            raise DslError("INIT needs attr=value", n)
        if head == "PIN":
            sc.pins.add(aid)
    return sc
