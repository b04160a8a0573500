"""Physical channels and device effect tables.

Effects are rates: ``delta`` channel units every ``interval`` seconds, where the
interval is only known to lie in a range.  Immediate channels (illuminance,
sound) use a zero interval and change in the same step as the device action.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .rules import AttributeId


@dataclass(frozen=True)
class PhysicalChannel:
    name: str
    actuator_affected: bool = True
    immediate: bool = False
    step: int = 1  # smallest modelled change in channel units
    leveled: bool = False


CHANNELS: dict[str, PhysicalChannel] = {
    c.name: c
    for c in [
        PhysicalChannel("temperature", step=1),
        PhysicalChannel("illuminance", immediate=True, step=100),
        PhysicalChannel("motion", actuator_affected=False, leveled=True),
        PhysicalChannel("smoke", leveled=True),
        PhysicalChannel("humidity", step=10),
        PhysicalChannel("co", leveled=True),
        PhysicalChannel("co2", leveled=True),
        PhysicalChannel("sound", immediate=True, step=20),
        PhysicalChannel("weather", actuator_affected=False, leveled=True),
    ]
}

# entity names that are read through a channel
CHANNEL_OF_ENTITY = {name: name for name in CHANNELS}


def channel_of(attr: AttributeId) -> PhysicalChannel | None:
    name = CHANNEL_OF_ENTITY.get(attr.entity)
    return CHANNELS.get(name) if name else None


class ChannelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EffectSpec:
    action: tuple  # (AttributeId, value)
    channel: str
    delta: int
    interval: tuple[int, int]
    conditional: str | None = None  # "outdoor": sign follows outdoor - indoor

    def __post_init__(self):
        lo, hi = self.interval
        if lo > hi:
            raise ChannelConfigError(f"{self}: interval lo > hi")
        ch = CHANNELS.get(self.channel)
        if ch is None:
            raise ChannelConfigError(f"unknown channel {self.channel!r}")
        if not ch.actuator_affected:
            raise ChannelConfigError(f"channel {self.channel} is not affected by actuators")
        if ch.immediate and self.interval != (0, 0):
            raise ChannelConfigError(f"{self.channel} is immediate; interval must be [0..0]")
        if not ch.immediate and lo <= 0:
            raise ChannelConfigError(f"{self.channel} effects need a positive interval")

    def rate_range(self, tick_sec: int) -> tuple[Fraction, Fraction]:
        """Per-tick change bounds for an unconditional effect."""
        lo, hi = self.interval
        a = Fraction(self.delta * tick_sec, hi)
        b = Fraction(self.delta * tick_sec, lo)
        return (min(a, b), max(a, b))


@dataclass(frozen=True)
class ChannelTable:
    effects: tuple[EffectSpec, ...]

    def __post_init__(self):
        seen = set()
        for e in self.effects:
            key = (e.action, e.channel, e.conditional)
            if key in seen:
                raise ChannelConfigError(f"duplicate effect for {key}")
            seen.add(key)

    def lookup(self, action, channel: str) -> list[EffectSpec]:
        return [e for e in self.effects if e.action == action and e.channel == channel]

    def actuators(self, channel: str) -> set[AttributeId]:
        return {e.action[0] for e in self.effects if e.channel == channel}

    def channels_of_actuator(self, attr: AttributeId) -> set[str]:
        return {e.channel for e in self.effects if e.action[0] == attr}


_EFFECT = re.compile(
    r"EFFECT\s+(?P<attr>\w+\.\w+)\s*=\s*(?P<val>\w+)\s*->\s*(?P<ch>\w+)\s+"
    r"(?P<delta>[+-]?\d+|clear)\s+PER\s+\[(?P<lo>\d+)\.\.(?P<hi>\d+)\]s?"
    r"(?:\s+IF\s+(?P<cond>\w+))?\s*$",
    re.IGNORECASE,
)

DEFAULT_EFFECTS = """\
EFFECT ac.mode=heat -> temperature +1 PER [600..900]s
EFFECT ac.mode=cool -> temperature -1 PER [600..900]s
EFFECT thermostat.mode=heat -> temperature +1 PER [900..1200]s
EFFECT thermostat.mode=cool -> temperature -1 PER [900..1200]s
EFFECT heater.switch=on -> temperature +1 PER [600..900]s
EFFECT window.switch=open -> temperature 1 PER [600..900]s IF outdoor
EFFECT sprinkler.switch=on -> humidity +10 PER [600..900]s
EFFECT fan.switch=on -> humidity -10 PER [900..1200]s
EFFECT humidifier.switch=on -> humidity +10 PER [600..900]s
EFFECT dehumidifier.switch=on -> humidity -10 PER [900..1200]s
EFFECT water_valve.switch=on -> smoke clear PER [600..900]s
EFFECT window.switch=open -> smoke clear PER [1200..1500]s
EFFECT fan.switch=on -> co clear PER [900..1200]s
EFFECT window.switch=open -> co clear PER [900..1200]s
EFFECT fan.switch=on -> co2 -1 PER [600..900]s
EFFECT window.switch=open -> co2 -1 PER [600..900]s
EFFECT window.switch=closed -> sound -20 PER [0..0]s
EFFECT window.switch=open -> sound +20 PER [0..0]s
EFFECT light.switch=on -> illuminance +100 PER [0..0]s
EFFECT light.switch=off -> illuminance -100 PER [0..0]s
"""


def load_channel_table(config: str | None = None) -> ChannelTable:
    """Parse ``EFFECT`` lines; ``None`` yields the built-in defaults."""
    text = DEFAULT_EFFECTS if config is None else config
    effects = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _EFFECT.match(line)
        if not m:
            raise ChannelConfigError(f"line {n}: malformed effect {line!r}")
        attr = AttributeId.parse(m["attr"])
        delta = -1 if m["delta"].lower() == "clear" else int(m["delta"])
        try:
            effects.append(EffectSpec((attr, m["val"]), m["ch"].lower(), delta,
                                      (int(m["lo"]), int(m["hi"])), m["cond"]))
        except ChannelConfigError as exc:
            raise ChannelConfigError(f"line {n}: {exc}") from None
    return ChannelTable(tuple(effects))


def implicit_effects(action, table: ChannelTable) -> list[EffectSpec]:
    return [e for e in table.effects if e.action == action]


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def joint_effect(active: Iterable, channel: str, table: ChannelTable, tick_sec: int,
                 outdoor: int | None = None, indoor: int | None = None
                 ) -> tuple[Fraction, Fraction]:
    """Per-tick change range of ``channel`` under the set of active actions.

    Endpoints are summed over the active effects. For immediate channels the
    result is the instantaneous change. A temperature-difference effect with
    unknown temperatures contributes both signs.
    """
    if tick_sec <= 0:
        raise ValueError("tick must be positive")
    lo = hi = Fraction(0)
    for act in active:
        for e in table.lookup(act, channel):
            if CHANNELS[channel].immediate:
                lo += e.delta
                hi += e.delta
                continue
            a, b = e.rate_range(tick_sec)
            if e.conditional == "outdoor":
                mag_lo, mag_hi = abs(a), abs(b)
                if outdoor is None or indoor is None:
                    lo -= max(mag_lo, mag_hi)
                    hi += max(mag_lo, mag_hi)
                    continue
                s = _sign(outdoor - indoor)
                a, b = sorted((s * mag_lo, s * mag_hi))
            lo += a
            hi += b
    return (lo, hi)


def sample_nondeterministic(bounds: tuple[int, int], seed: int) -> int:
    lo, hi = bounds
    if lo > hi:
        raise ValueError("empty range")
    return random.Random(seed).randint(lo, hi)
