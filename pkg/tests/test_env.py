from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from taprepair.env import (ChannelConfigError, joint_effect, load_channel_table,
                           sample_nondeterministic)
from taprepair.rules import AttributeId

TABLE = load_channel_table()
HEATER_ON = (AttributeId("heater", "switch"), "on")
WINDOW_OPEN = (AttributeId("window", "switch"), "open")
AC_HEAT = (AttributeId("ac", "mode"), "heat")
FAN_ON = (AttributeId("fan", "switch"), "on")
SPRINKLER_ON = (AttributeId("sprinkler", "switch"), "on")

# upper 0.1% point of chi-square with 9 degrees of freedom
CHI2_9_999 = 27.877


def test_sampling_is_uniform():
    n = 20000
    counts = Counter(sample_nondeterministic((0, 9), seed) for seed in range(n))
    assert set(counts) == set(range(10))
    expected = n / 10
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert stat < CHI2_9_999


@given(st.integers(-50, 50), st.integers(0, 50), st.integers(0, 10 ** 6))
def test_sampling_stays_in_range_and_is_reproducible(lo, width, seed):
    v = sample_nondeterministic((lo, lo + width), seed)
    assert lo <= v <= lo + width
    assert v == sample_nondeterministic((lo, lo + width), seed)


def test_sampling_rejects_empty_range():
    with pytest.raises(ValueError):
        sample_nondeterministic((3, 2), 0)


actions = st.lists(st.sampled_from([HEATER_ON, WINDOW_OPEN, AC_HEAT, FAN_ON, SPRINKLER_ON]),
                   unique=True)


@given(actions, actions, st.sampled_from([60, 300, 600]),
       st.sampled_from(["temperature", "humidity"]), st.integers(0, 40), st.integers(0, 40))
def test_joint_effect_is_additive(a, b, tick, channel, outdoor, indoor):
    a = [x for x in a if x not in b]
    whole = joint_effect(a + b, channel, TABLE, tick, outdoor, indoor)
    ea = joint_effect(a, channel, TABLE, tick, outdoor, indoor)
    eb = joint_effect(b, channel, TABLE, tick, outdoor, indoor)
    assert whole == (ea[0] + eb[0], ea[1] + eb[1])


def test_heater_rate_range():
    assert joint_effect([HEATER_ON], "temperature", TABLE, 600) == (Fraction(2, 3), Fraction(1))


def test_open_window_follows_outdoor_sign():
    lo, hi = joint_effect([WINDOW_OPEN], "temperature", TABLE, 600, outdoor=10, indoor=20)
    assert hi < 0
    lo, hi = joint_effect([WINDOW_OPEN], "temperature", TABLE, 600, outdoor=30, indoor=20)
    assert lo > 0
    lo, hi = joint_effect([WINDOW_OPEN], "temperature", TABLE, 600)
    assert lo < 0 < hi


def test_heater_and_open_window_in_cold_weather_can_cancel():
    lo, hi = joint_effect([HEATER_ON, WINDOW_OPEN], "temperature", TABLE, 600, 10, 20)
    assert lo <= 0 <= hi


@pytest.mark.parametrize("line", [
    "EFFECT heater.switch=on -> temperature +1 PER [900..600]s",
    "EFFECT heater.switch=on -> weather +1 PER [600..900]s",
    "EFFECT light.switch=on -> illuminance +100 PER [1..2]s",
    "EFFECT heater.switch=on -> temperature +1 PER [0..600]s",
    "EFFECT heater.switch=on -> nowhere +1 PER [600..900]s",
    "heater on makes it warm",
])
def test_bad_effect_lines(line):
    with pytest.raises(ChannelConfigError):
        load_channel_table(line)


def test_duplicate_effect_rejected():
    line = "EFFECT heater.switch=on -> temperature +1 PER [600..900]s\n"
    with pytest.raises(ChannelConfigError):
        load_channel_table(line * 2)
