"""CPU-gate window arithmetic, mostly as hypothesis properties."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bbrsim.cpugate import CpuSchedule, is_on_cpu, next_on_cpu

schedules = st.builds(
    lambda period, frac, phase: CpuSchedule(
        runtime=max(1, period * frac // 100),
        period=period,
        phase=phase % period),
    st.integers(10, 10**8),
    st.integers(1, 100),
    st.integers(0, 10**9),
)


def test_validation():
    with pytest.raises(ValueError):
        CpuSchedule(runtime=0, period=10)
    with pytest.raises(ValueError):
        CpuSchedule(runtime=11, period=10)
    with pytest.raises(ValueError):
        CpuSchedule(runtime=5, period=10, phase=10)
    with pytest.raises(ValueError):
        CpuSchedule(runtime=5, period=10, phase=-1)


def test_share_is_exact():
    s = CpuSchedule(runtime=1_000_000, period=3_333_333)
    assert s.share() == Fraction(1_000_000, 3_333_333)
    assert CpuSchedule(runtime=7, period=7).always_on


def test_window_boundaries_half_open():
    s = CpuSchedule(runtime=10, period=30, phase=5)
    assert not is_on_cpu(4, s)  # before the first window
    assert is_on_cpu(5, s)  # window start is on
    assert is_on_cpu(14, s)
    assert not is_on_cpu(15, s)  # window end is off
    assert is_on_cpu(35, s)  # next period
    assert next_on_cpu(15, s) == 35
    assert next_on_cpu(0, s) == 5


def test_none_schedule_means_ungated():
    assert is_on_cpu(12345, None)
    assert next_on_cpu(12345, None) == 12345


@given(schedules, st.integers(0, 10**12))
def test_next_on_cpu_is_fixed_point(s, t):
    r = next_on_cpu(t, s)
    assert r >= t
    assert is_on_cpu(r, s)
    # idempotent: once on-CPU, next_on_cpu is the identity
    assert next_on_cpu(r, s) == r


@given(schedules, st.integers(0, 10**12))
def test_no_window_skipped(s, t):
    # everything strictly between an off-CPU t and its resume point is off-CPU
    r = next_on_cpu(t, s)
    if r > t:
        assert not is_on_cpu(t, s)
        # probe the gap at its edges and middle
        for probe in {t, (t + r) // 2, r - 1}:
            assert not is_on_cpu(probe, s)


@given(schedules)
def test_on_fraction_matches_share(s):
    # counting on-CPU nanoseconds over one full period gives runtime exactly
    start = s.phase
    on = sum(1 for t in range(start, start + min(s.period, 5000))
             if is_on_cpu(t, s))
    if s.period <= 5000:
        assert on == s.runtime
    else:
        assert on == min(s.runtime, 5000)


@given(schedules, st.integers(0, 10**12))
def test_periodicity(s, t):
    # periodic from the first window start onward (earlier times are off-CPU)
    t += s.phase
    assert is_on_cpu(t, s) == is_on_cpu(t + s.period, s)
