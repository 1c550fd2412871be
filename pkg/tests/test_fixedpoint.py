from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clawsim.fixedpoint import WAD, fmt_wad, from_wad, to_wad, wdiv, wdiv_up, wmul, wmul_up


def test_to_wad_parses_common_forms():
    assert to_wad(1) == WAD
    assert to_wad("0.02") == 2 * 10**16
    assert to_wad(0.02) == 2 * 10**16  # via repr, not binary expansion
    assert to_wad("1.25") == 125 * WAD // 100
    assert to_wad("0.000000000000000001") == 1


def test_to_wad_rejects_too_many_digits():
    with pytest.raises(ValueError):
        to_wad("0.0000000000000000001")


def test_fmt_wad_round_trips():
    assert fmt_wad(to_wad("1.25")) == "1.25"
    assert fmt_wad(to_wad(3)) == "3"
    assert fmt_wad(1) == "0.000000000000000001"
    assert fmt_wad(-to_wad("0.5")) == "-0.5"


def test_mul_div_exact_cases():
    assert wmul(to_wad(100), to_wad("1.25")) == to_wad(125)
    assert wdiv(to_wad(100), to_wad("1.25")) == to_wad(80)
    assert wmul(to_wad(10), 0) == 0


@given(st.integers(0, 10**30), st.integers(0, 10**24))
def test_wmul_floor_vs_up(a, b):
    lo, hi = wmul(a, b), wmul_up(a, b)
    assert hi - lo == (1 if a * b % WAD else 0)
    assert lo * WAD <= a * b <= hi * WAD


@given(st.integers(0, 10**30), st.integers(1, 10**24))
def test_wdiv_floor_vs_up(a, b):
    lo, hi = wdiv(a, b), wdiv_up(a, b)
    assert 0 <= hi - lo <= 1
    # floor(x) <= x: division then re-multiplication never overshoots
    assert wmul(lo, b) <= a


@given(st.integers(-10**30, 10**30))
def test_fmt_from_wad_consistency(x):
    assert abs(from_wad(x) - x / WAD) == 0
    assert to_wad(fmt_wad(x)) == x
