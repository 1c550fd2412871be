"""Fixed-point arithmetic on integers scaled by 10**18 (wad).

Every currency, index, and token amount in this package is a plain Python
int denoting value * 10**18. Python ints are arbitrary precision, so
intermediates never overflow and conservation checks compare exactly.

Rounding convention: wmul/wdiv floor (round toward zero for the
non-negative quantities used here). Callers that need the conservative
upper value (reserve replenishment, integrity bounds) use the _up
variants explicitly.
"""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

WAD = 10**18

ONE = WAD  # alias for readability in rate math


def wmul(a: int, b: int) -> int:
    """floor(a * b / WAD)."""
    return a * b // WAD


def wmul_up(a: int, b: int) -> int:
    """ceil(a * b / WAD); a, b must be non-negative."""
    return -((-a * b) // WAD)


def wdiv(a: int, b: int) -> int:
    """floor(a * WAD / b)."""
    return a * WAD // b


def wdiv_up(a: int, b: int) -> int:
    """ceil(a * WAD / b); a must be non-negative, b positive."""
    return -((-a * WAD) // b)


def to_wad(value: int | float | str | Decimal) -> int:
    """Parse a human-scale number into a wad int.

    ints count whole units; floats go through repr so 0.02 parses as
    exactly 0.02 rather than its binary expansion.
    """
    if isinstance(value, bool):
        raise TypeError("bool is not a fixed-point value")
    if isinstance(value, int):
        return value * WAD
    if isinstance(value, float):
        value = Decimal(repr(value))
    elif isinstance(value, str):
        value = Decimal(value)
    # Fraction math: exact regardless of decimal context precision.
    scaled = Fraction(value) * WAD
    if scaled.denominator != 1:
        raise ValueError(f"{value} has more than 18 fractional digits")
    return scaled.numerator


def from_wad(x: int) -> float:
    """Lossy float view, for statistics and report formatting only."""
    return x / WAD


def fmt_wad(x: int) -> str:
    """Exact decimal string of a wad value, trailing zeros trimmed."""
    sign = "-" if x < 0 else ""
    x = abs(x)
    whole, frac = divmod(x, WAD)
    if frac == 0:
        return f"{sign}{whole}"
    digits = f"{frac:018d}".rstrip("0")
    return f"{sign}{whole}.{digits}"
