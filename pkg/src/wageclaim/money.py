"""Exact integer-cent money arithmetic.

All dollar amounts in the system are integer cents; intermediate math that
can produce fractions of a cent stays in `fractions.Fraction`. Rounding to
whole cents happens exactly once, at presentation, using round-half-even.
"""

from __future__ import annotations

from fractions import Fraction

# Dollar amounts are plain ints of cents throughout the codebase; the alias
# exists so signatures can say what the int means.
Cents = int


def round_half_even(value: Fraction | int) -> int:
    """Round an exact rational amount of cents to whole cents, ties to even."""
    if isinstance(value, int):
        return value
    # Fraction normalizes denominator > 0, so divmod gives floor with r >= 0.
    q, r = divmod(value.numerator, value.denominator)
    if r == 0:
        return q
    twice_r = 2 * r
    if twice_r < value.denominator:
        return q
    if twice_r > value.denominator:
        return q + 1
    return q if q % 2 == 0 else q + 1


def format_dollars(cents: int) -> str:
    """Format integer cents as a dollar string, e.g. 140000 -> ``$1,400.00``."""
    sign = "-" if cents < 0 else ""
    whole, frac = divmod(abs(cents), 100)
    return f"{sign}${whole:,}.{frac:02d}"


def parse_dollars(text: str) -> int:
    """Parse a dollar string as produced by :func:`format_dollars` back to cents."""
    cleaned = text.strip().replace(",", "")
    sign = 1
    if cleaned.startswith("-"):
        sign = -1
        cleaned = cleaned[1:]
    if not cleaned.startswith("$"):
        raise ValueError(f"not a dollar amount: {text!r}")
    whole, _, frac = cleaned[1:].partition(".")
    if len(frac) != 2 or not whole.isdigit() or not frac.isdigit():
        raise ValueError(f"not a dollar amount: {text!r}")
    return sign * (int(whole) * 100 + int(frac))
