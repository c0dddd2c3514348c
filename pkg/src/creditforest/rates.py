"""Fixed-point arithmetic helpers.

All monetary quantities are integers in minor currency units; all rates and
probabilities are integers in parts-per-million per period. Rounding is
half-to-even throughout so that replays are exactly reproducible.
"""

from __future__ import annotations

from fractions import Fraction

PPM = 10**6


def round_half_even_div(numerator: int, denominator: int) -> int:
    """Integer division of nonnegative operands, rounding half to even."""
    if numerator < 0 or denominator <= 0:
        raise ValueError(
            f"round_half_even_div needs numerator >= 0 and denominator > 0, "
            f"got {numerator}/{denominator}"
        )
    quotient, remainder = divmod(numerator, denominator)
    doubled = 2 * remainder
    if doubled > denominator or (doubled == denominator and quotient % 2 == 1):
        return quotient + 1
    return quotient


def apply_rate(amount: int, rate_ppm: int, periods: int = 1) -> int:
    """amount * rate * periods, taken exactly then rounded half-even to minor units."""
    return round_half_even_div(amount * rate_ppm * periods, PPM)


def to_fraction(value_ppm: int) -> Fraction:
    """Exact rational value of a ppm-quoted rate or probability."""
    return Fraction(value_ppm, PPM)
