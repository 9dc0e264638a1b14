"""Fixed-point number handling shared by the compiler, runtime and vault.

All application values are integers scaled by 10^6.  Multiplication adds
scale exponents; division back down always truncates toward zero so that
every component (reference interpreter, vault rescaling, client-side
de-scaling) rounds identically.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation

SCALE_POW = 6
UNIT = 10**SCALE_POW


class FixedPointError(ValueError):
    pass


def to_scaled(value) -> int:
    """Exact conversion of a decimal number to a scale-10^6 integer."""
    try:
        d = Decimal(str(value))
    except InvalidOperation as exc:
        raise FixedPointError(f"not a decimal number: {value!r}") from exc
    scaled = d * UNIT
    if scaled != scaled.to_integral_value():
        raise FixedPointError(f"{value!r} has more than {SCALE_POW} fractional digits")
    return int(scaled)


def from_scaled(scaled: int, scale_pow: int = SCALE_POW) -> Decimal:
    return Decimal(scaled) / (Decimal(10) ** scale_pow)


def sign_div(value: int, divisor: int) -> int:
    """Divide truncating toward zero (Python // floors, which differs for
    negative values)."""
    if value < 0:
        return -((-value) // divisor)
    return value // divisor


def rescale(value: int, from_pow: int, to_pow: int) -> int:
    """Bring a scaled integer from one scale exponent down to another."""
    if from_pow < to_pow:
        raise FixedPointError("cannot rescale upward without losing meaning")
    if from_pow == to_pow:
        return value
    return sign_div(value, 10 ** (from_pow - to_pow))
