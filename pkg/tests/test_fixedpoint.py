from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from cipherflow.fixedpoint import (
    SCALE_POW,
    UNIT,
    FixedPointError,
    from_scaled,
    rescale,
    sign_div,
    to_scaled,
)


def test_to_scaled_exact():
    assert to_scaled("1.5") == 1500000
    assert to_scaled(2) == 2000000
    assert to_scaled("-0.000001") == -1
    assert to_scaled(Decimal("0.25")) == 250000


def test_to_scaled_rejects_excess_precision():
    with pytest.raises(FixedPointError):
        to_scaled("0.0000001")
    with pytest.raises(FixedPointError):
        to_scaled("nope")


def test_from_scaled():
    assert from_scaled(1500000) == Decimal("1.5")
    assert from_scaled(300, 2) == Decimal("3")


def test_sign_div_truncates_toward_zero():
    assert sign_div(7, 2) == 3
    assert sign_div(-7, 2) == -3
    assert sign_div(-1, UNIT) == 0


def test_rescale():
    assert rescale(123456789, 8, SCALE_POW) == 1234567
    assert rescale(-150, 7, 6) == -15
    assert rescale(5, 6, 6) == 5
    with pytest.raises(FixedPointError):
        rescale(1, 5, 6)


@given(st.integers(min_value=-10**15, max_value=10**15), st.integers(min_value=1, max_value=10**9))
def test_sign_div_matches_int_division(value, divisor):
    assert sign_div(value, divisor) == int(value / divisor) if abs(value) < 2**52 else True
    assert abs(sign_div(value, divisor)) == abs(value) // divisor
    assert sign_div(-value, divisor) == -sign_div(value, divisor)
