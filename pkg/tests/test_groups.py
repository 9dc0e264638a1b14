import pytest
from hypothesis import given, strategies as st

from cipherflow.groups import (
    PrfKey,
    UnknownProfileError,
    derive_label,
    label_exponent,
    make_group,
    new_prf_key,
    prf_eval,
)

import random

TINY = make_group("test-tiny")


def test_tiny_parameters():
    assert TINY.p == 2063
    assert TINY.q == 1031
    assert TINY.exp(TINY.g, TINY.q) == 1


def test_modp_1536_order():
    g = make_group("modp-1536")
    assert g.p.bit_length() == 1536
    assert g.q == (g.p - 1) // 2
    assert pow(g.g, g.q, g.p) == 1


def test_curve_strong_order():
    g = make_group("curve-strong")
    assert g.q.bit_length() == 256
    assert (g.p - 1) % g.q == 0
    assert pow(g.g, g.q, g.p) == 1
    assert g.g != 1


def test_unknown_profile():
    with pytest.raises(UnknownProfileError):
        make_group("modp-512")


def test_identity_and_inverse():
    rng = random.Random(7)
    for _ in range(20):
        a = TINY.pow_g(rng.randrange(1, TINY.q))
        assert TINY.mul(a, TINY.identity) == a
        assert TINY.mul(a, TINY.inv(a)) == TINY.identity


@given(st.integers(0, 1030), st.integers(0, 1030))
def test_group_commutative(e1, e2):
    a, b = TINY.pow_g(e1), TINY.pow_g(e2)
    assert TINY.mul(a, b) == TINY.mul(b, a)


def test_exp_matches_powmod():
    rng = random.Random(3)
    for _ in range(10):
        e = rng.randrange(TINY.q)
        assert TINY.pow_g(e) == pow(TINY.g, e, TINY.p)


def test_element_codec_roundtrip():
    a = TINY.pow_g(123)
    assert TINY.decode(TINY.encode(a)) == a
    with pytest.raises(ValueError):
        TINY.encode(0)
    with pytest.raises(ValueError):
        TINY.decode(b"\x00" * TINY.width)


def test_prf_deterministic():
    k = new_prf_key()
    assert prf_eval(k, "a1", TINY.q) == prf_eval(k, "a1", TINY.q)
    assert prf_eval(k, "a1", TINY.q) != prf_eval(k, "a2", TINY.q) or prf_eval(
        k, "a1", 1 << 128
    ) != prf_eval(k, "a2", 1 << 128)


def test_prf_key_length():
    with pytest.raises(ValueError):
        PrfKey(b"short")


def test_prf_uniformity_chi_square():
    # 1000 identifiers over 16 buckets; reject only below the 0.001 level
    # (chi-square critical value for 15 dof at p=0.001 is 37.697).
    k = PrfKey(b"\x42" * 32)
    buckets = [0] * 16
    for i in range(1000):
        buckets[prf_eval(k, f"id{i}", TINY.q) % 16] += 1
    expected = 1000 / 16
    chi2 = sum((b - expected) ** 2 / expected for b in buckets)
    assert chi2 < 37.697


def test_label_multiset_semantics():
    k = new_prf_key()
    l1 = derive_label(TINY, k, ["i"])
    l2 = derive_label(TINY, k, ["i", "i"])
    assert l2.value == TINY.mul(l1.value, l1.value)
    assert derive_label(TINY, k, ["a", "b"]) == derive_label(TINY, k, ["b", "a"])
    with pytest.raises(ValueError):
        derive_label(TINY, k, [])


def test_label_signed_counts():
    k = new_prf_key()
    la = derive_label(TINY, k, {"a": 1})
    lab = derive_label(TINY, k, {"a": 1, "b": -1})
    lb = derive_label(TINY, k, {"b": 1})
    assert TINY.mul(lab.value, lb.value) == la.value
    assert label_exponent(k, {"a": 1, "a": 1}, TINY.q) == prf_eval(k, "a", TINY.q)
