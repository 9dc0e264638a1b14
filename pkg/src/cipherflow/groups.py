"""Prime-order commutative groups and the PRF material used for labels.

Three profiles are supported:

* ``test-tiny``      -- quadratic residues mod the safe prime 2063 (order 1031),
                        small enough for brute-force oracles in tests.
* ``modp-1536``      -- the prime-order subgroup of the RFC 3526 1536-bit MODP
                        group (section 2 of the RFC, modulus embedded verbatim).
* ``curve-strong``   -- a deterministically derived 2048-bit Schnorr group with
                        a 256-bit prime order, intended for the additive scheme
                        where exponents are small.

All group elements are plain ints in ``[1, p)``; exponents are ints reduced
mod the subgroup order ``q``.  Elements serialize as fixed-width big-endian
byte strings so table keys and ciphertext encodings are canonical.
"""

from __future__ import annotations

import hmac
import hashlib
import secrets
from dataclasses import dataclass, field

import gmpy2

__all__ = [
    "GroupDesc",
    "PrfKey",
    "Label",
    "EvalKey",
    "UnknownProfileError",
    "make_group",
    "new_prf_key",
    "prf_eval",
    "label_exponent",
    "derive_label",
]

# RFC 3526, section 2 ("1536-bit MODP Group"), embedded verbatim.
RFC3526_MODP_1536_HEX = (
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA237327FFFFFFFFFFFFFFFF"
)

# Deterministically derived Schnorr group for the curve-strong profile:
# q = next_prime(SHA-256("cipherflow-strong-group-v1") | 2^255 | 1),
# p = q*c + 1 with c the smallest even cofactor making p a 2048-bit prime,
# g = 2^c mod p.
_STRONG_Q = int(
    "9442494e952b1fe92c682bf4219861f6ff13b8d63a7c1e426131412a3512c987", 16
)
_STRONG_C = int(
    "dd04cb32db27e4808c595584116507f45f1065be974424c60398c86bf199bdb8"
    "0fa18e65206d823614193c038f461ee00828709f9788296e0dc13bf4a99de443"
    "cd338a599529795955db5a1415c720f3abfdef02e5f09b8706ed0091eb3ba98a"
    "de3e70f5feb60586f0d711d93a68c106233a3c8b2eff2affbac735eea8fe9964"
    "ff1ed4161dc2fef74f24e14a45f0e67298571d0eb0c5bd436e23ae8afbdc2886"
    "ac85cf8a4076f3958bdb3453e4ea5935a421a19458b01f50f924c8d8da2a30e9"
    "d0a1c5d9ddde39c31305b56ac33b581f13c0ec88eaf65a3f36d4da8b01c6c336",
    16,
)

PROFILES = ("test-tiny", "modp-1536", "curve-strong")


class UnknownProfileError(ValueError):
    """Raised for a group profile name that is not one of PROFILES."""


class _FixedBase:
    """Windowed fixed-base exponentiation table (8-bit windows).

    Roughly 6x faster than a cold powmod for 1536-bit moduli once the
    table is built; the table costs one multiplication per entry.
    """

    WINDOW = 8

    def __init__(self, base: int, p: int, q: int):
        self.p = gmpy2.mpz(p)
        self.q = q
        nwin = (q.bit_length() + self.WINDOW - 1) // self.WINDOW
        table = []
        b = gmpy2.mpz(base)
        for _ in range(nwin):
            row = [gmpy2.mpz(1)] * 256
            acc = gmpy2.mpz(1)
            for d in range(1, 256):
                acc = acc * b % self.p
                row[d] = acc
            table.append(row)
            b = row[255] * b % self.p
        self.table = table

    def pow(self, e: int) -> int:
        e %= self.q
        acc = gmpy2.mpz(1)
        i = 0
        while e:
            d = e & 255
            if d:
                acc = acc * self.table[i][d] % self.p
            e >>= 8
            i += 1
        return int(acc)


@dataclass(frozen=True)
class GroupDesc:
    """A prime-order subgroup of Z_p^* with generator g."""

    profile: str
    p: int
    q: int
    g: int
    _fixed: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def width(self) -> int:
        """Canonical element encoding width in bytes."""
        return (self.p.bit_length() + 7) // 8

    @property
    def identity(self) -> int:
        return 1

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def inv(self, a: int) -> int:
        return int(gmpy2.invert(a, self.p))

    def exp(self, base: int, e: int) -> int:
        fb = self._fixed.get(base)
        if fb is not None:
            return fb.pow(e)
        return int(gmpy2.powmod(base, e % self.q, self.p))

    def pow_g(self, e: int) -> int:
        return self.fixed_base(self.g).pow(e)

    def fixed_base(self, base: int) -> _FixedBase:
        fb = self._fixed.get(base)
        if fb is None:
            fb = _FixedBase(base, self.p, self.q)
            self._fixed[base] = fb
        return fb

    def is_member(self, a: int) -> bool:
        return 0 < a < self.p and gmpy2.powmod(a, self.q, self.p) == 1

    def random_exponent(self, rng=None) -> int:
        if rng is None:
            return secrets.randbelow(self.q)
        return rng.randrange(self.q)

    def random_nonzero_exponent(self, rng=None) -> int:
        """For secret-key exponents: zero would degenerate the scheme."""
        if rng is None:
            return 1 + secrets.randbelow(self.q - 1)
        return rng.randrange(1, self.q)

    def encode(self, a: int) -> bytes:
        if not 0 < a < self.p:
            raise ValueError("element out of range")
        return a.to_bytes(self.width, "big")

    def decode(self, raw: bytes) -> int:
        if len(raw) != self.width:
            raise ValueError("bad element encoding length")
        a = int.from_bytes(raw, "big")
        if not 0 < a < self.p:
            raise ValueError("decoded element out of range")
        return a


def make_group(profile: str) -> GroupDesc:
    """Instantiate one of the three named group profiles."""
    if profile == "test-tiny":
        # Safe prime with q = 1031; g = 4 is a quadratic residue of order q.
        return GroupDesc(profile, p=2063, q=1031, g=4)
    if profile == "modp-1536":
        p = int(RFC3526_MODP_1536_HEX, 16)
        return GroupDesc(profile, p=p, q=(p - 1) // 2, g=4)
    if profile == "curve-strong":
        p = _STRONG_Q * _STRONG_C + 1
        g = int(gmpy2.powmod(2, _STRONG_C, p))
        return GroupDesc(profile, p=p, q=_STRONG_Q, g=g)
    raise UnknownProfileError(f"unknown group profile: {profile!r}")


@dataclass(frozen=True)
class PrfKey:
    """Key for the HMAC-SHA-256 PRF behind per-identifier label exponents."""

    key: bytes

    def __post_init__(self):
        if len(self.key) < 16:
            raise ValueError("PRF key must be at least 16 bytes")


def new_prf_key(nbytes: int = 32) -> PrfKey:
    return PrfKey(secrets.token_bytes(nbytes))


def prf_eval(key: PrfKey, ident: str, q: int) -> int:
    """HMAC-SHA-256(key, ident) as a big-endian integer reduced mod q.

    The mod-q reduction of the 256-bit output is negligibly biased for
    q >= 2^250 and acceptably biased for the test-tiny profile.
    """
    digest = hmac.new(key.key, ident.encode("utf-8"), hashlib.sha256).digest()
    return int.from_bytes(digest, "big") % q


@dataclass(frozen=True)
class Label:
    """Group element binding a ciphertext to an identifier multiset."""

    value: int


@dataclass(frozen=True)
class EvalKey:
    """Public evaluation key shared by both encryption schemes: <G, g, h, j>."""

    group: GroupDesc
    h: int
    j: int


def _as_counts(idents) -> dict:
    """Normalize an identifier collection to signed multiplicities."""
    if hasattr(idents, "items"):
        return dict(idents.items())
    counts: dict = {}
    for i in idents:
        counts[i] = counts.get(i, 0) + 1
    return counts


def label_exponent(key: PrfKey, idents, q: int) -> int:
    """Exponent of the label for a (signed) multiset of identifiers."""
    counts = _as_counts(idents)
    if not counts:
        raise ValueError("identifier multiset must be non-empty")
    total = 0
    for ident, n in counts.items():
        total += n * prf_eval(key, ident, q)
    return total % q


def derive_label(group: GroupDesc, key: PrfKey, idents) -> Label:
    """Label for a multiset of identifiers: g raised to the summed PRF outputs.

    Repeated identifiers contribute repeated factors; a mapping argument may
    carry signed multiplicities (used for homomorphic subtraction).
    """
    return Label(group.pow_g(label_exponent(key, idents, group.q)))
