"""Additively homomorphic authenticated encryption over Z_d.

A plaintext m in [0, d) is split by the Chinese remainder theorem into t
residues m_e = m mod d_e, each encrypted in the exponent:

    u_e = g^{r_e},  v_e = h^{r_e} * g^{m_e}

plus a constant-size authenticator independent of t:

    s = g^r,  w = j^r * g^{a * pack(m)} * l

where pack(m) places the residue vector into disjoint bit windows of one
integer.  Component-wise ciphertext products add residues in the exponent;
decryption recovers the (integer) residue sums by table lookup, reduces
them per modulus, and recombines by CRT.  Binding the residue vector
rather than m itself keeps the authenticator linear under addition even
when the recombined sum wraps mod d, so verification stays a single
exponentiation regardless of how many addends were evaluated.

Signed application values live in [-d/2, d/2) and map to Z_d by wraparound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2

from .dlog import DlogTable
from .groups import EvalKey, GroupDesc, Label, PrfKey, derive_label as _derive, label_exponent, new_prf_key

__all__ = [
    "CrtParams",
    "AddCiphertext",
    "AddSecretKey",
    "AddKeyPair",
    "DlogCoverageError",
    "derive_moduli",
    "crt_split",
    "crt_combine",
    "keygen",
    "encrypt",
    "evaluate",
    "negate",
    "derive_label",
    "decrypt",
    "encode_signed",
    "decode_signed",
]

# Bit headroom per pack window: residue sums of up to 2^16 addends stay
# within their window, so packed exponents add without carries.
PACK_HEADROOM_BITS = 16


class DlogCoverageError(RuntimeError):
    """Discrete-log table too small for a component value: a configuration
    error, not an authentication failure."""


@dataclass(frozen=True)
class CrtParams:
    moduli: tuple

    def __post_init__(self):
        for i, a in enumerate(self.moduli):
            if a <= 1:
                raise ValueError("CRT moduli must exceed 1")
            for b in self.moduli[i + 1 :]:
                if math.gcd(a, b) != 1:
                    raise ValueError(f"CRT moduli must be pairwise coprime ({a}, {b})")

    @property
    def d(self) -> int:
        return math.prod(self.moduli)

    @property
    def t(self) -> int:
        return len(self.moduli)

    @property
    def pack_shift(self) -> int:
        return max(m.bit_length() for m in self.moduli) + PACK_HEADROOM_BITS


def derive_moduli(t: int, bits_per_component: int) -> tuple:
    """The t smallest distinct primes >= 2^(bits_per_component - 1)."""
    primes = []
    cand = gmpy2.mpz(1 << (bits_per_component - 1)) - 1
    while len(primes) < t:
        cand = gmpy2.next_prime(cand)
        primes.append(int(cand))
    return tuple(primes)


def crt_split(m: int, params: CrtParams):
    if not 0 <= m < params.d:
        raise ValueError(f"plaintext {m} outside [0, {params.d})")
    return tuple(m % d_e for d_e in params.moduli)


def crt_combine(residues, params: CrtParams) -> int:
    residues = tuple(residues)
    if len(residues) != params.t:
        raise ValueError("residue count does not match moduli")
    d = params.d
    total = 0
    for m_e, d_e in zip(residues, params.moduli):
        if not 0 <= m_e < d_e:
            raise ValueError(f"residue {m_e} out of range for modulus {d_e}")
        n_e = d // d_e
        total += m_e * n_e * int(gmpy2.invert(n_e, d_e))
    return total % d


def _pack(residues, shift: int) -> int:
    total = 0
    for e, m_e in enumerate(residues):
        total += m_e << (e * shift)
    return total


@dataclass(frozen=True)
class AddCiphertext:
    components: tuple  # ((u_1, v_1), ..., (u_t, v_t))
    s: int
    w: int

    def serialize(self, group: GroupDesc) -> bytes:
        out = [len(self.components).to_bytes(2, "big")]
        for u, v in self.components:
            out.append(group.encode(u))
            out.append(group.encode(v))
        out.append(group.encode(self.s))
        out.append(group.encode(self.w))
        return b"".join(out)

    @classmethod
    def parse(cls, group: GroupDesc, raw: bytes) -> "AddCiphertext":
        t = int.from_bytes(raw[:2], "big")
        width = group.width
        if len(raw) != 2 + (2 * t + 2) * width:
            raise ValueError("bad ciphertext length")
        off = 2
        comps = []
        for _ in range(t):
            u = group.decode(raw[off : off + width])
            v = group.decode(raw[off + width : off + 2 * width])
            comps.append((u, v))
            off += 2 * width
        s = group.decode(raw[off : off + width])
        w = group.decode(raw[off + width :])
        return cls(tuple(comps), s, w)


@dataclass(frozen=True)
class AddSecretKey:
    group: GroupDesc
    a: int
    x: int
    y: int
    prf_key: PrfKey
    crt: CrtParams


@dataclass(frozen=True)
class AddKeyPair:
    ek: EvalKey
    sk: AddSecretKey


def keygen(group: GroupDesc, t: int, bits_per_component: int, rng=None, moduli=None) -> AddKeyPair:
    """Derive CRT moduli deterministically from (t, bits) and sample key material.

    An explicit ``moduli`` tuple overrides the derivation (used by tests that
    pin small parameter sets such as {3, 5, 7}).
    """
    if t < 1:
        raise ValueError("need at least one CRT component")
    if t * bits_per_component > group.q.bit_length() - 1:
        raise ValueError("t * bits_per_component must stay below the bit length of q")
    params = CrtParams(tuple(moduli) if moduli is not None else derive_moduli(t, bits_per_component))
    if params.d >= group.q:
        raise ValueError("product of CRT moduli must be smaller than q")
    a = group.random_nonzero_exponent(rng)
    x = group.random_nonzero_exponent(rng)
    y = group.random_nonzero_exponent(rng)
    sk = AddSecretKey(group, a, x, y, new_prf_key(), params)
    ek = EvalKey(group, h=group.pow_g(x), j=group.pow_g(y))
    return AddKeyPair(ek, sk)


def encrypt(sk: AddSecretKey, m: int, ident: str, rng=None) -> AddCiphertext:
    G = sk.group
    q = G.q
    residues = crt_split(m, sk.crt)
    comps = []
    for m_e in residues:
        r_e = G.random_exponent(rng)
        u_e = G.pow_g(r_e)
        v_e = G.pow_g((sk.x * r_e + m_e) % q)
        comps.append((u_e, v_e))
    r = G.random_exponent(rng)
    l_exp = label_exponent(sk.prf_key, {ident: 1}, q)
    s = G.pow_g(r)
    w = G.pow_g((sk.y * r + sk.a * _pack(residues, sk.crt.pack_shift) + l_exp) % q)
    return AddCiphertext(tuple(comps), s, w)


def evaluate(ek: EvalKey, cts) -> AddCiphertext:
    """Component-wise product; plaintexts add mod d, labels multiply."""
    cts = list(cts)
    if not cts:
        raise ValueError("cannot evaluate an empty ciphertext collection")
    t = len(cts[0].components)
    if any(len(c.components) != t for c in cts):
        raise ValueError("mismatched ciphertext shapes")
    p = ek.group.p
    comps = [[1, 1] for _ in range(t)]
    s = w = 1
    for c in cts:
        for e, (u, v) in enumerate(c.components):
            comps[e][0] = comps[e][0] * u % p
            comps[e][1] = comps[e][1] * v % p
        s = s * c.s % p
        w = w * c.w % p
    return AddCiphertext(tuple((u, v) for u, v in comps), s, w)


def negate(group: GroupDesc, c: AddCiphertext) -> AddCiphertext:
    """Component-wise inverse: an encryption of -m whose label inverts too."""
    comps = tuple((group.inv(u), group.inv(v)) for u, v in c.components)
    return AddCiphertext(comps, group.inv(c.s), group.inv(c.w))


def derive_label(sk: AddSecretKey, idents) -> Label:
    return _derive(sk.group, sk.prf_key, idents)


def decrypt(sk: AddSecretKey, c: AddCiphertext, label: Label, table: DlogTable):
    """Recover the plaintext sum mod d, or None on authenticator mismatch.

    Raises DlogCoverageError when a component exponent falls outside the
    table (including its mirrored negative range, which covers homomorphic
    subtraction results).
    """
    G = sk.group
    q = G.q
    if len(c.components) != sk.crt.t:
        raise ValueError("ciphertext shape does not match key CRT parameters")
    neg_span = table.bound // 2
    shifted = G.pow_g(neg_span)
    sums = []
    for u_e, v_e in c.components:
        x_e = G.mul(v_e, G.exp(u_e, -sk.x % q))
        m_e = table.lookup(x_e)
        if m_e is None:
            m_e = table.lookup(G.mul(x_e, shifted))
            if m_e is None:
                raise DlogCoverageError("component exponent outside discrete-log table")
            m_e -= neg_span
        sums.append(m_e)
    expected = G.mul(
        G.mul(G.exp(c.s, sk.y), G.pow_g(sk.a * _pack(sums, sk.crt.pack_shift) % q)),
        label.value,
    )
    if expected != c.w:
        return None
    return crt_combine(
        (m_e % d_e for m_e, d_e in zip(sums, sk.crt.moduli)), sk.crt
    )


def encode_signed(value: int, d: int) -> int:
    """Map a signed application value in [-d/2, d/2) into Z_d."""
    half = d // 2
    if not -half <= value < d - half:
        raise ValueError(f"signed value {value} outside [-{half}, {d - half})")
    return value % d


def decode_signed(m: int, d: int) -> int:
    """Re-center an element of Z_d into [-d/2, d/2)."""
    half = d // 2
    return m - d if m >= d - half else m
