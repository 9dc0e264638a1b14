"""Multiplicatively homomorphic authenticated encryption.

Ciphertexts are triples <u, v, w> of group elements:

    u = g^r,  v = h^r * m,  w = j^r * m^a * l

with h = g^x, j = g^y and l the label of the encrypting identifier.
Component-wise multiplication of ciphertexts multiplies plaintexts and
multiplies labels, so decryption under the label of the combined
identifier multiset authenticates the data flow that produced a value.

Application integers enter the plaintext group through a residue codec:
n is embedded as n^2 mod p (a quadratic residue) for 0 < n < q, and the
principal square root recovers n.  Integer products map to residue
products exactly while n1*n2 < q.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from .groups import EvalKey, GroupDesc, Label, PrfKey, derive_label as _derive, new_prf_key

__all__ = [
    "MulCiphertext",
    "MulSecretKey",
    "MulKeyPair",
    "keygen",
    "encrypt",
    "evaluate",
    "derive_label",
    "decrypt",
    "encode_int",
    "decode_int",
]


@dataclass(frozen=True)
class MulCiphertext:
    u: int
    v: int
    w: int

    def serialize(self, group: GroupDesc) -> bytes:
        return group.encode(self.u) + group.encode(self.v) + group.encode(self.w)

    @classmethod
    def parse(cls, group: GroupDesc, raw: bytes) -> "MulCiphertext":
        w = group.width
        if len(raw) != 3 * w:
            raise ValueError("bad ciphertext length")
        return cls(group.decode(raw[:w]), group.decode(raw[w : 2 * w]), group.decode(raw[2 * w :]))


@dataclass(frozen=True)
class MulSecretKey:
    group: GroupDesc
    a: int
    x: int
    y: int
    prf_key: PrfKey


@dataclass(frozen=True)
class MulKeyPair:
    ek: EvalKey
    sk: MulSecretKey


def keygen(group: GroupDesc, rng=None) -> MulKeyPair:
    """Fresh uniformly random a, x, y and PRF key; ek carries h = g^x, j = g^y."""
    a = group.random_nonzero_exponent(rng)
    x = group.random_nonzero_exponent(rng)
    y = group.random_nonzero_exponent(rng)
    sk = MulSecretKey(group, a, x, y, new_prf_key())
    ek = EvalKey(group, h=group.pow_g(x), j=group.pow_g(y))
    return MulKeyPair(ek, sk)


def encrypt(sk: MulSecretKey, m: int, ident: str, rng=None) -> MulCiphertext:
    """Probabilistic encryption of group element m under identifier ident."""
    G = sk.group
    q = G.q
    r = G.random_exponent(rng)
    l_exp = _label_exp(sk, {ident: 1})
    u = G.pow_g(r)
    v = G.mul(G.pow_g(sk.x * r % q), m)
    w = G.mul(G.pow_g((sk.y * r + l_exp) % q), int(gmpy2.powmod(m, sk.a, G.p)))
    return MulCiphertext(u, v, w)


def evaluate(ek: EvalKey, cts) -> MulCiphertext:
    """Component-wise product of a non-empty sequence of ciphertexts."""
    cts = list(cts)
    if not cts:
        raise ValueError("cannot evaluate an empty ciphertext collection")
    p = ek.group.p
    u = v = w = 1
    for c in cts:
        u = u * c.u % p
        v = v * c.v % p
        w = w * c.w % p
    return MulCiphertext(u, v, w)


def _label_exp(sk: MulSecretKey, idents) -> int:
    from .groups import label_exponent

    return label_exponent(sk.prf_key, idents, sk.group.q)


def derive_label(sk: MulSecretKey, idents) -> Label:
    return _derive(sk.group, sk.prf_key, idents)


def decrypt(sk: MulSecretKey, c: MulCiphertext, label: Label):
    """Recover the plaintext, or None when the authenticator check fails."""
    G = sk.group
    m = G.mul(G.exp(c.u, -sk.x % G.q), c.v)
    t = G.mul(
        G.mul(G.exp(c.u, sk.y), int(gmpy2.powmod(m, sk.a, G.p))),
        label.value,
    )
    if t != c.w:
        return None
    return m


def encode_int(group: GroupDesc, n: int) -> int:
    """Embed the application integer n (0 < n < q) as the residue n^2 mod p."""
    if not 0 < n < group.q:
        raise ValueError(f"integer {n} outside the multiplicative plaintext domain")
    return n * n % group.p

def decode_int(group: GroupDesc, m: int) -> int:
    """Invert the residue embedding via the principal square root."""
    p = group.p
    if p % 4 != 3:
        raise ValueError("residue codec requires p = 3 (mod 4)")
    r = int(gmpy2.powmod(m, (p + 1) // 4, p))
    n = min(r, p - r)
    if n * n % p != m:
        raise ValueError("element is not a quadratic residue")
    return n
