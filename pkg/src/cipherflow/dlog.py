"""Precomputed discrete-log table for small exponents.

The additive scheme recovers per-component exponents by table lookup.  To
keep memory bounded for large groups the table is keyed by a 64-bit
fingerprint of the element; hits are confirmed with one cheap small-exponent
exponentiation, so collisions cannot produce wrong answers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .groups import GroupDesc, make_group

__all__ = ["DlogTable", "DlogBudgetError", "build_dlog_table", "dlog_lookup"]

DEFAULT_BUDGET = 1 << 22

_MASK64 = (1 << 64) - 1
_MAGIC = b"DLTB1"


class DlogBudgetError(ValueError):
    """Requested table bound exceeds the configured memory budget."""


def _fingerprint(elem: int) -> int:
    return elem & _MASK64


@dataclass
class DlogTable:
    group: GroupDesc
    bound: int
    _entries: dict

    def lookup(self, h: int):
        """Exponent m with g^m == h and 0 <= m < bound, or None."""
        hit = self._entries.get(_fingerprint(h))
        if hit is None:
            return None
        if isinstance(hit, int):
            candidates = (hit,)
        else:
            candidates = hit
        for m in candidates:
            if self.group.pow_g(m) == h:
                return m
        return None

    def save(self, path) -> None:
        """Binary file: magic, profile, bound, then sorted (element, exponent) pairs."""
        pairs = []
        acc = self.group.identity
        g = self.group.g
        p = self.group.p
        for m in range(self.bound):
            pairs.append((self.group.encode(acc), m))
            acc = acc * g % p
        pairs.sort()
        profile = self.group.profile.encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack(">B", len(profile)))
            fh.write(profile)
            fh.write(struct.pack(">Q", self.bound))
            for elem, m in pairs:
                fh.write(elem)
                fh.write(struct.pack(">Q", m))

    @classmethod
    def load(cls, path) -> "DlogTable":
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise ValueError("not a discrete-log table file")
            (plen,) = struct.unpack(">B", fh.read(1))
            profile = fh.read(plen).decode()
            group = make_group(profile)
            (bound,) = struct.unpack(">Q", fh.read(8))
            width = group.width
            entries: dict = {}
            for _ in range(bound):
                elem = group.decode(fh.read(width))
                (m,) = struct.unpack(">Q", fh.read(8))
                _insert(entries, elem, m)
            return cls(group, bound, entries)


def _insert(entries: dict, elem: int, m: int) -> None:
    fp = _fingerprint(elem)
    hit = entries.get(fp)
    if hit is None:
        entries[fp] = m
    elif isinstance(hit, int):
        entries[fp] = [hit, m]
    else:
        hit.append(m)


def build_dlog_table(group: GroupDesc, bound: int, budget: int = DEFAULT_BUDGET) -> DlogTable:
    """Table mapping g^m -> m for all m in [0, bound)."""
    if bound > budget:
        raise DlogBudgetError(f"bound {bound} exceeds budget {budget}")
    entries: dict = {}
    acc = group.identity
    g = group.g
    p = group.p
    for m in range(bound):
        _insert(entries, acc, m)
        acc = acc * g % p
    return DlogTable(group, bound, entries)


def dlog_lookup(table: DlogTable, h: int):
    return table.lookup(h)
