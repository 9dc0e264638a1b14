"""Key bundles and their on-disk format.

A bundle holds one multiplicative and one additive key pair over the same
group.  Files are length-prefixed field lists; the secret file always
carries the ``.sk`` suffix so tooling can refuse to ship it to the
untrusted side.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from . import addenc, mulenc
from .groups import GroupDesc, PrfKey, make_group

__all__ = [
    "KeyBundle",
    "SecretPathError",
    "generate_keys",
    "save_keys",
    "load_keys",
    "is_secret_path",
    "ensure_public_path",
    "EK_FILE",
    "SK_FILE",
]

EK_FILE = "keys.ek"
SK_FILE = "keys.sk"

_EK_MAGIC = b"CFEK1"
_SK_MAGIC = b"CFSK1"

DEFAULT_CRT_T = 3
DEFAULT_CRT_BITS = 22
DEFAULT_DLOG_BOUND = 1 << 22


class SecretPathError(ValueError):
    """A secret (.sk) file was about to cross the trust boundary."""


def is_secret_path(path) -> bool:
    return ".sk" in Path(path).name


def ensure_public_path(path) -> Path:
    p = Path(path)
    if is_secret_path(p):
        raise SecretPathError(
            f"{p} is named as a secret file (.sk); it must stay on the client/trusted side"
        )
    return p


@dataclass(frozen=True)
class KeyBundle:
    group: GroupDesc
    mul: mulenc.MulKeyPair
    add: addenc.AddKeyPair
    dlog_bound: int

    @property
    def profile(self) -> str:
        return self.group.profile

    @property
    def d(self) -> int:
        return self.add.sk.crt.d


def generate_keys(
    profile: str,
    crt_t: int = DEFAULT_CRT_T,
    crt_bits: int = DEFAULT_CRT_BITS,
    dlog_bound: int = DEFAULT_DLOG_BOUND,
    rng=None,
    moduli=None,
) -> KeyBundle:
    group = make_group(profile)
    return KeyBundle(
        group=group,
        mul=mulenc.keygen(group, rng=rng),
        add=addenc.keygen(group, crt_t, crt_bits, rng=rng, moduli=moduli),
        dlog_bound=dlog_bound,
    )


def _write_fields(fh, magic: bytes, fields) -> None:
    fh.write(magic)
    fh.write(struct.pack(">H", len(fields)))
    for f in fields:
        fh.write(struct.pack(">I", len(f)))
        fh.write(f)


def _read_fields(fh, magic: bytes):
    if fh.read(len(magic)) != magic:
        raise ValueError("unrecognized key file")
    (n,) = struct.unpack(">H", fh.read(2))
    fields = []
    for _ in range(n):
        (ln,) = struct.unpack(">I", fh.read(4))
        fields.append(fh.read(ln))
    return fields


def _int_bytes(v: int) -> bytes:
    return v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")


def save_keys(directory, bundle: KeyBundle) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / EK_FILE, "wb") as fh:
        _write_fields(
            fh,
            _EK_MAGIC,
            [
                bundle.profile.encode(),
                _int_bytes(bundle.mul.ek.h),
                _int_bytes(bundle.mul.ek.j),
                _int_bytes(bundle.add.ek.h),
                _int_bytes(bundle.add.ek.j),
            ],
        )
    msk, ask = bundle.mul.sk, bundle.add.sk
    fields = [
        bundle.profile.encode(),
        _int_bytes(msk.a),
        _int_bytes(msk.x),
        _int_bytes(msk.y),
        bytes(msk.prf_key.key),
        _int_bytes(ask.a),
        _int_bytes(ask.x),
        _int_bytes(ask.y),
        bytes(ask.prf_key.key),
        _int_bytes(bundle.dlog_bound),
        struct.pack(">H", ask.crt.t),
    ] + [_int_bytes(m) for m in ask.crt.moduli]
    with open(directory / SK_FILE, "wb") as fh:
        _write_fields(fh, _SK_MAGIC, fields)


def load_keys(directory) -> KeyBundle:
    directory = Path(directory)
    with open(directory / SK_FILE, "rb") as fh:
        fields = _read_fields(fh, _SK_MAGIC)
    profile = fields[0].decode()
    group = make_group(profile)
    msk = mulenc.MulSecretKey(
        group,
        int.from_bytes(fields[1], "big"),
        int.from_bytes(fields[2], "big"),
        int.from_bytes(fields[3], "big"),
        PrfKey(fields[4]),
    )
    (t,) = struct.unpack(">H", fields[10])
    moduli = tuple(int.from_bytes(f, "big") for f in fields[11 : 11 + t])
    ask = addenc.AddSecretKey(
        group,
        int.from_bytes(fields[5], "big"),
        int.from_bytes(fields[6], "big"),
        int.from_bytes(fields[7], "big"),
        PrfKey(fields[8]),
        addenc.CrtParams(moduli),
    )
    from .groups import EvalKey

    mul_kp = mulenc.MulKeyPair(EvalKey(group, group.pow_g(msk.x), group.pow_g(msk.y)), msk)
    add_kp = addenc.AddKeyPair(EvalKey(group, group.pow_g(ask.x), group.pow_g(ask.y)), ask)
    return KeyBundle(group, mul_kp, add_kp, int.from_bytes(fields[9], "big"))
