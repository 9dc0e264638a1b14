"""Simulated trusted module.

The vault owns both secret keys, the conversion table and the expected
result labels.  After one-time provisioning (confirmed to the client by a
recomputable attestation digest) it serves label-checked conversion and
comparison requests.  Every request names a conversion site; the vault
selects the site's provenance candidate that matches the branch decisions
it has itself witnessed in the session transcript, decrypts under that
candidate's label, and faults the session terminally on any mismatch.
The only plaintext that ever leaves the vault is comparison booleans and
verified program outputs.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from . import addenc, mulenc
from .addenc import AddCiphertext
from .artifact import SecretArtifact, canonical_json
from .dlog import DlogTable
from .fixedpoint import SCALE_POW, sign_div
from .groups import Label
from .keystore import KeyBundle
from .mulenc import MulCiphertext

__all__ = [
    "Vault",
    "VaultFault",
    "ResultRejected",
    "ProvisioningError",
    "ExecutionSession",
    "AttestationQuote",
    "attestation_digest",
    "OP_BEGIN",
    "OP_TO_MUL",
    "OP_TO_ADD",
    "OP_CMP",
    "OP_VERIFY",
    "OP_OPEN",
    "encode_request",
]

_RELATIONS = {
    "GT": lambda a, b: a > b,
    "GTE": lambda a, b: a >= b,
    "EQ": lambda a, b: a == b,
    "LT": lambda a, b: a < b,
    "LTE": lambda a, b: a <= b,
}

OP_BEGIN, OP_TO_MUL, OP_TO_ADD, OP_CMP, OP_VERIFY, OP_OPEN = range(6)


class VaultFault(RuntimeError):
    """Terminal data-flow fault: the session is dead from here on."""

    def __init__(self, site: str, reason: str):
        super().__init__(f"fault at site {site!r}: {reason}")
        self.site = site
        self.reason = reason


class ResultRejected(RuntimeError):
    """A program output failed label verification."""


class ProvisioningError(RuntimeError):
    pass


@dataclass
class ExecutionSession:
    session_id: int
    transcript: dict = field(default_factory=dict)  # cmp site -> bool
    faulted: bool = False


@dataclass(frozen=True)
class AttestationQuote:
    digest: bytes
    nonce: bytes


def _keys_digest(keys: KeyBundle) -> bytes:
    h = hashlib.sha256()
    for part in (
        keys.profile.encode(),
        keys.mul.sk.a,
        keys.mul.sk.x,
        keys.mul.sk.y,
        keys.mul.sk.prf_key.key,
        keys.add.sk.a,
        keys.add.sk.x,
        keys.add.sk.y,
        keys.add.sk.prf_key.key,
    ):
        h.update(part if isinstance(part, bytes) else str(part).encode())
    return h.digest()


def attestation_digest(secret: SecretArtifact, keys: KeyBundle, nonce: bytes) -> bytes:
    """What an honest vault must report after provisioning; the client
    recomputes this from the artifact it sent."""
    h = hashlib.sha256()
    h.update(nonce)
    h.update(canonical_json(secret.to_dict()))
    h.update(_keys_digest(keys))
    return h.digest()


class Vault:
    def __init__(self, keys: KeyBundle, dlog_table: DlogTable):
        if dlog_table.group.profile != keys.profile:
            raise ValueError("discrete-log table group does not match keys")
        self.keys = keys
        self.table = dlog_table
        self.secret: SecretArtifact = None
        self._sessions: dict = {}
        self._next_session = 1
        self.op_units_log: list = []  # (site, group-op units) per conversion served

    # -- provisioning -------------------------------------------------

    @property
    def provisioned(self) -> bool:
        return self.secret is not None

    def provision(self, secret: SecretArtifact, nonce: bytes) -> AttestationQuote:
        if self.provisioned:
            raise ProvisioningError("vault is already provisioned")
        if secret.profile != self.keys.profile:
            raise ProvisioningError("artifact group profile does not match vault keys")
        for site, info in secret.sites.items():
            if not info.candidates:
                raise ProvisioningError(f"site {site!r} has no label candidates")
        self.secret = secret
        return AttestationQuote(attestation_digest(secret, self.keys, nonce), nonce)

    def begin_execution(self) -> ExecutionSession:
        sess = ExecutionSession(self._next_session)
        self._next_session += 1
        self._sessions[sess.session_id] = sess
        return sess

    # -- internals ----------------------------------------------------

    def _fault(self, sess: ExecutionSession, site: str, reason: str):
        sess.faulted = True
        raise VaultFault(site, reason)

    def _checked_site(self, sess: ExecutionSession, site: str, kind: str):
        if sess.faulted:
            raise VaultFault(site, "session has already faulted")
        if not self.provisioned:
            self._fault(sess, site, "vault not provisioned")
        info = self.secret.sites.get(site)
        if info is None or info.kind != kind:
            self._fault(sess, site, "unknown or mismatched conversion site")
        return info

    def _select(self, sess: ExecutionSession, site: str, candidates):
        live = [
            c
            for c in candidates
            if all(sess.transcript.get(s) == want for s, want in c.guards)
        ]
        if len(live) != 1:
            self._fault(sess, site, "no provenance candidate matches the observed control flow")
        return live[0]

    def _decrypt(self, sess, site, domain: str, cand, ct_bytes: bytes) -> int:
        group = self.keys.group
        try:
            if domain == "add":
                ct = AddCiphertext.parse(group, ct_bytes)
            else:
                ct = MulCiphertext.parse(group, ct_bytes)
        except ValueError:
            self._fault(sess, site, "malformed ciphertext")
        if domain == "add":
            try:
                m = addenc.decrypt(self.keys.add.sk, ct, Label(cand.label), self.table)
            except addenc.DlogCoverageError:
                self._fault(sess, site, "component exponent outside the decryptable range")
            if m is None:
                self._fault(sess, site, "label verification failed")
            return addenc.decode_signed(m, self.keys.d)
        m = mulenc.decrypt(self.keys.mul.sk, ct, Label(cand.label))
        if m is None:
            self._fault(sess, site, "label verification failed")
        try:
            mag = mulenc.decode_int(group, m)
        except ValueError:
            self._fault(sess, site, "plaintext outside the integer embedding")
        return cand.sign * mag

    def _units(self, domain: str) -> int:
        # group exponentiations per decryption: independent of how many
        # homomorphic operations produced the ciphertext
        return 2 * self.keys.add.sk.crt.t + 2 if domain == "add" else 3

    # -- conversions --------------------------------------------------

    def convert_to_mul(self, sess: ExecutionSession, site: str, ct_bytes: bytes) -> bytes:
        info = self._checked_site(sess, site, "to_mul")
        cand = self._select(sess, site, info.candidates)
        value = self._decrypt(sess, site, info.input_domain, cand, ct_bytes)
        if cand.rescale_pow:
            value = sign_div(value, 10**cand.rescale_pow)
        if value < 1:
            self._fault(sess, site, "value outside the multiplicative plaintext domain")
        self.op_units_log.append((site, self._units(info.input_domain)))
        out = mulenc.encrypt(
            self.keys.mul.sk, mulenc.encode_int(self.keys.group, value), info.out_id
        )
        return out.serialize(self.keys.group)

    def convert_to_add(self, sess: ExecutionSession, site: str, ct_bytes: bytes) -> bytes:
        info = self._checked_site(sess, site, "to_add")
        cand = self._select(sess, site, info.candidates)
        value = self._decrypt(sess, site, info.input_domain, cand, ct_bytes)
        if cand.rescale_pow:
            value = sign_div(value, 10**cand.rescale_pow)
        try:
            encoded = addenc.encode_signed(value, self.keys.d)
        except ValueError:
            self._fault(sess, site, "value outside the additive plaintext domain")
        self.op_units_log.append((site, self._units(info.input_domain)))
        out = addenc.encrypt(self.keys.add.sk, encoded, info.out_id)
        return out.serialize(self.keys.group)

    def convert_to_cmp(self, sess: ExecutionSession, site: str, ct_bytes: bytes, second: bytes = None) -> bool:
        info = self._checked_site(sess, site, "cmp")
        params = info.cmp
        cand = self._select(sess, site, info.candidates)
        left = self._decrypt(sess, site, info.input_domain, cand, ct_bytes)
        if params.constant is not None:
            if second is not None:
                self._fault(sess, site, "unexpected second operand")
            right = params.constant
        else:
            if second is None:
                self._fault(sess, site, "missing second operand")
            rcand = self._select(sess, site, params.second_candidates)
            right = self._decrypt(sess, site, params.second_domain, rcand, second)
        self.op_units_log.append((site, self._units(info.input_domain)))
        result = _RELATIONS[params.relation](left, right)
        sess.transcript[site] = result
        return result

    # -- result handling (client-side role; the vault owns sk here) ----

    def open_output(self, sess: ExecutionSession, output_id: str, ct_bytes: bytes) -> int:
        """Label-checked decryption of a program output, de-scaled to the
        base fixed-point scale.  Raises ResultRejected on any mismatch."""
        if not self.provisioned:
            raise ResultRejected("vault not provisioned")
        if sess.faulted:
            raise ResultRejected("execution faulted before producing a result")
        cands = self.secret.outputs.get(output_id)
        if cands is None:
            raise ResultRejected(f"unknown output {output_id!r}")
        live = [
            c for c in cands if all(sess.transcript.get(s) == want for s, want in c.guards)
        ]
        if len(live) != 1:
            raise ResultRejected("no output candidate matches the observed control flow")
        cand = live[0]
        group = self.keys.group
        try:
            if cand.domain == "add":
                ct = AddCiphertext.parse(group, ct_bytes)
                m = addenc.decrypt(self.keys.add.sk, ct, Label(cand.label), self.table)
                if m is None:
                    raise ResultRejected("result label verification failed")
                value = addenc.decode_signed(m, self.keys.d)
            else:
                ct = MulCiphertext.parse(group, ct_bytes)
                m = mulenc.decrypt(self.keys.mul.sk, ct, Label(cand.label))
                if m is None:
                    raise ResultRejected("result label verification failed")
                value = cand.sign * mulenc.decode_int(group, m)
        except ValueError as exc:
            raise ResultRejected(f"malformed result ciphertext: {exc}") from exc
        except addenc.DlogCoverageError as exc:
            raise ResultRejected(str(exc)) from exc
        return sign_div(value, 10 ** (cand.scale - SCALE_POW))

    def verify_result(self, sess: ExecutionSession, output_id: str, ct_bytes: bytes) -> bool:
        try:
            self.open_output(sess, output_id, ct_bytes)
        except ResultRejected:
            return False
        return True

    # -- binary frame interface ---------------------------------------

    def handle_frame(self, raw: bytes) -> bytes:
        try:
            op, session_id, site, payloads = _decode_request(raw)
            if op == OP_BEGIN:
                sess = self.begin_execution()
                return b"\x00" + struct.pack(">Q", sess.session_id)
            sess = self._sessions.get(session_id)
            if sess is None:
                return b"\x01" + b"unknown session"
            if op == OP_TO_MUL:
                return b"\x00" + self.convert_to_mul(sess, site, payloads[0])
            if op == OP_TO_ADD:
                return b"\x00" + self.convert_to_add(sess, site, payloads[0])
            if op == OP_CMP:
                second = payloads[1] if len(payloads) > 1 else None
                result = self.convert_to_cmp(sess, site, payloads[0], second)
                return b"\x00" + (b"\x01" if result else b"\x00")
            if op == OP_VERIFY:
                ok = self.verify_result(sess, site, payloads[0])
                return b"\x00" + (b"\x01" if ok else b"\x00")
            if op == OP_OPEN:
                value = self.open_output(sess, site, payloads[0])
                return b"\x00" + value.to_bytes(16, "big", signed=True)
            return b"\x01" + b"unknown op-code"
        except (VaultFault, ResultRejected) as exc:
            return b"\x01" + str(exc).encode()
        except Exception:
            return b"\x01" + b"malformed request"


def encode_request(op: int, session_id: int = 0, site: str = "", payloads=()) -> bytes:
    site_b = site.encode()
    out = [struct.pack(">BQB", op, session_id, len(site_b)), site_b, struct.pack(">B", len(payloads))]
    for p in payloads:
        out.append(struct.pack(">I", len(p)))
        out.append(p)
    return b"".join(out)


def _decode_request(raw: bytes):
    op, session_id, site_len = struct.unpack(">BQB", raw[:10])
    off = 10
    site = raw[off : off + site_len].decode()
    off += site_len
    (n,) = struct.unpack(">B", raw[off : off + 1])
    off += 1
    payloads = []
    for _ in range(n):
        (ln,) = struct.unpack(">I", raw[off : off + 4])
        off += 4
        payloads.append(raw[off : off + ln])
        off += ln
    return op, session_id, site, payloads
