"""Compiled-program artifacts and their JSON serialization.

Compilation produces two files:

* the public artifact -- the ciphertext-domain instruction list, encrypted
  constants, evaluation keys and the input/output manifest.  This is what
  the untrusted server receives.
* the secret artifact -- the per-site conversion table (labels, fresh
  output identifiers, comparison parameters, rescale factors) plus the
  expected result labels.  This is provisioned into the trusted module
  and never leaves the client side; its file name carries the ``.sk``
  marker.

Both carry a format-version field.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

from .groups import make_group

__all__ = [
    "FORMAT_VERSION",
    "ArtifactError",
    "SiteInfo",
    "CmpParams",
    "LabelCandidate",
    "OutputCandidate",
    "PublicArtifact",
    "SecretArtifact",
    "canonical_json",
]

FORMAT_VERSION = 1


class ArtifactError(ValueError):
    pass


def _guards_to_json(guards):
    return [[site, bool(val)] for site, val in sorted(guards)]


def _guards_from_json(data):
    return frozenset((site, bool(val)) for site, val in data)


@dataclass(frozen=True)
class LabelCandidate:
    """One admissible provenance for a conversion input, keyed by the branch
    decisions (cmp-site booleans) under which it is the live data flow."""

    guards: frozenset  # {(cmp_site_id, bool), ...}
    label: int  # group element
    rescale_pow: int = 0
    sign: int = 1

    def to_json(self):
        return {
            "guards": _guards_to_json(self.guards),
            "label": self.label,
            "rescale_pow": self.rescale_pow,
            "sign": self.sign,
        }

    @classmethod
    def from_json(cls, data):
        return cls(_guards_from_json(data["guards"]), data["label"], data["rescale_pow"], data["sign"])


@dataclass(frozen=True)
class CmpParams:
    relation: str  # GT GTE EQ LT LTE
    constant: int = None  # plaintext, already at the operand scale; None for two-operand sites
    second_domain: str = None
    second_candidates: tuple = ()  # LabelCandidate for the second operand
    second_sign: int = 1

    def to_json(self):
        return {
            "relation": self.relation,
            "constant": self.constant,
            "second_domain": self.second_domain,
            "second_candidates": [c.to_json() for c in self.second_candidates],
            "second_sign": self.second_sign,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            data["relation"],
            data["constant"],
            data["second_domain"],
            tuple(LabelCandidate.from_json(c) for c in data["second_candidates"]),
            data["second_sign"],
        )


@dataclass(frozen=True)
class SiteInfo:
    site: str
    kind: str  # to_mul | to_add | cmp
    input_domain: str  # add | mul
    candidates: tuple  # LabelCandidate
    out_id: str = None  # fresh identifier for conversion outputs
    cmp: CmpParams = None

    def to_json(self):
        return {
            "site": self.site,
            "kind": self.kind,
            "input_domain": self.input_domain,
            "candidates": [c.to_json() for c in self.candidates],
            "out_id": self.out_id,
            "cmp": self.cmp.to_json() if self.cmp else None,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            data["site"],
            data["kind"],
            data["input_domain"],
            tuple(LabelCandidate.from_json(c) for c in data["candidates"]),
            data["out_id"],
            CmpParams.from_json(data["cmp"]) if data["cmp"] else None,
        )


@dataclass(frozen=True)
class OutputCandidate:
    guards: frozenset
    domain: str
    scale: int
    sign: int
    label: int

    def to_json(self):
        return {
            "guards": _guards_to_json(self.guards),
            "domain": self.domain,
            "scale": self.scale,
            "sign": self.sign,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, data):
        return cls(_guards_from_json(data["guards"]), data["domain"], data["scale"], data["sign"], data["label"])


@dataclass
class PublicArtifact:
    profile: str
    ek_mul: tuple  # (h, j)
    ek_add: tuple
    crt_t: int
    program: list  # nested instruction dicts
    constants: dict  # id -> {"domain": str, "ct": bytes}
    inputs: list  # {"id", "domain", "scale"}
    outputs: list  # {"id", "env"}
    format_version: int = FORMAT_VERSION

    @property
    def group(self):
        return make_group(self.profile)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": self.format_version,
                "profile": self.profile,
                "ek_mul": list(self.ek_mul),
                "ek_add": list(self.ek_add),
                "crt_t": self.crt_t,
                "program": self.program,
                "constants": {
                    k: {"domain": v["domain"], "ct": base64.b64encode(v["ct"]).decode()}
                    for k, v in self.constants.items()
                },
                "inputs": self.inputs,
                "outputs": self.outputs,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "PublicArtifact":
        data = json.loads(text)
        if data.get("format_version") != FORMAT_VERSION:
            raise ArtifactError(f"unsupported artifact format version {data.get('format_version')!r}")
        return cls(
            profile=data["profile"],
            ek_mul=tuple(data["ek_mul"]),
            ek_add=tuple(data["ek_add"]),
            crt_t=data["crt_t"],
            program=data["program"],
            constants={
                k: {"domain": v["domain"], "ct": base64.b64decode(v["ct"])}
                for k, v in data["constants"].items()
            },
            inputs=data["inputs"],
            outputs=data["outputs"],
            format_version=data["format_version"],
        )


@dataclass
class SecretArtifact:
    profile: str
    sites: dict  # site id -> SiteInfo
    outputs: dict  # output id -> (OutputCandidate, ...)
    format_version: int = FORMAT_VERSION

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "profile": self.profile,
            "sites": {k: v.to_json() for k, v in sorted(self.sites.items())},
            "outputs": {k: [c.to_json() for c in v] for k, v in sorted(self.outputs.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SecretArtifact":
        data = json.loads(text)
        if data.get("format_version") != FORMAT_VERSION:
            raise ArtifactError(f"unsupported artifact format version {data.get('format_version')!r}")
        return cls(
            profile=data["profile"],
            sites={k: SiteInfo.from_json(v) for k, v in data["sites"].items()},
            outputs={k: tuple(OutputCandidate.from_json(c) for c in v) for k, v in data["outputs"].items()},
            format_version=data["format_version"],
        )


def canonical_json(obj) -> bytes:
    """Deterministic encoding used for attestation digests."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
