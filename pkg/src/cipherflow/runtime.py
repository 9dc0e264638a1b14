"""Untrusted-side interpreter for compiled programs.

The execution environment only ever holds ciphertexts and comparison
booleans.  Homomorphic operations run locally; conversions and
comparisons go to the trusted module, and the first vault fault aborts
the run with a structured report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from . import addenc, mulenc
from .addenc import AddCiphertext
from .artifact import PublicArtifact
from .fixedpoint import SCALE_POW, to_scaled
from .groups import EvalKey
from .keystore import KeyBundle
from .mulenc import MulCiphertext
from .vault import ResultRejected, Vault, VaultFault

__all__ = [
    "OpCounters",
    "FaultReport",
    "ExecutionResult",
    "Meddler",
    "InputError",
    "encrypt_inputs",
    "execute",
    "decrypt_and_verify_result",
]


class InputError(ValueError):
    pass


@dataclass
class OpCounters:
    hom_add: int = 0
    hom_mul: int = 0
    to_mul: int = 0
    to_add: int = 0
    cmp_const: int = 0
    cmp_var: int = 0
    verify: int = 0

    @property
    def untrusted_total(self) -> int:
        return self.hom_add + self.hom_mul

    @property
    def trusted_total(self) -> int:
        return self.to_mul + self.to_add + self.cmp_const + self.cmp_var

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class FaultReport:
    site: str
    op: str
    reason: str
    counters: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


@dataclass
class ExecutionResult:
    outputs: dict  # output id -> ciphertext object
    counters: OpCounters
    bools: dict  # boolean env (cmp results, by SSA name)
    fault: FaultReport = None

    @property
    def faulted(self) -> bool:
        return self.fault is not None


class Meddler:
    """Attack-harness hook; the default implementation does nothing."""

    def before_instruction(self, ctx: "ExecutionContext", instr: dict) -> None:
        pass

    def on_cmp_result(self, ctx: "ExecutionContext", instr: dict, result: bool) -> None:
        pass

    def after_run(self, ctx: "ExecutionContext", result: ExecutionResult) -> None:
        pass


@dataclass
class ExecutionContext:
    public: PublicArtifact
    vault: Vault
    session: object
    env: dict = field(default_factory=dict)
    bools: dict = field(default_factory=dict)
    counters: OpCounters = field(default_factory=OpCounters)


def encrypt_inputs(public: PublicArtifact, keys: KeyBundle, values: dict, rng=None) -> dict:
    """Encrypt the client's plaintext inputs per the artifact manifest."""
    manifest = {entry["id"]: entry for entry in public.inputs}
    missing = sorted(set(manifest) - set(values))
    extra = sorted(set(values) - set(manifest))
    if missing or extra:
        raise InputError(f"input mismatch: missing {missing}, unexpected {extra}")
    out = {}
    for name, entry in manifest.items():
        scaled = to_scaled(values[name]) * 10 ** (entry["scale"] - SCALE_POW)
        if entry["domain"] == "add":
            try:
                encoded = addenc.encode_signed(scaled, keys.d)
            except ValueError as exc:
                raise InputError(f"input {name!r} outside the additive domain") from exc
            out[name] = addenc.encrypt(keys.add.sk, encoded, name, rng=rng)
        else:
            if scaled < 1:
                raise InputError(
                    f"input {name!r} must be at least one fixed-point unit in the multiplicative domain"
                )
            if scaled >= keys.group.q:
                raise InputError(f"input {name!r} outside the multiplicative domain")
            out[name] = mulenc.encrypt(
                keys.mul.sk, mulenc.encode_int(keys.group, scaled), name, rng=rng
            )
    return out


def _load_constants(public: PublicArtifact) -> dict:
    group = public.group
    env = {}
    for ident, entry in public.constants.items():
        if entry["domain"] == "add":
            env[ident] = AddCiphertext.parse(group, entry["ct"])
        else:
            env[ident] = MulCiphertext.parse(group, entry["ct"])
    return env


def _run_block(ctx: ExecutionContext, block, ek_add: EvalKey, ek_mul: EvalKey, meddler: Meddler):
    group = ctx.public.group
    for instr in block:
        meddler.before_instruction(ctx, instr)
        op = instr["op"]
        if op == "add":
            ctx.env[instr["dst"]] = addenc.evaluate(ek_add, [ctx.env[instr["a"]], ctx.env[instr["b"]]])
            ctx.counters.hom_add += 1
        elif op == "sub":
            ctx.env[instr["dst"]] = addenc.evaluate(
                ek_add, [ctx.env[instr["a"]], addenc.negate(group, ctx.env[instr["b"]])]
            )
            ctx.counters.hom_add += 1
        elif op == "mul":
            ctx.env[instr["dst"]] = mulenc.evaluate(ek_mul, [ctx.env[instr["a"]], ctx.env[instr["b"]]])
            ctx.counters.hom_mul += 1
        elif op == "convert":
            raw = ctx.env[instr["src"]].serialize(group)
            if instr["kind"] == "to_mul":
                out = ctx.vault.convert_to_mul(ctx.session, instr["site"], raw)
                ctx.env[instr["dst"]] = MulCiphertext.parse(group, out)
                ctx.counters.to_mul += 1
            else:
                out = ctx.vault.convert_to_add(ctx.session, instr["site"], raw)
                ctx.env[instr["dst"]] = AddCiphertext.parse(group, out)
                ctx.counters.to_add += 1
        elif op == "cmp":
            raw = ctx.env[instr["a"]].serialize(group)
            second = ctx.env[instr["b"]].serialize(group) if "b" in instr else None
            result = ctx.vault.convert_to_cmp(ctx.session, instr["site"], raw, second)
            if second is None:
                ctx.counters.cmp_const += 1
            else:
                ctx.counters.cmp_var += 1
            ctx.bools[instr["dst"]] = result
            meddler.on_cmp_result(ctx, instr, result)
        elif op == "if":
            taken = ctx.bools[instr["cond"]]
            _run_block(ctx, instr["then"] if taken else instr["else"], ek_add, ek_mul, meddler)
            for dst, tname, ename in instr["phis"]:
                ctx.env[dst] = ctx.env[tname if taken else ename]
        else:
            raise ValueError(f"malformed artifact: unknown op {op!r}")


def execute(
    public: PublicArtifact,
    input_cts: dict,
    vault: Vault,
    session,
    meddler: Meddler = None,
) -> ExecutionResult:
    """Run the public program over ciphertexts, dispatching trusted calls."""
    meddler = meddler or Meddler()
    group = public.group
    ek_add = EvalKey(group, *public.ek_add)
    ek_mul = EvalKey(group, *public.ek_mul)
    ctx = ExecutionContext(public, vault, session)
    ctx.env.update(_load_constants(public))
    ctx.env.update(input_cts)
    fault = None
    try:
        _run_block(ctx, public.program, ek_add, ek_mul, meddler)
    except VaultFault as exc:
        fault = FaultReport(exc.site, "trusted-call", exc.reason, ctx.counters.as_dict())
    outputs = {}
    if fault is None:
        outputs = {entry["id"]: ctx.env[entry["env"]] for entry in public.outputs}
    result = ExecutionResult(outputs, ctx.counters, dict(ctx.bools), fault)
    meddler.after_run(ctx, result)
    return result


def decrypt_and_verify_result(
    vault: Vault, session, public: PublicArtifact, output_id: str, ciphertext, counters: OpCounters = None
) -> int:
    """Label-checked decryption of one output; returns the value as a
    scale-10^6 integer.  Raises ResultRejected on tampering or wrong flow."""
    if counters is not None:
        counters.verify += 1
    raw = ciphertext.serialize(public.group)
    return vault.open_output(session, output_id, raw)
