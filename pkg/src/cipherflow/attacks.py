"""Data-flow attack harness.

Runs compiled programs under adversarial perturbations — extra injected
operations, swapped operands, replayed ciphertexts, substituted constants,
re-run branches — and records whether the trusted module faulted before
any unintended comparison bit leaked, or the tampered result was rejected
at verification.  The scripted binary-search attack replays the classic
schedule of probing an encrypted sum through the comparison oracle.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, asdict

from . import addenc, mulenc
from .artifact import PublicArtifact
from .groups import EvalKey
from .keystore import KeyBundle
from .runtime import ExecutionResult, Meddler, encrypt_inputs, execute
from .vault import Vault

__all__ = [
    "AttackOutcome",
    "AttackAction",
    "TaintMeddler",
    "binary_search_attack",
    "null_attack",
    "run_with_action",
    "random_action",
    "perturbation_property",
]


@dataclass(frozen=True)
class AttackAction:
    kind: str  # inject-op | swap-operand | replay-ciphertext | substitute-constant | re-run-branch
    params: tuple = ()

    def as_dict(self):
        return {"kind": self.kind, "params": list(self.params)}


@dataclass
class AttackOutcome:
    kind: str
    faulted: bool
    fault_site: str = None
    verified: bool = False
    applied: bool = True
    intended_bits: int = 0
    unintended_bits: int = 0
    probes: int = 0
    notes: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


# -- program shape helpers ---------------------------------------------


def _walk(block):
    for instr in block:
        yield instr
        if instr["op"] == "if":
            yield from _walk(instr["then"])
            yield from _walk(instr["else"])


def env_domains(public: PublicArtifact) -> dict:
    """Best-effort map from environment names to ciphertext domains."""
    domains = {e["id"]: e["domain"] for e in public.inputs}
    domains.update({k: v["domain"] for k, v in public.constants.items()})
    for instr in _walk(public.program):
        if instr["op"] in ("add", "sub"):
            domains[instr["dst"]] = "add"
        elif instr["op"] == "mul":
            domains[instr["dst"]] = "mul"
        elif instr["op"] == "convert":
            domains[instr["dst"]] = "mul" if instr["kind"] == "to_mul" else "add"
    return domains


def _trusted_instrs(public: PublicArtifact):
    return [i for i in _walk(public.program) if i["op"] in ("cmp", "convert")]


# -- the taint-tracking meddler ----------------------------------------


class TaintMeddler(Meddler):
    """Applies one perturbation and tracks which values it contaminates.

    A comparison bit returned for a tainted operand counts as unintended
    leakage; the harness asserts this never happens.
    """

    def __init__(self, public: PublicArtifact, action: AttackAction = None):
        group = public.group
        self.ek_add = EvalKey(group, *public.ek_add)
        self.ek_mul = EvalKey(group, *public.ek_mul)
        self.group = group
        self.action = action
        self.applied = False
        self.tainted: set = set()
        self.unintended_bits = 0
        self.intended_bits = 0
        self.probes = 0

    # taint plumbing

    def _taint_from(self, instr) -> bool:
        op = instr["op"]
        if op in ("add", "sub", "mul"):
            return instr["a"] in self.tainted or instr["b"] in self.tainted
        if op == "convert":
            return instr["src"] in self.tainted
        if op == "cmp":
            return instr["a"] in self.tainted or instr.get("b") in self.tainted
        return False

    def before_instruction(self, ctx, instr):
        self._maybe_apply(ctx, instr)
        op = instr["op"]
        if op in ("add", "sub", "mul", "convert") and self._taint_from(instr):
            self.tainted.add(instr["dst"])
        elif op == "if":
            for dst, tname, ename in instr["phis"]:
                if tname in self.tainted or ename in self.tainted:
                    self.tainted.add(dst)

    def on_cmp_result(self, ctx, instr, result):
        if self._taint_from(instr):
            self.unintended_bits += 1
        else:
            self.intended_bits += 1

    # perturbation application

    def _inject(self, ctx, target: str, domains: dict):
        ct = ctx.env[target]
        if domains.get(target) == "mul":
            ctx.env[target] = mulenc.evaluate(self.ek_mul, [ct, ct])
        else:
            ctx.env[target] = addenc.evaluate(self.ek_add, [ct, ct])
        self.tainted.add(target)

    def _maybe_apply(self, ctx, instr):
        if self.action is None or self.applied:
            return
        kind = self.action.kind
        domains = env_domains(ctx.public)
        if kind == "inject-op":
            (target,) = self.action.params
            if target in ctx.env:
                self._inject(ctx, target, domains)
                self.applied = True
            return
        if kind == "substitute-constant":
            target, replacement = self.action.params
            ctx.env[target] = ctx.env[replacement]
            self.tainted.add(target)
            self.applied = True
            return
        if kind in ("swap-operand", "replay-ciphertext"):
            site, replacement = self.action.params
            if instr["op"] in ("cmp", "convert") and instr.get("site") == site and replacement in ctx.env:
                operand = instr["a"] if instr["op"] == "cmp" else instr["src"]
                if operand != replacement:
                    self.probes += 1
                    ctx.env[operand] = ctx.env[replacement]
                    self.tainted.add(operand)
                    self.applied = True
            return
        # re-run-branch and result-swap act after the run


# -- scripted attacks ---------------------------------------------------


def null_attack(public, keys: KeyBundle, vault: Vault, input_values: dict) -> AttackOutcome:
    """No perturbation: completes and leaks exactly the intended branch bits."""
    session = vault.begin_execution()
    cts = encrypt_inputs(public, keys, input_values)
    meddler = TaintMeddler(public)
    result = execute(public, cts, vault, session, meddler)
    verified = not result.faulted and all(
        vault.verify_result(session, e["id"], result.outputs[e["id"]].serialize(public.group))
        for e in public.outputs
    )
    return AttackOutcome(
        kind="null",
        faulted=result.faulted,
        fault_site=result.fault.site if result.fault else None,
        verified=verified,
        intended_bits=meddler.intended_bits,
        unintended_bits=meddler.unintended_bits,
    )


class _BinarySearchMeddler(TaintMeddler):
    """Perturbs the comparison operand right before the first comparison,
    the opening move of a binary search against the cmp oracle."""

    def __init__(self, public, delta_name: str):
        super().__init__(public)
        self.delta_name = delta_name

    def _maybe_apply(self, ctx, instr):
        if self.applied or instr["op"] != "cmp":
            return
        operand = instr["a"]
        delta = ctx.env[self.delta_name]
        domains = env_domains(ctx.public)
        if domains.get(operand, "add") == "mul":
            ctx.env[operand] = mulenc.evaluate(self.ek_mul, [ctx.env[operand], delta])
        else:
            ctx.env[operand] = addenc.evaluate(self.ek_add, [ctx.env[operand], delta])
        self.tainted.add(operand)
        self.probes += 1
        self.applied = True


def binary_search_attack(public, keys: KeyBundle, vault: Vault, input_values: dict) -> AttackOutcome:
    """The modified-program schedule: nudge the encrypted accumulator by a
    known encrypted delta and probe the comparison oracle."""
    session = vault.begin_execution()
    cts = encrypt_inputs(public, keys, input_values)
    delta_name = public.inputs[0]["id"]
    meddler = _BinarySearchMeddler(public, delta_name)
    result = execute(public, cts, vault, session, meddler)
    return AttackOutcome(
        kind="binary-search",
        faulted=result.faulted,
        fault_site=result.fault.site if result.fault else None,
        verified=False,
        intended_bits=meddler.intended_bits,
        unintended_bits=meddler.unintended_bits,
        probes=meddler.probes,
        notes="fault expected at the first perturbed comparison",
    )


# -- random perturbation property --------------------------------------


def _always_read_constants(public: PublicArtifact) -> set:
    """Constants consumed by unconditionally executed instructions; a
    substitution there is guaranteed to influence the computation."""
    read = set()
    for instr in public.program:  # top level only: branch bodies may be skipped
        for key in ("a", "b", "src"):
            name = instr.get(key)
            if name in public.constants:
                read.add(name)
    return read


def random_action(public: PublicArtifact, rng: random.Random) -> AttackAction:
    domains = env_domains(public)
    trusted = _trusted_instrs(public)
    choices = ["inject-op", "swap-operand", "replay-ciphertext", "result-swap"]
    always_read = _always_read_constants(public)
    add_consts = [k for k in always_read if public.constants[k]["domain"] == "add"]
    mul_consts = [k for k in always_read if public.constants[k]["domain"] == "mul"]
    if len(add_consts) > 1 or len(mul_consts) > 1:
        choices.append("substitute-constant")
    while True:
        kind = rng.choice(choices)
        if kind == "inject-op":
            target = rng.choice(public.inputs)["id"]
            return AttackAction(kind, (target,))
        if kind in ("swap-operand", "replay-ciphertext") and trusted:
            instr = rng.choice(trusted)
            operand = instr["a"] if instr["op"] == "cmp" else instr["src"]
            pool = [
                name
                for name, dom in domains.items()
                if dom == domains.get(operand, "add") and name != operand
            ]
            if pool:
                return AttackAction(kind, (instr["site"], rng.choice(pool)))
        if kind == "substitute-constant":
            pool = mul_consts if len(mul_consts) > 1 else add_consts
            target, replacement = rng.sample(pool, 2)
            return AttackAction(kind, (target, replacement))
        if kind == "result-swap":
            out = rng.choice(public.outputs)
            # inputs and constants carry singleton labels, so they can never
            # masquerade as a multi-identifier result
            pool = [e["id"] for e in public.inputs] + list(public.constants)
            pool = [name for name in pool if name != out["env"]]
            if pool:
                return AttackAction(kind, (out["id"], rng.choice(pool)))


def run_with_action(
    public, keys: KeyBundle, vault: Vault, input_values: dict, action: AttackAction
) -> AttackOutcome:
    session = vault.begin_execution()
    cts = encrypt_inputs(public, keys, input_values)
    meddler = TaintMeddler(public, None if action.kind == "result-swap" else action)
    result = execute(public, cts, vault, session, meddler)
    verified = False
    if not result.faulted:
        result_env = {e["id"]: result.outputs[e["id"]] for e in public.outputs}
        if action.kind == "result-swap":
            output_id, replacement = action.params
            # the server hands back some other ciphertext it holds
            env_snapshot = _final_env(public, cts, result)
            out_env_names = {e["env"] for e in public.outputs}
            if replacement not in env_snapshot:
                pool = sorted(set(env_snapshot) - out_env_names)
                replacement = pool[0] if pool else None
            if replacement is not None:
                result_env[output_id] = env_snapshot[replacement]
        verified = all(
            vault.verify_result(session, oid, ct.serialize(public.group))
            for oid, ct in result_env.items()
        )
    return AttackOutcome(
        kind=action.kind,
        faulted=result.faulted,
        fault_site=result.fault.site if result.fault else None,
        verified=verified,
        applied=meddler.applied or action.kind == "result-swap",
        intended_bits=meddler.intended_bits,
        unintended_bits=meddler.unintended_bits,
    )


def _final_env(public, cts, result: ExecutionResult) -> dict:
    env = dict(cts)
    from .runtime import _load_constants

    env.update(_load_constants(public))
    env.update(result.outputs)
    return env


def perturbation_property(
    public,
    keys: KeyBundle,
    vault: Vault,
    inputs_generator,
    trials: int,
    seed: int = 0,
) -> dict:
    """Every perturbed execution must fault or fail result verification,
    with zero unintended comparison bits either way."""
    rng = random.Random(seed)
    faults = 0
    rejections = 0
    violations = []
    unintended = 0
    per_site: dict = {}
    for trial in range(trials):
        # resample until the perturbation lands on the executed path — an
        # action aimed at a skipped branch perturbs nothing
        for _ in range(32):
            action = random_action(public, rng)
            outcome = run_with_action(public, keys, vault, inputs_generator(rng), action)
            if outcome.applied:
                break
        unintended += outcome.unintended_bits
        if outcome.faulted:
            faults += 1
            per_site[outcome.fault_site] = per_site.get(outcome.fault_site, 0) + 1
        elif not outcome.verified:
            rejections += 1
        else:
            violations.append({"trial": trial, "action": action.as_dict()})
    return {
        "trials": trials,
        "faults": faults,
        "rejections": rejections,
        "violations": violations,
        "unintended_bits": unintended,
        "per_site_faults": per_site,
    }
