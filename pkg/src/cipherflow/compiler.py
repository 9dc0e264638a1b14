"""Lowering of SSA programs into the ciphertext domain.

The pass walks the SSA body once and does four things at each step:

* encryption-type handling -- additions and subtractions require operands
  in the additive domain, multiplications in the multiplicative domain,
  comparisons go to the trusted module.  Whenever a value is needed in a
  domain other than the one it lives in, a conversion site is allocated
  and a convert instruction emitted at the point of use.
* provenance tracking -- every value carries the signed multiset of
  identifiers (inputs, constant occurrences, conversion outputs) of the
  maximal homomorphic computation that produced it.  Values that flow
  through phi nodes carry one provenance candidate per control-flow arm,
  guarded by the branch decisions that select it.
* label derivation -- each conversion and comparison site stores, per
  provenance candidate, the label the trusted module must use to decrypt
  its input; program outputs store their expected result labels the same
  way.
* constant encryption -- literals are encrypted at compile time under
  fresh identifiers, in the domain their use demands.  Comparison
  thresholds stay plaintext but only inside the secret artifact.

Fixed-point scales are tracked per value; multiplication adds scale
exponents, and the compiler schedules the divide-back-down inside the next
to-add conversion, where the trusted module sees plaintext.  Signs of
multiplicative constants are likewise folded into that conversion, since
the multiplicative plaintext domain is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import addenc, mulenc
from .artifact import (
    CmpParams,
    LabelCandidate,
    OutputCandidate,
    PublicArtifact,
    SecretArtifact,
    SiteInfo,
)
from .fixedpoint import SCALE_POW, to_scaled
from .keystore import KeyBundle
from .parser import BinOp, CmpOp, Lit, Var, parse
from .ssa import SsaAssign, SsaIf, SsaProgram, to_ssa

__all__ = ["CompileError", "compile_source", "compile_ssa", "MAX_PROVENANCE_CANDIDATES"]

MAX_PROVENANCE_CANDIDATES = 64


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class Cand:
    guards: frozenset  # {(site, bool)}
    domain: str  # add | mul
    scale: int
    sign: int
    counts: tuple  # sorted ((ident, n), ...)


@dataclass(frozen=True)
class Val:
    name: str
    cands: tuple


@dataclass(frozen=True)
class BoolVal:
    name: str
    site: str


@dataclass
class LitVal:
    """A literal assignment whose encryption domain is not yet known."""

    scaled: int
    materialized: dict = field(default_factory=dict)  # domain -> Val


def _counts_combine(a, b, sub: bool = False):
    counts = dict(a)
    for ident, n in b:
        counts[ident] = counts.get(ident, 0) + (-n if sub else n)
        if counts[ident] == 0:
            del counts[ident]
    return tuple(sorted(counts.items()))


def _merge_guards(g1, g2):
    merged = dict(g1)
    for site, want in g2:
        if merged.get(site, want) != want:
            return None
        merged[site] = want
    return frozenset(merged.items())


def _simplify_cands(cands):
    """Drop a guard site when two candidates identical in everything else
    cover both of its outcomes."""
    cands = list(dict.fromkeys(cands))
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(cands):
            for j, b in enumerate(cands):
                if i >= j or (a.domain, a.scale, a.sign, a.counts) != (b.domain, b.scale, b.sign, b.counts):
                    continue
                diff = a.guards.symmetric_difference(b.guards)
                sites = {s for s, _ in diff}
                if len(diff) == 2 and len(sites) == 1:
                    site = sites.pop()
                    merged = Cand(
                        frozenset(g for g in a.guards if g[0] != site), a.domain, a.scale, a.sign, a.counts
                    )
                    cands = [c for k, c in enumerate(cands) if k not in (i, j)] + [merged]
                    changed = True
                    break
            if changed:
                break
    return tuple(dict.fromkeys(cands))


class _Lowering:
    def __init__(self, keys: KeyBundle, rng=None):
        self.keys = keys
        self.rng = rng
        self.const_n = 0
        self.site_n = 0
        self.env: dict = {}
        self.sites: dict = {}
        self.constants: dict = {}
        self._const_cache: dict = {}  # (scaled, domain) -> Val
        self.registry: dict = {}  # (name, target) -> (site, Val)
        self.scopes: list = [set()]  # conversion availability along the current path
        self.blocks: list = [[]]

    # -- naming -------------------------------------------------------

    def _const_id(self) -> str:
        self.const_n += 1
        return f"_k{self.const_n}"

    def _site_id(self, kind: str) -> str:
        self.site_n += 1
        return f"_{'s' if kind == 'cmp' else 'c'}{self.site_n}"

    def emit(self, instr: dict) -> None:
        self.blocks[-1].append(instr)

    # -- labels and constants -----------------------------------------

    def _label(self, domain: str, counts) -> int:
        counts = dict(counts)
        if domain == "add":
            return addenc.derive_label(self.keys.add.sk, counts).value
        return mulenc.derive_label(self.keys.mul.sk, counts).value

    def _make_constant(self, scaled: int, domain: str) -> Val:
        cached = self._const_cache.get((scaled, domain))
        if cached is not None:
            return cached
        ident = self._const_id()
        if domain == "add":
            ct = addenc.encrypt(
                self.keys.add.sk, addenc.encode_signed(scaled, self.keys.d), ident, rng=self.rng
            )
            sign = 1
        else:
            if scaled == 0:
                raise CompileError("constant 0 cannot live in the multiplicative domain")
            sign = -1 if scaled < 0 else 1
            mag = abs(scaled)
            if mag >= self.keys.group.q:
                raise CompileError("constant exceeds the multiplicative plaintext domain")
            ct = mulenc.encrypt(self.keys.mul.sk, mulenc.encode_int(self.keys.group, mag), ident, rng=self.rng)
        self.constants[ident] = {"domain": domain, "ct": ct.serialize(self.keys.group)}
        cand = Cand(frozenset(), domain, SCALE_POW, sign, ((ident, 1),))
        val = Val(ident, (cand,))
        self._const_cache[(scaled, domain)] = val
        return val

    def _resolve(self, value, domain: str) -> Val:
        """Materialize a pending literal in the given domain."""
        if isinstance(value, Val):
            return value
        if isinstance(value, LitVal):
            got = value.materialized.get(domain)
            if got is None:
                got = self._make_constant(value.scaled, domain)
                value.materialized[domain] = got
            return got
        raise CompileError("boolean value used where a number is required")

    # -- domains ------------------------------------------------------

    def _available(self, key) -> bool:
        return any(key in scope for scope in self.scopes)

    def ensure_domain(self, value, target: str) -> Val:
        if isinstance(value, LitVal):
            return self._resolve(value, target)
        if isinstance(value, BoolVal):
            raise CompileError("comparison result used in arithmetic")
        domains = {c.domain for c in value.cands}
        if domains == {target}:
            return value
        if len(domains) > 1:
            raise CompileError(
                f"value {value.name!r} has branch-dependent encryption domains and "
                f"cannot be converted; only outputs may merge domains"
            )
        source = domains.pop()
        key = (value.name, target)
        entry = self.registry.get(key)
        if entry is None:
            site = self._site_id("to_" + target)
            cands = []
            for c in value.cands:
                if target == "mul":
                    if c.scale != SCALE_POW:
                        raise CompileError("value must be at the base scale before re-entering the multiplicative domain")
                    rescale_pow, sign = 0, c.sign
                else:
                    rescale_pow, sign = c.scale - SCALE_POW, c.sign
                cands.append(
                    LabelCandidate(c.guards, self._label(source, c.counts), rescale_pow, sign)
                )
            self.sites[site] = SiteInfo(
                site=site,
                kind="to_" + target,
                input_domain=source,
                candidates=tuple(cands),
                out_id=site,
            )
            out = Val(site, (Cand(frozenset(), target, SCALE_POW, 1, ((site, 1),)),))
            entry = (site, out)
            self.registry[key] = entry
        site, out = entry
        if not self._available(key):
            self.emit({"op": "convert", "kind": "to_" + target, "site": site, "dst": out.name, "src": value.name})
            self.scopes[-1].add(key)
        return out

    # -- expressions --------------------------------------------------

    def _atom(self, atom, domain: str) -> Val:
        if isinstance(atom, Lit):
            return self._make_constant(to_scaled(atom.text), domain)
        value = self.env[atom.name]
        return self.ensure_domain(value, domain)

    def _combine(self, a: Val, b: Val, op: str, dst: str) -> Val:
        cands = []
        for ca in a.cands:
            for cb in b.cands:
                guards = _merge_guards(ca.guards, cb.guards)
                if guards is None:
                    continue
                if op == "mul":
                    cands.append(
                        Cand(guards, "mul", ca.scale + cb.scale, ca.sign * cb.sign, _counts_combine(ca.counts, cb.counts))
                    )
                else:
                    if ca.scale != cb.scale:
                        raise CompileError(f"operands of {dst!r} have mismatched fixed-point scales")
                    cands.append(
                        Cand(guards, "add", ca.scale, 1, _counts_combine(ca.counts, cb.counts, sub=op == "sub"))
                    )
        cands = _simplify_cands(cands)
        if not cands:
            raise CompileError(f"no consistent control-flow provenance for {dst!r}")
        if len(cands) > MAX_PROVENANCE_CANDIDATES:
            raise CompileError(f"control-flow provenance of {dst!r} exceeds {MAX_PROVENANCE_CANDIDATES} candidates")
        return Val(dst, cands)

    def _operand_meta(self, value: Val):
        """Uniform (domain, scale) across candidates, for comparison sites."""
        domains = {c.domain for c in value.cands}
        scales = {c.scale for c in value.cands}
        if len(domains) != 1 or len(scales) != 1:
            raise CompileError(f"comparison operand {value.name!r} must have a single domain and scale")
        return domains.pop(), scales.pop()

    def lower_cmp(self, dst: str, expr: CmpOp) -> None:
        left = expr.left
        if isinstance(left, Lit):
            raise CompileError("left side of a comparison must be a variable")
        lval = self.env[left.name]
        if isinstance(lval, LitVal):
            lval = self._resolve(lval, "add")
        if isinstance(lval, BoolVal):
            raise CompileError("comparison of a boolean value")
        domain, scale = self._operand_meta(lval)
        site = self._site_id("cmp")
        lcands = tuple(
            LabelCandidate(c.guards, self._label(domain, c.counts), 0, c.sign) for c in lval.cands
        )
        instr = {"op": "cmp", "site": site, "dst": dst, "a": lval.name}
        if isinstance(expr.right, Lit):
            const = to_scaled(expr.right.text) * 10 ** (scale - SCALE_POW)
            params = CmpParams(relation=expr.rel, constant=const)
        else:
            rval = self.env[expr.right.name]
            if isinstance(rval, LitVal):
                rval = self._resolve(rval, "add")
            rdomain, rscale = self._operand_meta(rval)
            if rscale != scale:
                raise CompileError("comparison operands have mismatched fixed-point scales")
            rcands = tuple(
                LabelCandidate(c.guards, self._label(rdomain, c.counts), 0, c.sign) for c in rval.cands
            )
            params = CmpParams(relation=expr.rel, second_domain=rdomain, second_candidates=rcands)
            instr["b"] = rval.name
        self.sites[site] = SiteInfo(site=site, kind="cmp", input_domain=domain, candidates=lcands, cmp=params)
        self.emit(instr)
        self.env[dst] = BoolVal(dst, site)

    def lower_assign(self, instr: SsaAssign) -> None:
        expr = instr.expr
        if isinstance(expr, Lit):
            self.env[instr.dst] = LitVal(to_scaled(expr.text))
            return
        if isinstance(expr, Var):
            self.env[instr.dst] = self.env[expr.name]
            return
        if isinstance(expr, CmpOp):
            self.lower_cmp(instr.dst, expr)
            return
        assert isinstance(expr, BinOp)
        domain = "mul" if expr.op == "*" else "add"
        a = self._atom(expr.left, domain)
        b = self._atom(expr.right, domain)
        opname = {"+": "add", "-": "sub", "*": "mul"}[expr.op]
        self.env[instr.dst] = self._combine(a, b, opname, instr.dst)
        self.emit({"op": opname, "dst": instr.dst, "a": a.name, "b": b.name})

    # -- control flow -------------------------------------------------

    def lower_if(self, node: SsaIf) -> None:
        cond = self.env[node.cond]
        if not isinstance(cond, BoolVal):
            raise CompileError(f"branch condition {node.cond!r} is not a comparison result")
        site = cond.site
        self.blocks.append([])
        self.scopes.append(set())
        for instr in node.then:
            self.lower_instr(instr)
        then_block = self.blocks.pop()
        self.scopes.pop()
        self.blocks.append([])
        self.scopes.append(set())
        for instr in node.orelse:
            self.lower_instr(instr)
        else_block = self.blocks.pop()
        self.scopes.pop()

        phis = []
        for dst, tname, ename in node.phis:
            tval, eval_ = self.env[tname], self.env[ename]
            if isinstance(tval, BoolVal) or isinstance(eval_, BoolVal):
                raise CompileError("boolean values cannot flow through phi merges")
            if isinstance(tval, LitVal) and isinstance(eval_, LitVal):
                tval = self._resolve(tval, "add")
                eval_ = self._resolve(eval_, "add")
            elif isinstance(tval, LitVal):
                tval = self._resolve(tval, self._phi_domain_hint(eval_))
            elif isinstance(eval_, LitVal):
                eval_ = self._resolve(eval_, self._phi_domain_hint(tval))
            self.env[dst] = self._merge_phi(dst, site, tval, eval_)
            # aliases and literals never bind their SSA names at run time, so
            # the phi references the lowered environment names
            phis.append([dst, tval.name, eval_.name])
        self.emit(
            {
                "op": "if",
                "cond": cond.name,
                "site": site,
                "then": then_block,
                "else": else_block,
                "phis": phis,
            }
        )

    def _merge_phi(self, dst: str, site: str, tval: Val, eval_: Val) -> Val:
        cands = [
            Cand(g, c.domain, c.scale, c.sign, c.counts)
            for c in tval.cands
            if (g := _merge_guards(c.guards, frozenset([(site, True)]))) is not None
        ] + [
            Cand(g, c.domain, c.scale, c.sign, c.counts)
            for c in eval_.cands
            if (g := _merge_guards(c.guards, frozenset([(site, False)]))) is not None
        ]
        cands = _simplify_cands(cands)
        if len(cands) > MAX_PROVENANCE_CANDIDATES:
            raise CompileError(f"control-flow provenance of {dst!r} exceeds {MAX_PROVENANCE_CANDIDATES} candidates")
        return Val(dst, cands)

    @staticmethod
    def _phi_domain_hint(other) -> str:
        if isinstance(other, LitVal):
            return "add"
        domains = {c.domain for c in other.cands}
        return domains.pop() if len(domains) == 1 else "add"

    def lower_instr(self, instr) -> None:
        if isinstance(instr, SsaAssign):
            self.lower_assign(instr)
        else:
            self.lower_if(instr)


def _infer_input_domains(program: SsaProgram) -> dict:
    """First-use encryption type for each input: mul when the first
    arithmetic use is a multiplication, otherwise add."""
    domains: dict = {}

    def see(atom, domain):
        if isinstance(atom, Var) and atom.name in pending and atom.name not in domains:
            domains[atom.name] = domain

    def walk(body):
        for instr in body:
            if isinstance(instr, SsaAssign):
                expr = instr.expr
                if isinstance(expr, BinOp):
                    d = "mul" if expr.op == "*" else "add"
                    see(expr.left, d)
                    see(expr.right, d)
                elif isinstance(expr, CmpOp):
                    see(expr.left, "add")
                    see(expr.right, "add")
            else:
                walk(instr.then)
                walk(instr.orelse)

    pending = set(program.inputs)
    walk(program.body)
    for name in program.inputs:
        domains.setdefault(name, "add")
    return domains


def compile_ssa(program: SsaProgram, keys: KeyBundle, rng=None):
    lowering = _Lowering(keys, rng=rng)
    input_domains = _infer_input_domains(program)
    manifest = []
    for name in program.inputs:
        domain = input_domains[name]
        lowering.env[name] = Val(name, (Cand(frozenset(), domain, SCALE_POW, 1, ((name, 1),)),))
        manifest.append({"id": name, "domain": domain, "scale": SCALE_POW})
    for instr in program.body:
        lowering.lower_instr(instr)

    outputs_public = []
    outputs_secret = {}
    for declared, ssa_name, as_mul in program.outputs:
        value = lowering.env[ssa_name]
        if isinstance(value, LitVal):
            value = lowering._resolve(value, "add")
        if isinstance(value, BoolVal):
            raise CompileError(f"output {declared!r} is a comparison result, not a ciphertext")
        if as_mul:
            value = lowering.ensure_domain(value, "mul")
        cands = tuple(
            OutputCandidate(c.guards, c.domain, c.scale, c.sign, lowering._label(c.domain, c.counts))
            for c in value.cands
        )
        outputs_secret[declared] = cands
        outputs_public.append({"id": declared, "env": value.name})

    public = PublicArtifact(
        profile=keys.profile,
        ek_mul=(keys.mul.ek.h, keys.mul.ek.j),
        ek_add=(keys.add.ek.h, keys.add.ek.j),
        crt_t=keys.add.sk.crt.t,
        program=lowering.blocks[0],
        constants=lowering.constants,
        inputs=manifest,
        outputs=outputs_public,
    )
    secret = SecretArtifact(profile=keys.profile, sites=lowering.sites, outputs=outputs_secret)
    return public, secret


def compile_source(text: str, keys: KeyBundle, rng=None):
    """Full pipeline: parse, SSA-convert, lower, label and encrypt."""
    return compile_ssa(to_ssa(parse(text)), keys, rng=rng)
