"""Single-static-assignment conversion for parsed programs.

Repeat loops are fully unrolled first (their bounds are literals), then
every reassignment of a variable receives a numeric suffix and control-flow
joins are resolved with explicit phi nodes.  Source identifiers cannot
contain underscores, so generated names (``x_2`` for renames, ``_b1`` for
hoisted branch conditions) never collide with user names.
"""

from __future__ import annotations

from dataclasses import dataclass

from .parser import (
    Assign,
    BinOp,
    CmpOp,
    If,
    InputDecl,
    Lit,
    OutputDecl,
    Program,
    Repeat,
    Var,
)

__all__ = ["SsaError", "SsaAssign", "SsaIf", "SsaProgram", "to_ssa", "assert_single_assignment"]


class SsaError(ValueError):
    pass


@dataclass(frozen=True)
class SsaAssign:
    dst: str
    expr: object  # Lit | Var | BinOp | CmpOp with renamed operands


@dataclass(frozen=True)
class SsaIf:
    cond: str  # name of a boolean (comparison result)
    then: tuple
    orelse: tuple
    phis: tuple  # (dst, then_name, else_name)


@dataclass(frozen=True)
class SsaProgram:
    inputs: tuple
    outputs: tuple  # (declared_name, final_ssa_name, as_mul)
    body: tuple


_UNDEFINED = object()


def _expand_repeats(stmts):
    out = []
    for s in stmts:
        if isinstance(s, Repeat):
            body = _expand_repeats(s.body)
            for _ in range(s.count):
                out.extend(body)
        elif isinstance(s, If):
            out.append(If(s.cond, tuple(_expand_repeats(s.then)), tuple(_expand_repeats(s.orelse)), s.line))
        else:
            out.append(s)
    return out


class _Renamer:
    def __init__(self):
        self.versions: dict = {}
        self.bool_count = 0

    def fresh(self, var: str) -> str:
        n = self.versions.get(var, 0) + 1
        self.versions[var] = n
        return var if n == 1 else f"{var}_{n - 1}"

    def fresh_bool(self) -> str:
        self.bool_count += 1
        return f"_b{self.bool_count}"


def _rename_atom(atom, env, line):
    if isinstance(atom, Lit):
        return atom
    name = env.get(atom.name, _UNDEFINED)
    if name is _UNDEFINED:
        raise SsaError(f"variable {atom.name!r} used before assignment (line {atom.line or line})")
    if name is None:
        raise SsaError(
            f"variable {atom.name!r} may be undefined here: it was assigned in only "
            f"one branch of an earlier if (line {atom.line or line})"
        )
    return Var(name, atom.line)


def _convert_block(stmts, env, renamer, out):
    for s in stmts:
        if isinstance(s, (InputDecl, OutputDecl)):
            continue
        if isinstance(s, Assign):
            expr = s.expr
            if isinstance(expr, Lit):
                renamed = expr
            elif isinstance(expr, Var):
                renamed = _rename_atom(expr, env, s.line)
            elif isinstance(expr, BinOp):
                renamed = BinOp(expr.op, _rename_atom(expr.left, env, s.line), _rename_atom(expr.right, env, s.line))
            elif isinstance(expr, CmpOp):
                renamed = CmpOp(expr.rel, _rename_atom(expr.left, env, s.line), _rename_atom(expr.right, env, s.line))
            else:  # pragma: no cover - parser produces nothing else
                raise SsaError(f"unsupported expression {expr!r}")
            dst = renamer.fresh(s.target)
            env[s.target] = dst
            out.append(SsaAssign(dst, renamed))
        elif isinstance(s, If):
            _convert_if(s, env, renamer, out)
        else:  # pragma: no cover
            raise SsaError(f"unsupported statement {s!r}")


def _convert_if(stmt: If, env, renamer, out):
    if isinstance(stmt.cond, CmpOp):
        cond_name = renamer.fresh_bool()
        renamed = CmpOp(
            stmt.cond.rel,
            _rename_atom(stmt.cond.left, env, stmt.line),
            _rename_atom(stmt.cond.right, env, stmt.line),
        )
        out.append(SsaAssign(cond_name, renamed))
    else:
        cond_name = _rename_atom(stmt.cond, env, stmt.line).name

    env_then = dict(env)
    env_else = dict(env)
    then_instrs: list = []
    else_instrs: list = []
    _convert_block(stmt.then, env_then, renamer, then_instrs)
    _convert_block(stmt.orelse, env_else, renamer, else_instrs)

    phis = []
    assigned = [v for v in dict.fromkeys(list(env_then) + list(env_else)) if env_then.get(v) != env_else.get(v)]
    for var in assigned:
        tname = env_then.get(var)
        ename = env_else.get(var)
        if tname is None or ename is None or tname is _UNDEFINED or ename is _UNDEFINED:
            env[var] = None  # defined on one path only; error on later use
            continue
        dst = renamer.fresh(var)
        env[var] = dst
        phis.append((dst, tname, ename))
    for var in set(env_then) | set(env_else):
        if var not in assigned and var not in env:
            env[var] = None

    out.append(SsaIf(cond_name, tuple(then_instrs), tuple(else_instrs), tuple(phis)))


def to_ssa(program: Program) -> SsaProgram:
    stmts = _expand_repeats(program.stmts)
    renamer = _Renamer()
    env: dict = {}
    inputs = []
    for s in program.stmts:
        if isinstance(s, InputDecl):
            if s.name in env:
                raise SsaError(f"duplicate input {s.name!r}")
            env[s.name] = renamer.fresh(s.name)
            inputs.append(s.name)
    body: list = []
    _convert_block(stmts, env, renamer, body)
    outputs = []
    for s in program.stmts:
        if isinstance(s, OutputDecl):
            final = env.get(s.name, _UNDEFINED)
            if final is _UNDEFINED or final is None:
                raise SsaError(f"output {s.name!r} is not assigned on every path")
            outputs.append((s.name, final, s.as_mul))
    if not outputs:
        raise SsaError("program declares no outputs")
    return SsaProgram(tuple(inputs), tuple(outputs), tuple(body))


def _collect_assignments(body, counts):
    for instr in body:
        if isinstance(instr, SsaAssign):
            counts[instr.dst] = counts.get(instr.dst, 0) + 1
        else:
            _collect_assignments(instr.then, counts)
            _collect_assignments(instr.orelse, counts)
            for dst, _, _ in instr.phis:
                counts[dst] = counts.get(dst, 0) + 1


def assert_single_assignment(program: SsaProgram) -> None:
    """Raise if any identifier is assigned more than once (test helper)."""
    counts: dict = {}
    _collect_assignments(program.body, counts)
    for name in program.inputs:
        counts[name] = counts.get(name, 0) + 1
    dupes = sorted(n for n, c in counts.items() if c > 1)
    if dupes:
        raise SsaError(f"identifiers assigned more than once: {dupes}")
