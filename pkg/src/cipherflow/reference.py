"""Plaintext fixed-point reference interpreter.

Evaluates a source program over scaled integers with exactly the rounding
behavior of the encrypted pipeline: multiplication accumulates scale
exponents, and the divide-back-down to the base scale happens when a
product re-enters an additive context (mirroring the rescale the trusted
module performs inside to-add conversions).  Comparisons happen at the
operand's own scale against a threshold brought to that scale.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fixedpoint import SCALE_POW, sign_div, to_scaled
from .parser import Assign, BinOp, CmpOp, If, InputDecl, Lit, OutputDecl, Repeat, Var, parse

__all__ = ["ReferenceError", "run", "run_parsed"]

_RELATIONS = {
    "GT": lambda a, b: a > b,
    "GTE": lambda a, b: a >= b,
    "EQ": lambda a, b: a == b,
    "LT": lambda a, b: a < b,
    "LTE": lambda a, b: a <= b,
}


class ReferenceError(ValueError):
    pass


@dataclass(frozen=True)
class _Num:
    value: int  # scaled integer
    scale: int  # scale exponent
    domain: str  # add | mul


def _to_add(v: _Num) -> _Num:
    if v.scale != SCALE_POW:
        return _Num(sign_div(v.value, 10 ** (v.scale - SCALE_POW)), SCALE_POW, "add")
    return _Num(v.value, v.scale, "add")


def _to_mul(v: _Num) -> _Num:
    if v.domain == "mul":
        return v
    if v.scale != SCALE_POW:
        raise ReferenceError("value must be at the base scale to enter the multiplicative domain")
    if v.value < 1:
        raise ReferenceError("value outside the multiplicative plaintext domain")
    return _Num(v.value, v.scale, "mul")


class _Interp:
    def __init__(self, inputs: dict):
        self.env = {name: _Num(scaled, SCALE_POW, "add") for name, scaled in inputs.items()}
        self.bools: dict = {}

    def atom(self, atom) -> _Num:
        if isinstance(atom, Lit):
            return _Num(to_scaled(atom.text), SCALE_POW, "add")
        got = self.env.get(atom.name)
        if got is None:
            raise ReferenceError(f"variable {atom.name!r} used before assignment")
        return got

    def mul_operand(self, atom) -> _Num:
        v = self.atom(atom)
        if isinstance(atom, Lit):
            # constants enter the multiplicative domain directly, sign folded
            return _Num(v.value, v.scale, "mul")
        return _to_mul(v)

    def eval_expr(self, expr):
        if isinstance(expr, (Lit, Var)):
            return self.atom(expr)
        if isinstance(expr, BinOp):
            if expr.op == "*":
                a = self.mul_operand(expr.left)
                b = self.mul_operand(expr.right)
                return _Num(a.value * b.value, a.scale + b.scale, "mul")
            a = _to_add(self.atom(expr.left))
            b = _to_add(self.atom(expr.right))
            return _Num(a.value + b.value if expr.op == "+" else a.value - b.value, SCALE_POW, "add")
        if isinstance(expr, CmpOp):
            if isinstance(expr.left, Lit):
                raise ReferenceError("left side of a comparison must be a variable")
            left = self.atom(expr.left)
            if isinstance(expr.right, Lit):
                right = to_scaled(expr.right.text) * 10 ** (left.scale - SCALE_POW)
            else:
                rv = self.atom(expr.right)
                if rv.scale != left.scale:
                    raise ReferenceError("comparison operands have mismatched scales")
                right = rv.value
            return _RELATIONS[expr.rel](left.value, right)
        raise ReferenceError(f"unsupported expression {expr!r}")

    def run_block(self, stmts):
        for s in stmts:
            if isinstance(s, (InputDecl, OutputDecl)):
                continue
            if isinstance(s, Assign):
                result = self.eval_expr(s.expr)
                if isinstance(result, bool):
                    self.bools[s.target] = result
                    self.env.pop(s.target, None)
                else:
                    self.env[s.target] = result
                    self.bools.pop(s.target, None)
            elif isinstance(s, If):
                if isinstance(s.cond, CmpOp):
                    taken = self.eval_expr(s.cond)
                else:
                    if s.cond.name not in self.bools:
                        raise ReferenceError(f"branch condition {s.cond.name!r} is not a comparison result")
                    taken = self.bools[s.cond.name]
                self.run_block(s.then if taken else s.orelse)
            elif isinstance(s, Repeat):
                for _ in range(s.count):
                    self.run_block(s.body)
            else:
                raise ReferenceError(f"unsupported statement {s!r}")


def run_parsed(program, input_values: dict) -> dict:
    """Outputs as scale-10^6 integers, given plaintext input numbers."""
    declared = program.inputs
    missing = sorted(set(declared) - set(input_values))
    extra = sorted(set(input_values) - set(declared))
    if missing or extra:
        raise ReferenceError(f"input mismatch: missing {missing}, unexpected {extra}")
    interp = _Interp({name: to_scaled(input_values[name]) for name in declared})
    interp.run_block(program.stmts)
    outputs = {}
    for decl in program.outputs:
        v = interp.env.get(decl.name)
        if v is None:
            raise ReferenceError(f"output {decl.name!r} was never assigned")
        outputs[decl.name] = _to_add(v).value
    return outputs


def run(text: str, input_values: dict) -> dict:
    return run_parsed(parse(text), input_values)
