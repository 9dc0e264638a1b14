import pytest

from cipherflow.parser import BinOp, Var, parse
from cipherflow.ssa import (
    SsaAssign,
    SsaError,
    SsaIf,
    assert_single_assignment,
    to_ssa,
)


def ssa(text):
    prog = to_ssa(parse(text))
    assert_single_assignment(prog)
    return prog


def test_straight_line_renaming():
    prog = ssa("input x; s = x; s = s + x; s = s + x; output s;")
    dsts = [i.dst for i in prog.body]
    assert dsts == ["s", "s_1", "s_2"]
    assert prog.body[1].expr == BinOp("+", Var("s", 1), Var("x", 1))
    assert prog.outputs == (("s", "s_2", False),)


def test_repeat_unrolls_to_fresh_names():
    prog = ssa("input x; s = 0; repeat 3 { s = s + x; } output s;")
    dsts = [i.dst for i in prog.body]
    assert dsts == ["s", "s_1", "s_2", "s_3"]
    assert prog.outputs[0][1] == "s_3"


def test_if_produces_phi():
    prog = ssa("input t; if (t > 5) { f = t; } else { f = t - 1; } output f;")
    cond, branch = prog.body
    assert isinstance(cond, SsaAssign) and cond.dst == "_b1"
    assert isinstance(branch, SsaIf) and branch.cond == "_b1"
    (phi,) = branch.phis
    dst, tname, ename = phi
    assert dst == "f_2" and {tname, ename} == {"f", "f_1"}


def test_nested_if_phis_chain():
    prog = ssa(
        "input t;"
        "if (t > 500) { f = t; } else {"
        "  if (t > 250) { f = t - 1; } else { f = t - 2; }"
        "}"
        "output f;"
    )
    outer = prog.body[1]
    inner = outer.orelse[1]
    assert isinstance(inner, SsaIf)
    assert len(inner.phis) == 1 and len(outer.phis) == 1
    assert prog.outputs[0][1] == outer.phis[0][0]


def test_bool_condition_variable():
    prog = ssa("input x; b = x > 1; if (b) { y = 1; } else { y = 2; } output y;")
    assert prog.body[0].dst == "b"
    assert prog.body[1].cond == "b"


def test_undefined_variable_rejected():
    with pytest.raises(SsaError):
        ssa("y = x + 1; output y;")


def test_one_armed_definition_rejected_on_use():
    with pytest.raises(SsaError):
        ssa("input t; if (t > 1) { y = 2; } z = y + 1; output z;")


def test_one_armed_definition_rejected_as_output():
    with pytest.raises(SsaError):
        ssa("input t; if (t > 1) { y = 2; } output y;")


def test_variable_known_before_branch_survives_one_armed_update():
    prog = ssa("input t; y = 1; if (t > 1) { y = 2; } output y;")
    branch = prog.body[2]  # y assign, hoisted _b1 assign, then the if
    (phi,) = branch.phis
    assert phi[1] == "y_1" and phi[2] == "y"


def test_duplicate_input_rejected():
    with pytest.raises(SsaError):
        ssa("input x; input x; output x;")


def test_missing_output_rejected():
    with pytest.raises(SsaError):
        ssa("input x; y = x;")
