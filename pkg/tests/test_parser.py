import pytest

from cipherflow.parser import (
    Assign,
    BinOp,
    CmpOp,
    If,
    Lit,
    OutputDecl,
    ParseError,
    Repeat,
    Var,
    parse,
)


def test_simple_program():
    prog = parse("input a; input b; c = a + b; output c;")
    assert prog.inputs == ["a", "b"]
    assert [o.name for o in prog.outputs] == ["c"]
    assign = prog.stmts[2]
    assert assign == Assign("c", BinOp("+", Var("a", 1), Var("b", 1)), 1)


def test_literals_and_operators():
    prog = parse("x = 1.5 * -2; y = x - 3;")
    assert prog.stmts[0].expr == BinOp("*", Lit("1.5", 1), Lit("-2", 1))
    assert prog.stmts[1].expr.op == "-"


def test_comparison_relations():
    for text, rel in [(">", "GT"), (">=", "GTE"), ("==", "EQ"), ("<", "LT"), ("<=", "LTE")]:
        prog = parse(f"b = x {text} 5;")
        assert prog.stmts[0].expr == CmpOp(rel, Var("x", 1), Lit("5", 1))


def test_if_else_blocks():
    prog = parse("if (t > 500) { f = t * 0.9; } else { f = t; }")
    stmt = prog.stmts[0]
    assert isinstance(stmt, If)
    assert isinstance(stmt.cond, CmpOp)
    assert len(stmt.then) == 1 and len(stmt.orelse) == 1


def test_if_with_bool_variable_condition():
    prog = parse("b = x > 1; if (b) { y = 2; }")
    stmt = prog.stmts[1]
    assert stmt.cond == Var("b", 1)
    assert stmt.orelse == ()


def test_repeat():
    prog = parse("repeat 3 { s = s + x; }")
    stmt = prog.stmts[0]
    assert isinstance(stmt, Repeat)
    assert stmt.count == 3
    assert len(stmt.body) == 1


def test_output_as_mul():
    prog = parse("output y as mul; output z;")
    assert prog.outputs[0] == OutputDecl("y", True, 1)
    assert prog.outputs[1] == OutputDecl("z", False, 1)


def test_comments_and_whitespace():
    prog = parse("# header\nx = 1; # trailing\n\n  y = x;  ")
    assert len(prog.stmts) == 2


def test_error_positions():
    with pytest.raises(ParseError) as err:
        parse("x = 1;\ny = $;")
    assert err.value.line == 2

    with pytest.raises(ParseError):
        parse("x = ;")
    with pytest.raises(ParseError):
        parse("if (x > 1) { y = 2;")  # unbalanced brace
    with pytest.raises(ParseError):
        parse("repeat -2 { x = 1; }")
    with pytest.raises(ParseError):
        parse("repeat 1.5 { x = 1; }")
    with pytest.raises(ParseError):
        parse("output x as add;")


def test_underscore_identifiers_rejected():
    with pytest.raises(ParseError):
        parse("_x = 1;")


def test_keywords_are_not_identifiers():
    with pytest.raises(ParseError):
        parse("input = 1;")
