"""Parser for the mini imperative source language.

The language is deliberately small: declarations, assignments of atomic
expressions, comparisons, if/else, and literally-bounded repeat loops.

    input price1;
    input price2;
    total = price1 + price2;
    if (total > 500) { final = total * 0.9; } else { final = total; }
    output final;

Grammar (EBNF-ish)::

    program   := { statement }
    statement := "input" IDENT ";"
               | "output" IDENT [ "as" "mul" ] ";"
               | IDENT "=" expr ";"
               | "if" "(" cond ")" block [ "else" block ]
               | "repeat" INT block
    expr      := atom [ ("+" | "-" | "*") atom ]
               | atom REL atom
    cond      := IDENT | atom REL atom
    atom      := IDENT | NUMBER
    REL       := ">" | ">=" | "==" | "<" | "<="
    block     := "{" { statement } "}"

Identifiers start with a letter and contain only letters and digits; the
underscore is reserved for compiler-generated names.  Numbers are decimal
with an optional fraction and optional leading minus.  ``#`` starts a
comment running to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = [
    "ParseError",
    "Lit",
    "Var",
    "BinOp",
    "CmpOp",
    "Assign",
    "InputDecl",
    "OutputDecl",
    "If",
    "Repeat",
    "Program",
    "parse",
    "RELATIONS",
]

RELATIONS = {">": "GT", ">=": "GTE", "==": "EQ", "<": "LT", "<=": "LTE"}

KEYWORDS = {"input", "output", "if", "else", "repeat", "as", "mul"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>>=|<=|==|[+\-*=<>(){};])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | kw | op
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class Lit:
    text: str
    line: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    line: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str  # + - *
    left: object
    right: object


@dataclass(frozen=True)
class CmpOp:
    rel: str  # GT GTE EQ LT LTE
    left: object
    right: object


@dataclass(frozen=True)
class Assign:
    target: str
    expr: object
    line: int = 0


@dataclass(frozen=True)
class InputDecl:
    name: str
    line: int = 0


@dataclass(frozen=True)
class OutputDecl:
    name: str
    as_mul: bool = False
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: object  # Var or CmpOp
    then: tuple
    orelse: tuple
    line: int = 0


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple
    line: int = 0


@dataclass(frozen=True)
class Program:
    stmts: tuple

    @property
    def inputs(self):
        return [s.name for s in self.stmts if isinstance(s, InputDecl)]

    @property
    def outputs(self):
        return [s for s in self.stmts if isinstance(s, OutputDecl)]


def _tokenize(text: str):
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        col = m.start() - line_start + 1
        if m.lastgroup == "ws":
            line += m.group().count("\n")
            nl = m.group().rfind("\n")
            if nl >= 0:
                line_start = m.start() + nl + 1
        elif m.lastgroup == "num":
            tokens.append(Token("num", m.group(), line, col))
        elif m.lastgroup == "ident":
            kind = "kw" if m.group() in KEYWORDS else "ident"
            tokens.append(Token(kind, m.group(), line, col))
        else:
            tokens.append(Token("op", m.group(), line, col))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens, text_len_line: int):
        self.tokens = tokens
        self.pos = 0
        self.last_line = text_len_line

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.last_line, 1)
        self.pos += 1
        return tok

    def expect(self, text: str):
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def program(self):
        stmts = []
        while self.peek() is not None:
            stmts.append(self.statement())
        return Program(tuple(stmts))

    def statement(self):
        tok = self.peek()
        if tok.kind == "kw" and tok.text == "input":
            self.next()
            name = self.ident()
            self.expect(";")
            return InputDecl(name.text, name.line)
        if tok.kind == "kw" and tok.text == "output":
            self.next()
            name = self.ident()
            as_mul = False
            if self.peek() and self.peek().text == "as":
                self.next()
                self.expect("mul")
                as_mul = True
            self.expect(";")
            return OutputDecl(name.text, as_mul, name.line)
        if tok.kind == "kw" and tok.text == "if":
            return self.if_stmt()
        if tok.kind == "kw" and tok.text == "repeat":
            return self.repeat_stmt()
        if tok.kind == "ident":
            name = self.next()
            self.expect("=")
            expr = self.expr()
            self.expect(";")
            return Assign(name.text, expr, name.line)
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    def ident(self):
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(f"expected identifier, found {tok.text!r}", tok.line, tok.col)
        return tok

    def atom(self):
        tok = self.next()
        if tok.kind == "num":
            return Lit(tok.text, tok.line)
        if tok.kind == "ident":
            return Var(tok.text, tok.line)
        raise ParseError(f"expected value, found {tok.text!r}", tok.line, tok.col)

    def expr(self):
        left = self.atom()
        tok = self.peek()
        if tok is not None and tok.text in ("+", "-", "*"):
            self.next()
            right = self.atom()
            return BinOp(tok.text, left, right)
        if tok is not None and tok.text in RELATIONS:
            self.next()
            right = self.atom()
            return CmpOp(RELATIONS[tok.text], left, right)
        return left

    def if_stmt(self):
        start = self.expect("if")
        self.expect("(")
        cond = self.cond()
        self.expect(")")
        then = self.block()
        orelse = ()
        if self.peek() is not None and self.peek().text == "else":
            self.next()
            orelse = self.block()
        return If(cond, then, orelse, start.line)

    def cond(self):
        left = self.atom()
        tok = self.peek()
        if tok is not None and tok.text in RELATIONS:
            self.next()
            right = self.atom()
            return CmpOp(RELATIONS[tok.text], left, right)
        if isinstance(left, Var):
            return left
        raise ParseError("branch condition must be a variable or comparison", left.line, 1)

    def repeat_stmt(self):
        start = self.expect("repeat")
        tok = self.next()
        if tok.kind != "num" or "." in tok.text or tok.text.startswith("-"):
            raise ParseError("repeat bound must be a positive integer literal", tok.line, tok.col)
        count = int(tok.text)
        body = self.block()
        return Repeat(count, body, start.line)

    def block(self):
        self.expect("{")
        stmts = []
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unbalanced brace", self.last_line, 1)
            if tok.text == "}":
                self.next()
                return tuple(stmts)
            stmts.append(self.statement())


def parse(text: str) -> Program:
    tokens = _tokenize(text)
    last_line = text.count("\n") + 1
    parser = _Parser(tokens, last_line)
    return parser.program()
