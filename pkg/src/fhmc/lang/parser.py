"""Tokenizer and recursive-descent parser for the modeling language."""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ..errors import ParseError, SemanticError
from .ast import (
    Assignment,
    Binary,
    Call,
    Command,
    ConstDecl,
    Ident,
    Ite,
    Label,
    Lit,
    Module,
    Pos,
    Program,
    Unary,
    Update,
    VarDecl,
    identifiers,
    rename_module,
)

KEYWORDS = {
    "dtmc", "probabilistic", "const", "double", "int", "bool", "module", "endmodule",
    "label", "init", "true", "false", "formula", "global", "mdp", "ctmc", "nondeterministic",
    "rewards", "endrewards", "endinit",
}
FUNCTIONS = {"ExactlyOneOf", "min", "max", "floor", "ceil", "mod"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+(?:\.(?!\.)\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"\n]*")
  | (?P<op><=>|->|=>|<=|>=|!=|\.\.|[-+*/()\[\]{};:,=<>!&|?'])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # id, kw, num, str, op, eof
    text: str
    line: int
    col: int

    @property
    def pos(self) -> Pos:
        return Pos(self.line, self.col)


def tokenize(text: str) -> list[Token]:
    out = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "id" and tok in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, tok, line, i - line_start + 1))
        i = m.end()
    out.append(Token("eof", "", line, i - line_start + 1))
    return out


def parse_number(text: str):
    if re.fullmatch(r"\d+", text):
        return int(text)
    return Fraction(text)  # decimal text is read exactly


class Parser:
    def __init__(self, text: str, filename: str | None = None):
        try:
            self.toks = tokenize(text)
        except ParseError as e:
            raise e.with_filename(filename) if filename else e
        self.i = 0
        self.limit = len(self.toks) - 1
        self.filename = filename

    # token helpers

    def peek(self, k: int = 0) -> Token:
        j = self.i + k
        if j >= self.limit:
            t = self.toks[min(self.limit, len(self.toks) - 1)]
            return Token("eof", "", t.line, t.col)
        return self.toks[j]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.peek()
        if t.kind == "eof":
            self.error("unexpected end of input", t)
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not (t.kind in ("op", "kw") and t.text == text):
            self.error(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return self.advance()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "id":
            self.error(f"expected identifier, found {t.text or 'end of input'!r}", t)
        return self.advance()

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col, self.filename)

    # program structure

    def parse_program(self) -> Program:
        model_type = "dtmc"
        if self.at("dtmc") or self.at("probabilistic"):
            self.advance()
        elif self.peek().kind == "kw" and self.peek().text in ("mdp", "ctmc", "nondeterministic"):
            self.error(f"only dtmc models are supported, found {self.peek().text!r}")
        constants, modules, labels = [], [], []
        while self.peek().kind != "eof":
            t = self.peek()
            if self.at("const"):
                constants += self.const_decl()
            elif self.at("module"):
                mod, consts = self.module()
                modules.append(mod)
                constants += consts
            elif self.at("label"):
                labels.append(self.label())
            else:
                self.error(f"unexpected {t.text!r}", t)
        prog = Program(model_type, tuple(constants), tuple(modules), tuple(labels))
        return resolve(prog, self.filename)

    def const_decl(self) -> list[ConstDecl]:
        self.expect("const")
        ctype = "int"
        if self.peek().kind == "kw" and self.peek().text in ("int", "double", "bool"):
            ctype = self.advance().text
        out = []
        while True:
            name = self.ident()
            value = None
            if self.accept("="):
                value = self.expr()
            out.append(ConstDecl(name.text, ctype, value, pos=name.pos))
            if not self.accept(","):
                break
        self.expect(";")
        return out

    def label(self) -> Label:
        start = self.expect("label")
        t = self.peek()
        if t.kind != "str":
            self.error("expected quoted label name", t)
        self.advance()
        self.expect("=")
        e = self.expr()
        self.expect(";")
        return Label(t.text[1:-1], e, pos=start.pos)

    def module(self):
        start = self.expect("module")
        name = self.ident()
        if self.accept("="):
            src = self.ident()
            self.expect("[")
            pairs = []
            while True:
                old = self.ident()
                self.expect("=")
                new = self.ident()
                pairs.append((old.text, new.text, old))
                if not self.accept(","):
                    break
            self.expect("]")
            self.accept("endmodule")
            return _Renamed(name.text, src.text, tuple(pairs), name.pos), []
        variables, commands, consts = [], [], []
        while not self.at("endmodule"):
            t = self.peek()
            if t.kind == "eof":
                self.error(f"module {name.text!r} is missing 'endmodule'", t)
            if self.at("["):
                commands.append(self.command())
            elif self.at("const"):
                consts += self.const_decl()
            elif t.kind == "id" and self.at(":", 1):
                variables.append(self.var_decl())
            else:
                self.error(f"unexpected {t.text!r} in module body", t)
        end = self.expect("endmodule")
        if not commands:
            self.error(f"module {name.text!r} has no commands", end)
        return Module(name.text, tuple(variables), tuple(commands), pos=start.pos), consts

    def var_decl(self) -> VarDecl:
        name = self.ident()
        self.expect(":")
        if self.accept("bool"):
            vtype, lo, hi = "bool", None, None
        else:
            self.expect("[")
            lo = self.expr()
            self.expect("..")
            hi = self.expr()
            self.expect("]")
            vtype = "int"
        init = None
        if self.accept("init"):
            init = self.expr()
        self.expect(";")
        return VarDecl(name.text, vtype, lo, hi, init, pos=name.pos)

    def command(self) -> Command:
        start = self.expect("[")
        action = None
        if self.peek().kind == "id":
            action = self.advance().text
        self.expect("]")
        guard = self.expr()
        self.expect("->")
        end = self._find_semicolon()
        updates = self.updates(self.i, end)
        self.i = end
        self.expect(";")
        return Command(action, guard, tuple(updates), pos=start.pos)

    # update lists

    def _find_semicolon(self) -> int:
        depth = 0
        j = self.i
        while j < len(self.toks) - 1:
            t = self.toks[j]
            if t.kind == "kw" and t.text in ("endmodule", "module", "label", "const", "formula") and depth == 0:
                break
            if t.kind == "op":
                if t.text in "([":
                    depth += 1
                elif t.text in ")]":
                    depth -= 1
                elif t.text == ";" and depth == 0:
                    return j
            j += 1
        self.error("missing ';' after command", self.toks[j])

    def _branch_colons(self, start: int, end: int) -> list[int]:
        """Top-level ':' tokens not closing a ternary ``?``."""
        depth, pending, out = 0, 0, []
        for j in range(start, end):
            t = self.toks[j]
            if t.kind != "op":
                continue
            if t.text in "([":
                depth += 1
            elif t.text in ")]":
                depth -= 1
            elif depth == 0 and t.text == "?":
                pending += 1
            elif depth == 0 and t.text == ":":
                if pending:
                    pending -= 1
                else:
                    out.append(j)
        return out

    def _separator(self, start: int, end: int) -> int:
        """Index of the '+' that ends the assignments in ``[start, end)``."""
        t = self.toks[start]
        if t.kind == "op" and t.text == "(":
            # parenthesized style: (a) & (b) & ... +
            j = start
            while True:
                j = self._match_paren(j, end)
                nxt = self.toks[j + 1] if j + 1 < end else None
                if nxt is not None and nxt.text == "&" and j + 2 < end and self.toks[j + 2].text == "(":
                    j += 2
                    continue
                if nxt is not None and nxt.kind == "op" and nxt.text == "+":
                    return j + 1
                break
        depth, last = 0, None
        for j in range(start, end):
            tj = self.toks[j]
            if tj.kind != "op":
                continue
            if tj.text in "([":
                depth += 1
            elif tj.text in ")]":
                depth -= 1
            elif tj.text == "+" and depth == 0:
                last = j
        if last is None:
            self.error("expected '+' between updates", self.toks[start])
        return last

    def _match_paren(self, j: int, end: int) -> int:
        depth = 0
        for k in range(j, end):
            t = self.toks[k]
            if t.kind == "op" and t.text == "(":
                depth += 1
            elif t.kind == "op" and t.text == ")":
                depth -= 1
                if depth == 0:
                    return k
        self.error("unbalanced parentheses", self.toks[j])

    def updates(self, start: int, end: int) -> list[Update]:
        colons = self._branch_colons(start, end)
        if not colons:
            return [Update(Lit(1), self._assignments(start, end), pos=self.toks[start].pos)]
        out = []
        pstart = start
        for k, c in enumerate(colons):
            astart = c + 1
            aend = self._separator(astart, colons[k + 1]) if k + 1 < len(colons) else end
            prob = self._sub(pstart, c, self.expr)
            out.append(Update(prob, self._assignments(astart, aend), pos=self.toks[pstart].pos))
            pstart = aend + 1
        return out

    def _sub(self, start: int, end: int, fn):
        saved = self.i, self.limit
        self.i, self.limit = start, end
        try:
            if start >= end:
                self.error("expected expression")
            out = fn()
            if self.i != end:
                self.error(f"unexpected {self.peek().text!r}")
            return out
        finally:
            self.i, self.limit = saved

    def _assignments(self, start: int, end: int) -> tuple:
        def run():
            if self.accept("true"):
                return ()
            out = [self._assignment()]
            while self.accept("&"):
                out.append(self._assignment())
            return tuple(out)

        return self._sub(start, end, run)

    def _assignment(self) -> Assignment:
        if self.accept("("):
            name = self.ident()
            self.expect("'")
            self.expect("=")
            e = self.expr()
            self.expect(")")
        else:
            name = self.ident()
            self.expect("'")
            self.expect("=")
            e = self.relational()  # '&' separates assignments here
        return Assignment(name.text, e, pos=name.pos)

    # expressions, lowest precedence first

    def expr(self):
        return self.ternary()

    def ternary(self):
        cond = self.iff()
        if self.at("?"):
            t = self.advance()
            then = self.ternary()
            self.expect(":")
            other = self.ternary()
            return Ite(cond, then, other, pos=t.pos)
        return cond

    def _left(self, ops, sub):
        e = sub()
        while self.peek().kind == "op" and self.peek().text in ops:
            t = self.advance()
            e = Binary(t.text, e, sub(), pos=t.pos)
        return e

    def iff(self):
        return self._left(("<=>",), self.implies)

    def implies(self):
        e = self.disj()
        if self.at("=>"):
            t = self.advance()
            return Binary("=>", e, self.implies(), pos=t.pos)
        return e

    def disj(self):
        return self._left(("|",), self.conj)

    def conj(self):
        return self._left(("&",), self.neg)

    def neg(self):
        if self.at("!"):
            t = self.advance()
            return Unary("!", self.neg(), pos=t.pos)
        return self.relational()

    def relational(self):
        e = self.additive()
        if self.peek().kind == "op" and self.peek().text in ("=", "!=", "<", "<=", ">", ">="):
            t = self.advance()
            e = Binary(t.text, e, self.additive(), pos=t.pos)
        return e

    def additive(self):
        return self._left(("+", "-"), self.multiplicative)

    def multiplicative(self):
        return self._left(("*", "/"), self.unary)

    def unary(self):
        if self.at("-"):
            t = self.advance()
            return Unary("-", self.unary(), pos=t.pos)
        if self.at("!"):
            t = self.advance()
            return Unary("!", self.unary(), pos=t.pos)
        return self.atom()

    def atom(self):
        t = self.peek()
        if t.kind == "num":
            self.advance()
            return Lit(parse_number(t.text), pos=t.pos)
        if self.at("true") or self.at("false"):
            self.advance()
            return Lit(t.text == "true", pos=t.pos)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id":
            self.advance()
            if t.text in FUNCTIONS and self.at("("):
                self.advance()
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args), pos=t.pos)
            return Ident(t.text, pos=t.pos)
        self.error(f"unexpected {t.text or 'end of input'!r}", t)


@dataclass(frozen=True)
class _Renamed:
    name: str
    source: str
    pairs: tuple
    pos: Pos


def _actions(mod: Module) -> set:
    return {c.action for c in mod.commands if c.action}


def _referenced(mod: Module) -> set:
    out = set()
    for c in mod.commands:
        out |= identifiers(c.guard)
        for u in c.updates:
            out |= identifiers(u.prob)
            for a in u.assignments:
                out.add(a.var)
                out |= identifiers(a.expr)
    return out


def resolve(prog: Program, filename: str | None = None) -> Program:
    """Expand renamings and run name checks."""

    def fail(msg, pos):
        raise SemanticError(msg, pos.line if pos else None, pos.col if pos else None, filename)

    by_name = {}
    for m in prog.modules:
        if m.name in by_name:
            fail(f"duplicate module {m.name!r}", m.pos)
        by_name[m.name] = m
    done = {}

    def get(name, stack=()):
        if name in done:
            return done[name]
        m = by_name.get(name)
        if m is None:
            return None
        if isinstance(m, _Renamed):
            if name in stack:
                fail(f"cyclic module renaming involving {name!r}", m.pos)
            src = get(m.source, stack + (name,))
            if src is None:
                fail(f"unknown module {m.source!r}", m.pos)
            known = {v.name for v in src.variables} | {c.name for c in prog.constants} | _actions(src)
            known |= _referenced(src)
            mapping = {}
            for old, new, tok in m.pairs:
                if old not in known:
                    fail(f"renaming of undeclared symbol {old!r}", tok.pos)
                if old in mapping:
                    fail(f"symbol {old!r} renamed twice", tok.pos)
                mapping[old] = new
            m = rename_module(src, m.name, mapping, pos=m.pos)
        done[name] = m
        return m

    modules = tuple(get(m.name) for m in prog.modules)
    prog = Program(prog.model_type, prog.constants, modules, prog.labels)
    check_names(prog, filename)
    return prog


def check_names(prog: Program, filename: str | None = None) -> None:
    def fail(msg, pos):
        raise SemanticError(msg, pos.line if pos else None, pos.col if pos else None, filename)

    consts = {}
    for c in prog.constants:
        if c.name in consts:
            fail(f"duplicate constant {c.name!r}", c.pos)
        if c.value is not None:
            for x in identifiers(c.value):
                if x not in consts:
                    fail(f"unknown identifier {x!r} in constant {c.name!r}", c.pos)
        consts[c.name] = c
    variables = {}
    for m in prog.modules:
        for v in m.variables:
            if v.name in variables or v.name in consts:
                fail(f"duplicate variable {v.name!r}", v.pos)
            variables[v.name] = v
    scope = set(consts) | set(variables)

    def check(e, pos):
        for x in identifiers(e):
            if x not in scope:
                fail(f"unknown identifier {x!r}", _ident_pos(e, x) or pos)

    for m in prog.modules:
        for v in m.variables:
            for e in (v.low, v.high, v.init):
                if e is not None:
                    for x in identifiers(e):
                        if x not in consts:
                            fail(f"unknown identifier {x!r}", v.pos)
        for c in m.commands:
            check(c.guard, c.pos)
            for u in c.updates:
                check(u.prob, u.pos)
                for a in u.assignments:
                    if a.var not in variables:
                        fail(f"assignment to unknown variable {a.var!r}", a.pos)
                    check(a.expr, a.pos)
    seen = set()
    for lab in prog.labels:
        if lab.name in seen:
            fail(f"duplicate label {lab.name!r}", lab.pos)
        seen.add(lab.name)
        check(lab.expr, lab.pos)


def _ident_pos(e, name):
    if isinstance(e, Ident):
        return e.pos if e.name == name else None
    for child in (getattr(e, f, None) for f in ("arg", "left", "right", "cond", "then", "other")):
        if child is not None and (found := _ident_pos(child, name)):
            return found
    for child in getattr(e, "args", ()):
        if found := _ident_pos(child, name):
            return found
    return None


def parse(text: str, filename: str | None = None) -> Program:
    return Parser(text, filename).parse_program()


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


def parse_expr(text: str):
    p = Parser(text)
    e = p.expr()
    if p.peek().kind != "eof":
        p.error(f"unexpected {p.peek().text!r}")
    return e
