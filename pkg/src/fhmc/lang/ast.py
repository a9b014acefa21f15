"""Syntax tree of the guarded-command modeling language.

Source positions are carried along for error messages but excluded from
equality, so two programs compare equal when they mean the same text.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


def _pos():
    return field(default=None, compare=False, repr=False)


class Expr:
    pass


@dataclass(frozen=True)
class Lit(Expr):
    value: object  # int, Fraction or bool
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Ident(Expr):
    name: str
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "!" or "-"
    arg: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Assignment:
    var: str
    expr: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Update:
    prob: Expr
    assignments: tuple  # of Assignment; empty means "true" (no change)
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Command:
    action: str | None
    guard: Expr
    updates: tuple  # of Update
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: str  # "bool" or "int"
    low: Expr | None
    high: Expr | None
    init: Expr | None
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Module:
    name: str
    variables: tuple  # of VarDecl
    commands: tuple  # of Command
    origin: tuple | None = field(default=None, compare=False)  # (source, ((old, new), ...))
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: str  # "int", "double" or "bool"
    value: Expr | None
    pos: Pos | None = _pos()

    @property
    def is_parameter(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class Label:
    name: str
    expr: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Program:
    model_type: str
    constants: tuple
    modules: tuple
    labels: tuple

    @property
    def parameters(self) -> tuple:
        return tuple(c.name for c in self.constants if c.is_parameter)

    def module(self, name: str) -> Module:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)

    def label(self, name: str) -> Label:
        for lab in self.labels:
            if lab.name == name:
                return lab
        raise KeyError(name)


def substitute(e, mapping: dict):
    """Simultaneous identifier renaming inside an expression."""
    if isinstance(e, Ident):
        return replace(e, name=mapping.get(e.name, e.name))
    if isinstance(e, Unary):
        return replace(e, arg=substitute(e.arg, mapping))
    if isinstance(e, Binary):
        return replace(e, left=substitute(e.left, mapping), right=substitute(e.right, mapping))
    if isinstance(e, Ite):
        return replace(
            e,
            cond=substitute(e.cond, mapping),
            then=substitute(e.then, mapping),
            other=substitute(e.other, mapping),
        )
    if isinstance(e, Call):
        return replace(e, args=tuple(substitute(a, mapping) for a in e.args))
    return e


def identifiers(e) -> set:
    if isinstance(e, Ident):
        return {e.name}
    if isinstance(e, Unary):
        return identifiers(e.arg)
    if isinstance(e, Binary):
        return identifiers(e.left) | identifiers(e.right)
    if isinstance(e, Ite):
        return identifiers(e.cond) | identifiers(e.then) | identifiers(e.other)
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= identifiers(a)
        return out
    return set()


def rename_module(src: Module, name: str, mapping: dict, pos=None) -> Module:
    def ren(x):
        return mapping.get(x, x)

    variables = tuple(
        replace(
            v,
            name=ren(v.name),
            low=substitute(v.low, mapping) if v.low is not None else None,
            high=substitute(v.high, mapping) if v.high is not None else None,
            init=substitute(v.init, mapping) if v.init is not None else None,
        )
        for v in src.variables
    )
    commands = tuple(
        replace(
            c,
            action=ren(c.action) if c.action else c.action,
            guard=substitute(c.guard, mapping),
            updates=tuple(
                replace(
                    u,
                    prob=substitute(u.prob, mapping),
                    assignments=tuple(
                        replace(a, var=ren(a.var), expr=substitute(a.expr, mapping)) for a in u.assignments
                    ),
                )
                for u in c.updates
            ),
        )
        for c in src.commands
    )
    return Module(name, variables, commands, origin=(src.name, tuple(mapping.items())), pos=pos)
