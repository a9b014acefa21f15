"""Semantics: constant folding, one-step distributions and explicit builds.

A :class:`Model` is a program with constants evaluated and variable
domains fixed. Parameters (constants declared without a value) evaluate to
:class:`~fhmc.poly.Polynomial` unless a valuation pins them.
"""
from __future__ import annotations

import itertools
import math
import os
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from ..chain import MarkovChain
from ..errors import (
    DataRace,
    EvaluationError,
    ModelDivisionByZero,
    OutOfDomain,
    OverlappingGuards,
    SemanticError,
    StateCapExceeded,
)
from ..poly import Polynomial, is_symbolic, normalize
from .ast import Binary, Call, Expr, Ident, Ite, Lit, Program, Unary
from .parser import parse, parse_expr

DEFAULT_MAX_STATES = 1_000_000


def max_states_default() -> int:
    return int(os.environ.get("FHMC_MAX_STATES", DEFAULT_MAX_STATES))


@dataclass(frozen=True)
class Variable:
    name: str
    module: str
    low: int
    high: int
    init: int
    is_bool: bool

    @property
    def size(self) -> int:
        return self.high - self.low + 1


@dataclass(frozen=True)
class CompiledCommand:
    index: int
    module: int
    action: str | None
    guard: Expr
    updates: tuple  # (prob Expr, ((var index, Expr), ...))
    pos: object = None


def _fail(cls, msg, node=None):
    pos = getattr(node, "pos", None)
    if pos is None:
        return cls(msg)
    return cls(msg, pos.line, pos.col)


def truth(v, node=None) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, Fraction)) and v in (0, 1):
        return bool(v)
    raise _fail(EvaluationError, f"expected a boolean, got {v}", node)


def _num(v, node=None):
    if isinstance(v, bool):
        raise _fail(EvaluationError, "expected a number, got a boolean", node)
    return v


def _concrete(v, node=None):
    if is_symbolic(v):
        raise _fail(EvaluationError, f"comparison involves parameter expression {v}", node)
    return v


def _div(a, b, node=None):
    a, b = _num(a, node), _num(b, node)
    if isinstance(b, Polynomial):
        if not b.is_constant():
            raise _fail(EvaluationError, f"division by parameter expression {b}", node)
        b = b.constant_value()
    if b == 0:
        raise _fail(ModelDivisionByZero, "division by zero", node)
    if isinstance(a, Polynomial):
        return a / b
    return Fraction(a) / Fraction(b)


_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}
_REL = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def apply_unary(op: str, v, node=None):
    if op == "!":
        return not truth(v, node)
    v = _num(v, node)
    return -v if isinstance(v, int) else normalize(-v)


def apply_binary(op: str, a, b, node=None):
    """Strict (non short-circuit) binary operator on concrete values."""
    if op == "&":
        return truth(a, node) and truth(b, node)
    if op == "|":
        return truth(a, node) or truth(b, node)
    if op == "=>":
        return (not truth(a, node)) or truth(b, node)
    if op == "<=>":
        return truth(a, node) == truth(b, node)
    if op in _ARITH:
        r = _ARITH[op](_num(a, node), _num(b, node))
        return r if isinstance(r, int) else normalize(r)
    if op == "/":
        return normalize(_div(a, b, node))
    if op in _REL:
        if op in ("=", "!=") and (isinstance(a, bool) or isinstance(b, bool)):
            return _REL[op](truth(a, node), truth(b, node))
        return _REL[op](_concrete(a, node), _concrete(b, node))
    raise _fail(EvaluationError, f"unknown operator {op!r}", node)


def apply_call(f: str, args: list, node=None):
    if f == "ExactlyOneOf":
        return sum(truth(a, node) for a in args) == 1
    if f in ("min", "max"):
        vals = [_concrete(_num(a, node), node) for a in args]
        return min(vals) if f == "min" else max(vals)
    if f in ("floor", "ceil") and len(args) == 1:
        a = _concrete(_num(args[0], node), node)
        return math.floor(a) if f == "floor" else math.ceil(a)
    if f == "mod" and len(args) == 2:
        a, b = (_concrete(_num(x, node), node) for x in args)
        if b == 0:
            raise _fail(ModelDivisionByZero, "mod by zero", node)
        return a % b
    raise _fail(EvaluationError, f"bad call to {f}", node)


def eval_in(e, env: dict):
    """Evaluate ``e`` where ``env`` maps every identifier to its value."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Ident):
        try:
            return env[e.name]
        except KeyError:
            raise _fail(EvaluationError, f"unknown identifier {e.name!r}", e) from None
    if isinstance(e, Unary):
        return apply_unary(e.op, eval_in(e.arg, env), e)
    if isinstance(e, Binary):
        op = e.op
        # short-circuit so guarded subexpressions are not evaluated
        if op == "&":
            return truth(eval_in(e.left, env), e) and truth(eval_in(e.right, env), e)
        if op == "|":
            return truth(eval_in(e.left, env), e) or truth(eval_in(e.right, env), e)
        if op == "=>":
            return (not truth(eval_in(e.left, env), e)) or truth(eval_in(e.right, env), e)
        return apply_binary(op, eval_in(e.left, env), eval_in(e.right, env), e)
    if isinstance(e, Ite):
        return eval_in(e.then if truth(eval_in(e.cond, env), e) else e.other, env)
    if isinstance(e, Call):
        return apply_call(e.func, [eval_in(a, env) for a in e.args], e)
    raise _fail(EvaluationError, f"cannot evaluate {e!r}", e)


def _as_int(v, what, node=None) -> int:
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    raise _fail(SemanticError, f"{what} must be an integer, got {v}", node)


class Model:
    """A program with constants folded and variable domains fixed."""

    def __init__(self, program: Program, constants: dict | None = None):
        self.program = program
        overrides = dict(constants or {})
        unknown = set(overrides) - {c.name for c in program.constants}
        if unknown:
            raise SemanticError(f"unknown constant(s) {sorted(unknown)}")
        self.constants: dict = {}
        params = []
        for c in program.constants:
            if c.name in overrides:
                val = overrides[c.name]
            elif c.value is None:
                if c.type != "double":
                    raise _fail(SemanticError, f"{c.type} constant {c.name!r} has no value", c)
                params.append(c.name)
                self.constants[c.name] = Polynomial.var(c.name)
                continue
            else:
                val = eval_in(c.value, self.constants)
            self.constants[c.name] = self._coerce_const(c, val)
        self.parameters = tuple(params)
        self.variables: list[Variable] = []
        for m in program.modules:
            for v in m.variables:
                if v.type == "bool":
                    lo, hi = 0, 1
                    init = int(truth(eval_in(v.init, self.constants), v)) if v.init is not None else 0
                else:
                    lo = _as_int(eval_in(v.low, self.constants), "lower bound", v)
                    hi = _as_int(eval_in(v.high, self.constants), "upper bound", v)
                    if hi < lo:
                        raise _fail(SemanticError, f"empty range for {v.name!r}", v)
                    init = _as_int(eval_in(v.init, self.constants), "initial value", v) if v.init is not None else lo
                if not lo <= init <= hi:
                    raise _fail(SemanticError, f"initial value of {v.name!r} outside its range", v)
                self.variables.append(Variable(v.name, m.name, lo, hi, init, v.type == "bool"))
        self.var_index = {v.name: i for i, v in enumerate(self.variables)}
        self.module_names = [m.name for m in program.modules]
        self.commands: list[CompiledCommand] = []
        self.action_modules: dict = {}
        for mi, m in enumerate(program.modules):
            for c in m.commands:
                ups = tuple(
                    (u.prob, tuple((self.var_index[a.var], a.expr) for a in u.assignments)) for u in c.updates
                )
                self.commands.append(CompiledCommand(len(self.commands), mi, c.action, c.guard, ups, c.pos))
                if c.action:
                    mods = self.action_modules.setdefault(c.action, [])
                    if mi not in mods:
                        mods.append(mi)
        self.labels = {lab.name: lab.expr for lab in program.labels}
        self.initial = tuple(v.init for v in self.variables)

    @staticmethod
    def _coerce_const(c, val):
        if c.type == "bool":
            return truth(val, c)
        if c.type == "int":
            return _as_int(val, f"constant {c.name!r}", c)
        if is_symbolic(val):
            return normalize(val)
        return Fraction(val) if not isinstance(val, Fraction) else val

    @classmethod
    def from_source(cls, text: str, constants: dict | None = None, filename: str | None = None) -> Model:
        return cls(parse(text, filename), constants)

    @property
    def is_parametric(self) -> bool:
        return bool(self.parameters)

    def base_env(self, valuation=None) -> dict:
        env = dict(self.constants)
        if valuation:
            for k, v in valuation.items():
                if k in self.parameters:
                    env[k] = v if isinstance(v, float) else Fraction(v)
        return env

    def env(self, state: tuple, valuation=None, base: dict | None = None) -> dict:
        env = dict(base) if base is not None else self.base_env(valuation)
        for v, x in zip(self.variables, state):
            env[v.name] = bool(x) if v.is_bool else x
        return env

    def target_expr(self, target):
        if target is None:
            return None
        if isinstance(target, Expr):
            return target
        if target in self.labels:
            return self.labels[target]
        return parse_expr(target)

    def state_dict(self, state: tuple) -> dict:
        return {v.name: (bool(x) if v.is_bool else x) for v, x in zip(self.variables, state)}


def eval_expr(e, state, model: Model, valuation=None):
    """Value of ``e`` at ``state`` (tuple or name mapping) under ``valuation``."""
    if isinstance(e, str):
        e = parse_expr(e)
    if isinstance(state, dict):
        env = model.base_env(valuation)
        env.update(state)
    else:
        env = model.env(tuple(state), valuation)
    return eval_in(e, env)


def _check_branches(probs, model, state, cmd):
    if any(is_symbolic(p) for p in probs):
        return
    for p in probs:
        if not 0 <= p <= 1:
            raise _fail(EvaluationError, f"probability {p} outside [0,1] at state {model.state_dict(state)}", cmd)
    total = sum(probs, Fraction(0))
    if total != 1:
        raise _fail(EvaluationError, f"probabilities sum to {total} at state {model.state_dict(state)}", cmd)


def enabled_commands(model: Model, env: dict) -> list[CompiledCommand]:
    return [c for c in model.commands if truth(eval_in(c.guard, env), c.guard)]


def action_choices(model: Model, enabled: list[CompiledCommand], overlap: str = "uniform", state=None):
    """Enabled actions as ``(weight, [per-module enabled command lists])``.

    The weight of a named action is the product over its modules of the
    number of enabled commands with that action; anonymous commands are
    singleton actions of weight 1.
    """
    out = []
    by_action: dict = {}
    for c in enabled:
        if c.action is None:
            out.append((1, [[c]]))
        else:
            by_action.setdefault(c.action, {}).setdefault(c.module, []).append(c)
    for a, mods in model.action_modules.items():
        per = by_action.get(a, {})
        if any(mi not in per for mi in mods):
            continue
        lists = [per[mi] for mi in mods]
        if overlap == "reject":
            for mi, lst in zip(mods, lists):
                if len(lst) > 1:
                    raise _fail(
                        OverlappingGuards,
                        f"action {a!r} has {len(lst)} enabled commands in module {model.module_names[mi]!r}"
                        + (f" at state {model.state_dict(state)}" if state is not None else ""),
                        lst[1],
                    )
        out.append((math.prod(len(lst) for lst in lists), lists))
    return out


def step_semantics(model: Model, state: tuple, valuation=None, overlap: str = "uniform", base=None) -> dict:
    """One-step distribution from ``state`` as ``{successor: probability}``."""
    state = tuple(state)
    env = model.env(state, valuation, base)
    choices = action_choices(model, enabled_commands(model, env), overlap, state)
    total = sum(w for w, _ in choices)
    if total == 0:
        return {state: Fraction(1)}
    out: dict = {}
    for w, lists in choices:
        pa = Fraction(w, total)
        for combo in itertools.product(*lists):
            pc = pa / math.prod(len(lst) for lst in lists)
            branch_lists = []
            for cmd in combo:
                probs = [normalize(eval_in(p, env)) for p, _ in cmd.updates]
                _check_branches(probs, model, state, cmd)
                branch_lists.append([(p, asg, cmd) for p, (_, asg) in zip(probs, cmd.updates) if p != 0])
            for picks in itertools.product(*branch_lists):
                prob = pc
                writes: dict = {}
                for p, asg, cmd in picks:
                    prob = prob * p
                    for vi, e in asg:
                        if vi in writes:
                            raise _fail(
                                DataRace,
                                f"variable {model.variables[vi].name!r} written twice at state {model.state_dict(state)}",
                                cmd,
                            )
                        writes[vi] = (eval_in(e, env), e)
                nxt = list(state)
                for vi, (val, e) in writes.items():
                    var = model.variables[vi]
                    if var.is_bool:
                        ival = int(truth(val, e))
                    else:
                        if is_symbolic(val):
                            raise _fail(EvaluationError, "parameter in assignment", e)
                        if not (isinstance(val, int) or (isinstance(val, Fraction) and val.denominator == 1)):
                            raise _fail(OutOfDomain, f"non-integer value {val} for {var.name!r}", e)
                        ival = int(val)
                    if not var.low <= ival <= var.high:
                        raise _fail(
                            OutOfDomain,
                            f"{var.name!r} := {ival} leaves [{var.low}..{var.high}] at state {model.state_dict(state)}",
                            e,
                        )
                    nxt[vi] = ival
                key = tuple(nxt)
                out[key] = out.get(key, 0) + prob
    return {k: normalize(v) for k, v in out.items() if v != 0}


def explore(model: Model, valuation=None, overlap: str = "uniform", cap: int | None = None):
    """BFS over reachable states; returns (states, rows as lists of (index, prob))."""
    cap = max_states_default() if cap is None else cap
    base = model.base_env(valuation)
    index = {model.initial: 0}
    states = [model.initial]
    rows = []
    queue = deque([model.initial])
    while queue:
        s = queue.popleft()
        dist = step_semantics(model, s, valuation, overlap, base)
        row = []
        for t in sorted(dist):
            if t not in index:
                if len(states) >= cap:
                    raise StateCapExceeded(f"more than {cap} reachable states")
                index[t] = len(states)
                states.append(t)
                queue.append(t)
            row.append((index[t], dist[t]))
        rows.append(row)
    return states, rows


def build_explicit(model, target=None, valuation=None, overlap: str = "uniform", cap: int | None = None) -> MarkovChain:
    """Explicit (p)MC over the reachable states, numbered in BFS order."""
    if isinstance(model, Program):
        model = Model(model)
    states, rows = explore(model, valuation, overlap, cap)
    texpr = model.target_expr(target)
    base = model.base_env(valuation)
    targets = []
    if texpr is not None:
        targets = [i for i, s in enumerate(states) if truth(eval_in(texpr, model.env(s, base=base)), texpr)]
    params = () if valuation else model.parameters
    return MarkovChain(
        rows,
        initial=0,
        targets=targets,
        parameters=params,
        variables=[v.name for v in model.variables],
        valuations=states,
    )


def check_guard_overlap(model, cap: int | None = None) -> list[tuple]:
    """``(module, action, state)`` for reachable states where same-action guards overlap."""
    if isinstance(model, Program):
        model = Model(model)
    states, _ = explore(model, cap=cap)
    base = model.base_env()
    report = []
    for s in states:
        env = model.env(s, base=base)
        counts: dict = {}
        for c in enabled_commands(model, env):
            if c.action is not None:
                key = (c.module, c.action)
                counts[key] = counts.get(key, 0) + 1
        for (mi, a), n in sorted(counts.items()):
            if n > 1:
                report.append((model.module_names[mi], a, s))
    return report
