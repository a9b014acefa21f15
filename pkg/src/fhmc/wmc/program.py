"""Causal encoding of a guarded-command program.

The symbolic state maps every variable to a value map ``{value: BDD}``
whose conditions partition the coin space. Each step evaluates guards and
probabilities symbolically (expanding state-dependent expressions into
their possible values), flips coins for action, command and update
choices, and writes the new values in parallel. A latched ``hit`` flag
makes targets absorbing; the result is ``hit`` after ``h`` steps.
"""
from __future__ import annotations

from fractions import Fraction

from ..dd import Manager
from ..errors import DataRace, EvaluationError, OutOfDomain
from ..lang.ast import Binary, Call, Ident, Ite, Lit, Program, Unary
from ..lang.model import Model, _fail, apply_binary, apply_call, apply_unary, truth
from ..poly import is_symbolic, normalize, sort_key
from .coins import CoinAllocator, Encoding, coin_chain_or_quotient


class SymbolicEvaluator:
    """Evaluates expressions over a symbolic state into value maps."""

    def __init__(self, model: Model, m: Manager, consts: dict):
        self.model = model
        self.m = m
        self.consts = consts
        self.state: dict = {}

    def _join(self, maps, fn, care, node):
        m = self.m
        out: dict = {}
        combos = [((), care)]
        for vm in maps:
            nxt = []
            for vals, cond in combos:
                for v, c in vm.items():
                    cc = m.and_(cond, c)
                    if cc != m.false:
                        nxt.append((vals + (v,), cc))
            combos = nxt
        for vals, cond in combos:
            r = fn(*vals)
            out[r] = m.or_(out.get(r, m.false), cond)
        return out

    def ev(self, e, care: int) -> dict:
        m = self.m
        if care == m.false:
            return {}
        if isinstance(e, Lit):
            return {e.value: care}
        if isinstance(e, Ident):
            if e.name in self.state:
                vm = self.state[e.name]
                out = {}
                for v, c in vm.items():
                    cc = m.and_(c, care)
                    if cc != m.false:
                        out[v] = cc
                return out
            if e.name in self.consts:
                return {self.consts[e.name]: care}
            raise _fail(EvaluationError, f"unknown identifier {e.name!r}", e)
        if isinstance(e, Unary):
            return self._join([self.ev(e.arg, care)], lambda a: apply_unary(e.op, a, e), care, e)
        if isinstance(e, Binary):
            if e.op in ("&", "|", "=>"):
                left = self.as_bdd(e.left, care)
                if e.op == "&":
                    right = self.as_bdd(e.right, m.and_(care, left))
                    t = m.and_(left, right)
                elif e.op == "|":
                    right = self.as_bdd(e.right, m.and_(care, m.not_(left)))
                    t = m.or_(left, right)
                else:
                    right = self.as_bdd(e.right, m.and_(care, left))
                    t = m.or_(m.and_(care, m.not_(left)), right)
                return self._bool_map(t, care)
            a = self.ev(e.left, care)
            b = self.ev(e.right, care)
            return self._join([a, b], lambda x, y: apply_binary(e.op, x, y, e), care, e)
        if isinstance(e, Ite):
            c = self.as_bdd(e.cond, care)
            out: dict = {}
            for part in (self.ev(e.then, m.and_(care, c)), self.ev(e.other, m.and_(care, m.not_(c)))):
                for v, cc in part.items():
                    out[v] = m.or_(out.get(v, m.false), cc)
            return out
        if isinstance(e, Call):
            if e.func == "ExactlyOneOf":
                zero, one = care, m.false
                for arg in e.args:
                    a = self.as_bdd(arg, care)
                    one = m.or_(m.and_(one, m.not_(a)), m.and_(zero, a))
                    zero = m.and_(zero, m.not_(a))
                return self._bool_map(one, care)
            maps = [self.ev(a, care) for a in e.args]
            return self._join(maps, lambda *xs: apply_call(e.func, list(xs), e), care, e)
        raise _fail(EvaluationError, f"cannot evaluate {e!r}", e)

    def _bool_map(self, t: int, care: int) -> dict:
        m = self.m
        t = m.and_(t, care)
        f = m.and_(care, m.not_(t))
        out = {}
        if t != m.false:
            out[True] = t
        if f != m.false:
            out[False] = f
        return out

    def as_bdd(self, e, care: int) -> int:
        m = self.m
        out = m.false
        for v, c in self.ev(e, care).items():
            if truth(v, e):
                out = m.or_(out, c)
        return out


def set_predicate(m: Manager, state: dict, variables: list, states) -> int:
    """BDD for "current state is one of ``states``" as nested case splits."""
    memo = {}
    names = [v.name for v in variables]

    def build(i, subset):
        if not subset:
            return m.false
        if i == len(names):
            return m.true
        key = (i, subset)
        if key in memo:
            return memo[key]
        groups: dict = {}
        for s in subset:
            groups.setdefault(s[i], []).append(s)
        out = m.false
        for val, members in sorted(groups.items()):
            cond = _lookup(state[names[i]], val, variables[i].is_bool)
            if cond != m.false:
                out = m.or_(out, m.and_(cond, build(i + 1, frozenset(members))))
        memo[key] = out
        return out

    return build(0, frozenset(tuple(s) for s in states))


def _lookup(vm: dict, val: int, is_bool: bool) -> int:
    key = bool(val) if is_bool else val
    for v, c in vm.items():
        if v == key and isinstance(v, bool) == is_bool:
            return c
    return 0


def unroll_program(
    model,
    h: int,
    target=None,
    valuation=None,
    overlap: str = "uniform",
    max_nodes: int | None = None,
    target_states=None,
) -> Encoding:
    """Causal encoding of ``<=h`` reachability for a program.

    ``target`` is a label name or expression; alternatively
    ``target_states`` lists state valuations (tuples in variable order).
    With a ``valuation`` the parameters are fixed and weights are constant.
    """
    if h < 0:
        raise ValueError("horizon must be non-negative")
    if isinstance(model, str):
        model = Model.from_source(model)
    elif isinstance(model, Program):
        model = Model(model)
    m = Manager(max_nodes=max_nodes)
    alloc = CoinAllocator(m)
    consts = model.base_env(valuation)
    ev = SymbolicEvaluator(model, m, consts)
    variables = model.variables
    texpr = model.target_expr(target) if target_states is None else None
    if texpr is None and target_states is None:
        raise ValueError("a target label, expression or state set is required")

    def make_state(values: tuple) -> dict:
        return {v.name: {(bool(x) if v.is_bool else x): m.true} for v, x in zip(variables, values)}

    def hit_of(state: dict, care: int) -> int:
        ev.state = state
        if target_states is not None:
            return m.and_(care, set_predicate(m, state, variables, target_states))
        return ev.as_bdd(texpr, care)

    state = make_state(model.initial)
    hit = hit_of(state, m.true)
    rows: list = []
    seen_rows: set = set()
    # actions in order of first appearance; anonymous commands are singletons
    action_keys = []
    for c in model.commands:
        key = ("anon", c.index) if c.action is None else ("act", c.action)
        if key not in action_keys:
            action_keys.append(key)

    for step in range(h):
        if hit == m.true:
            break
        # the state evolves on every path; only ``hit`` latches, which keeps
        # each variable's diagram independent of the others
        alive = m.true
        ev.state = state
        guard = {c.index: ev.as_bdd(c.guard, alive) for c in model.commands}
        # weight of every action as a value map over the alive region
        weight_maps = []
        for key in action_keys:
            if key[0] == "anon":
                g = guard[key[1]]
                weight_maps.append({1: g, 0: m.and_(alive, m.not_(g))})
                continue
            wmap = {1: alive}
            for mi in model.action_modules[key[1]]:
                cmds = [c for c in model.commands if c.module == mi and c.action == key[1]]
                counts = {0: alive}
                for c in cmds:
                    g = guard[c.index]
                    nxt: dict = {}
                    for k, cond in counts.items():
                        for kk, cc in ((k + 1, m.and_(cond, g)), (k, m.and_(cond, m.not_(g)))):
                            if cc != m.false:
                                nxt[kk] = m.or_(nxt.get(kk, m.false), cc)
                    counts = nxt
                prod: dict = {}
                for w, cw in wmap.items():
                    for k, ck in counts.items():
                        cc = m.and_(cw, ck)
                        if cc != m.false:
                            prod[w * k] = m.or_(prod.get(w * k, m.false), cc)
                wmap = prod
            weight_maps.append(wmap)
        # partition the alive region by the vector of action weights
        contexts = [(alive, ())]
        for wmap in weight_maps:
            nxt = []
            for cond, vec in contexts:
                for w, cw in sorted(wmap.items()):
                    cc = m.and_(cond, cw)
                    if cc != m.false:
                        nxt.append((cc, vec + (w,)))
            contexts = nxt
        sel_action: dict = {}
        for cond, vec in contexts:
            active = [(key, w) for key, w in zip(action_keys, vec) if w > 0]
            if not active:
                continue  # deadlock: stutter
            if overlap == "reject":
                for key, w in active:
                    if w > 1:
                        raise _fail(EvaluationError, f"overlapping guards for action {key[1]!r}")
            total = sum(w for _, w in active)
            weights = coin_chain_or_quotient([Fraction(w, total) for _, w in active])
            sels = alloc.chain(m, cond, step, ("action",), weights, lambda j: f"a_{{{step},{j}}}")
            for (key, _), s in zip(active, sels):
                sel_action[key] = m.or_(sel_action.get(key, m.false), s)
        # command choice inside each module of the chosen action
        sel_cmd: dict = {}
        for key, sa in sel_action.items():
            if sa == m.false:
                continue
            if key[0] == "anon":
                sel_cmd[key[1]] = sa
                continue
            for mi in model.action_modules[key[1]]:
                cmds = [c for c in model.commands if c.module == mi and c.action == key[1]]
                if len(cmds) == 1:
                    sel_cmd[cmds[0].index] = m.or_(sel_cmd.get(cmds[0].index, m.false), sa)
                    continue
                parts = [(sa, ())]
                for c in cmds:
                    g = guard[c.index]
                    nxt = []
                    for cond, en in parts:
                        for flag, cc in ((True, m.and_(cond, g)), (False, m.and_(cond, m.not_(g)))):
                            if cc != m.false:
                                nxt.append((cc, en + (flag,)))
                    parts = nxt
                for cond, en in parts:
                    enabled = [c for c, f in zip(cmds, en) if f]
                    k = len(enabled)
                    weights = [(j, Fraction(1, k - j)) for j in range(k - 1)]
                    sels = alloc.chain(
                        m, cond, step, ("cmd", mi, key[1]), weights,
                        lambda j, mi=mi: f"m_{{{model.module_names[mi]},{step},{j}}}",
                    )
                    for c, s in zip(enabled, sels):
                        sel_cmd[c.index] = m.or_(sel_cmd.get(c.index, m.false), s)
        # update choice and parallel writes
        writes: dict = {}  # var index -> list of (cond, value map, module)
        for c in model.commands:
            sc = sel_cmd.get(c.index, m.false)
            if sc == m.false:
                continue
            prob_maps = [ev.ev(p, sc) for p, _ in c.updates]
            joint = ev._join(prob_maps, lambda *ps: tuple(normalize(p) for p in ps), sc, c)
            for probs, cond in sorted(joint.items(), key=lambda kv: [sort_key(p) for p in kv[0]]):
                _check_probs(probs, model, c)
                if any(is_symbolic(p) for p in probs) and probs not in seen_rows:
                    seen_rows.add(probs)
                    rows.append(probs)
                live = [(i, p) for i, p in enumerate(probs) if p != 0]
                weights = coin_chain_or_quotient([p for _, p in live]) if len(live) > 1 else []
                sels = alloc.chain(
                    m, cond, step, ("upd", c.index), weights,
                    lambda j, c=c: f"u_{{{model.module_names[c.module]}.{c.index},{step},{j}}}",
                )
                for (i, _), s in zip(live, sels):
                    if s == m.false:
                        continue
                    assigned = set()
                    for vi, e in c.updates[i][1]:
                        if vi in assigned:
                            raise _fail(DataRace, f"variable {variables[vi].name!r} assigned twice", e)
                        assigned.add(vi)
                        writes.setdefault(vi, []).append((s, ev.ev(e, s), c.module, e))
        new_state = {}
        for vi, var in enumerate(variables):
            old = state[var.name]
            ws = writes.get(vi)
            if not ws:
                new_state[var.name] = old
                continue
            by_module: dict = {}
            for cond, _, mod, _ in ws:
                by_module[mod] = m.or_(by_module.get(mod, m.false), cond)
            mods = sorted(by_module)
            for i, a in enumerate(mods):
                for b in mods[i + 1 :]:
                    if m.and_(by_module[a], by_module[b]) != m.false:
                        raise DataRace(
                            f"modules {model.module_names[a]!r} and {model.module_names[b]!r} "
                            f"both write {var.name!r} in step {step + 1}"
                        )
            written = m.disj(by_module.values())
            out: dict = {}
            for v, c in old.items():
                cc = m.and_(c, m.not_(written))
                if cc != m.false:
                    out[v] = cc
            for cond, vm, _, e in ws:
                for val, cc in vm.items():
                    key = _coerce(val, var, e, step)
                    out[key] = m.or_(out.get(key, m.false), cc)
            new_state[var.name] = out
        new_hit = m.or_(hit, hit_of(new_state, m.not_(hit)))
        state, hit = new_state, new_hit
    params = () if valuation else model.parameters
    return Encoding(m, hit, alloc.coins, h, tuple(params), rows, aux={"state": state})


def _coerce(val, var, node, step):
    if var.is_bool:
        return truth(val, node)
    if is_symbolic(val):
        raise _fail(EvaluationError, "parameter in assignment", node)
    if isinstance(val, bool) or not (isinstance(val, int) or (isinstance(val, Fraction) and val.denominator == 1)):
        raise _fail(OutOfDomain, f"non-integer value {val} for {var.name!r}", node)
    ival = int(val)
    if not var.low <= ival <= var.high:
        raise _fail(OutOfDomain, f"{var.name!r} := {ival} leaves [{var.low}..{var.high}] in step {step + 1}", node)
    return ival


def _check_probs(probs, model, cmd):
    if any(is_symbolic(p) for p in probs):
        return
    for p in probs:
        if not 0 <= p <= 1:
            raise _fail(EvaluationError, f"probability {p} outside [0,1]", cmd)
    total = sum(probs, Fraction(0))
    if total != 1:
        raise _fail(EvaluationError, f"probabilities sum to {total}", cmd)
