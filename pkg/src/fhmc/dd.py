"""Hash-consed reduced ordered decision diagrams (BDDs and ADDs).

A :class:`Manager` owns every node. Nodes are plain integers; ``0`` and
``1`` are the BDD terminals FALSE and TRUE. ADD terminals carry a scalar
payload (a Fraction, or a Polynomial for parametric diagrams). Variables
are appended at the bottom of the order and never reordered, so callers
that allocate variables in causal (step-major) order get a causal order.

There are no complement edges and no garbage collection: nodes live as
long as their manager.
"""
from __future__ import annotations

import sys
from collections.abc import Iterable, Mapping

from .errors import MixedTerminalKinds, NodeCapExceeded, UnknownVariable, VariableClash
from .poly import normalize, sort_key

TERMINAL = 1 << 60

FALSE = 0
TRUE = 1


class Manager:
    """Unique table, operation cache and variable order for one diagram family."""

    def __init__(self, variables: Iterable[str] = (), max_nodes: int | None = None):
        self._names: list[str] = []
        self._levels: dict[str, int] = {}
        # parallel node arrays
        self._lvl = [TERMINAL, TERMINAL]
        self._lo = [0, 1]
        self._hi = [0, 1]
        self._val: list = [False, True]
        self._isadd = [False, False]
        self._unique: dict = {}
        self._consts: dict = {}
        self._cache: dict = {}
        self.max_nodes = max_nodes
        self.frozen = False
        for name in variables:
            self.add_var(name)

    # --- variables -------------------------------------------------------
    def add_var(self, name: str) -> int:
        """Append ``name`` at the bottom of the order; returns its level."""
        if self.frozen:
            raise RuntimeError("manager is frozen")
        if name in self._levels:
            raise VariableClash(f"variable {name!r} already declared")
        self._levels[name] = len(self._names)
        self._names.append(name)
        need = 4 * len(self._names) + 1000
        if sys.getrecursionlimit() < need:
            sys.setrecursionlimit(need)
        return self._levels[name]

    @property
    def vars(self) -> list[str]:
        return list(self._names)

    @property
    def num_vars(self) -> int:
        return len(self._names)

    def level(self, name: str) -> int:
        try:
            return self._levels[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def var_name(self, level: int) -> str:
        return self._names[level]

    def var(self, name: str) -> int:
        """BDD of the single variable ``name``."""
        return self._mk(self.level(name), FALSE, TRUE)

    def var_at(self, level: int) -> int:
        return self._mk(level, FALSE, TRUE)

    # --- node access -----------------------------------------------------
    def __len__(self):
        return len(self._lvl)

    def is_terminal(self, u: int) -> bool:
        return self._lvl[u] == TERMINAL

    def is_add(self, u: int) -> bool:
        return self._isadd[u]

    def node_level(self, u: int) -> int:
        return self._lvl[u]

    def node_var(self, u: int) -> str | None:
        lvl = self._lvl[u]
        return None if lvl == TERMINAL else self._names[lvl]

    def low(self, u: int) -> int:
        return self._lo[u]

    def high(self, u: int) -> int:
        return self._hi[u]

    def value(self, u: int):
        """Payload of a terminal (bool for BDDs, scalar for ADDs)."""
        if self._lvl[u] != TERMINAL:
            raise ValueError(f"node {u} is not a terminal")
        return self._val[u]

    @property
    def true(self) -> int:
        return TRUE

    @property
    def false(self) -> int:
        return FALSE

    # --- construction ----------------------------------------------------
    def _new(self, lvl, lo, hi, val, isadd):
        if self.frozen:
            raise RuntimeError("manager is frozen")
        if self.max_nodes is not None and len(self._lvl) >= self.max_nodes:
            raise NodeCapExceeded(f"decision diagram exceeded {self.max_nodes} nodes")
        self._lvl.append(lvl)
        self._lo.append(lo)
        self._hi.append(hi)
        self._val.append(val)
        self._isadd.append(isadd)
        return len(self._lvl) - 1

    def _mk(self, lvl: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (lvl, lo, hi)
        u = self._unique.get(key)
        if u is not None:
            return u
        isadd = self._isadd[lo]
        if isadd != self._isadd[hi]:
            raise MixedTerminalKinds("cannot join a BDD and an ADD under one node")
        if not (lvl < self._lvl[lo] and lvl < self._lvl[hi]):
            raise VariableClash("child variable does not come after its parent")
        u = self._new(lvl, lo, hi, None, isadd)
        self._unique[key] = u
        return u

    def node(self, name: str, low: int, high: int) -> int:
        """Canonical node testing ``name`` (reduced: may return a child)."""
        return self._mk(self.level(name), low, high)

    def constant(self, c) -> int:
        """ADD terminal for a scalar payload."""
        c = normalize(c)
        if isinstance(c, bool):
            raise MixedTerminalKinds("use manager.true/false for BDD terminals")
        u = self._consts.get(c)
        if u is None:
            u = self._new(TERMINAL, -1, -1, c, True)
            self._consts[c] = u
        return u

    def cube(self, assignment: Mapping[str, bool]) -> int:
        """Conjunction of literals."""
        u = TRUE
        for name in sorted(assignment, key=self.level, reverse=True):
            lvl = self.level(name)
            u = self._mk(lvl, FALSE, u) if assignment[name] else self._mk(lvl, u, FALSE)
        return u

    def freeze(self):
        """Forbid further node creation; reads stay valid."""
        self.frozen = True

    def clear_cache(self):
        self._cache.clear()

    # --- boolean operations ----------------------------------------------
    def _require_bdd(self, *us):
        for u in us:
            if self._isadd[u]:
                raise MixedTerminalKinds("boolean operation applied to an ADD")

    def not_(self, u: int) -> int:
        self._require_bdd(u)
        return self._not(u)

    def _not(self, u):
        if u <= 1:
            return 1 - u
        key = ("not", u)
        r = self._cache.get(key)
        if r is None:
            r = self._mk(self._lvl[u], self._not(self._lo[u]), self._not(self._hi[u]))
            self._cache[key] = r
        return r

    def apply(self, op: str, u: int, v: int | None = None) -> int:
        """Boolean ``and``/``or``/``xor``/``implies``/``equiv``/``not``."""
        if op == "not":
            return self.not_(u)
        self._require_bdd(u, v)
        if op == "and":
            return self._and(u, v)
        if op == "or":
            return self._or(u, v)
        if op == "xor":
            return self._xor(u, v)
        if op == "implies":
            return self._or(self._not(u), v)
        if op == "equiv":
            return self._not(self._xor(u, v))
        raise ValueError(f"unknown boolean operation {op!r}")

    def and_(self, u: int, v: int) -> int:
        self._require_bdd(u, v)
        return self._and(u, v)

    def or_(self, u: int, v: int) -> int:
        self._require_bdd(u, v)
        return self._or(u, v)

    def xor(self, u: int, v: int) -> int:
        self._require_bdd(u, v)
        return self._xor(u, v)

    def conj(self, us: Iterable[int]) -> int:
        r = TRUE
        for u in us:
            r = self.and_(r, u)
            if r == FALSE:
                break
        return r

    def disj(self, us: Iterable[int]) -> int:
        r = FALSE
        for u in us:
            r = self.or_(r, u)
            if r == TRUE:
                break
        return r

    def _cofactors(self, u, lvl):
        if self._lvl[u] == lvl:
            return self._lo[u], self._hi[u]
        return u, u

    def _and(self, u, v):
        if u == FALSE or v == FALSE:
            return FALSE
        if u == TRUE:
            return v
        if v == TRUE or u == v:
            return u
        if u > v:
            u, v = v, u
        key = ("and", u, v)
        r = self._cache.get(key)
        if r is not None:
            return r
        lu, lv = self._lvl[u], self._lvl[v]
        lvl = min(lv, lu)
        u0, u1 = self._cofactors(u, lvl)
        v0, v1 = self._cofactors(v, lvl)
        r = self._mk(lvl, self._and(u0, v0), self._and(u1, v1))
        self._cache[key] = r
        return r

    def _or(self, u, v):
        if u == TRUE or v == TRUE:
            return TRUE
        if u == FALSE:
            return v
        if v == FALSE or u == v:
            return u
        if u > v:
            u, v = v, u
        key = ("or", u, v)
        r = self._cache.get(key)
        if r is not None:
            return r
        lu, lv = self._lvl[u], self._lvl[v]
        lvl = min(lv, lu)
        u0, u1 = self._cofactors(u, lvl)
        v0, v1 = self._cofactors(v, lvl)
        r = self._mk(lvl, self._or(u0, v0), self._or(u1, v1))
        self._cache[key] = r
        return r

    def _xor(self, u, v):
        if u == FALSE:
            return v
        if v == FALSE:
            return u
        if u == v:
            return FALSE
        if u == TRUE:
            return self._not(v)
        if v == TRUE:
            return self._not(u)
        if u > v:
            u, v = v, u
        key = ("xor", u, v)
        r = self._cache.get(key)
        if r is not None:
            return r
        lu, lv = self._lvl[u], self._lvl[v]
        lvl = min(lv, lu)
        u0, u1 = self._cofactors(u, lvl)
        v0, v1 = self._cofactors(v, lvl)
        r = self._mk(lvl, self._xor(u0, v0), self._xor(u1, v1))
        self._cache[key] = r
        return r

    def ite(self, f: int, g: int, h: int) -> int:
        """If-then-else; ``f`` is a BDD, ``g``/``h`` both BDDs or both ADDs."""
        self._require_bdd(f)
        if self._isadd[g] != self._isadd[h]:
            raise MixedTerminalKinds("ite branches must be of the same kind")
        return self._ite(f, g, h)

    def _ite(self, f, g, h):
        if f == TRUE:
            return g
        if f == FALSE:
            return h
        if g == h:
            return g
        if g == TRUE and h == FALSE:
            return f
        key = ("ite", f, g, h)
        r = self._cache.get(key)
        if r is not None:
            return r
        lvl = min(self._lvl[f], self._lvl[g], self._lvl[h])
        f0, f1 = self._cofactors(f, lvl)
        g0, g1 = self._cofactors(g, lvl)
        h0, h1 = self._cofactors(h, lvl)
        r = self._mk(lvl, self._ite(f0, g0, h0), self._ite(f1, g1, h1))
        self._cache[key] = r
        return r

    def restrict(self, u: int, name_or_level, value: bool) -> int:
        lvl = name_or_level if isinstance(name_or_level, int) else self.level(name_or_level)
        return self._restrict(u, lvl, bool(value))

    def _restrict(self, u, lvl, value):
        ul = self._lvl[u]
        if ul > lvl:
            return u
        if ul == lvl:
            return self._hi[u] if value else self._lo[u]
        key = ("restrict", u, lvl, value)
        r = self._cache.get(key)
        if r is None:
            r = self._mk(
                ul, self._restrict(self._lo[u], lvl, value), self._restrict(self._hi[u], lvl, value)
            )
            self._cache[key] = r
        return r

    def exists(self, u: int, names: Iterable[str]) -> int:
        self._require_bdd(u)
        for lvl in sorted(self.level(n) for n in names):
            u = self._or(self._restrict(u, lvl, False), self._restrict(u, lvl, True))
        return u

    # --- ADD operations --------------------------------------------------
    _ADD_OPS = {
        "+": lambda a, b: a + b,
        "-": lambda a, b: a - b,
        "*": lambda a, b: a * b,
        "max": max,
        "min": min,
    }

    def add_apply(self, op: str, u: int, v: int) -> int:
        if not (self._isadd[u] and self._isadd[v]):
            raise MixedTerminalKinds(f"ADD operation {op!r} applied to a BDD")
        fn = self._ADD_OPS[op]
        return self._add_apply(op, fn, u, v)

    def plus(self, u: int, v: int) -> int:
        return self.add_apply("+", u, v)

    def times(self, u: int, v: int) -> int:
        return self.add_apply("*", u, v)

    def _add_apply(self, op, fn, u, v):
        lu, lv = self._lvl[u], self._lvl[v]
        if lu == TERMINAL and lv == TERMINAL:
            return self.constant(fn(self._val[u], self._val[v]))
        if op == "*":
            for a, b in ((u, v), (v, u)):
                if self._lvl[a] == TERMINAL:
                    if self._val[a] == 0:
                        return a
                    if self._val[a] == 1:
                        return b
        elif op == "+":
            for a, b in ((u, v), (v, u)):
                if self._lvl[a] == TERMINAL and self._val[a] == 0:
                    return b
        if op in ("+", "*", "max", "min") and u > v:
            u, v = v, u
        key = (op, u, v)
        r = self._cache.get(key)
        if r is not None:
            return r
        lvl = min(lv, lu)
        u0, u1 = self._cofactors(u, lvl)
        v0, v1 = self._cofactors(v, lvl)
        r = self._mk(lvl, self._add_apply(op, fn, u0, v0), self._add_apply(op, fn, u1, v1))
        self._cache[key] = r
        return r

    def bool_to_add(self, u: int, one=1, zero=0) -> int:
        """ADD mapping TRUE to ``one`` and FALSE to ``zero``."""
        self._require_bdd(u)
        c1, c0 = self.constant(one), self.constant(zero)
        return self._to_add(u, c0, c1)

    def _to_add(self, u, c0, c1):
        if u == TRUE:
            return c1
        if u == FALSE:
            return c0
        key = ("to_add", u, c0, c1)
        r = self._cache.get(key)
        if r is None:
            r = self._mk(self._lvl[u], self._to_add(self._lo[u], c0, c1), self._to_add(self._hi[u], c0, c1))
            self._cache[key] = r
        return r

    def sum_abstract(self, u: int, names: Iterable[str]) -> int:
        """Sum out variables: ``f|x=0 + f|x=1`` per variable."""
        if not self._isadd[u]:
            raise MixedTerminalKinds("sum abstraction needs an ADD")
        for lvl in sorted(self.level(n) for n in names):
            u = self.plus(self._restrict(u, lvl, False), self._restrict(u, lvl, True))
        return u

    def rename(self, u: int, mapping: Mapping[str, str]) -> int:
        """Substitute variables; the map must keep the support's relative order."""
        lmap = {self.level(a): self.level(b) for a, b in mapping.items()}
        support = sorted(self.support_levels(u))
        image = [lmap.get(l, l) for l in support]
        if len(set(image)) != len(image) or image != sorted(image):
            raise VariableClash("renaming does not preserve the variable order on the support")
        key_map = tuple(sorted(lmap.items()))
        return self._rename(u, lmap, key_map)

    def _rename(self, u, lmap, key_map):
        lvl = self._lvl[u]
        if lvl == TERMINAL:
            return u
        key = ("rename", u, key_map)
        r = self._cache.get(key)
        if r is None:
            r = self._mk(
                lmap.get(lvl, lvl),
                self._rename(self._lo[u], lmap, key_map),
                self._rename(self._hi[u], lmap, key_map),
            )
            self._cache[key] = r
        return r

    def from_table(self, names: list[str], table: Mapping[tuple, object], default=0) -> int:
        """ADD over ``names`` from a sparse ``{bit-tuple: value}`` table.

        ``names`` must be listed in manager order; missing rows get ``default``.
        """
        levels = [self.level(n) for n in names]
        if levels != sorted(levels):
            raise VariableClash("from_table variables must follow the manager order")
        dflt = self.constant(default)
        consts = {}

        def build(items, i):
            if not items:
                return dflt
            if i == len(levels):
                val = items[0][1]
                c = consts.get(val)
                if c is None:
                    c = consts[val] = self.constant(val)
                return c
            zeros = [it for it in items if not it[0][i]]
            ones = [it for it in items if it[0][i]]
            return self._mk(levels[i], build(zeros, i + 1), build(ones, i + 1))

        return build(list(table.items()), 0)

    # --- evaluation and statistics ---------------------------------------
    def eval(self, u: int, assignment: Mapping[str, bool]):
        """Follow ``assignment`` from ``u`` and return the terminal payload."""
        while self._lvl[u] != TERMINAL:
            name = self._names[self._lvl[u]]
            try:
                bit = assignment[name]
            except KeyError:
                raise UnknownVariable(f"assignment misses {name!r}") from None
            u = self._hi[u] if bit else self._lo[u]
        return self._val[u]

    def descendants(self, roots) -> set[int]:
        if isinstance(roots, int):
            roots = [roots]
        seen = set()
        stack = list(roots)
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            if self._lvl[u] != TERMINAL:
                stack.append(self._lo[u])
                stack.append(self._hi[u])
        return seen

    def node_count(self, roots) -> int:
        """Distinct nodes reachable from the root(s), terminals included."""
        return len(self.descendants(roots))

    def terminal_set(self, roots) -> set:
        return {self._val[u] for u in self.descendants(roots) if self._lvl[u] == TERMINAL}

    def support_levels(self, u: int) -> set[int]:
        return {self._lvl[v] for v in self.descendants(u) if self._lvl[v] != TERMINAL}

    def support(self, u: int) -> set[str]:
        return {self._names[l] for l in self.support_levels(u)}

    def topological(self, u: int) -> list[int]:
        """Inner nodes reachable from ``u``, children before parents."""
        inner = [v for v in self.descendants(u) if self._lvl[v] != TERMINAL]
        inner.sort(key=lambda v: self._lvl[v], reverse=True)
        return inner

    def sat_count(self, u: int, nvars: int | None = None) -> int:
        """Satisfying assignments over the first ``nvars`` variables (default: all)."""
        self._require_bdd(u)
        n = self.num_vars if nvars is None else nvars
        memo = {}

        def level(v):
            return n if self._lvl[v] == TERMINAL else self._lvl[v]

        def count(v):
            if v == FALSE:
                return 0
            if v == TRUE:
                return 1
            if v in memo:
                return memo[v]
            lo, hi = self._lo[v], self._hi[v]
            c = count(lo) * 2 ** (level(lo) - level(v) - 1) + count(hi) * 2 ** (level(hi) - level(v) - 1)
            memo[v] = c
            return c

        return count(u) * 2 ** level(u)

    def audit(self, roots) -> None:
        """Assert reducedness, uniqueness and order below ``roots``."""
        seen_keys = {}
        for u in self.descendants(roots):
            if self._lvl[u] == TERMINAL:
                continue
            lo, hi = self._lo[u], self._hi[u]
            assert lo != hi, f"node {u} is redundant"
            assert self._lvl[u] < self._lvl[lo] and self._lvl[u] < self._lvl[hi], f"order broken at {u}"
            key = (self._lvl[u], lo, hi)
            assert seen_keys.setdefault(key, u) == u, f"duplicate node {key}"

    def to_dot(self, roots, name: str = "dd") -> str:
        """Graphviz text; dashed edges are low (0) edges."""
        if isinstance(roots, int):
            roots = [roots]
        nodes = sorted(self.descendants(roots))
        lines = [f"digraph {name} {{"]
        for u in nodes:
            if self._lvl[u] == TERMINAL:
                label = {False: "F", True: "T"}.get(self._val[u], None) if not self._isadd[u] else None
                if label is None:
                    label = str(self._val[u])
                lines.append(f'  n{u} [shape=box, label="{label}"];')
            else:
                lines.append(f'  n{u} [label="{self._names[self._lvl[u]]}"];')
                lines.append(f"  n{u} -> n{self._lo[u]} [style=dashed];")
                lines.append(f"  n{u} -> n{self._hi[u]};")
        for i, r in enumerate(roots):
            lines.append(f'  root{i} [shape=plaintext, label="root"]; root{i} -> n{r};')
        lines.append("}")
        return "\n".join(lines) + "\n"


def sorted_terminals(values) -> list:
    return sorted(values, key=sort_key)


__all__ = ["FALSE", "TERMINAL", "TRUE", "Manager", "sorted_terminals"]
