"""Explicit Bellman iteration for step-bounded reachability.

Exact mode works on Fractions (and on Polynomials for parametric chains,
which yields the solution function as a polynomial). Fast mode uses a
SciPy sparse matrix of doubles.
"""
from __future__ import annotations

import csv
import io
from fractions import Fraction

import numpy as np
from scipy import sparse

from .chain import MarkovChain, bad_states, make_absorbing
from .errors import SizeCap
from .poly import Polynomial, evaluate, normalize

DEFAULT_SOLVE_CAP = 50


def indicator(mc: MarkovChain, targets=None) -> list:
    targets = mc.targets if targets is None else targets
    return [Fraction(1) if s in targets else Fraction(0) for s in range(mc.num_states)]


def _step(rows, x):
    out = []
    for d in rows:
        acc = Fraction(0)
        for t, p in d.support:
            xt = x[t]
            if xt != 0:
                acc = acc + p * xt
        out.append(normalize(acc))
    return out


def bounded_reach_table(mc: MarkovChain, h: int, targets=None) -> list[list]:
    """Vectors ``x_0 .. x_h`` with ``x_i[s] = Pr(s |= <=i T)``."""
    if h < 0:
        raise ValueError("horizon must be non-negative")
    targets = mc.targets if targets is None else frozenset(targets)
    rows = make_absorbing(mc, targets).transitions
    xs = [indicator(mc, targets)]
    for _ in range(h):
        xs.append(_step(rows, xs[-1]))
    return xs


def bounded_reach_explicit(mc: MarkovChain, h: int, targets=None, exact: bool = True):
    """Per-state ``Pr(s |= <=h T)`` by ``h`` products with the absorbing matrix."""
    if not exact:
        return bounded_reach_float(mc, h, targets)
    return bounded_reach_table(mc, h, targets)[-1]


def transition_matrix(mc: MarkovChain, valuation=None) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for s, d in enumerate(mc.transitions):
        for t, p in d.support:
            rows.append(s)
            cols.append(t)
            vals.append(float(evaluate(p, valuation)) if valuation is not None else float(p))
    n = mc.num_states
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


class ParametricMatrix:
    """Float transition matrix of a pMC, compiled once for many valuations.

    Every entry is a linear combination of monomials; instantiating
    evaluates the distinct monomials with numpy and maps them onto the
    fixed sparsity pattern with one sparse product.
    """

    def __init__(self, mc: MarkovChain):
        self.parameters = tuple(mc.parameters)
        pos = {p: i for i, p in enumerate(self.parameters)}
        monos: dict = {}
        rows, cols, coeff_r, coeff_c, coeff_v = [], [], [], [], []
        for s, d in enumerate(mc.transitions):
            for t, p in d.support:
                k = len(rows)
                rows.append(s)
                cols.append(t)
                terms = p.terms.items() if isinstance(p, Polynomial) else [((), Fraction(p))]
                for mono, c in terms:
                    j = monos.setdefault(mono, len(monos))
                    coeff_r.append(k)
                    coeff_c.append(j)
                    coeff_v.append(float(c))
        self.exponents = np.zeros((len(monos), len(self.parameters)))
        for mono, j in monos.items():
            for name, e in mono:
                self.exponents[j, pos[name]] = e
        self.coeffs = sparse.csr_matrix((coeff_v, (coeff_r, coeff_c)), shape=(len(rows), len(monos)))
        self.rows = np.array(rows)
        self.cols = np.array(cols)
        self.shape = (mc.num_states, mc.num_states)

    def matrix(self, valuation) -> sparse.csr_matrix:
        vals = np.array([float(valuation[p]) for p in self.parameters])
        mono_vals = np.prod(vals[None, :] ** self.exponents, axis=1)
        data = self.coeffs @ mono_vals
        return sparse.csr_matrix((data, (self.rows, self.cols)), shape=self.shape)


def bounded_reach_float(mc: MarkovChain, h: int, targets=None, valuation=None, compiled=None) -> np.ndarray:
    """Float reachability vector; pass ``compiled`` (built from the absorbing
    chain) to reuse one :class:`ParametricMatrix` across valuations."""
    targets = mc.targets if targets is None else frozenset(targets)
    if compiled is not None:
        A = compiled.matrix(valuation)
    else:
        A = transition_matrix(make_absorbing(mc, targets), valuation)
    x = np.zeros(mc.num_states)
    x[list(targets)] = 1.0
    for _ in range(h):
        x = A @ x
    return x


def compile_parametric(mc: MarkovChain, targets=None) -> ParametricMatrix:
    targets = mc.targets if targets is None else frozenset(targets)
    return ParametricMatrix(make_absorbing(mc, targets))


def _acyclic_order(mc: MarkovChain, skip: set):
    """Reverse topological order of states outside ``skip``, or None if cyclic."""
    state = {}
    order = []
    for root in range(mc.num_states):
        if root in skip or root in state:
            continue
        stack = [(root, iter(mc.successors(root)))]
        state[root] = 1
        while stack:
            s, it = stack[-1]
            for t in it:
                if t in skip:
                    continue
                if state.get(t) == 1:
                    return None
                if t not in state:
                    state[t] = 1
                    stack.append((t, iter(mc.successors(t))))
                    break
            else:
                state[s] = 2
                order.append(s)
                stack.pop()
    return order


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return [m[i][n] for i in range(n)]


def unbounded_reach(mc: MarkovChain, targets=None, cap: int = DEFAULT_SOLVE_CAP) -> list[Fraction]:
    """Exact ``Pr(s |= <> T)`` for every state.

    States that cannot reach T get 0. On the remaining states the chain is
    solved by topological dynamic programming when acyclic, and otherwise
    by exact Gaussian elimination (at most ``cap`` unknowns).
    """
    if mc.is_parametric:
        raise ValueError("unbounded reachability needs a constant chain")
    targets = mc.targets if targets is None else frozenset(targets)
    bad = bad_states(mc, targets)
    x = [Fraction(0)] * mc.num_states
    for t in targets:
        x[t] = Fraction(1)
    known = set(targets) | set(bad)
    order = _acyclic_order(mc, known)
    if order is not None:
        for s in order:
            x[s] = sum((p * x[t] for t, p in mc.transitions[s]), Fraction(0))
        return x
    unknown = [s for s in range(mc.num_states) if s not in known]
    if len(unknown) > cap:
        raise SizeCap(f"{len(unknown)} unknowns exceed the exact-solve cap of {cap}")
    idx = {s: i for i, s in enumerate(unknown)}
    a = [[Fraction(0)] * len(unknown) for _ in unknown]
    b = [Fraction(0)] * len(unknown)
    for s in unknown:
        i = idx[s]
        a[i][i] += 1
        for t, p in mc.transitions[s]:
            if t in idx:
                a[i][idx[t]] -= p
            else:
                b[i] += p * x[t]
    for s, v in zip(unknown, _solve_exact(a, b)):
        x[s] = v
    return x


def table_csv(mc: MarkovChain, h: int, targets=None) -> str:
    """Rows ``state,h,probability`` for every state and step count up to ``h``."""
    xs = bounded_reach_table(mc, h, targets)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "h", "probability"])
    for s in range(mc.num_states):
        for i, x in enumerate(xs):
            w.writerow([s, i, x[s]])
    return buf.getvalue()
