"""Weighted model counting, solution functions and the BDD-as-chain view."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..chain import MarkovChain
from ..dd import FALSE, TRUE
from ..errors import MissingWeight, NotWellDefined
from ..poly import Quotient, evaluate, is_symbolic, normalize
from .coins import Encoding

FLOAT_TOL = 1e-9


def _parts(enc_or_manager, root=None, weights=None):
    if isinstance(enc_or_manager, Encoding):
        return enc_or_manager.manager, enc_or_manager.root, enc_or_manager.weights
    return enc_or_manager, root, weights


def wmc(enc_or_manager, root: int | None = None, weights: dict | None = None):
    """``sum_{eta |= phi} weight(eta)`` by one bottom-up pass.

    A node testing coin ``c`` has value ``W(c) * hi + (1 - W(c)) * lo``.
    Weights may be constants or polynomials; the result has the same kind.
    """
    m, root, weights = _parts(enc_or_manager, root, weights)
    if root == FALSE:
        return Fraction(0)
    if root == TRUE:
        return Fraction(1)
    val = {FALSE: Fraction(0), TRUE: Fraction(1)}
    for u in m.topological(root):
        name = m.node_var(u)
        try:
            w = weights[name]
        except KeyError:
            raise MissingWeight(f"no weight for coin {name!r}") from None
        lo, hi = val[m.low(u)], val[m.high(u)]
        val[u] = normalize(w * hi + (1 - w) * lo)
    return val[root]


def to_exact(v) -> Fraction:
    """Exact rational; floats are read through their shortest decimal form."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(v)


def check_rows(rows, valuation, exact: bool = True) -> list:
    """Violations of row well-definedness at ``valuation``."""
    bad = []
    for row in rows:
        vals = [evaluate(p, valuation) for p in row]
        total = sum(vals)
        if exact:
            ok = all(0 <= v <= 1 for v in vals) and total == 1
        else:
            ok = all(-FLOAT_TOL <= v <= 1 + FLOAT_TOL for v in vals) and abs(total - 1) <= FLOAT_TOL
        if not ok:
            bad.append((row, vals))
    return bad


@dataclass
class SampleResult:
    value: object
    status: str  # "ok" or "not-well-defined"
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class SolutionFunction:
    """A frozen parametric BDD evaluated once per valuation.

    ``evaluate`` walks the node array once (children before parents), so
    its cost is linear in the node count; ``last_visits`` records how many
    inner nodes the last evaluation touched.
    """

    def __init__(self, enc: Encoding):
        self.encoding = enc
        m = enc.manager
        m.freeze()
        self.parameters = tuple(enc.parameters)
        self.rows = list(dict.fromkeys(enc.rows))
        order = m.topological(enc.root)
        slot = {FALSE: 0, TRUE: 1}
        for i, u in enumerate(order):
            slot[u] = i + 2
        coin_index = {c.name: i for i, c in enumerate(enc.coins)}
        self._weights = [c.weight for c in enc.coins]
        self._coin = []
        self._lo = []
        self._hi = []
        for u in order:
            name = m.node_var(u)
            if name not in coin_index:
                raise MissingWeight(f"no weight for coin {name!r}")
            self._coin.append(coin_index[name])
            self._lo.append(slot[m.low(u)])
            self._hi.append(slot[m.high(u)])
        self.root_slot = slot[enc.root]
        self.num_nodes = len(order)
        self.last_visits = 0

    def _valuation(self, u: dict, exact: bool) -> dict:
        missing = [p for p in self.parameters if p not in u]
        if missing:
            raise KeyError(f"valuation misses parameter(s) {missing}")
        if exact:
            return {k: to_exact(v) for k, v in u.items()}
        return {k: float(v) for k, v in u.items()}

    def evaluate(self, u: dict, exact: bool = True):
        val = self._valuation(u, exact)
        bad = check_rows(self.rows, val, exact)
        if bad:
            raise NotWellDefined(f"valuation {u} is not well-defined ({len(bad)} bad rows)", bad)
        one = Fraction(1) if exact else 1.0
        ws = []
        for w in self._weights:
            x = evaluate(w, val) if is_symbolic(w) else w
            ws.append(x if exact else float(x))
        vals = [one * 0, one] + [None] * self.num_nodes
        coin, lo, hi = self._coin, self._lo, self._hi
        visits = 0
        for i in range(self.num_nodes):
            w = ws[coin[i]]
            vals[i + 2] = w * vals[hi[i]] + (one - w) * vals[lo[i]]
            visits += 1
        self.last_visits = visits
        return vals[self.root_slot]

    __call__ = evaluate

    def sample_many(self, valuations, exact: bool = True) -> list[SampleResult]:
        out = []
        for u in valuations:
            try:
                out.append(SampleResult(self.evaluate(u, exact), "ok"))
            except NotWellDefined as e:
                out.append(SampleResult(None, "not-well-defined", str(e)))
        return out


def wmc_parametric(enc: Encoding) -> SolutionFunction:
    return SolutionFunction(enc)


def bdd_as_mc(enc_or_manager, root: int | None = None, weights: dict | None = None) -> MarkovChain:
    """The chain over BDD nodes: high edge with ``W``, low edge with ``1 - W``.

    Terminals become absorbing; the TRUE terminal is the only target.
    State 0 is the root; the rest follow in depth-first order.
    """
    m, root, weights = _parts(enc_or_manager, root, weights)
    order = []
    index = {}
    stack = [root]
    while stack:
        u = stack.pop()
        if u in index:
            continue
        index[u] = len(order)
        order.append(u)
        if not m.is_terminal(u):
            stack.append(m.low(u))
            stack.append(m.high(u))
    rows = []
    for u in order:
        if m.is_terminal(u):
            rows.append([(index[u], Fraction(1))])
            continue
        w = weights[m.node_var(u)]
        if isinstance(w, Quotient):
            raise ValueError("quotient weights cannot label chain edges")
        rows.append([(index[m.high(u)], w), (index[m.low(u)], normalize(1 - w))])
    targets = [index[TRUE]] if TRUE in index else []
    return MarkovChain(rows, initial=0, targets=targets, check=not any(is_symbolic(w) for w in weights.values()))
