"""Coin variables, conditional coin chains and the encoding container."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from ..dd import Manager
from ..errors import NonConstantResidual
from ..poly import Polynomial, Quotient, is_symbolic, normalize, sort_key


@dataclass(frozen=True)
class CoinVar:
    name: str
    step: int  # 0-based step whose choice this coin resolves
    site: tuple
    index: int  # position in its coin chain
    weight: object


def coin_chain(probs) -> list[tuple[int, object]]:
    """Weights of the ``k-1`` coins that pick one of ``k`` branches.

    Coin ``j`` is heads with probability ``p_j / (1 - sum_{i<j} p_i)``;
    heads selects branch ``j``, all tails selects the last branch.
    """
    probs = [normalize(p) for p in (probs.probs() if hasattr(probs, "probs") else probs)]
    if not probs:
        raise ValueError("empty distribution")
    out = []
    residual = Fraction(1)
    for j, p in enumerate(probs[:-1]):
        out.append((j, _ratio(p, residual)))
        residual = normalize(residual - p)
    return out


def _ratio(p, residual):
    if not is_symbolic(residual):
        if residual == 0:
            raise ZeroDivisionError("no probability mass left for the coin chain")
        return normalize(p / residual) if is_symbolic(p) else Fraction(p) / residual
    q = Polynomial._lift(p).exact_div(residual)
    if q is None:
        raise NonConstantResidual(f"{residual} does not divide {p}")
    return normalize(q)


def coin_chain_or_quotient(probs) -> list[tuple[int, object]]:
    """Like :func:`coin_chain` but falls back to quotient weights."""
    try:
        return coin_chain(probs)
    except NonConstantResidual:
        probs = [normalize(p) for p in probs]
        out = []
        residual = Fraction(1)
        for j, p in enumerate(probs[:-1]):
            if is_symbolic(residual):
                q = Polynomial._lift(p).exact_div(residual)
                w = normalize(q) if q is not None else Quotient(p, residual)
            else:
                w = normalize(p / residual) if is_symbolic(p) else Fraction(p) / residual
            out.append((j, w))
            residual = normalize(residual - p)
        return out


def weight_key(w):
    return sort_key(w)


class CoinAllocator:
    """Hands out coin variables, appending them to the manager order.

    Coins are keyed by ``(step, site, index, weight)``; asking twice for the
    same key returns the same coin. Sites at one step must only be shared
    by mutually exclusive contexts, which callers guarantee.
    """

    def __init__(self, manager: Manager):
        self.manager = manager
        self.coins: list[CoinVar] = []
        self._by_key: dict = {}
        self._names: set = set()

    def coin(self, step: int, site: tuple, index: int, weight, name: str) -> int:
        key = (step, site, index, weight)
        c = self._by_key.get(key)
        if c is None:
            base, k = name, 1
            while name in self._names:
                k += 1
                name = f"{base}#{k}"
            self._names.add(name)
            c = CoinVar(name, step, site, index, weight)
            self.manager.add_var(name)
            self._by_key[key] = c
            self.coins.append(c)
        return self.manager.var(c.name)

    def chain(self, m: Manager, cond: int, step: int, site: tuple, weights, name) -> list[int]:
        """Split ``cond`` into one selection BDD per branch (``len(weights)+1``)."""
        out = []
        rest = cond
        for j, w in weights:
            if w == 1:
                out.append(rest)
                rest = m.false
                continue
            if w == 0:
                out.append(m.false)
                continue
            c = self.coin(step, site, j, w, name(j))
            out.append(m.and_(rest, c))
            rest = m.and_(rest, m.not_(c))
        out.append(rest)
        return out


@dataclass
class Encoding:
    """A causal encoding: BDD ``root`` over coins with a weight per coin."""

    manager: Manager
    root: int
    coins: list
    horizon: int
    parameters: tuple = ()
    rows: list = field(default_factory=list)  # branch-probability tuples seen
    aux: dict = field(default_factory=dict)

    @property
    def weights(self) -> dict:
        return {c.name: c.weight for c in self.coins}

    def weight_values(self) -> set:
        """Distinct coin weights ``W(c)``."""
        return {c.weight for c in self.coins}

    def used_coins(self) -> list:
        support = self.manager.support(self.root)
        return [c for c in self.coins if c.name in support]

    def edge_weights(self, used_only: bool = False) -> set:
        """Distinct edge labels ``W`` and ``1 - W`` over the coins."""
        coins = self.used_coins() if used_only else self.coins
        out = set()
        for c in coins:
            out.add(c.weight)
            out.add(normalize(1 - c.weight) if not isinstance(c.weight, Quotient) else ("1-", c.weight))
        return out

    @property
    def node_count(self) -> int:
        return self.manager.node_count(self.root)

    @property
    def is_parametric(self) -> bool:
        return any(is_symbolic(c.weight) for c in self.coins)

    def to_dot(self) -> str:
        return self.manager.to_dot(self.root, "phi")
