"""Symbolic bounded reachability with ADDs for the matrix and the vector.

States are encoded as bit vectors; row bits ``x`` and their primed column
copies ``x'`` are interleaved in the manager order. Iteration follows the
backward scheme ``x_{i+1} = A . x_i`` with the target-absorbing matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .chain import MarkovChain, make_absorbing
from .dd import Manager
from .errors import EncodingTooSmall, VariableClash


@dataclass
class StateEncoding:
    """Injective map from state ids to bit vectors (MSB first per group)."""

    groups: list  # (name, width, offset)
    codes: list  # per state: tuple of bools over all row bits

    @property
    def row_vars(self) -> list[str]:
        return [f"{name}{k}" for name, width, _ in self.groups for k in range(width - 1, -1, -1)]

    @property
    def col_vars(self) -> list[str]:
        return [v + "'" for v in self.row_vars]

    def interleaved(self) -> list[str]:
        out = []
        for r, c in zip(self.row_vars, self.col_vars):
            out += [r, c]
        return out

    @property
    def num_bits(self) -> int:
        return sum(w for _, w, _ in self.groups)

    def manager(self, **kw) -> Manager:
        return Manager(self.interleaved(), **kw)

    def row_assignment(self, s: int) -> dict:
        return dict(zip(self.row_vars, self.codes[s]))

    @classmethod
    def for_chain(cls, mc: MarkovChain, width: int | None = None) -> StateEncoding:
        """Per-variable bits when states carry valuations, else binary state ids."""
        if mc.valuations is not None and all(v is not None for v in mc.valuations) and mc.variables:
            groups = []
            for i, name in enumerate(mc.variables):
                vals = [int(v[i]) for v in mc.valuations]
                lo, hi = min(vals), max(vals)
                w = max(1, (hi - lo).bit_length())
                groups.append((name, w, lo))
            codes = []
            for v in mc.valuations:
                bits = []
                for (name, w, lo), val in zip(groups, v):
                    bits += _bits(int(val) - lo, w)
                codes.append(tuple(bits))
            enc = cls(groups, codes)
        else:
            need = max(1, (mc.num_states - 1).bit_length())
            w = need if width is None else width
            if w < need:
                raise EncodingTooSmall(f"{mc.num_states} states need {need} bits, got {w}")
            enc = cls([("s", w, 0)], [tuple(_bits(s, w)) for s in range(mc.num_states)])
        if len(set(enc.codes)) != len(enc.codes):
            raise EncodingTooSmall("state encoding is not injective")
        return enc


def _bits(value: int, width: int) -> list[bool]:
    return [bool(value >> k & 1) for k in range(width - 1, -1, -1)]


def transition_add(mc: MarkovChain, enc: StateEncoding, m: Manager) -> int:
    """ADD over interleaved row/column bits with ``eval = P(s, s')``."""
    table = {}
    for s, d in enumerate(mc.transitions):
        rs = enc.codes[s]
        for t, p in d.support:
            ct = enc.codes[t]
            key = tuple(b for pair in zip(rs, ct) for b in pair)
            table[key] = p
    return m.from_table(enc.interleaved(), table, default=0)


def vector_add(values, enc: StateEncoding, m: Manager) -> int:
    table = {enc.codes[s]: v for s, v in enumerate(values) if v != 0}
    return m.from_table(enc.row_vars, table, default=0)


def matvec(m: Manager, A: int, x: int, enc: StateEncoding) -> int:
    """``(A . x)`` with ``x`` over row bits; result over row bits."""
    cols = set(enc.col_vars)
    if m.support(x) & cols:
        raise VariableClash("vector must be expressed over row variables")
    xc = m.rename(x, dict(zip(enc.row_vars, enc.col_vars)))
    return m.sum_abstract(m.times(A, xc), enc.col_vars)


def vector_values(m: Manager, x: int, enc: StateEncoding) -> list:
    return [m.eval(x, enc.row_assignment(s)) for s in range(len(enc.codes))]


@dataclass
class AddResult:
    manager: Manager
    encoding: StateEncoding
    matrix: int
    vector: int
    value: object
    steps: list = field(default_factory=list)  # (h, vector nodes, vector leaves)

    @property
    def matrix_nodes(self) -> int:
        return self.manager.node_count(self.matrix)

    @property
    def matrix_leaves(self) -> int:
        return len(self.manager.terminal_set(self.matrix))

    @property
    def vector_nodes(self) -> int:
        return self.manager.node_count(self.vector)

    @property
    def vector_leaves(self) -> int:
        return len(self.manager.terminal_set(self.vector))

    def values(self) -> list:
        return vector_values(self.manager, self.vector, self.encoding)


def bounded_reach_add(mc: MarkovChain, h: int, targets=None, max_nodes: int | None = None) -> AddResult:
    """Iterate ``h`` ADD matrix-vector products from the target indicator."""
    if h < 0:
        raise ValueError("horizon must be non-negative")
    targets = mc.targets if targets is None else frozenset(targets)
    enc = StateEncoding.for_chain(mc)
    m = enc.manager(max_nodes=max_nodes)
    A = transition_add(make_absorbing(mc, targets), enc, m)
    x = vector_add([Fraction(1) if s in targets else Fraction(0) for s in range(mc.num_states)], enc, m)
    steps = [(0, m.node_count(x), len(m.terminal_set(x)))]
    for i in range(h):
        x = matvec(m, A, x, enc)
        steps.append((i + 1, m.node_count(x), len(m.terminal_set(x))))
    value = m.eval(x, enc.row_assignment(mc.initial))
    return AddResult(m, enc, A, x, value, steps)


def transition_stats(mc: MarkovChain) -> tuple[int, int]:
    """(nodes, leaves) of the plain transition-matrix ADD."""
    enc = StateEncoding.for_chain(mc)
    m = enc.manager()
    A = transition_add(mc, enc, m)
    return m.node_count(A), len(m.terminal_set(A))
