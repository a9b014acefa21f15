"""Exact (parametric) Markov chains, path oracles and structural transforms."""
from __future__ import annotations

import json
import math
import random
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .errors import BudgetExceeded, InvalidDistribution, InvalidPath, NotWellDefined
from .poly import Polynomial, evaluate, from_json, is_symbolic, normalize, to_json

DEFAULT_PATH_CAP = 10**6


class Distribution:
    """Sorted successor list ``((state, prob), ...)`` with zero branches removed."""

    __slots__ = ("support",)

    def __init__(self, pairs: Iterable[tuple[int, object]]):
        merged: dict[int, object] = {}
        for s, p in pairs:
            merged[s] = merged.get(s, 0) + p
        self.support = tuple(
            (s, normalize(p)) for s, p in sorted(merged.items()) if not (p == 0)
        )

    def __iter__(self):
        return iter(self.support)

    def __len__(self):
        return len(self.support)

    def __eq__(self, other):
        return isinstance(other, Distribution) and self.support == other.support

    def __hash__(self):
        return hash(self.support)

    def __repr__(self):
        return f"Distribution({list(self.support)!r})"

    def states(self):
        return [s for s, _ in self.support]

    def probs(self):
        return [p for _, p in self.support]

    def get(self, state, default=0):
        for s, p in self.support:
            if s == state:
                return p
        return default

    def is_parametric(self):
        return any(is_symbolic(p) for _, p in self.support)

    def total(self):
        return normalize(sum((p for _, p in self.support), Fraction(0)))


class MarkovChain:
    """A finite chain ``<S, init, P, T>``; parametric when entries are polynomials.

    ``valuations`` optionally attaches a variable assignment to every state
    (chains built from models), named by ``variables``. ``aux`` flags states
    inserted by :func:`binarize`.
    """

    def __init__(
        self,
        transitions: Sequence,
        initial: int = 0,
        targets: Iterable[int] = (),
        parameters: Sequence[str] = (),
        variables: Sequence[str] = (),
        valuations: Sequence[tuple] | None = None,
        aux: Sequence[bool] | None = None,
        check: bool = True,
    ):
        self.transitions = tuple(
            d if isinstance(d, Distribution) else Distribution(d) for d in transitions
        )
        self.initial = initial
        self.targets = frozenset(targets)
        self.variables = tuple(variables)
        self.valuations = tuple(valuations) if valuations is not None else None
        self.aux = tuple(aux) if aux is not None else (False,) * len(self.transitions)
        found = set()
        for d in self.transitions:
            for _, p in d:
                if is_symbolic(p):
                    found |= p.variables
        self.parameters = tuple(parameters) or tuple(sorted(found))
        if check:
            self._check()

    def _check(self):
        n = len(self.transitions)
        if not 0 <= self.initial < n:
            raise InvalidDistribution(f"initial state {self.initial} out of range")
        if not self.targets <= set(range(n)):
            raise InvalidDistribution("targets reference unknown states")
        for s, d in enumerate(self.transitions):
            if len(d) == 0:
                raise InvalidDistribution(f"state {s} has no successors")
            for t, p in d:
                if not 0 <= t < n:
                    raise InvalidDistribution(f"state {s} has successor {t} out of range")
                if not is_symbolic(p) and not 0 < p <= 1:
                    raise InvalidDistribution(f"state {s}: probability {p} outside (0,1]")
            if not d.is_parametric() and d.total() != 1:
                raise InvalidDistribution(f"state {s}: row sums to {d.total()}, not 1")

    @property
    def num_states(self) -> int:
        return len(self.transitions)

    @property
    def is_parametric(self) -> bool:
        return any(d.is_parametric() for d in self.transitions)

    def successors(self, s: int) -> list[int]:
        return self.transitions[s].states()

    def prob(self, s: int, t: int):
        return self.transitions[s].get(t, Fraction(0))

    def max_out_degree(self) -> int:
        return max(len(d) for d in self.transitions)

    def distinct_probabilities(self) -> set:
        return {p for d in self.transitions for _, p in d}

    def label(self, s: int) -> str:
        if self.valuations is None:
            return str(s)
        return "<" + ",".join(str(v) for v in self.valuations[s]) + ">"

    def replace(self, **changes) -> MarkovChain:
        kw = dict(
            transitions=self.transitions,
            initial=self.initial,
            targets=self.targets,
            parameters=self.parameters,
            variables=self.variables,
            valuations=self.valuations,
            aux=self.aux,
        )
        kw.update(changes)
        return MarkovChain(**kw)

    def with_targets(self, targets: Iterable[int]) -> MarkovChain:
        return self.replace(targets=targets)

    def __repr__(self):
        return (
            f"MarkovChain(states={self.num_states}, initial={self.initial}, "
            f"targets={sorted(self.targets)}, parameters={list(self.parameters)})"
        )


# --- parameter instantiation ---------------------------------------------


@dataclass(frozen=True)
class Violation:
    state: int
    successor: int | None
    kind: str  # "range" or "sum"
    value: object


def well_defined_report(pmc: MarkovChain, valuation: Mapping[str, object]) -> list[Violation]:
    """All (state, branch) entries that make ``valuation`` ill-defined."""
    missing = set(pmc.parameters) - set(valuation)
    if missing:
        raise KeyError(f"valuation misses parameters {sorted(missing)}")
    report = []
    for s, d in enumerate(pmc.transitions):
        total = Fraction(0)
        for t, p in d:
            v = evaluate(p, valuation)
            total += v
            if not 0 <= v <= 1:
                report.append(Violation(s, t, "range", v))
        if total != 1:
            report.append(Violation(s, None, "sum", total))
    return report


is_well_defined = well_defined_report


def instantiate(pmc: MarkovChain, valuation: Mapping[str, object]) -> MarkovChain:
    """Replace every parameter by its value; raises :class:`NotWellDefined`."""
    valuation = {k: Fraction(v) for k, v in valuation.items()}
    missing = set(pmc.parameters) - set(valuation)
    if missing:
        raise KeyError(f"valuation misses parameters {sorted(missing)}")
    rows = [[(t, evaluate(p, valuation)) for t, p in d] for d in pmc.transitions]
    report = []
    for s, row in enumerate(rows):
        report += [Violation(s, t, "range", v) for t, v in row if not 0 <= v <= 1]
        total = sum((v for _, v in row), Fraction(0))
        if total != 1:
            report.append(Violation(s, None, "sum", total))
    if report:
        first = report[0]
        raise NotWellDefined(
            f"valuation is not well-defined: state {first.state} "
            f"({first.kind} violation, value {first.value})",
            report,
        )
    return pmc.replace(transitions=rows, parameters=())


# --- paths -----------------------------------------------------------------


def path_probability(mc: MarkovChain, path: Sequence[int]):
    if not path:
        raise InvalidPath("a path has at least one state")
    prob = Fraction(1)
    for a, b in zip(path, path[1:]):
        p = mc.prob(a, b)
        if p == 0:
            raise InvalidPath(f"no transition {a} -> {b}")
        prob = prob * p
    return normalize(prob)


def enumerate_reaching_paths(
    mc: MarkovChain,
    h: int,
    start: int | None = None,
    targets: Iterable[int] | None = None,
    cap: int = DEFAULT_PATH_CAP,
    collect: bool = True,
):
    """Brute-force first-visit oracle: every path of length <= h ending in T.

    Returns ``(paths, mass)``. A path stops at its first target state.
    Raises :class:`BudgetExceeded` once more than ``cap`` paths are explored.
    """
    if h < 0:
        raise ValueError("horizon must be non-negative")
    targets = mc.targets if targets is None else frozenset(targets)
    start = mc.initial if start is None else start
    paths = []
    mass = Fraction(0)
    explored = 0
    stack = [((start,), Fraction(1))]
    while stack:
        path, prob = stack.pop()
        explored += 1
        if explored > cap:
            raise BudgetExceeded(f"path enumeration exceeded cap of {cap}")
        last = path[-1]
        if last in targets:
            mass = mass + prob
            if collect:
                paths.append(path)
            continue
        if len(path) - 1 == h:
            continue
        for t, p in reversed(mc.transitions[last].support):
            stack.append((path + (t,), prob * p))
    return paths, normalize(mass)


def reach_mass(mc: MarkovChain, h: int, start: int | None = None, targets=None, cap=DEFAULT_PATH_CAP):
    return enumerate_reaching_paths(mc, h, start, targets, cap, collect=False)[1]


# --- structural transforms -------------------------------------------------


def make_absorbing(mc: MarkovChain, targets: Iterable[int] | None = None) -> MarkovChain:
    targets = mc.targets if targets is None else frozenset(targets)
    rows = [
        Distribution([(s, Fraction(1))]) if s in targets else d
        for s, d in enumerate(mc.transitions)
    ]
    return mc.replace(transitions=rows)


def bad_states(mc: MarkovChain, targets: Iterable[int] | None = None) -> frozenset:
    """States with no path into the target set (backward reachability complement)."""
    targets = mc.targets if targets is None else frozenset(targets)
    preds: list[list[int]] = [[] for _ in range(mc.num_states)]
    for s, d in enumerate(mc.transitions):
        for t, _ in d:
            preds[t].append(s)
    good = set(targets)
    queue = deque(targets)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in good:
                good.add(s)
                queue.append(s)
    return frozenset(range(mc.num_states)) - good


def reachable_states(mc: MarkovChain, start: int | None = None) -> frozenset:
    start = mc.initial if start is None else start
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in mc.successors(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return frozenset(seen)


@dataclass(frozen=True)
class HorizonMap:
    """Maps an original horizon to the equivalent binarized horizon."""

    factor: int

    def __call__(self, h: int) -> int:
        return h * self.factor


def _div(a, b):
    if b == 1:
        return a
    if is_symbolic(a) or is_symbolic(b):
        q = Polynomial._lift(a).exact_div(b)
        if q is None:
            raise InvalidDistribution(f"cannot split {a} by {b} polynomially")
        return normalize(q)
    return a / b


def binarize(mc: MarkovChain) -> tuple[MarkovChain, HorizonMap]:
    """Bound the out-degree by two with balanced splits padded to equal depth.

    Every original transition becomes exactly ``d = ceil(log2(max degree))``
    binary steps (auxiliary states are appended after the original ones and
    flagged in ``aux``), so ``Pr(<=h T)`` equals ``Pr(<=h*d T)`` afterwards.
    """
    depth = max(1, math.ceil(math.log2(mc.max_out_degree())))
    if depth == 1:
        return mc, HorizonMap(1)
    rows: list = [None] * mc.num_states
    aux: list[bool] = [False] * mc.num_states

    def new_state():
        rows.append(None)
        aux.append(True)
        return len(rows) - 1

    def expand(node: int, branches: list, d: int):
        # branches: [(state, prob)], conditional on reaching node
        if d == 1:
            rows[node] = Distribution(branches)
            return
        if len(branches) == 1:
            groups = [branches]
        else:
            k = len(branches) // 2
            groups = [branches[:k], branches[k:]]
        total = normalize(sum((p for _, p in branches), Fraction(0)))
        out = []
        for group in groups:
            gsum = normalize(sum((p for _, p in group), Fraction(0)))
            child = new_state()
            out.append((child, _div(gsum, total)))
            expand(child, [(t, _div(p, gsum)) for t, p in group], d - 1)
        rows[node] = Distribution(out)

    for s, dist in enumerate(mc.transitions):
        expand(s, list(dist.support), depth)
    valuations = None
    if mc.valuations is not None:
        valuations = list(mc.valuations) + [None] * (len(rows) - mc.num_states)
    return (
        MarkovChain(
            rows,
            initial=mc.initial,
            targets=mc.targets,
            parameters=mc.parameters,
            variables=mc.variables,
            valuations=valuations,
            aux=aux,
        ),
        HorizonMap(depth),
    )


# --- serialization ---------------------------------------------------------


def chain_to_dict(mc: MarkovChain) -> dict:
    return {
        "states": mc.num_states,
        "initial": mc.initial,
        "targets": sorted(mc.targets),
        "parameters": list(mc.parameters),
        "variables": list(mc.variables),
        "labels": [list(v) if v is not None else None for v in mc.valuations]
        if mc.valuations is not None
        else None,
        "aux": [i for i, a in enumerate(mc.aux) if a],
        "transitions": [[[t, to_json(p)] for t, p in d] for d in mc.transitions],
    }


def chain_from_dict(data: dict) -> MarkovChain:
    aux = [False] * data["states"]
    for i in data.get("aux", []):
        aux[i] = True
    labels = data.get("labels")
    return MarkovChain(
        [[(t, from_json(p)) for t, p in row] for row in data["transitions"]],
        initial=data["initial"],
        targets=data["targets"],
        parameters=data.get("parameters", ()),
        variables=data.get("variables", ()),
        valuations=[tuple(v) if v is not None else None for v in labels] if labels else None,
        aux=aux,
    )


def chain_to_json(mc: MarkovChain) -> str:
    return json.dumps(chain_to_dict(mc), sort_keys=True, indent=1)


def chain_from_json(text: str) -> MarkovChain:
    return chain_from_dict(json.loads(text))


# --- reference chains --------------------------------------------------------


def toy_chain() -> MarkovChain:
    """Four-state running example over ``<x,y>``; target ``<1,0>``."""
    s, t, u, v = range(4)
    F = Fraction
    return MarkovChain(
        [
            [(s, F(3, 5)), (t, F(2, 5))],
            [(u, F(1, 2)), (v, F(1, 2))],
            [(s, F(3, 5)), (v, F(2, 5))],
            [(u, F(1, 2)), (v, F(1, 2))],
        ],
        initial=s,
        targets={u},
        variables=("x", "y"),
        valuations=[(0, 0), (0, 1), (1, 0), (1, 1)],
    )


def toy_pmc() -> MarkovChain:
    """Parametric variant over ``p`` and ``q`` (v moves to s with 1-q)."""
    p, q = Polynomial.var("p"), Polynomial.var("q")
    s, t, u, v = range(4)
    return MarkovChain(
        [
            [(s, 1 - p), (t, p)],
            [(u, q), (v, 1 - q)],
            [(s, 1 - p), (v, p)],
            [(s, 1 - q), (u, q)],
        ],
        initial=s,
        targets={u},
        parameters=("p", "q"),
        variables=("x", "y"),
        valuations=[(0, 0), (0, 1), (1, 0), (1, 1)],
    )


def random_rational_row(rng: random.Random, k: int, denominator: int = 20) -> list[Fraction]:
    weights = [rng.randint(1, denominator) for _ in range(k)]
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def random_chain(
    rng: random.Random | int,
    num_states: int | None = None,
    max_out: int = 4,
    max_states: int = 8,
    num_targets: int | None = None,
) -> MarkovChain:
    """Seeded random chain with rational rows; used by tests and sweeps."""
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    n = num_states or rng.randint(2, max_states)
    rows = []
    for _ in range(n):
        k = rng.randint(1, min(max_out, n))
        succ = sorted(rng.sample(range(n), k))
        rows.append(list(zip(succ, random_rational_row(rng, k))))
    nt = num_targets if num_targets is not None else rng.randint(0, max(1, n // 3))
    targets = rng.sample(range(n), nt)
    return MarkovChain(rows, initial=rng.randrange(n), targets=targets)
