"""Indefinite-horizon bounds ``Pr(<=h T) <= Pr(<> T) <= 1 - Pr(<=h Bad)``."""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple

from ..chain import MarkovChain, bad_states
from ..lang.model import Model, build_explicit
from .count import wmc
from .program import unroll_program
from .unroll import unroll_chain


class Bounds(NamedTuple):
    lower: object
    upper: object

    @property
    def gap(self):
        return self.upper - self.lower


def indefinite_bounds(model, h: int, target=None, cap: int | None = None) -> Bounds:
    """Lower and upper bound on unbounded reachability from ``h`` steps.

    ``Bad`` is the set of states that cannot reach the target. For programs
    it is computed on the explicit state space and re-entered into the
    encoding as a membership test over the state variables.
    """
    if isinstance(model, MarkovChain):
        targets = model.targets if target is None else frozenset(target)
        lower = wmc(unroll_chain(model, h, targets))
        bad = bad_states(model, targets)
        upper = 1 - wmc(unroll_chain(model, h, bad)) if bad else Fraction(1)
        return Bounds(lower, upper)
    if isinstance(model, str):
        model = Model.from_source(model)
    elif not isinstance(model, Model):
        model = Model(model)
    mc = build_explicit(model, target, cap=cap)
    bad = bad_states(mc)
    lower = wmc(unroll_program(model, h, target))
    if not bad:
        return Bounds(lower, Fraction(1))
    bad_vals = [mc.valuations[s] for s in sorted(bad)]
    upper = 1 - wmc(unroll_program(model, h, target_states=bad_vals))
    return Bounds(lower, upper)
