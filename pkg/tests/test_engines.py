"""Explicit (exact and float) and ADD engines against the path oracle."""
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhmc.chain import (
    MarkovChain,
    instantiate,
    random_chain,
    reach_mass,
    toy_chain,
    toy_pmc,
)
from fhmc.errors import NodeCapExceeded, SizeCap
from fhmc.explicit import (
    bounded_reach_explicit,
    bounded_reach_float,
    bounded_reach_table,
    compile_parametric,
    table_csv,
    transition_matrix,
    unbounded_reach,
)
from fhmc.poly import Polynomial
from fhmc.symbolic import (
    StateEncoding,
    bounded_reach_add,
    transition_add,
    transition_stats,
)

p, q = Polynomial.var("p"), Polynomial.var("q")


@given(st.integers(0, 100_000), st.integers(0, 6))
@settings(max_examples=80, deadline=None)
def test_every_state_matches_oracle(seed, h):
    mc = random_chain(random.Random(seed))
    exact = bounded_reach_explicit(mc, h)
    add = bounded_reach_add(mc, h).values()
    approx = bounded_reach_float(mc, h)
    for s in range(mc.num_states):
        oracle = reach_mass(mc, h, start=s)
        assert exact[s] == oracle
        assert add[s] == oracle
        assert approx[s] == pytest.approx(float(oracle), abs=1e-12)


def test_table_rows_are_horizons():
    table = bounded_reach_table(toy_chain(), 3)
    assert [row[0] for row in table] == [0, 0, F(1, 5), F(21, 50)]
    csv = table_csv(toy_chain(), 1).splitlines()
    assert csv[0] == "state,h,probability"
    assert "1,1,1/2" in csv


def test_parametric_explicit_is_the_solution_function():
    values = bounded_reach_explicit(toy_pmc(), 2)
    assert values[0] == p * q
    assert values[1] == 2 * q - q * q
    assert values[3] == q


@given(
    st.fractions(min_value=0, max_value=1, max_denominator=20),
    st.fractions(min_value=0, max_value=1, max_denominator=20),
    st.integers(0, 5),
)
@settings(max_examples=40, deadline=None)
def test_parametric_then_instantiate_commutes(pv, qv, h):
    u = {"p": pv, "q": qv}
    symbolic = bounded_reach_explicit(toy_pmc(), h)[0]
    value = symbolic.evaluate(u) if isinstance(symbolic, Polynomial) else symbolic
    assert value == bounded_reach_explicit(instantiate(toy_pmc(), u), h)[0]
    assert bounded_reach_add(toy_pmc(), h).value == symbolic


def test_compiled_parametric_matrix_matches_plain_float():
    compiled = compile_parametric(toy_pmc())
    u = {"p": 0.3, "q": 0.8}
    a = bounded_reach_float(toy_pmc(), 4, valuation=u, compiled=compiled)
    b = bounded_reach_float(toy_pmc(), 4, valuation=u)
    assert np.allclose(a, b, atol=1e-15)
    exact = bounded_reach_explicit(instantiate(toy_pmc(), {"p": F(3, 10), "q": F(4, 5)}), 4)
    assert np.allclose(a, [float(x) for x in exact], atol=1e-12)


def test_transition_matrix_rows_sum_to_one():
    A = transition_matrix(toy_chain())
    assert np.allclose(A.sum(axis=1), 1.0)


def test_unbounded_reach():
    mc = MarkovChain(
        [[(0, F(1, 2)), (1, F(1, 4)), (2, F(1, 4))], [(1, F(1))], [(2, F(1))]], initial=0, targets=[2]
    )
    assert unbounded_reach(mc)[0] == F(1, 2)
    assert unbounded_reach(toy_chain()) == [1, 1, 1, 1]
    with pytest.raises(SizeCap):
        unbounded_reach(random_chain(3, num_states=8), cap=4)


def test_unbounded_is_the_limit_of_bounded():
    for seed in range(10):
        mc = random_chain(seed)
        limit = unbounded_reach(mc)
        approx = bounded_reach_float(mc, 2000)
        assert np.allclose(approx, [float(x) for x in limit], atol=1e-9)


def test_toy_transition_add_terminals():
    mc = toy_chain()
    enc = StateEncoding.for_chain(mc)
    m = enc.manager()
    A = transition_add(mc, enc, m)
    assert m.terminal_set([A]) == {0, F(2, 5), F(1, 2), F(3, 5)}
    # s -> s is the 3/5 self-loop
    env = {**enc.row_assignment(0), **{n + "'": v for n, v in enc.row_assignment(0).items()}}
    assert m.eval(A, env) == F(3, 5)
    assert transition_stats(mc)[1] == 4


def test_add_steps_are_recorded():
    result = bounded_reach_add(toy_chain(), 3)
    assert [h for h, _, _ in result.steps] == [0, 1, 2, 3]
    assert result.vector_leaves == len(set(result.values()))


def test_add_node_cap():
    with pytest.raises(NodeCapExceeded):
        bounded_reach_add(random_chain(7, num_states=8), 4, max_nodes=10)


def test_negative_horizon():
    with pytest.raises(ValueError):
        bounded_reach_add(toy_chain(), -1)
