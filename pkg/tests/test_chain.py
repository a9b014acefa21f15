import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhmc.chain import (
    Distribution,
    MarkovChain,
    bad_states,
    binarize,
    chain_from_json,
    chain_to_dict,
    chain_to_json,
    enumerate_reaching_paths,
    instantiate,
    make_absorbing,
    path_probability,
    random_chain,
    reach_mass,
    toy_chain,
    toy_pmc,
    well_defined_report,
)
from fhmc.errors import BudgetExceeded, InvalidDistribution, InvalidPath, NotWellDefined
from fhmc.poly import Polynomial

S, T, U, V = range(4)


def test_toy_reaching_paths_are_the_three_formula_models():
    paths, mass = enumerate_reaching_paths(toy_chain(), 3)
    assert sorted(paths) == sorted([(S, S, T, U), (S, T, U), (S, T, V, U)])
    assert mass == F(21, 50)


def test_paths_stop_at_first_visit():
    # a target with a self-loop must not be counted again on later steps
    mc = MarkovChain([[(1, F(1))], [(1, F(1))]], initial=0, targets=[1])
    paths, mass = enumerate_reaching_paths(mc, 5)
    assert paths == [(0, 1)]
    assert mass == 1


def test_horizon_zero_is_target_indicator():
    mc = toy_chain()
    assert reach_mass(mc, 0) == 0
    assert reach_mass(mc, 0, start=U) == 1


def test_path_probability():
    mc = toy_chain()
    assert path_probability(mc, [S, S, T, U]) == F(3, 5) * F(2, 5) * F(1, 2)
    assert path_probability(mc, [V]) == 1
    with pytest.raises(InvalidPath):
        path_probability(mc, [S, U])
    with pytest.raises(InvalidPath):
        path_probability(mc, [])


def test_enumeration_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_reaching_paths(toy_chain(), 30, cap=100)


@pytest.mark.parametrize(
    "rows, fragment",
    [
        ([[(0, F(1, 2))]], "sums to 1/2"),
        ([[(0, F(3, 2)), (1, F(-1, 2))], [(1, F(1))]], "outside"),
        ([[(1, F(1))]], "out of range"),
    ],
)
def test_invalid_rows_are_rejected(rows, fragment):
    with pytest.raises(InvalidDistribution, match=fragment):
        MarkovChain(rows, initial=0, targets=[])


def test_distribution_merges_duplicate_successors():
    assert Distribution([(0, F(1, 2)), (0, F(1, 2))]) == Distribution([(0, F(1))])


def test_make_absorbing_latches_targets():
    mc = make_absorbing(toy_chain())
    assert list(mc.transitions[U]) == [(U, 1)]
    assert mc.transitions[S] == toy_chain().transitions[S]


def test_bad_states():
    mc = MarkovChain(
        [[(1, F(3, 10)), (2, F(7, 10))], [(1, F(1))], [(2, F(1))]], initial=0, targets=[2]
    )
    assert bad_states(mc) == {1}
    assert bad_states(toy_chain()) == frozenset()


def test_instantiate_toy_pmc():
    mc = instantiate(toy_pmc(), {"p": F(2, 5), "q": F(1, 2)})
    assert not mc.is_parametric
    assert mc.prob(S, T) == F(2, 5)
    assert mc.prob(V, S) == F(1, 2)


def test_instantiate_rejects_ill_defined_valuation():
    with pytest.raises(NotWellDefined) as info:
        instantiate(toy_pmc(), {"p": F(3, 2), "q": F(1, 2)})
    assert info.value.violations
    assert well_defined_report(toy_pmc(), {"p": F(1, 3), "q": 0}) == []
    with pytest.raises(KeyError):
        instantiate(toy_pmc(), {"p": F(1, 3)})


@given(st.integers(0, 10_000), st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_binarize_preserves_mass_and_bounds_degree(seed, h):
    mc = random_chain(random.Random(seed), max_out=6)
    bm, hmap = binarize(mc)
    assert bm.max_out_degree() <= 2
    assert bm.num_states >= mc.num_states
    assert reach_mass(bm, hmap(h)) == reach_mass(mc, h)


def test_binarize_keeps_binary_chains():
    mc = toy_chain()
    bm, hmap = binarize(mc)
    assert bm is mc and hmap(7) == 7


def test_binarize_parametric_rows():
    p = Polynomial.var("p")
    half = F(1, 2)
    mc = MarkovChain(
        [
            [(0, (1 - p) * half), (1, (1 - p) * half), (2, p * half), (3, p * half)],
            [(1, F(1))],
            [(2, F(1))],
            [(3, F(1))],
        ],
        initial=0,
        targets=[2, 3],
        parameters=("p",),
    )
    bm, hmap = binarize(mc)
    assert hmap(1) == 2
    for u in ({"p": F(1, 3)}, {"p": F(9, 10)}):
        assert reach_mass(instantiate(bm, u), hmap(3)) == reach_mass(instantiate(mc, u), 3)


def test_binarize_rejects_non_polynomial_split():
    p = Polynomial.var("p")
    mc = MarkovChain(
        [[(0, (1 - p) * F(1, 2)), (1, (1 - p) * F(1, 2)), (2, p)], [(1, F(1))], [(2, F(1))]],
        initial=0,
        targets=[2],
        parameters=("p",),
    )
    with pytest.raises(InvalidDistribution, match="polynomially"):
        binarize(mc)


def test_json_round_trip():
    for mc in (toy_chain(), toy_pmc(), random_chain(5)):
        again = chain_from_json(chain_to_json(mc))
        assert chain_to_dict(again) == chain_to_dict(mc)


def test_random_chain_is_seeded():
    assert chain_to_dict(random_chain(11)) == chain_to_dict(random_chain(11))
