import random
from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhmc.bench import TOY_SOURCE, gen_factories, gen_herman, gen_queues, gen_weather
from fhmc.chain import (
    MarkovChain,
    instantiate,
    random_chain,
    reach_mass,
    toy_chain,
    toy_pmc,
)
from fhmc.dd import Manager
from fhmc.errors import (
    DataRace,
    MissingWeight,
    NonConstantResidual,
    NotWellDefined,
    OutOfDomain,
)
from fhmc.explicit import bounded_reach_explicit, unbounded_reach
from fhmc.lang import Model, build_explicit
from fhmc.poly import Polynomial, normalize
from fhmc.wmc import (
    SolutionFunction,
    bdd_as_mc,
    coin_chain,
    indefinite_bounds,
    unroll_chain,
    unroll_program,
    wmc,
)
from fhmc.wmc.coins import coin_chain_or_quotient

p, q = Polynomial.var("p"), Polynomial.var("q")

SYMBOLIC_SOURCE = (Path(__file__).parent / "data" / "symbolic.pm").read_text()


# --- coins ----------------------------------------------------------------


def test_coin_chain_conditional_weights():
    assert coin_chain([F(1, 2), F(1, 4), F(1, 4)]) == [(0, F(1, 2)), (1, F(1, 2))]
    assert coin_chain([F(1, 5), F(2, 5), F(2, 5)]) == [(0, F(1, 5)), (1, F(1, 2))]
    assert coin_chain([F(1)]) == []


@given(st.lists(st.integers(1, 20), min_size=1, max_size=6))
def test_coin_chain_reproduces_branch_masses(ws):
    probs = [F(w, sum(ws)) for w in ws]
    weights = [w for _, w in coin_chain(probs)]
    tails = F(1)
    for j, prob in enumerate(probs):
        if j < len(weights):
            assert tails * weights[j] == prob
            tails *= 1 - weights[j]
        else:
            assert tails == prob


def test_coin_chain_parametric_residuals():
    assert coin_chain([p, 1 - p]) == [(0, p)]
    assert coin_chain([1 - p, p * q, p * (1 - q)]) == [(0, 1 - p), (1, q)]
    with pytest.raises(NonConstantResidual):
        coin_chain([q, p, 1 - p - q])
    weights = coin_chain_or_quotient([q, p, 1 - p - q])
    assert weights[1][1].evaluate({"p": F(1, 4), "q": F(1, 2)}) == F(1, 2)


# --- chain unrolling --------------------------------------------------------


@given(st.integers(0, 100_000), st.integers(0, 7))
@settings(max_examples=80, deadline=None)
def test_unroll_chain_matches_oracle(seed, h):
    mc = random_chain(random.Random(seed), max_out=5)
    enc = unroll_chain(mc, h)
    assert wmc(enc) == reach_mass(mc, h)
    # the BDD read as a chain reaches TRUE with the same probability
    if enc.root not in (0, 1):
        bm = bdd_as_mc(enc)
        assert unbounded_reach(bm)[0] == wmc(enc)


def test_wmc_is_monotone_in_horizon():
    for seed in range(10):
        mc = random_chain(seed)
        values = [wmc(unroll_chain(mc, h)) for h in range(8)]
        assert values == sorted(values)


def test_causal_order_is_step_major():
    enc = unroll_chain(toy_chain(), 4, state_names="stuv")
    steps = [c.step for c in enc.coins]
    assert steps == sorted(steps)
    m = enc.manager
    levels = [m.level(c.name) for c in enc.coins]
    assert levels == sorted(levels)


def test_toy_coin_weights():
    enc = unroll_chain(toy_chain(), 3, state_names="stuv")
    assert enc.weights["c_{s,0}"] == F(3, 5)
    assert enc.weights["c_{t,1}"] == F(1, 2)
    assert {c.name for c in enc.used_coins()} <= set(enc.weights)


def test_bdd_as_mc_edges():
    enc = unroll_chain(toy_chain(), 3, state_names="stuv")
    bm = bdd_as_mc(enc)
    assert bm.initial == 0 and bm.max_out_degree() <= 2
    assert unbounded_reach(bm)[0] == F(21, 50)
    root = enc.root
    m = enc.manager
    w = enc.weights[m.node_var(root)]
    hi_state = [t for t, pr in bm.transitions[0] if pr == w]
    assert hi_state


def test_missing_weight():
    m = Manager(["a"])
    with pytest.raises(MissingWeight):
        wmc(m, m.var("a"), {})


def test_wmc_of_terminals():
    m = Manager()
    assert wmc(m, 0, {}) == 0
    assert wmc(m, 1, {}) == 1


# --- programs -----------------------------------------------------------


PROGRAMS = [
    (TOY_SOURCE, "goal"),
    (gen_factories(2), "allStrike"),
    (gen_weather(2), "allStrike"),
    (gen_queues(4, 1), "target"),
    (gen_herman(3), "stable"),
    (gen_herman(5, random_bias=True), "stable"),
]


@pytest.mark.parametrize("source, label", PROGRAMS)
def test_program_unroll_matches_explicit(source, label):
    model = Model.from_source(source)
    mc = build_explicit(model, label)
    for h in range(5):
        assert wmc(unroll_program(model, h, label)) == bounded_reach_explicit(mc, h)[mc.initial], h


def test_factory_h1_is_product_and_small():
    model = Model.from_source(gen_factories(3, parametric=True))
    enc = unroll_program(model, 1, "allStrike")
    assert wmc(enc) == Polynomial.var("p1") * Polynomial.var("p2") * Polynomial.var("p3")
    assert enc.node_count == 5


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_factory_edge_weights_are_4n(n):
    enc = unroll_program(Model.from_source(gen_factories(n, parametric=True)), 3, "allStrike")
    assert len(enc.edge_weights()) == 4 * n


def test_program_runtime_errors():
    race = (
        "dtmc\n"
        "module A\n x : [0..3] init 0;\n [a] true -> (x'=1);\nendmodule\n"
        "module B\n y : [0..1] init 0;\n [a] true -> (x'=2);\nendmodule\n"
    )
    with pytest.raises(DataRace):
        unroll_program(Model.from_source(race), 2, "x=1")
    dom = "dtmc\nmodule A\n x : [0..1] init 0;\n [] true -> (x'=x+1);\nendmodule\n"
    with pytest.raises(OutOfDomain):
        unroll_program(Model.from_source(dom), 3, "x=5")


# --- solution functions ----------------------------------------------------


def test_toy_pmc_solution_function():
    enc = unroll_chain(toy_pmc(), 3)
    sf = SolutionFunction(enc)
    for pv, qv in [(F(2, 5), F(1, 2)), (F(1, 10), F(9, 10)), (F(0), F(1))]:
        u = {"p": pv, "q": qv}
        expected = reach_mass(instantiate(toy_pmc(), u), 3)
        assert sf(u) == expected
        assert normalize(wmc(enc)).evaluate(u) == expected
        assert sf.last_visits == sf.num_nodes


@given(
    st.fractions(min_value=0, max_value=1, max_denominator=30),
    st.fractions(min_value=0, max_value=1, max_denominator=30),
    st.integers(0, 6),
)
@settings(max_examples=50, deadline=None)
def test_parametric_and_constant_weights_commute(pv, qv, h):
    u = {"p": pv, "q": qv}
    sf = SolutionFunction(unroll_chain(toy_pmc(), h))
    constant = unroll_chain(instantiate(toy_pmc(), u), h)
    assert sf(u) == wmc(constant)
    assert sf.evaluate({k: float(v) for k, v in u.items()}, exact=False) == pytest.approx(float(sf(u)), abs=1e-12)


def test_sample_many_on_symbolic_distributions():
    model = Model.from_source(SYMBOLIC_SOURCE)
    sf = SolutionFunction(unroll_program(model, 6, "x=1"))
    pmc = build_explicit(model, "x=1")
    good = [{"p": F(3, 5), "q": F(1, 2), "u": F(3, 4)}, {"p": F(3, 10), "q": F(1, 10), "u": F(99, 100)}]
    bad = {"p": F(3, 10), "q": F(1, 10), "u": F(1, 10)}
    results = sf.sample_many(good[:1] + [bad] + good[1:])
    assert [r.status for r in results] == ["ok", "not-well-defined", "ok"]
    for r, u in zip([results[0], results[2]], good):
        assert r.value == bounded_reach_explicit(instantiate(pmc, u), 6)[pmc.initial]
        assert 0 < r.value < 1
    assert sf.sample_many([]) == []
    with pytest.raises(NotWellDefined):
        sf(bad)


def test_float_valuations_are_read_as_decimals():
    sf = SolutionFunction(unroll_chain(toy_pmc(), 3))
    assert sf({"p": 0.4, "q": 0.5}) == sf({"p": F(2, 5), "q": F(1, 2)})


def test_solution_function_freezes_and_needs_all_parameters():
    enc = unroll_chain(toy_pmc(), 2)
    sf = SolutionFunction(enc)
    assert enc.manager.frozen
    with pytest.raises(KeyError):
        sf({"p": F(1, 2)})


# --- indefinite bounds -----------------------------------------------------


def test_bounds_with_a_sink():
    mc = MarkovChain(
        [[(1, F(3, 10)), (2, F(7, 10))], [(1, F(1))], [(2, F(1))]], initial=0, targets=[2]
    )
    b = indefinite_bounds(mc, 1)
    assert (b.lower, b.upper) == (F(7, 10), F(7, 10))
    assert indefinite_bounds(mc, 0) == (0, 1)


def test_bounds_without_bad_states_are_trivial_above():
    b = indefinite_bounds(toy_chain(), 3)
    assert b.lower == F(21, 50) and b.upper == 1


def test_program_bounds_match_chain_bounds():
    src = (
        "dtmc\nmodule M\n x : [0..2] init 0;\n"
        " [] x=0 -> 0.3 : (x'=1) + 0.5 : (x'=2) + 0.2 : (x'=0);\n"
        " [] x>0 -> true;\nendmodule\n"
    )
    model = Model.from_source(src)
    mc = build_explicit(model, "x=2")
    for h in range(4):
        assert indefinite_bounds(model, h, "x=2") == indefinite_bounds(mc, h)
    assert unbounded_reach(mc)[mc.initial] == F(5, 8)
