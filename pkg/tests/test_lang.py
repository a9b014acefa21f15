from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhmc.bench import (
    TOY_SOURCE,
    gen_factories,
    gen_herman,
    gen_queues,
    gen_weather,
    gen_weather2,
)
from fhmc.chain import chain_to_dict, toy_chain
from fhmc.errors import (
    DataRace,
    EvaluationError,
    ModelDivisionByZero,
    OutOfDomain,
    OverlappingGuards,
    ParseError,
    SemanticError,
)
from fhmc.lang import (
    Model,
    build_explicit,
    check_guard_overlap,
    eval_expr,
    expr_str,
    parse,
    parse_expr,
    program_str,
    step_semantics,
)
from fhmc.lang.model import eval_in
from fhmc.poly import Polynomial


def module(body, header="dtmc\n"):
    return header + "module M\n" + body + "\nendmodule\n"


# --- parsing ------------------------------------------------------------


@pytest.mark.parametrize(
    "source",
    [
        TOY_SOURCE,
        gen_factories(3),
        gen_factories(3, parametric=True),
        gen_weather(3),
        gen_weather2(2),
        gen_queues(8, 5),
        gen_herman(5),
        gen_herman(3, random_bias=True),
    ],
)
def test_print_then_parse_is_identity(source):
    program = parse(source)
    assert parse(program_str(program)) == program


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1+2*3", 7),
        ("(1+2)*3", 9),
        ("7/2", F(7, 2)),
        ("-2+5", 3),
        ("true | false & false", True),
        ("!true | true", True),
        ("false => false", True),
        ("true <=> false", False),
        ("1 < 2 ? 10 : 20", 10),
        ("min(3, 1, 2) + max(4, 5)", 6),
        ("floor(7/2) + ceil(1/3) + mod(7, 3)", 5),
        ("ExactlyOneOf(true, false, false)", True),
        ("ExactlyOneOf(true, true)", False),
        ("0.25 + 0.5", F(3, 4)),
    ],
)
def test_expression_semantics(text, expected):
    assert eval_in(parse_expr(text), {}) == expected


@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(1, 9))
def test_arithmetic_precedence_matches_python(a, b, c):
    text = f"{a} + {b} * {c} - {a} / {c}"
    assert eval_in(parse_expr(text), {}) == a + b * c - F(a, c)
    assert parse_expr(expr_str(parse_expr(text))) == parse_expr(text)


def test_range_tokens_do_not_swallow_dots():
    program = parse(module(" x : [0..1] init 0;\n [] x=0 -> (x'=1);"))
    var = program.modules[0].variables[0]
    assert (var.low, var.high) == (parse_expr("0"), parse_expr("1"))


def test_update_forms():
    src = module(
        " x : [0..3] init 0;\n"
        " [] x=0 -> 0.5 : (x'=1) + 0.5 : (x'=2);\n"
        " [] x=1 -> x'=3;\n"
        " [] x=2 -> true;\n"
        " [] x=3 -> 1/4 : x'=0 + 3/4 : true;"
    )
    cmds = parse(src).modules[0].commands
    assert [len(c.updates) for c in cmds] == [2, 1, 1, 2]
    assert cmds[2].updates[0].assignments == ()
    assert cmds[1].updates[0].prob == parse_expr("1")


def test_renamed_module_and_hoisted_constant():
    src = (
        "dtmc\n"
        "module A\n const double r = 0.5;\n a : bool init false;\n [go] !a -> r : (a'=true) + 1-r : true;\nendmodule\n"
        "module B = A[a=b] endmodule\n"
    )
    program = parse(src)
    assert [c.name for c in program.constants] == ["r"]
    assert program.module("B").variables[0].name == "b"
    model = Model(program)
    mc = build_explicit(model, "a & b")
    assert mc.num_states == 4


def test_parameters_are_undefined_doubles():
    program = parse(gen_factories(2, parametric=True))
    assert set(program.parameters) == {"p1", "p2", "q1", "q2"}
    model = Model(program)
    assert model.base_env({})["p1"] == Polynomial.var("p1")


@pytest.mark.parametrize(
    "source, cls, line, col",
    [
        (module(" x : [0..2] init 0;\n [] x=0 -> (x'=1)"), ParseError, 5, 1),
        (module(" x : [0..2] init 0;\n [] y=0 -> (x'=1);"), SemanticError, 4, 5),
        (module(" x : [0..2] init 0;\n [] x=0 -> (z'=1);"), SemanticError, 4, None),
        (module(" x : [0..2] init 0;\n x : bool init true;\n [] true -> true;"), SemanticError, None, None),
        (module(" x : [0..2] init 0;"), ParseError, None, None),
        ("ctmc\n" + module(" x : [0..2] init 0;\n [] true -> true;", header=""), ParseError, 1, 1),
        (module(" x : [0..2] init 0;\n [] x=0 -> (x'=1) @ ;"), ParseError, 4, None),
        ("dtmc\nmodule B = Nope[x=y] endmodule\n", SemanticError, None, None),
    ],
)
def test_errors_carry_positions(source, cls, line, col):
    with pytest.raises(cls) as info:
        parse(source, filename="m.pm")
    err = info.value
    assert err.line is not None and err.col is not None
    if line is not None:
        assert err.line == line
    if col is not None:
        assert err.col == col
    assert str(err).startswith("m.pm:")


# --- semantics ----------------------------------------------------------


def test_toy_program_builds_the_toy_chain():
    mc = build_explicit(Model.from_source(TOY_SOURCE), "goal")
    assert chain_to_dict(mc)["transitions"] == chain_to_dict(toy_chain())["transitions"]
    assert mc.valuations == ((0, 0), (0, 1), (1, 0), (1, 1))


def test_synchronized_action_is_a_product():
    src = (
        "dtmc\n"
        "module A\n x : [0..1] init 0;\n [a] x=0 -> 0.5 : (x'=1) + 0.5 : (x'=0);\nendmodule\n"
        "module B\n y : [0..1] init 0;\n [a] y=0 -> 0.5 : (y'=1) + 0.5 : (y'=0);\nendmodule\n"
    )
    model = Model.from_source(src)
    succ = step_semantics(model, model.initial)
    assert sorted(succ.values()) == [F(1, 4)] * 4


def test_blocked_sync_deadlocks_into_self_loop():
    src = (
        "dtmc\n"
        "module A\n x : [0..1] init 0;\n [a] true -> (x'=1-x);\nendmodule\n"
        "module B\n y : [0..1] init 1;\n [a] y=0 -> true;\nendmodule\n"
    )
    model = Model.from_source(src)
    assert step_semantics(model, model.initial) == {model.initial: 1}


def test_anonymous_commands_interleave_uniformly():
    model = Model.from_source(module(" x : [0..2] init 0;\n [] x=0 -> (x'=1);\n [] x=0 -> (x'=2);"))
    succ = step_semantics(model, model.initial)
    assert sorted(succ.values()) == [F(1, 2), F(1, 2)]


def test_overlapping_named_guards():
    model = Model.from_source(module(" x : [0..2] init 0;\n [a] x=0 -> (x'=1);\n [a] true -> (x'=2);"))
    assert check_guard_overlap(model) == [("M", "a", model.initial)]
    assert sorted(step_semantics(model, model.initial).values()) == [F(1, 2), F(1, 2)]
    with pytest.raises(OverlappingGuards):
        step_semantics(model, model.initial, overlap="reject")


@pytest.mark.parametrize(
    "body, cls",
    [
        (" x : [0..1] init 0;\n [] true -> (x'=x+1);", OutOfDomain),
        (" x : [0..1] init 0;\n [] true -> 0.5 : (x'=1) + 0.4 : (x'=0);", EvaluationError),
        (" x : [0..1] init 0;\n [] true -> 1/(x-x) : (x'=1);", ModelDivisionByZero),
    ],
)
def test_evaluation_errors(body, cls):
    with pytest.raises(cls) as info:
        build_explicit(Model.from_source(module(body)), "x=1")
    assert info.value.line == 4


def test_data_race_between_modules():
    src = (
        "dtmc\n"
        "module A\n x : [0..3] init 0;\n [a] true -> (x'=1);\nendmodule\n"
        "module B\n y : [0..1] init 0;\n [a] true -> (x'=2);\nendmodule\n"
    )
    with pytest.raises(DataRace):
        build_explicit(Model.from_source(src), "x=1")


def test_constant_override_and_evaluation():
    model = Model.from_source(gen_factories(1), constants={"p1": F(1, 3)})
    assert eval_expr(parse_expr("p1 * 3"), model.initial, model) == 1
    mc = build_explicit(model, "allStrike")
    assert mc.prob(mc.initial, mc.initial) == F(2, 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3))
def test_factory_state_space_is_a_hypercube(n):
    mc = build_explicit(Model.from_source(gen_factories(n)), "allStrike")
    assert mc.num_states == 2**n
