from fractions import Fraction as F
from pathlib import Path

import pytest

from fhmc.bench import (
    BENCH_COLUMNS,
    BenchSpec,
    gen_factories,
    gen_herman,
    gen_queues,
    gen_weather,
    gen_weather2,
    rows_to_csv,
    run_cell,
    run_sweep,
    seeded_constants,
)
from fhmc.errors import EvenN
from fhmc.explicit import bounded_reach_explicit
from fhmc.lang import Model, build_explicit, parse

DATA = Path(__file__).parent / "data"


def listing(name):
    return (DATA / name).read_text()


def test_factories_listing():
    assert parse(gen_factories(3, parametric=True)) == parse(listing("factories3.pm"))


def test_weather_listing():
    assert parse(gen_weather(7)) == parse(listing("weather7.pm"))


def test_queues_listing_is_reproduced_verbatim():
    assert gen_queues(8, 5).strip() == listing("queues.pm").strip()


@pytest.mark.parametrize(
    "make",
    [
        lambda s: gen_factories(4, seed=s),
        lambda s: gen_weather(3, seed=s),
        lambda s: gen_queues(5, 2, seed=s),
        lambda s: gen_herman(5, random_bias=True, seed=s),
    ],
)
def test_generators_are_deterministic(make):
    assert make(7) == make(7)


def test_seeded_constants_are_probabilities():
    values = [F(c) for c in seeded_constants(3, 20)]
    assert seeded_constants(3, 20) == seeded_constants(3, 20)
    assert all(0 < v < 1 for v in values)


def test_factory_strike_probability_after_one_step():
    model = Model.from_source(gen_factories(3, seed=1))
    env = model.base_env({})
    mc = build_explicit(model, "allStrike")
    expected = env["p1"] * env["p2"] * env["p3"]
    assert bounded_reach_explicit(mc, 1)[mc.initial] == expected


def test_weather2_adds_a_wind_module():
    program = parse(gen_weather2(2))
    assert len(program.modules) == len(parse(gen_weather(2)).modules) + 1


def test_herman_needs_odd_size():
    with pytest.raises(EvenN):
        gen_herman(4)


def test_herman_stabilizes():
    model = Model.from_source(gen_herman(3))
    mc = build_explicit(model, "stable")
    # stabilization is almost sure, so mass grows towards one
    values = [bounded_reach_explicit(mc, h)[mc.initial] for h in (1, 5, 20)]
    assert values == sorted(values) and values[-1] > F(9, 10)


def test_herman_initial_configuration():
    model = Model.from_source(gen_herman(3, init=[1, 0, 1]))
    assert model.initial == (1, 0, 1)
    assert [v.name for v in model.variables] == ["x1", "x2", "x3"]


def test_bench_spec_labels():
    assert BenchSpec("factories", 2, 0, False).label == "allStrike"
    assert BenchSpec("queues", 4, 0, False).label == "target"
    assert BenchSpec("herman", 3, 0, False).label == "stable"


def test_run_cell_engines_agree():
    spec = BenchSpec("factories", 2, 0, False)
    rows = [run_cell(spec, 3, e) for e in ("explicit", "add", "wmc")]
    assert {r["status"] for r in rows} == {"ok"}
    assert len({r["value"] for r in rows}) == 1
    assert rows[2]["weights"] == 4


def test_sweep_reports_timeouts_and_sorts():
    fast = BenchSpec("factories", 2, 0, False)
    slow = BenchSpec("weather", 7, 0, False)
    rows = run_sweep([(fast, 3, "wmc"), (fast, 3, "add"), (slow, 60, "add")], timeout=2, jobs=2, timing=False)
    assert [(r["family"], r["engine"]) for r in rows] == [
        ("factories", "add"),
        ("factories", "wmc"),
        ("weather", "add"),
    ]
    assert rows[-1]["status"] == "timeout"
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(BENCH_COLUMNS)
    assert all(r["time_s"] == "" for r in rows)
