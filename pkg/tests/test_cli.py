import csv
import io
import json
import subprocess
import sys
from fractions import Fraction as F

import pytest

from fhmc import cli
from fhmc.bench import TOY_SOURCE, gen_factories
from fhmc.chain import chain_to_json, toy_chain
from fhmc.cli import run


@pytest.fixture
def files(tmp_path):
    (tmp_path / "toy.pm").write_text(TOY_SOURCE)
    (tmp_path / "toy.json").write_text(chain_to_json(toy_chain()))
    (tmp_path / "f2.pm").write_text(gen_factories(2, parametric=True))
    (tmp_path / "vals.csv").write_text("p1,p2,q1,q2\n0.5,0.5,0.5,0.5\n1.5,0.5,0.5,0.5\n0.25,1,0,0\n")
    (tmp_path / "broken.pm").write_text("dtmc\nmodule M\n x : [0..1] init 0;\nendmodule\n")
    return tmp_path


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_check_all_engines_agree(files):
    code, out = run(["check", str(files / "toy.pm"), "-l", "goal", "-H", "3", "-e", "all", "--no-timing"])
    assert code == 0
    table = rows(out)
    assert [r["engine"] for r in table] == ["explicit", "add", "wmc"]
    assert {r["value"] for r in table} == {"21/50"}
    assert {r["decimal"] for r in table} == {"0.42"}
    assert {r["time_s"] for r in table} == {""}


def test_check_chain_json_output(files):
    code, out = run(["check", str(files / "toy.json"), "-H", "3", "--format", "json", "-e", "all"])
    assert code == 0
    doc = json.loads(out)
    assert doc["agree"] is True
    assert [F(r["value"]) for r in doc["results"]] == [F(21, 50)] * 3
    assert all("time_s" in r for r in doc["results"])


def test_check_oracle_and_float(files):
    code, out = run(["check", str(files / "toy.json"), "-H", "3", "-e", "oracle", "--no-timing"])
    assert code == 0 and rows(out)[0]["value"] == "21/50"
    code, out = run(["check", str(files / "toy.json"), "-H", "3", "--arith", "float", "-e", "all"])
    assert code == 0
    assert all(float(r["value"]) == pytest.approx(0.42) for r in rows(out))


def test_engine_disagreement_exits_5(files, monkeypatch):
    real = cli.run_engine

    def skewed(engine, *args, **kw):
        result = real(engine, *args, **kw)
        if engine == "add":
            result["value"] += F(1, 10**9)
        return result

    monkeypatch.setattr(cli, "run_engine", skewed)
    code, _ = run(["check", str(files / "toy.pm"), "-l", "goal", "-H", "3", "-e", "all"])
    assert code == 5


def test_table_output(files):
    code, out = run(["check", str(files / "toy.pm"), "-l", "goal", "-H", "3", "--table"])
    assert code == 0
    table = {(int(r["state"]), int(r["h"])): F(r["probability"]) for r in rows(out)}
    assert table[(0, 3)] == F(21, 50)
    assert table[(1, 3)] == F(7, 8)
    assert len(table) == 16


def test_dot_export(files):
    dot = files / "phi.dot"
    code, _ = run(["check", str(files / "toy.pm"), "-l", "goal", "-H", "3", "--dot", str(dot)])
    assert code == 0
    assert dot.read_text().startswith("digraph")


def test_parametric_check_and_valuation(files):
    code, out = run(["check", str(files / "f2.pm"), "-l", "allStrike", "-H", "1", "--no-timing"])
    assert code == 0 and rows(out)[0]["value"] == "p1*p2"
    args = ["check", str(files / "f2.pm"), "-l", "allStrike", "-H", "1", "-e", "all", "--no-timing"]
    for kv in ("p1=0.5", "p2=0.5", "q1=0", "q2=0"):
        args += ["--valuation", kv]
    code, out = run(args)
    assert code == 0
    assert {r["value"] for r in rows(out)} == {"1/4"}


def test_sample(files):
    code, out = run(["sample", str(files / "f2.pm"), "-l", "allStrike", "-H", "2",
                     "--valuations", str(files / "vals.csv")])
    assert code == 0
    table = rows(out)
    assert [r["status"] for r in table] == ["ok", "not-well-defined", "ok"]
    assert F(table[0]["fraction"]) == F(7, 16)
    assert table[0]["decimal"] == "0.4375"
    # p1 = 1/4, p2 = 1, q = 0: both factories stay on strike once there
    assert F(table[2]["fraction"]) == F(1, 4) + F(3, 4) * F(1, 4)


def test_bounds_sweep(files):
    code, out = run(["bounds", str(files / "toy.pm"), "-l", "goal", "-H", "3", "--sweep"])
    assert code == 0
    table = rows(out)
    assert [r["h"] for r in table] == ["1", "2", "3"]
    assert table[-1]["lower_fraction"] == "21/50" and table[-1]["upper_fraction"] == "1"


def test_stats(files):
    code, out = run(["stats", str(files / "toy.pm"), "-l", "goal", "-H", "3"])
    assert code == 0
    (row,) = rows(out)
    assert row["states"] == "4" and row["add-leaves"] == "5" and row["bdd-nodes"] == "7"


def test_bench_gen_and_run(files):
    target = files / "h3.pm"
    code, _ = run(["bench", "gen", "--family", "herman", "--size", "3", "-o", str(target)])
    assert code == 0 and "module process1" in target.read_text()
    code, out = run(["bench", "run", "--family", "factories", "--sizes", "1..2", "--horizons", "2",
                     "--engines", "explicit,wmc", "--no-timing"])
    assert code == 0
    table = rows(out)
    assert len(table) == 4
    assert len({r["value"] for r in table if r["size"] == "2"}) == 1


@pytest.mark.parametrize(
    "argv, code",
    [
        (["check", "missing.pm", "-H", "1"], 2),
        (["check"], 2),
        (["check", "{d}/toy.pm", "-H", "1", "-l", "nolabel"], 3),
        (["check", "{d}/broken.pm", "-H", "1"], 3),
        (["check", "{d}/toy.pm", "-l", "goal", "-H", "1", "-e", "explicit", "--max-states", "2"], 4),
        (["bench", "gen", "--family", "herman", "--size", "4"], 3),
    ],
)
def test_exit_codes(files, argv, code):
    argv = [a.format(d=files) for a in argv]
    assert run(argv)[0] == code


def test_node_cap_from_environment(files, monkeypatch):
    monkeypatch.setenv("FHMC_MAX_NODES", "3")
    assert run(["check", str(files / "toy.pm"), "-l", "goal", "-H", "3"])[0] == 4


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "fhmc", "check", str(files / "toy.pm"), "-l", "goal", "-H", "3", "--no-timing"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert "21/50" in proc.stdout
