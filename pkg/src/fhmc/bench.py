"""Deterministic generators for the benchmark model families, and sweeps.

Every generator returns model source text; the same arguments (and seed)
always give byte-identical text.
"""
from __future__ import annotations

import csv
import io
import multiprocessing as mp
import random
import time
from dataclasses import dataclass
from fractions import Fraction

from .errors import EvenN

FAMILIES = ("factories", "weather", "weather2", "queues", "herman")

WEATHER_CONSTANTS = [
    ("0.1", "0.2"),
    ("0.2", "0.3"),
    ("0.41", "0.45"),
    ("0.94", "0.243"),
    ("0.434", "0.293"),
    ("0.4341", "0.2934"),
    ("0.4345", "0.2939"),
]
QUEUE_CONSTANTS = ["0.4", "0.5", "0.65", "0.75", "0.85", "0.9", "0.92", "0.96"]


def seeded_constants(seed: int, count: int) -> list[str]:
    """``count`` decimals ``k/1000`` with ``1 <= k <= 999``."""
    rng = random.Random(seed)
    return [_decimal(Fraction(rng.randint(1, 999), 1000)) for _ in range(count)]


def _decimal(x: Fraction) -> str:
    s = f"{x.numerator * 1000 // x.denominator:04d}"
    return (s[:-3] + "." + s[-3:]).rstrip("0").rstrip(".") if x.denominator != 1 else str(x.numerator)


@dataclass(frozen=True)
class BenchSpec:
    family: str
    size: int
    seed: int = 0
    parametric: bool = False
    capacity: int = 2  # queues: Q
    random_bias: bool = False  # herman (R)

    def source(self) -> str:
        if self.family == "factories":
            return gen_factories(self.size, self.parametric, self.seed)
        if self.family == "weather":
            return gen_weather(self.size, self.seed)
        if self.family == "weather2":
            return gen_weather2(self.size, self.seed)
        if self.family == "queues":
            return gen_queues(self.size, self.capacity, self.seed)
        if self.family == "herman":
            return gen_herman(self.size, self.random_bias, self.seed)
        raise ValueError(f"unknown family {self.family!r}")

    @property
    def label(self) -> str:
        return {"factories": "allStrike", "weather": "allStrike", "weather2": "allStrike",
                "queues": "target", "herman": "stable"}[self.family]


def gen_factories(n: int, parametric: bool = False, seed: int = 0) -> str:
    """``n`` synchronized factories striking (``c_i``) with p_i, ending with q_i."""
    if n < 1:
        raise ValueError("need at least one factory")
    lines = ["dtmc", ""]
    if parametric:
        names = [f"p{i}" for i in range(1, n + 1)] + [f"q{i}" for i in range(1, n + 1)]
        lines.append(f"const double {', '.join(names)};")
    else:
        vals = seeded_constants(seed, 2 * n)
        for i in range(1, n + 1):
            lines.append(f"const double p{i} = {vals[2 * i - 2]};")
            lines.append(f"const double q{i} = {vals[2 * i - 1]};")
    lines += [
        "",
        "module F1",
        "    c1 : bool init false;",
        "    [a] !c1 -> p1: (c1'=1) + 1-p1: (c1'=0);",
        "    [a]  c1 -> q1: (c1'=0) + 1-q1: (c1'=1);",
        "endmodule",
        "",
    ]
    for i in range(2, n + 1):
        lines.append(f"module F{i} = F1[c1=c{i},p1=p{i},q1=q{i}] endmodule")
    lines += ["", 'label "allStrike" = ' + " & ".join(f"c{i}" for i in range(1, n + 1)) + ";"]
    return "\n".join(lines) + "\n"


def _weather_constants(n: int, seed: int) -> list[tuple[str, str]]:
    out = list(WEATHER_CONSTANTS[:n])
    if n > len(WEATHER_CONSTANTS):
        extra = seeded_constants(seed, 2 * (n - len(WEATHER_CONSTANTS)))
        out += list(zip(extra[::2], extra[1::2]))
    return out


def _weather_factories(n: int, seed: int) -> list[str]:
    lines = []
    for i, (p, q) in enumerate(_weather_constants(n, seed), start=1):
        lines += [f"const double p{i} = {p};", f"const double q{i} = {q};", ""]
    return lines


def _factory_modules(n: int) -> list[str]:
    lines = [
        "module factory1",
        "    state1 : bool init false;",
        "    [act] state1 & sun  -> 0.3 * p1: (state1'=true) + 1-(0.3 * p1): (state1'=false);",
        "    [act] !state1 & sun -> 0.7 * q1: (state1'=true) + 1-(0.7 * q1): (state1'=false);",
        "    [act] state1 & !sun -> 0.6 * p1: (state1'=true) + 1-(0.6 * p1): (state1'=false);",
        "    [act] !state1 & !sun -> 0.4 * q1: (state1'=true) + 1-(0.4 * q1): (state1'=false);",
        "endmodule",
        "",
    ]
    for i in range(2, n + 1):
        lines.append(f"module factory{i} = factory1[state1=state{i},p1=p{i},q1=q{i}] endmodule")
    lines += ["", 'label "allStrike" = ' + " & ".join(f"state{i}" for i in range(1, n + 1)) + ";"]
    return lines


def gen_weather(n: int, seed: int = 0) -> str:
    """Factories whose strike odds depend on a shared sunny/rainy weather bit."""
    if n < 1:
        raise ValueError("need at least one factory")
    lines = ["dtmc", ""] + _weather_factories(n, seed) + [
        "",
        "module weathermodule",
        "    sun : bool init true;",
        "    [act]  sun -> 0.7: (sun'=sun) + 0.3: (sun'=!sun);",
        "    [act] !sun -> 0.4: (sun'=sun) + 0.6: (sun'=!sun);",
        "endmodule",
        "",
    ] + _factory_modules(n)
    return "\n".join(lines) + "\n"


def gen_weather2(n: int, seed: int = 0) -> str:
    """Weather variant where a wind bit drives the sun's transitions."""
    if n < 1:
        raise ValueError("need at least one factory")
    lines = ["dtmc", ""] + _weather_factories(n, seed) + [
        "",
        "module windmodule",
        "    wind : bool init false;",
        "    [act]  wind -> 0.6: (wind'=wind) + 0.4: (wind'=!wind);",
        "    [act] !wind -> 0.2: (wind'=wind) + 0.8: (wind'=!wind);",
        "endmodule",
        "",
        "module weathermodule",
        "    sun : bool init true;",
        "    [act]  sun & !wind -> 0.7: (sun'=sun) + 0.3: (sun'=!sun);",
        "    [act]  sun &  wind -> 0.5: (sun'=sun) + 0.5: (sun'=!sun);",
        "    [act] !sun & !wind -> 0.4: (sun'=sun) + 0.6: (sun'=!sun);",
        "    [act] !sun &  wind -> 0.2: (sun'=sun) + 0.8: (sun'=!sun);",
        "endmodule",
        "",
    ] + _factory_modules(n)
    return "\n".join(lines) + "\n"


def gen_queues(k: int, q: int, seed: int = 0) -> str:
    """``k`` queues of capacity ``q``; the first three are of type 1."""
    if k < 4 or q < 1:
        raise ValueError("queues need K >= 4 and Q >= 1")
    probs = list(QUEUE_CONSTANTS[:k])
    if k > len(QUEUE_CONSTANTS):
        probs += seeded_constants(seed, k - len(QUEUE_CONSTANTS))
    lines = ["dtmc", ""]
    lines += [f"const double p{i}={p};" for i, p in enumerate(probs, start=1)]
    lines += ["", f"const int N = {q};"]
    lines += [f"const int N{i} = N;" for i in range(1, k + 1)]
    lines += [
        "",
        "module queue1",
        "    pos1 : [0..N1] init 0;",
        "    [step] pos1 < N1 -> p1: (pos1'=pos1+1) + 1-p1: (pos1'=pos1);",
        "    [step] pos1 = N1 -> 1: (pos1'=pos1);",
        "endmodule",
        "",
    ]
    lines += [f"module queue{i}=queue1[pos1=pos{i},p1=p{i},N1=N{i}] endmodule" for i in range(2, k + 1)]
    full = " & ".join(f"pos{i}=N{i}" for i in range(1, 4))
    some = " | ".join(f"pos{i} < N{i}" for i in range(4, k + 1))
    lines += ["", "", f'label "target" = {full} & ({some});']
    return "\n".join(lines) + "\n"


def gen_herman(n: int, random_bias: bool = False, seed: int = 0, init=None) -> str:
    """Herman's self-stabilizing ring of ``n`` (odd) processes.

    A process holds a token when its bit equals its left neighbour's; it then
    draws a fresh bit with its bias, otherwise it copies the neighbour.
    ``init`` gives the initial bits (default all 1, i.e. every process
    holds a token).
    """
    if n % 2 == 0:
        raise EvenN(f"ring size must be odd, got {n}")
    if n < 3:
        raise ValueError("ring size must be at least 3")
    bits = list(init) if init is not None else [1] * n
    if len(bits) != n:
        raise ValueError("init needs one bit per process")
    biases = seeded_constants(seed, n) if random_bias else ["0.5"] * n
    lines = ["dtmc", ""]
    lines += [f"const double p{i} = {b};" for i, b in enumerate(biases, start=1)]
    lines += [f"const int b{i} = {int(b)};" for i, b in enumerate(bits, start=1)]
    lines += [
        "",
        "module process1",
        "    x1 : [0..1] init b1;",
        f"    [step] x1=x{n} -> p1: (x1'=0) + 1-p1: (x1'=1);",
        f"    [step] !(x1=x{n}) -> 1: (x1'=x{n});",
        "endmodule",
        "",
    ]
    for i in range(2, n + 1):
        lines.append(f"module process{i} = process1[x1=x{i},x{n}=x{i - 1},p1=p{i},b1=b{i}] endmodule")
    tokens = ", ".join(f"x{i}=x{i - 1 if i > 1 else n}" for i in range(1, n + 1))
    lines += ["", f'label "stable" = ExactlyOneOf({tokens});']
    return "\n".join(lines) + "\n"


TOY_SOURCE = """dtmc

// four states <x,y>; the target is <1,0>
module toy
    x : [0..1] init 0;
    y : [0..1] init 0;
    [] x=0 & y=0 -> 0.6: true + 0.4: (y'=1);
    [] x=0 & y=1 -> 0.5: (x'=1) & (y'=0) + 0.5: (x'=1);
    [] x=1 & y=0 -> 0.6: (x'=0) + 0.4: (y'=1);
    [] x=1 & y=1 -> 0.5: (y'=0) + 0.5: true;
endmodule

label "goal" = x=1 & y=0;
"""


# --- sweeps ---------------------------------------------------------------

BENCH_COLUMNS = ["family", "size", "h", "engine", "status", "time_s", "states", "nodes", "leaves", "weights", "value"]


def run_cell(spec: BenchSpec, h: int, engine: str) -> dict:
    """One (family, size, h, engine) measurement; raises on model errors."""
    from .explicit import bounded_reach_explicit
    from .lang.model import Model, build_explicit
    from .symbolic import bounded_reach_add
    from .wmc import unroll_program, wmc

    row = {"family": spec.family, "size": spec.size, "h": h, "engine": engine, "status": "ok",
           "states": "", "nodes": "", "leaves": "", "weights": "", "value": ""}
    t0 = time.perf_counter()
    model = Model.from_source(spec.source())
    if engine == "explicit":
        mc = build_explicit(model, spec.label)
        value = bounded_reach_explicit(mc, h)[mc.initial]
        row["states"] = mc.num_states
    elif engine == "add":
        mc = build_explicit(model, spec.label)
        res = bounded_reach_add(mc, h)
        value = res.value
        row.update(states=mc.num_states, nodes=res.matrix_nodes, leaves=res.matrix_leaves)
    elif engine == "wmc":
        enc = unroll_program(model, h, spec.label)
        value = wmc(enc)
        row.update(nodes=enc.node_count, weights=len(enc.weight_values()))
    else:
        raise ValueError(f"unknown engine {engine!r}")
    row["time_s"] = f"{time.perf_counter() - t0:.4f}"
    row["value"] = str(value)
    return row


def _cell_worker(args, queue):
    spec, h, engine = args
    try:
        queue.put(run_cell(spec, h, engine))
    except Exception as e:  # reported as a cell status
        queue.put({"status": f"error: {type(e).__name__}: {e}".replace("\n", " ")})


def run_sweep(cells, timeout: float | None = None, jobs: int = 1, timing: bool = True) -> list[dict]:
    """Run cells (spec, h, engine), each in its own process when a timeout is set.

    Rows come back ordered by cell key, never by completion.
    """
    cells = list(cells)
    results: dict = {}
    if timeout is None and jobs <= 1:
        for i, (spec, h, engine) in enumerate(cells):
            try:
                results[i] = run_cell(spec, h, engine)
            except Exception as e:
                results[i] = {"status": f"error: {type(e).__name__}: {e}".replace("\n", " ")}
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
        pending = list(enumerate(cells))
        running = {}
        while pending or running:
            while pending and len(running) < max(1, jobs):
                i, cell = pending.pop(0)
                q = ctx.Queue()
                p = ctx.Process(target=_cell_worker, args=(cell, q), daemon=True)
                p.start()
                running[i] = (p, q, time.monotonic())
            for i, (p, q, started) in list(running.items()):
                row = None
                try:
                    row = q.get_nowait()
                except Exception:
                    pass
                if row is not None:
                    p.join()
                    results[i] = row
                    del running[i]
                elif timeout is not None and time.monotonic() - started > timeout:
                    p.terminate()
                    p.join()
                    results[i] = {"status": "timeout"}
                    del running[i]
                elif not p.is_alive() and q.empty():
                    results[i] = {"status": f"error: exit code {p.exitcode}"}
                    del running[i]
            time.sleep(0.01)
    rows = []
    for i, (spec, h, engine) in enumerate(cells):
        row = {c: "" for c in BENCH_COLUMNS}
        row.update(family=spec.family, size=spec.size, h=h, engine=engine)
        row.update(results[i])
        if not timing:
            row["time_s"] = ""
        rows.append(row)
    rows.sort(key=lambda r: (r["family"], int(r["size"]), int(r["h"]), r["engine"]))
    return rows


def rows_to_csv(rows, columns=BENCH_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
