"""Command-line interface.

Exit codes: 0 success, 2 usage, 3 model error, 4 cap or timeout,
5 engine disagreement.
"""
from __future__ import annotations

import argparse
import csv
import decimal
import io
import json
import os
import sys
import time
from fractions import Fraction

from . import bench
from .chain import MarkovChain, chain_from_json, reach_mass
from .errors import CapExceeded, FhmcError, ModelError, NotWellDefined
from .poly import is_symbolic

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_CAP, EXIT_DISAGREE = 0, 2, 3, 4, 5
ENGINES = ("explicit", "add", "wmc")
STATS_COLUMNS = ["model", "h", "states", "add-nodes", "add-leaves", "vector-nodes", "vector-leaves",
                 "bdd-nodes", "distinct-weights"]


class UsageError(Exception):
    pass


def _env_int(name: str):
    v = os.environ.get(name)
    return int(v) if v else None


def fmt_decimal(x, digits: int = 17) -> str:
    if is_symbolic(x):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    x = Fraction(x)
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        return str(decimal.Decimal(x.numerator) / decimal.Decimal(x.denominator))


# --- model loading -----------------------------------------------------------

class Loaded:
    """A model file: either a program (``.pm`` style) or a chain (``.json``)."""

    def __init__(self, path: str, constants: dict, label: str | None, max_states: int | None):
        from .lang.model import Model

        self.path = path
        self.label = label
        self.max_states = max_states
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if path.endswith(".json"):
            self.chain: MarkovChain | None = chain_from_json(text)
            self.model = None
        else:
            try:
                self.model = Model.from_source(text, constants, filename=path)
            except ModelError as e:
                raise e.with_filename(path) if e.filename is None else e
            self.chain = None
            if label is None:
                raise UsageError("--label is required for program models")
            if label not in self.model.labels:
                from .lang.parser import parse_expr

                parse_expr(label)  # a target expression is accepted too

    @property
    def parameters(self) -> tuple:
        return self.chain.parameters if self.chain is not None else self.model.parameters

    def explicit(self, valuation=None) -> MarkovChain:
        from .chain import instantiate
        from .lang.model import build_explicit

        if self.chain is not None:
            return instantiate(self.chain, valuation) if valuation else self.chain
        return build_explicit(self.model, self.label, valuation=valuation, cap=self.max_states)

    def encoding(self, h: int, valuation=None, max_nodes=None):
        from .chain import instantiate
        from .wmc import unroll_chain, unroll_program

        if self.chain is not None:
            mc = instantiate(self.chain, valuation) if valuation else self.chain
            return unroll_chain(mc, h, max_nodes=max_nodes)
        return unroll_program(self.model, h, self.label, valuation=valuation, max_nodes=max_nodes)


def _parse_consts(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--const expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        v = v.strip()
        if v in ("true", "false"):
            out[k.strip()] = v == "true"
        else:
            try:
                out[k.strip()] = int(v)
            except ValueError:
                out[k.strip()] = Fraction(v)
    return out


def _parse_valuation(items) -> dict | None:
    if not items:
        return None
    return {k: Fraction(v) if not isinstance(v, bool) else v for k, v in _parse_consts(items).items()}


# --- engines -----------------------------------------------------------------

def run_engine(engine: str, loaded: Loaded, h: int, arith: str = "exact", valuation=None, max_nodes=None) -> dict:
    """Run one engine; returns value plus statistics."""
    from .explicit import bounded_reach_explicit, bounded_reach_float
    from .symbolic import bounded_reach_add
    from .wmc import wmc

    t0 = time.perf_counter()
    out = {"engine": engine, "states": "", "nodes": "", "leaves": "", "weights": ""}
    if engine == "explicit":
        mc = loaded.explicit(valuation)
        if arith == "float" and not mc.is_parametric:
            value = float(bounded_reach_float(mc, h)[mc.initial])
        else:
            value = bounded_reach_explicit(mc, h)[mc.initial]
        out["states"] = mc.num_states
    elif engine == "add":
        mc = loaded.explicit(valuation)
        res = bounded_reach_add(mc, h, max_nodes=max_nodes)
        value = res.value
        out.update(states=mc.num_states, nodes=res.matrix_nodes, leaves=res.matrix_leaves)
    elif engine == "wmc":
        enc = loaded.encoding(h, valuation, max_nodes)
        value = wmc(enc)
        out.update(nodes=enc.node_count, weights=len(enc.weight_values()))
    elif engine == "oracle":
        mc = loaded.explicit(valuation)
        cap = _env_int("FHMC_MAX_PATHS")
        value = reach_mass(mc, h, cap=cap) if cap else reach_mass(mc, h)
        out["states"] = mc.num_states
    else:
        raise UsageError(f"unknown engine {engine!r}")
    if arith == "float" and not is_symbolic(value):
        value = float(value)
    out["value"] = value
    out["time_s"] = time.perf_counter() - t0
    return out


def _agree(values, arith: str) -> bool:
    first = values[0]
    for v in values[1:]:
        if arith == "float" and not is_symbolic(v) and not is_symbolic(first):
            if abs(float(v) - float(first)) > 1e-9:
                return False
        elif v != first:
            return False
    return True


# --- subcommands -------------------------------------------------------------

def cmd_check(args, out) -> int:
    loaded = Loaded(args.model, _parse_consts(args.const), args.label, args.max_states)
    valuation = _parse_valuation(args.valuation)
    engines = list(ENGINES) if args.engine == "all" else [args.engine]
    results = [run_engine(e, loaded, args.horizon, args.arith, valuation, args.max_nodes) for e in engines]
    agree = _agree([r["value"] for r in results], args.arith)
    if args.table:
        from .explicit import table_csv

        out.write(table_csv(loaded.explicit(valuation), args.horizon))
    if args.dot:
        enc = loaded.encoding(args.horizon, valuation, args.max_nodes)
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(enc.to_dot())
    timing = not args.no_timing
    if args.format == "json":
        doc = {
            "model": args.model,
            "label": args.label,
            "h": args.horizon,
            "agree": agree,
            "results": [
                {
                    "engine": r["engine"],
                    "value": str(r["value"]),
                    "decimal": fmt_decimal(r["value"]),
                    **({"time_s": round(r["time_s"], 6)} if timing else {}),
                    **{k: r[k] for k in ("states", "nodes", "leaves", "weights") if r[k] != ""},
                }
                for r in results
            ],
        }
        out.write(json.dumps(doc, indent=2) + "\n")
    elif not args.table:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["engine", "value", "decimal", "time_s", "states", "nodes", "leaves", "weights"])
        for r in results:
            w.writerow([r["engine"], r["value"], fmt_decimal(r["value"]),
                        f"{r['time_s']:.6f}" if timing else "", r["states"], r["nodes"], r["leaves"], r["weights"]])
    if not agree:
        print("error: engines disagree: " + ", ".join(f"{r['engine']}={r['value']}" for r in results),
              file=sys.stderr)
        return EXIT_DISAGREE
    return EXIT_OK


def read_valuations(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        return []
    header = [c.strip() for c in rows[0]]
    return [{k: Fraction(v.strip()) for k, v in zip(header, r)} for r in rows[1:]]


def cmd_sample(args, out) -> int:
    from .wmc import SolutionFunction

    loaded = Loaded(args.model, _parse_consts(args.const), args.label, args.max_states)
    if not loaded.parameters:
        raise UsageError("sample needs a parametric model")
    valuations = read_valuations(args.valuations)
    t0 = time.perf_counter()
    sf = SolutionFunction(loaded.encoding(args.horizon, max_nodes=args.max_nodes))
    build = time.perf_counter() - t0
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["row", "decimal", "fraction", "status"])
    times = []
    exact = args.arith == "exact"
    for i, u in enumerate(valuations):
        t1 = time.perf_counter()
        try:
            v = sf.evaluate(u, exact=exact)
            w.writerow([i, fmt_decimal(v), str(v) if exact else "", "ok"])
        except NotWellDefined:
            w.writerow([i, "", "", "not-well-defined"])
        times.append(time.perf_counter() - t1)
    if not args.no_timing:
        mean = sum(times) / len(times) if times else 0.0
        print(f"build_s={build:.6f} bdd_nodes={sf.num_nodes} evaluations={len(times)} "
              f"eval_total_s={sum(times):.6f} eval_mean_s={mean:.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_bounds(args, out) -> int:
    from .wmc import indefinite_bounds

    loaded = Loaded(args.model, _parse_consts(args.const), args.label, args.max_states)
    target = loaded.model if loaded.chain is None else loaded.chain
    hs = range(1 if args.sweep else args.horizon, args.horizon + 1) if args.sweep else [args.horizon]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["h", "lower", "upper", "gap", "lower_fraction", "upper_fraction"])
    for h in hs:
        if loaded.chain is not None:
            b = indefinite_bounds(target, h)
        else:
            b = indefinite_bounds(target, h, args.label, cap=args.max_states)
        w.writerow([h, fmt_decimal(b.lower), fmt_decimal(b.upper), fmt_decimal(b.gap), b.lower, b.upper])
    return EXIT_OK


def stats_row(loaded: Loaded, h: int, name: str, max_nodes=None) -> dict:
    from .symbolic import bounded_reach_add

    mc = loaded.explicit()
    res = bounded_reach_add(mc, h, max_nodes=max_nodes)
    enc = loaded.encoding(h, max_nodes=max_nodes)
    return {
        "model": name, "h": h, "states": mc.num_states,
        "add-nodes": res.matrix_nodes, "add-leaves": res.matrix_leaves,
        "vector-nodes": res.vector_nodes, "vector-leaves": res.vector_leaves,
        "bdd-nodes": enc.node_count, "distinct-weights": len(enc.weight_values()),
    }


def cmd_stats(args, out) -> int:
    loaded = Loaded(args.model, _parse_consts(args.const), args.label, args.max_states)
    out.write(bench.rows_to_csv([stats_row(loaded, args.horizon, args.model, args.max_nodes)], STATS_COLUMNS))
    return EXIT_OK


def _spec_from_args(args, size: int) -> bench.BenchSpec:
    return bench.BenchSpec(args.family, size, args.seed, args.parametric, args.capacity, args.random_bias)


def cmd_bench_gen(args, out) -> int:
    text = _spec_from_args(args, args.size).source()
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "..." in part or ".." in part:
            a, b = part.replace("...", "..").split("..")
            out += list(range(int(a), int(b) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def cmd_bench_run(args, out) -> int:
    engines = list(ENGINES) if args.engines == "all" else args.engines.split(",")
    for e in engines:
        if e not in ENGINES:
            raise UsageError(f"unknown engine {e!r}")
    cells = [
        (_spec_from_args(args, n), h, e)
        for n in _int_list(args.sizes)
        for h in _int_list(args.horizons)
        for e in engines
    ]
    rows = bench.run_sweep(cells, timeout=args.timeout, jobs=args.jobs, timing=not args.no_timing)
    text = bench.rows_to_csv(rows)
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fhmc", description="Finite-horizon probabilistic model checking.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp, horizon=True):
        sp.add_argument("model", help="model source (.pm) or chain (.json)")
        sp.add_argument("--label", "-l", help="target label name (or a boolean expression)")
        if horizon:
            sp.add_argument("--horizon", "-H", type=int, required=True, help="step bound h")
        sp.add_argument("--const", action="append", metavar="NAME=VALUE", help="override a constant")
        sp.add_argument("--max-states", type=int, default=_env_int("FHMC_MAX_STATES"))
        sp.add_argument("--max-nodes", type=int, default=_env_int("FHMC_MAX_NODES"))
        sp.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")

    c = sub.add_parser("check", help="bounded reachability probability")
    model_args(c)
    c.add_argument("--engine", "-e", choices=ENGINES + ("oracle", "all"), default="wmc")
    c.add_argument("--arith", choices=("exact", "float"), default="exact")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--valuation", action="append", metavar="PARAM=VALUE", help="instantiate a parameter")
    c.add_argument("--table", action="store_true", help="print the per-state table for 0..h (CSV)")
    c.add_argument("--dot", metavar="FILE", help="write the WMC diagram as Graphviz")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sample", help="evaluate a parametric model at many valuations")
    model_args(s)
    s.add_argument("--valuations", required=True, help="CSV with a header of parameter names")
    s.add_argument("--arith", choices=("exact", "float"), default="exact")
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("bounds", help="indefinite-horizon lower/upper bounds")
    model_args(b)
    b.add_argument("--sweep", action="store_true", help="report every h from 1 to --horizon")
    b.set_defaults(func=cmd_bounds)

    st = sub.add_parser("stats", help="decision diagram statistics")
    model_args(st)
    st.set_defaults(func=cmd_stats)

    be = sub.add_parser("bench", help="benchmark families")
    bsub = be.add_subparsers(dest="bench_command", required=True)

    def family_args(sp):
        sp.add_argument("--family", choices=bench.FAMILIES, required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--parametric", action="store_true", help="factories: leave p_i, q_i symbolic")
        sp.add_argument("--capacity", type=int, default=2, help="queues: capacity Q")
        sp.add_argument("--random-bias", action="store_true", help="herman: seeded per-process biases")

    g = bsub.add_parser("gen", help="emit model source")
    family_args(g)
    g.add_argument("--size", type=int, required=True)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_bench_gen)

    r = bsub.add_parser("run", help="sweep sizes x horizons x engines into CSV")
    family_args(r)
    r.add_argument("--sizes", required=True, help="e.g. 2,3,4 or 2..10")
    r.add_argument("--horizons", required=True, help="e.g. 5,10 or 1..20")
    r.add_argument("--engines", default="all", help="comma list of explicit,add,wmc or 'all'")
    r.add_argument("--timeout", type=float, default=None, help="seconds per cell")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--no-timing", action="store_true")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_bench_run)
    return p


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        return args.func(args, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODEL
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except FhmcError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def run(argv) -> tuple[int, str]:
    """Run ``main`` capturing standard output (for tests and scripting)."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()
