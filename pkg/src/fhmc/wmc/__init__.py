"""Weighted model counting over causal coin encodings."""
from .coins import CoinAllocator, CoinVar, Encoding, coin_chain
from .count import (
    SampleResult,
    SolutionFunction,
    bdd_as_mc,
    check_rows,
    wmc,
    wmc_parametric,
)
from .program import unroll_program
from .unroll import unroll_chain

__all__ = [
    "CoinAllocator",
    "CoinVar",
    "Encoding",
    "SampleResult",
    "SolutionFunction",
    "bdd_as_mc",
    "check_rows",
    "coin_chain",
    "unroll_chain",
    "unroll_program",
    "wmc",
    "wmc_parametric",
]
from .bounds import Bounds, indefinite_bounds

__all__ += ["Bounds", "indefinite_bounds"]
