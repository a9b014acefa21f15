"""Finite-horizon probabilistic model checking of discrete-time Markov chains.

Three engines compute step-bounded reachability: explicit Bellman
iteration, ADD-based symbolic iteration, and weighted model counting over
causally ordered coin encodings.
"""

__version__ = "0.1.0"
