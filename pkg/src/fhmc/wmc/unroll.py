"""Causal encoding of an explicit chain.

Each step keeps a one-hot map ``state -> BDD`` over the coins flipped so
far. The chain is first made target-absorbing, so the map at step ``h``
restricted to targets is exactly the first-visit event.
"""
from __future__ import annotations

from ..chain import MarkovChain, make_absorbing
from ..dd import Manager
from .coins import CoinAllocator, Encoding, coin_chain_or_quotient


def unroll_chain(
    mc: MarkovChain,
    h: int,
    targets=None,
    state_names=None,
    manager: Manager | None = None,
    max_nodes: int | None = None,
) -> Encoding:
    """Encode ``<=h`` reachability of ``targets`` with coins ``c_{s,i}``.

    Coin ``c_{s,i}`` resolves the choice at state ``s`` in step ``i``;
    true selects the first successor (ascending state order). States with
    more than two successors get a chain of coins ``c_{s,i,j}``.
    """
    if h < 0:
        raise ValueError("horizon must be non-negative")
    targets = mc.targets if targets is None else frozenset(targets)
    names = list(state_names) if state_names is not None else [mc.label(s) for s in range(mc.num_states)]
    a = make_absorbing(mc, targets)
    m = manager if manager is not None else Manager(max_nodes=max_nodes)
    alloc = CoinAllocator(m)
    rows = [tuple(d.probs()) for d in a.transitions if d.is_parametric()]
    cur = {mc.initial: m.true}
    for i in range(h):
        nxt: dict = {}
        for s in sorted(cur):
            cond = cur[s]
            d = a.transitions[s]
            succ = d.states()
            if len(succ) == 1:
                sel = [cond]
            else:
                weights = coin_chain_or_quotient(d.probs())

                def name(j, s=s, i=i):
                    return f"c_{{{names[s]},{i}}}" if j == 0 else f"c_{{{names[s]},{i},{j}}}"

                sel = alloc.chain(m, cond, i, ("state", s), weights, name)
            for t, c in zip(succ, sel):
                if c != m.false:
                    nxt[t] = m.or_(nxt.get(t, m.false), c)
        cur = nxt
    root = m.disj(cur.get(t, m.false) for t in sorted(targets))
    return Encoding(m, root, alloc.coins, h, tuple(mc.parameters), rows, aux={"states": cur})
