"""Seeded random flow networks and DOT rendering."""

from __future__ import annotations

import random
from typing import Iterable

from .choice import FlowBasedChoice
from .errors import ModelError
from .model import Contract, TradingNetwork, canonical, terminal_agents

SOURCE, SINK = "s", "t"


def random_flow_network(
    seed: int,
    n_firms: int,
    density: float,
    max_contracts: int | None = None,
) -> TradingNetwork:
    """Random flow network with terminals ``s`` and ``t``.

    Three layers: the source, ``n_firms - 2`` intermediaries ``m1..``, and
    the sink.  Each arc s->m, m->t and m->m' (both directions) appears with
    probability ``density``.  If ``max_contracts`` is set, surplus arcs are
    dropped at random.  Intermediaries left without an upstream or a
    downstream contract are removed (repeatedly), so exactly two terminals
    remain.  Preference lists are uniform random permutations.
    """
    if n_firms < 2:
        raise ModelError("a flow network needs at least the two terminals")
    if not 0.0 <= density <= 1.0:
        raise ModelError("density must lie in [0, 1]")
    rng = random.Random(seed)
    mids = [f"m{i}" for i in range(1, n_firms - 1)]
    arcs: list[tuple[str, str]] = []
    for m in mids:
        if rng.random() < density:
            arcs.append((SOURCE, m))
    for u in mids:
        for v in mids:
            if u != v and rng.random() < density:
                arcs.append((u, v))
    for m in mids:
        if rng.random() < density:
            arcs.append((m, SINK))
    if max_contracts is not None and len(arcs) > max_contracts:
        keep = sorted(rng.sample(range(len(arcs)), max_contracts))
        arcs = [arcs[i] for i in keep]

    alive = set(mids)
    while True:
        has_in = {v for u, v in arcs if u in alive | {SOURCE} and v in alive}
        has_out = {u for u, v in arcs if u in alive and v in alive | {SINK}}
        dead = alive - (has_in & has_out)
        if not dead:
            break
        alive -= dead
    ends = alive | {SOURCE, SINK}
    arcs = [(u, v) for u, v in arcs if u in ends and v in ends]

    contracts = [Contract(f"c{i}", u, v) for i, (u, v) in enumerate(arcs, start=1)]
    choice = {SOURCE: FlowBasedChoice.terminal_firm(), SINK: FlowBasedChoice.terminal_firm()}
    for m in canonical(alive):
        up = [c.id for c in contracts if c.buyer == m]
        down = [c.id for c in contracts if c.seller == m]
        rng.shuffle(up)
        rng.shuffle(down)
        choice[m] = FlowBasedChoice(tuple(up), tuple(down))
    return TradingNetwork([SOURCE, SINK, *alive], contracts, choice)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(net: TradingNetwork, A: Iterable[str] | None = None) -> str:
    """Graphviz text: contracts in ``A`` solid, the rest dashed, terminals double-circled."""
    A = frozenset(A or ())
    terminals = set(terminal_agents(net))
    lines = ["digraph tradenet {", "  rankdir=LR;"]
    for f in net.firms:
        shape = "doublecircle" if f in terminals else "circle"
        lines.append(f"  {_quote(f)} [shape={shape}];")
    for c in net.contracts:
        style = "solid" if c.id in A else "dashed"
        lines.append(f"  {_quote(c.seller)} -> {_quote(c.buyer)} [label={_quote(c.id)}, style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
