"""Instance generators for the two hardness reductions, their witness maps,
and brute-force solvers for the source problems.

* acyclic bipartition of a digraph -> flow network (path-or-cycle stability)
* Partition -> two-firm network whose empty outcome is unstable iff YES
* the query-counting variant of the second network, used to show that a
  stability decider must make C(2n, n) distinct oracle calls
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb
from typing import Iterable, Sequence

from .choice import FlowBasedChoice, OracleFamilyChoice, PartitionBuyerChoice, PartitionSellerChoice
from .errors import BudgetExceeded, ModelError
from .model import Contract, TradingNetwork, canonical, natural_key
from .solvers import all_blocking_sets, find_blocking_set

BRUTE_FORCE_CAP = 20
GADGET_ROLES = ("s", "a", "ap", "b", "bp", "t")


@dataclass(frozen=True)
class Digraph:
    vertices: tuple[str, ...]
    arcs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        verts = tuple(str(v) for v in self.vertices)
        arcs = tuple(sorted({(str(u), str(v)) for u, v in self.arcs}, key=lambda a: (natural_key(a[0]), natural_key(a[1]))))
        object.__setattr__(self, "vertices", tuple(canonical(verts)))
        object.__setattr__(self, "arcs", arcs)
        if len(set(verts)) != len(verts):
            raise ModelError("duplicate vertex")
        known = set(verts)
        for u, v in arcs:
            if u not in known or v not in known:
                raise ModelError(f"arc ({u!r}, {v!r}) references an unknown vertex")
        for v in verts:
            if ":" in v or ">" in v or v in ("s", "t"):
                raise ModelError(f"vertex name {v!r} clashes with the gadget naming scheme")

    def is_acyclic_on(self, part: Iterable[str]) -> bool:
        part = set(part)
        sorter = graphlib.TopologicalSorter({v: set() for v in part})
        for u, v in self.arcs:
            if u in part and v in part:
                sorter.add(v, u)
        try:
            sorter.prepare()
        except graphlib.CycleError:
            return False
        return True


def firm_id(v: str, role: str) -> str:
    return f"{v}:{role}"


def contract_id(seller: str, buyer: str) -> str:
    return f"{seller}>{buyer}"


@dataclass
class ReductionMap:
    """Correspondence between a digraph and its flow network."""

    gadgets: dict[str, dict[str, str]]
    arc_contracts: dict[tuple[str, str], tuple[str, str]]
    source: str = "s"
    sink: str = "t"
    lanes: dict[str, dict[str, tuple[str, ...]]] = field(default_factory=dict)

    @property
    def z_contracts(self) -> frozenset[str]:
        return frozenset(c for pair in self.arc_contracts.values() for c in pair)

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "sink": self.sink,
            "gadgets": {v: dict(roles) for v, roles in self.gadgets.items()},
            "arcs": [{"arc": [u, v], "contracts": list(cs)} for (u, v), cs in self.arc_contracts.items()],
            "lanes": {v: {k: list(cs) for k, cs in lanes.items()} for v, lanes in self.lanes.items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ReductionMap":
        return cls(
            gadgets={v: dict(r) for v, r in doc["gadgets"].items()},
            arc_contracts={(a["arc"][0], a["arc"][1]): tuple(a["contracts"]) for a in doc["arcs"]},
            source=doc["source"],
            sink=doc["sink"],
            lanes={v: {k: tuple(cs) for k, cs in l.items()} for v, l in doc.get("lanes", {}).items()},
        )


def reduce_acyclic_bipartition(D: Digraph) -> tuple[TradingNetwork, ReductionMap]:
    """Build the gadget flow network for ``D``.

    Each vertex v gets firms s_v, a_v, a'_v, b_v, b'_v, t_v with an a-lane
    s_v->a_v->a'_v->t_v and a b-lane s_v->b_v->b'_v->t_v, fed by s and
    drained into t.  Each arc uv adds a'_u->a_v and b'_u->b_v.  s_v ranks
    the a-lane first, t_v ranks the b-lane first, gadget-internal contracts
    beat arc contracts, and remaining ties follow contract id order.
    """
    S, T = "s", "t"
    contracts: list[Contract] = []
    gadgets: dict[str, dict[str, str]] = {}
    lanes: dict[str, dict[str, tuple[str, ...]]] = {}

    def add(seller: str, buyer: str) -> str:
        cid = contract_id(seller, buyer)
        contracts.append(Contract(cid, seller, buyer))
        return cid

    for v in D.vertices:
        g = {r: firm_id(v, r) for r in GADGET_ROLES}
        gadgets[v] = g
        feed = add(S, g["s"])
        a_in, b_in = add(g["s"], g["a"]), add(g["s"], g["b"])
        a_mid, b_mid = add(g["a"], g["ap"]), add(g["b"], g["bp"])
        a_out, b_out = add(g["ap"], g["t"]), add(g["bp"], g["t"])
        drain = add(g["t"], T)
        lanes[v] = {
            "a": (feed, a_in, a_mid, a_out, drain),
            "b": (feed, b_in, b_mid, b_out, drain),
        }
    arc_contracts = {}
    for u, v in D.arcs:
        arc_contracts[(u, v)] = (
            add(gadgets[u]["ap"], gadgets[v]["a"]),
            add(gadgets[u]["bp"], gadgets[v]["b"]),
        )
    z = {c for pair in arc_contracts.values() for c in pair}

    firms = [S, T] + [fid for g in gadgets.values() for fid in g.values()]
    up: dict[str, list[str]] = {f: [] for f in firms}
    down: dict[str, list[str]] = {f: [] for f in firms}
    for c in contracts:
        up[c.buyer].append(c.id)
        down[c.seller].append(c.id)

    def ranked(ids: list[str]) -> list[str]:
        return sorted(ids, key=lambda c: (c in z, natural_key(c)))

    choice = {S: FlowBasedChoice.terminal_firm(), T: FlowBasedChoice.terminal_firm()}
    for v, g in gadgets.items():
        a_in, b_in = lanes[v]["a"][1], lanes[v]["b"][1]
        a_out, b_out = lanes[v]["a"][3], lanes[v]["b"][3]
        for role, fid in g.items():
            buyer_pref, seller_pref = ranked(up[fid]), ranked(down[fid])
            if role == "s":
                seller_pref = [a_in, b_in]
            elif role == "t":
                buyer_pref = [b_out, a_out]
            choice[fid] = FlowBasedChoice(tuple(buyer_pref), tuple(seller_pref))

    net = TradingNetwork(firms, contracts, choice)
    return net, ReductionMap(gadgets, arc_contracts, S, T, lanes)


def _check_partition(vertices: Sequence[str], Q: Iterable[str], R: Iterable[str]) -> tuple[set, set]:
    Q, R = set(Q), set(R)
    if Q & R or (Q | R) != set(vertices):
        raise ModelError("(Q, R) is not a partition of the vertex set")
    return Q, R


def bipartition_to_outcome(rmap: ReductionMap, Q: Iterable[str], R: Iterable[str]) -> frozenset[str]:
    """Saturate the b-lane of every vertex in Q and the a-lane of every vertex in R."""
    Q, R = _check_partition(list(rmap.gadgets), Q, R)
    A: set[str] = set()
    for v in Q:
        A.update(rmap.lanes[v]["b"])
    for v in R:
        A.update(rmap.lanes[v]["a"])
    return frozenset(A)


def outcome_to_bipartition(
    rmap: ReductionMap, A: Iterable[str], D: Digraph | None = None
) -> tuple[frozenset[str], frozenset[str]]:
    """Q = vertices whose a-lane middle contract is unused, R = the rest.

    The outcome must avoid every arc contract.  With ``D`` given, both parts
    are verified acyclic.
    """
    A = frozenset(A)
    used_z = A & rmap.z_contracts
    if used_z:
        raise ModelError(f"outcome uses arc contracts {canonical(used_z)}; a stable outcome never does")
    Q = frozenset(v for v in rmap.gadgets if rmap.lanes[v]["a"][2] not in A)
    R = frozenset(rmap.gadgets) - Q
    if D is not None:
        for part in (Q, R):
            if not D.is_acyclic_on(part):
                raise ModelError(f"part {canonical(part)} induces a directed cycle")
    return Q, R


def solve_acyclic_bipartition(D: Digraph, cap: int = BRUTE_FORCE_CAP) -> tuple[frozenset[str], frozenset[str]] | None:
    """First 2-colouring (Q, R) in mask order with both parts acyclic."""
    n = len(D.vertices)
    if n > cap:
        raise BudgetExceeded("acyclic bipartition brute force", cap, n)
    for mask in range(1 << n):
        R = frozenset(v for i, v in enumerate(D.vertices) if mask >> i & 1)
        Q = frozenset(D.vertices) - R
        if D.is_acyclic_on(Q) and D.is_acyclic_on(R):
            return Q, R
    return None


def all_digraphs(vertices: Sequence[str]):
    """Every digraph on the labelled ``vertices``, self-loops included (2^(n*n) of them)."""
    pairs = [(u, v) for u in vertices for v in vertices]
    for bits in product((0, 1), repeat=len(pairs)):
        yield Digraph(tuple(vertices), tuple(p for p, b in zip(pairs, bits) if b))


# -- Partition ---------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionInstance:
    weights: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(a) for a in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise ModelError("Partition needs at least one weight")
        if any(a <= 0 for a in w):
            raise ModelError("Partition weights must be positive")
        if list(w) != sorted(w):
            raise ModelError("Partition weights must be non-decreasing")

    @classmethod
    def from_unsorted(cls, weights: Iterable[int]) -> "PartitionInstance":
        return cls(tuple(sorted(int(a) for a in weights)))

    @property
    def k(self) -> int:
        return len(self.weights)


def x_id(i: int) -> str:
    return f"x{i}"


def reduce_partition_to_instability(P: PartitionInstance) -> tuple[TradingNetwork, frozenset[str]]:
    """Firms f, g; contract y from f to g and x_1..x_k from g to f; challenged outcome ∅."""
    xs = [x_id(i) for i in range(1, P.k + 1)]
    weights = dict(zip(xs, P.weights))
    contracts = [Contract("y", "f", "g")] + [Contract(x, "g", "f") for x in xs]
    choice = {
        "f": PartitionBuyerChoice(weights, "y"),
        "g": PartitionSellerChoice(tuple(xs), weights, "y"),
    }
    return TradingNetwork(["f", "g"], contracts, choice), frozenset()


def solve_partition(P: PartitionInstance, cap: int = 40) -> frozenset[int] | None:
    """Lexicographically first index set (1-based) with half the total weight."""
    if P.k > cap:
        raise BudgetExceeded("Partition brute force", cap, P.k)
    total = sum(P.weights)
    if total % 2:
        return None
    half = total // 2
    w = P.weights
    suffix = [0] * (P.k + 1)
    for i in range(P.k - 1, -1, -1):
        suffix[i] = suffix[i + 1] + w[i]

    def rec(i: int, acc: int, picked: list[int]) -> list[int] | None:
        if acc == half:
            return picked
        if i == P.k or acc > half or acc + suffix[i] < half:
            return None
        return rec(i + 1, acc + w[i], picked + [i + 1]) or rec(i + 1, acc, picked)

    hit = rec(0, 0, [])
    return frozenset(hit) if hit is not None else None


def partition_witness_to_block(I: Iterable[int]) -> frozenset[str]:
    return frozenset(x_id(i) for i in I) | {"y"}


def block_to_partition_witness(Z: Iterable[str]) -> frozenset[int]:
    Z = frozenset(Z)
    if "y" not in Z:
        raise ModelError("a blocking set of the Partition network always contains y")
    return frozenset(int(c[1:]) for c in Z - {"y"})


# -- oracle lower bound -------------------------------------------------------------


def oracle_network(n: int, hidden: Iterable[int] | None = None) -> TradingNetwork:
    xs = tuple(x_id(i) for i in range(1, 2 * n + 1))
    contracts = [Contract("y", "f", "g")] + [Contract(x, "g", "f") for x in xs]
    choice = {
        "f": OracleFamilyChoice(n, "y", xs, "f", None if hidden is None else frozenset(hidden)),
        "g": OracleFamilyChoice(n, "y", xs, "g"),
    }
    return TradingNetwork(["f", "g"], contracts, choice)


@dataclass
class OracleExperimentReport:
    n: int
    queries_needed: int
    binomial: int
    distinguishing_sets: list[tuple[str, ...]]
    decider_queries_on_c0: int
    decider_distinct_queries_on_c0: int
    decider_covers_all: bool
    c0_stable: bool
    hidden_results: dict[tuple[int, ...], dict] = field(default_factory=dict)

    @property
    def all_flips_ok(self) -> bool:
        return self.c0_stable and all(r["unstable"] and r["unique_block_ok"] for r in self.hidden_results.values())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "queries_needed": self.queries_needed,
            "binomial": self.binomial,
            "distinguishing_sets": [list(s) for s in self.distinguishing_sets],
            "decider_queries_on_c0": self.decider_queries_on_c0,
            "decider_distinct_queries_on_c0": self.decider_distinct_queries_on_c0,
            "decider_covers_all": self.decider_covers_all,
            "c0_stable": self.c0_stable,
            "hidden": [{"I": list(I), **r} for I, r in self.hidden_results.items()],
            "all_flips_ok": self.all_flips_ok,
        }


def _adversary(n: int) -> tuple[int, list[frozenset[str]]]:
    """Answer every f-query as C_0 and count the queries that rule out some C_I.

    Candidates start as every n-subset I of 1..2n.  A query rules out C_I
    exactly when C_I's answer differs from C_0's; a sound decider cannot stop
    while any candidate survives, so it needs every ruling-out query.
    """
    xs = tuple(x_id(i) for i in range(1, 2 * n + 1))
    c0 = OracleFamilyChoice(n, "y", xs, "f")
    candidates = {I: OracleFamilyChoice(n, "y", xs, "f", I) for I in map(frozenset, combinations(range(1, 2 * n + 1), n))}
    domain = xs + ("y",)
    needed: list[frozenset[str]] = []
    for r in range(len(domain) + 1):
        for q in combinations(domain, r):
            q = frozenset(q)
            answer = c0.choose(q)
            ruled_out = [I for I, cf in candidates.items() if cf.choose(q) != answer]
            if ruled_out:
                needed.append(q)
                for I in ruled_out:
                    del candidates[I]
    if candidates:
        raise AssertionError("adversary left candidates undistinguished")
    return len(needed), needed


def oracle_lower_bound_experiment(n: int) -> OracleExperimentReport:
    """Run the adversary and cross-check with the exhaustive blocking-set decider."""
    if not 1 <= n <= 4:
        raise ModelError("oracle experiment supports 1 <= n <= 4")
    needed, sets = _adversary(n)

    net0 = oracle_network(n)
    f0 = net0.choice_function("f")
    f0.reset()
    c0_block = find_blocking_set(net0, frozenset())
    c0_queries = f0.queries
    distinct = f0.distinct
    distinguishing = [frozenset(x_id(i) for i in I) | {"y"} for I in combinations(range(1, 2 * n + 1), n)]
    covers = all(q in distinct for q in distinguishing)

    report = OracleExperimentReport(
        n=n,
        queries_needed=needed,
        binomial=comb(2 * n, n),
        distinguishing_sets=[tuple(canonical(q)) for q in sets],
        decider_queries_on_c0=c0_queries,
        decider_distinct_queries_on_c0=len(distinct),
        decider_covers_all=covers,
        c0_stable=c0_block is None,
    )
    for I in combinations(range(1, 2 * n + 1), n):
        net = oracle_network(n, I)
        blocks = all_blocking_sets(net, frozenset())
        expected = frozenset(x_id(i) for i in I) | {"y"}
        report.hidden_results[I] = {
            "unstable": find_blocking_set(net, frozenset()) is not None,
            "blocks": [canonical(b) for b in blocks],
            "unique_block_ok": blocks == [expected],
        }
    return report
