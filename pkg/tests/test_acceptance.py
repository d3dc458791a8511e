"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary.
"""

import random
import time
from contextlib import contextmanager
from itertools import combinations
from math import comb

from tradenet.choice import (
    FlowBasedChoice,
    OracleFamilyChoice,
    PartitionBuyerChoice,
    PartitionSellerChoice,
    TableChoice,
    audit_full_substitutability,
    audit_irc,
)
from tradenet.generate import random_flow_network
from tradenet.model import is_flow_network
from tradenet.reductions import (
    Digraph,
    PartitionInstance,
    all_digraphs,
    block_to_partition_witness,
    oracle_lower_bound_experiment,
    partition_witness_to_block,
    reduce_acyclic_bipartition,
    reduce_partition_to_instability,
    solve_acyclic_bipartition,
    solve_partition,
)
from tradenet.solvers import (
    all_blocking_sets,
    enumerate_acceptable_outcomes,
    exists_outcome,
    find_blocking_path_or_cycle,
    find_blocking_set,
    find_locally_blocking_trail,
    is_path_or_cycle_stable,
    is_stable,
    is_trail_stable,
    is_weakly_trail_stable,
    run_deferred_acceptance,
)

from conftest import ACCEPTANCE_LINES, powerset


@contextmanager
def criterion(number: int, title: str, limit: float):
    """Time the body, then record and print one PASS/FAIL line."""
    info: dict = {"detail": ""}
    start = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        in_time = elapsed < limit
        verdict = "PASS" if ok and in_time else "FAIL"
        note = info["detail"] if ok else "assertion failed: " + info["detail"]
        line = f"criterion {number} [{verdict}] {title}: {note} ({elapsed:.1f}s, limit {limit:.0f}s)"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
    assert in_time, f"criterion {number} took {elapsed:.1f}s, limit {limit:.0f}s"


# -- 1 ----------------------------------------------------------------------------------


def test_criterion_1_deferred_acceptance():
    with criterion(1, "deferred acceptance is trail stable within 2|X|+1 rounds", 10) as info:
        seeds = range(1000, 1500)
        largest = 0
        for seed in seeds:
            rng = random.Random(seed)
            net = random_flow_network(seed, rng.randint(2, 14), rng.uniform(0.1, 0.5), 40)
            res = run_deferred_acceptance(net, verify=False)
            X = len(net.contract_ids)
            largest = max(largest, X)
            info["detail"] = f"seed {seed}"
            assert res.rounds <= 2 * X + 1
            assert net.is_acceptable(res.outcome)
            assert is_trail_stable(net, res.outcome)
        info["detail"] = f"{len(seeds)} networks, seeds {seeds.start}..{seeds.stop - 1}, up to {largest} contracts"


# -- 2 ----------------------------------------------------------------------------------


def _equivalence_corpus():
    for vs in (("1",), ("1", "2"), ("1", "2", "3")):
        for D in all_digraphs(vs):
            yield f"digraph {D.arcs}", reduce_acyclic_bipartition(D)[0]
    for seed in range(2000, 2100):
        rng = random.Random(seed)
        yield f"seed {seed}", random_flow_network(seed, rng.randint(4, 10), rng.uniform(0.2, 0.6), 18)


def test_criterion_2_stable_iff_path_or_cycle_stable():
    with criterion(2, "stable == path-or-cycle stable on flow networks", 120) as info:
        networks = outcomes = 0
        for label, net in _equivalence_corpus():
            assert is_flow_network(net) and len(net.contract_ids) <= 50
            networks += 1
            cache: dict = {}
            for A in enumerate_acceptable_outcomes(net):
                outcomes += 1
                exact = is_stable(net, A, method="enumerate", minimal=False, table_cache=cache)
                info["detail"] = f"{label}, outcome {sorted(A)}"
                assert exact == is_path_or_cycle_stable(net, A)
        info["detail"] = f"{networks} networks, {outcomes} acceptable outcomes, no disagreement"


# -- 3 ----------------------------------------------------------------------------------


def test_criterion_3_bipartition_reduction():
    with criterion(3, "acyclic bipartition YES iff reduced network has a path-or-cycle stable outcome", 300) as info:
        tri = Digraph(("1", "2", "3"), (("1", "2"), ("2", "3"), ("3", "1")))
        bi = Digraph(("1", "2", "3"), tuple((u, v) for u in "123" for v in "123" if u != v))
        rng = random.Random(3)
        four = ("1", "2", "3", "4")
        corpus = list(all_digraphs(("1", "2", "3")))
        assert len(corpus) == 512
        corpus += [Digraph(four, tuple((u, v) for u in four for v in four if rng.random() < 0.5)) for _ in range(50)]
        yes = 0
        for D in corpus:
            net, _ = reduce_acyclic_bipartition(D)
            sol = solve_acyclic_bipartition(D)
            res = exists_outcome(net, "path_or_cycle")
            info["detail"] = f"digraph {D.vertices} {D.arcs}"
            assert res.verdict in ("yes", "no")
            assert (sol is not None) == (res.verdict == "yes")
            if res.witness is not None:
                assert is_path_or_cycle_stable(net, res.witness)
            yes += sol is not None
        net, _ = reduce_acyclic_bipartition(bi)
        assert solve_acyclic_bipartition(bi) is None and exists_outcome(net, "path_or_cycle").verdict == "no"
        net, _ = reduce_acyclic_bipartition(tri)
        res = exists_outcome(net, "path_or_cycle")
        assert solve_acyclic_bipartition(tri) is not None and res.verdict == "yes" and res.witness is not None
        info["detail"] = f"{len(corpus)} digraphs ({yes} YES), bidirected triangle NO, directed 3-cycle YES"


# -- 4 ----------------------------------------------------------------------------------


def _valid_index_sets(w):
    total = sum(w)
    if total % 2:
        return set()
    return {
        frozenset(i + 1 for i in I)
        for r in range(len(w) + 1)
        for I in combinations(range(len(w)), r)
        if 2 * sum(w[i] for i in I) == total
    }


def test_criterion_4_partition_reduction():
    with criterion(4, "Partition YES iff A=∅ is blocked, witnesses I <-> X_I ∪ {y}", 60) as info:
        rng = random.Random(4)
        handmade = [(1, 1, 2), (1, 1, 3), (2, 2), (1,), (5, 5, 5, 5), (1, 2, 3, 4, 5, 6, 7), (3, 3, 3), (1, 5, 6, 10, 11, 12)]
        instances = [PartitionInstance(w) for w in handmade]
        instances += [
            PartitionInstance.from_unsorted(rng.randint(1, 50) for _ in range(rng.randint(1, 12))) for _ in range(200)
        ]
        yes = 0
        for P in instances:
            info["detail"] = f"weights {P.weights}"
            net, A = reduce_partition_to_instability(P)
            got = solve_partition(P)
            block = find_blocking_set(net, A)
            assert (got is None) == (block is None)
            valid = _valid_index_sets(P.weights)
            assert (got is None) == (not valid)
            blocks = set(all_blocking_sets(net, A))
            assert {block_to_partition_witness(Z) for Z in blocks} == valid
            assert {partition_witness_to_block(I) for I in valid} == blocks
            if got is not None:
                yes += 1
                assert got in valid and block.replay(net, A)
                assert block.contract_set in blocks
        info["detail"] = f"{len(instances)} instances ({yes} YES), blocks == {{X_I ∪ {{y}}}} exactly"


# -- 5 ----------------------------------------------------------------------------------


def test_criterion_5_oracle_lower_bound():
    with criterion(5, "C(2n,n) distinguishing f-queries; verdict flips for every hidden set", 60) as info:
        seen = []
        for n in (1, 2, 3):
            info["detail"] = f"n={n}"
            rep = oracle_lower_bound_experiment(n)
            assert rep.binomial == comb(2 * n, n)
            assert rep.queries_needed == rep.binomial
            assert rep.c0_stable and rep.decider_covers_all
            assert len(rep.hidden_results) == comb(2 * n, n)
            assert rep.all_flips_ok
            seen.append(rep.queries_needed)
        assert seen == [2, 6, 20]
        info["detail"] = f"queries needed {seen} for n=1,2,3; every C_I has the unique block X_I ∪ {{y}}"


# -- 6 ----------------------------------------------------------------------------------


def _oracle_full_sub_violated(cf, up, down) -> bool:
    """Direct reading of the four inclusions over every nested pair."""
    up, down = frozenset(up), frozenset(down)
    C = {S: frozenset(cf.choose(S)) for S in powerset(up | down)}

    def rb(Y, Z):
        return Y - C[Y | Z]

    def rs(Z, Y):
        return Z - C[Y | Z]

    for Y in powerset(up):
        for Z in powerset(down):
            for Y2 in powerset(Y):  # Y2 ⊆ Y
                if not rb(Y2, Z) <= rb(Y, Z):
                    return True
                if not rs(Z, Y) <= rs(Z, Y2):
                    return True
            for Z2 in powerset(Z):  # Z2 ⊆ Z
                if not rs(Z2, Y) <= rs(Z, Y):
                    return True
                if not rb(Y, Z) <= rb(Y, Z2):
                    return True
    return False


def _oracle_irc_violated(cf, contracts) -> bool:
    for Y in powerset(contracts):
        cy = frozenset(cf.choose(Y))
        for Z in powerset(Y):
            if cy <= Z and frozenset(cf.choose(Z)) != cy:
                return True
    return False


def _families():
    rng = random.Random(6)
    for size in range(0, 9):
        for nb in range(size + 1):
            up = [f"u{i}" for i in range(nb)]
            down = [f"d{i}" for i in range(size - nb)]
            for _ in range(2):
                rng.shuffle(up)
                rng.shuffle(down)
                yield "flow-based", FlowBasedChoice(tuple(up), tuple(down)), list(up), list(down)
    yield "terminal", FlowBasedChoice.terminal_firm(), ["u1", "u2", "u3"], ["d1", "d2", "d3", "d4"]
    for k in range(1, 8):
        w = sorted(rng.randint(1, 9) for _ in range(k))
        xs = [f"x{i}" for i in range(1, k + 1)]
        weights = dict(zip(xs, w))
        yield f"partition f k={k}", PartitionBuyerChoice(weights, "y"), xs, ["y"]
        yield f"partition g k={k}", PartitionSellerChoice(tuple(xs), weights, "y"), ["y"], xs
    for n in (1, 2, 3):
        xs = tuple(f"x{i}" for i in range(1, 2 * n + 1))
        yield f"oracle C_0 n={n}", OracleFamilyChoice(n, "y", xs, "f"), list(xs), ["y"]
        yield f"oracle g n={n}", OracleFamilyChoice(n, "y", xs, "g"), ["y"], list(xs)
        for I in combinations(range(1, 2 * n + 1), n):
            yield f"oracle C_I n={n} I={I}", OracleFamilyChoice(n, "y", xs, "f", frozenset(I)), list(xs), ["y"]


def _oracle_flags(tc, up, down) -> set:
    flags = set()
    if _oracle_irc_violated(tc, up + down):
        flags.add("irc")
    if _oracle_full_sub_violated(tc, up, down):
        flags.add("full-sub")
    return flags


def _violating_fixtures():
    """(name, table, upstream, downstream, flags the definitions say must be raised)."""
    handmade = [
        # dropping b from {a,b} keeps a, yet a alone is rejected: breaks IRC and substitutability
        ("irc: drop b then a", ["a", "b"], {("a", "b"): ("a",), ("a",): ()}, ["a", "b"], [], {"irc", "full-sub"}),
        ("upstream complements", ["a", "b"], {("a",): (), ("b",): ()}, ["a", "b"], [], {"full-sub"}),
        ("downstream complements", ["a", "b"], {("a",): (), ("b",): ()}, [], ["a", "b"], {"full-sub"}),
        ("cross-side substitutes (buy side)", ["a", "z"], {("a", "z"): ("z",)}, ["a"], ["z"], {"full-sub"}),
        ("cross-side substitutes (sell side)", ["a", "z"], {("a", "z"): ("a",)}, ["a"], ["z"], {"full-sub"}),
    ]
    for name, dom, overrides, up, down, expected in handmade:
        tc = TableChoice.with_overrides(dom, overrides)
        assert _oracle_flags(tc, up, down) == expected, name
        yield name, tc, up, down, expected
    rng = random.Random(66)
    made = 0
    while made < 25:
        dom = ["a", "b", "c"]
        nb = rng.randint(0, 3)
        table = {S: frozenset(c for c in S if rng.random() < 0.6) for S in powerset(dom)}
        tc = TableChoice(dom, table)
        expected = _oracle_flags(tc, dom[:nb], dom[nb:])
        if expected:
            made += 1
            yield f"seeded table #{made}", tc, dom[:nb], dom[nb:], expected


def test_criterion_6_choice_function_audits():
    with criterion(6, "every shipped family passes IRC and full substitutability; violations flagged", 60) as info:
        families = 0
        for name, cf, up, down in _families():
            info["detail"] = name
            assert audit_irc(cf, up + down) == []
            assert audit_full_substitutability(cf, up, down) == []
            families += 1
        fixtures = 0
        for name, tc, up, down, expected in _violating_fixtures():
            info["detail"] = name
            irc = audit_irc(tc, up + down)
            sub = audit_full_substitutability(tc, up, down)
            flagged = ({"irc"} if irc else set()) | ({"full-sub"} if sub else set())
            assert flagged == expected
            assert all(v.replay(tc) for v in irc)
            assert all(v.replay(tc, up, down) for v in sub)
            fixtures += 1
        info["detail"] = f"{families} family instances clean up to size 8, {fixtures} violating fixtures flagged with replayable witnesses"


# -- 7 ----------------------------------------------------------------------------------


def test_criterion_7_weak_trail_consistency():
    with criterion(7, "trail stable => weakly trail stable; blocking path => locally blocking trail", 60) as info:
        outcomes = trail_stable = paths = 0
        for seed in range(3000, 3150):
            rng = random.Random(seed)
            net = random_flow_network(seed, rng.randint(3, 9), rng.uniform(0.2, 0.5), 16)
            for A in enumerate_acceptable_outcomes(net):
                outcomes += 1
                info["detail"] = f"seed {seed}, outcome {sorted(A)}"
                if is_trail_stable(net, A):
                    trail_stable += 1
                    assert is_weakly_trail_stable(net, A)
                for method in ("auto", "enumerate"):
                    rep = find_blocking_path_or_cycle(net, A, method=method)
                    if rep is not None and rep.kind == "blocking_path":
                        paths += 1
                        trail = find_locally_blocking_trail(net, A)
                        assert trail is not None and trail.replay(net, A)
        info["detail"] = f"{outcomes} outcomes on 150 networks, {trail_stable} trail stable, {paths} blocking paths"
