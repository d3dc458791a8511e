import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tradenet.errors import BudgetExceeded, ModelError
from tradenet.model import is_flow_network
from tradenet.reductions import (
    Digraph,
    PartitionInstance,
    ReductionMap,
    all_digraphs,
    bipartition_to_outcome,
    block_to_partition_witness,
    oracle_lower_bound_experiment,
    outcome_to_bipartition,
    partition_witness_to_block,
    reduce_acyclic_bipartition,
    reduce_partition_to_instability,
    solve_acyclic_bipartition,
    solve_partition,
)
from tradenet.solvers import (
    all_blocking_sets,
    enumerate_acceptable_outcomes,
    find_blocking_set,
    is_path_or_cycle_stable,
    is_stable,
)

TRIANGLE = Digraph(("1", "2", "3"), (("1", "2"), ("2", "3"), ("3", "1")))
BIDIRECTED = Digraph(("1", "2", "3"), tuple((u, v) for u in "123" for v in "123" if u != v))


@st.composite
def digraphs(draw, max_vertices=3, loops=True):
    n = draw(st.integers(1, max_vertices))
    vs = tuple(str(i) for i in range(1, n + 1))
    pairs = [(u, v) for u in vs for v in vs if loops or u != v]
    arcs = draw(st.sets(st.sampled_from(pairs)))
    return Digraph(vs, tuple(arcs))


def test_digraph_validation():
    with pytest.raises(ModelError):
        Digraph(("1", "1"))
    with pytest.raises(ModelError):
        Digraph(("1",), (("1", "2"),))
    with pytest.raises(ModelError):
        Digraph(("s", "1"))
    with pytest.raises(ModelError):
        Digraph(("a:b",))
    assert not Digraph(("1",), (("1", "1"),)).is_acyclic_on({"1"})


def test_all_digraphs_count():
    assert sum(1 for _ in all_digraphs(("1", "2", "3"))) == 512
    assert sum(1 for _ in all_digraphs(("1",))) == 2


@settings(max_examples=40, deadline=None)
@given(digraphs())
def test_gadget_counts(D):
    net, rmap = reduce_acyclic_bipartition(D)
    n, m = len(D.vertices), len(D.arcs)
    assert len(net.firms) == 6 * n + 2
    assert len(net.contract_ids) == 8 * n + 2 * m
    assert len(rmap.z_contracts) == 2 * m
    assert is_flow_network(net)
    assert ReductionMap.from_json(rmap.to_json()) == rmap


def test_triangle_network_size():
    net, _ = reduce_acyclic_bipartition(TRIANGLE)
    assert (len(net.firms), len(net.contract_ids)) == (20, 30)


@settings(max_examples=40, deadline=None)
@given(digraphs())
def test_bipartition_round_trip(D):
    net, rmap = reduce_acyclic_bipartition(D)
    for mask in range(1 << len(D.vertices)):
        R = {v for i, v in enumerate(D.vertices) if mask >> i & 1}
        Q = set(D.vertices) - R
        if not (D.is_acyclic_on(Q) and D.is_acyclic_on(R)):
            continue
        A = bipartition_to_outcome(rmap, Q, R)
        assert net.is_acceptable(A)
        assert is_path_or_cycle_stable(net, A)
        assert is_stable(net, A, method="enumerate", minimal=False)
        assert outcome_to_bipartition(rmap, A, D) == (frozenset(Q), frozenset(R))


@settings(max_examples=25, deadline=None)
@given(digraphs(max_vertices=2))
def test_stable_outcomes_map_to_acyclic_bipartitions(D):
    net, rmap = reduce_acyclic_bipartition(D)
    for A in enumerate_acceptable_outcomes(net):
        if is_path_or_cycle_stable(net, A):
            Q, R = outcome_to_bipartition(rmap, A, D)
            assert D.is_acyclic_on(Q) and D.is_acyclic_on(R)


def test_outcome_to_bipartition_errors():
    net, rmap = reduce_acyclic_bipartition(TRIANGLE)
    z = next(iter(rmap.z_contracts))
    with pytest.raises(ModelError):
        outcome_to_bipartition(rmap, {z})
    with pytest.raises(ModelError):
        bipartition_to_outcome(rmap, {"1"}, {"1", "2", "3"})
    # every vertex in Q: the triangle is a cycle inside Q
    A = bipartition_to_outcome(rmap, {"1", "2", "3"}, set())
    with pytest.raises(ModelError):
        outcome_to_bipartition(rmap, A, TRIANGLE)


def test_solve_acyclic_bipartition_examples():
    Q, R = solve_acyclic_bipartition(TRIANGLE)
    assert TRIANGLE.is_acyclic_on(Q) and TRIANGLE.is_acyclic_on(R)
    assert solve_acyclic_bipartition(BIDIRECTED) is None
    assert solve_acyclic_bipartition(Digraph(("1",), (("1", "1"),))) is None
    with pytest.raises(BudgetExceeded):
        solve_acyclic_bipartition(Digraph(tuple(str(i) for i in range(5))), cap=4)


def test_triangle_witness_is_stable():
    net, rmap = reduce_acyclic_bipartition(TRIANGLE)
    A = bipartition_to_outcome(rmap, {"1"}, {"2", "3"})
    assert is_stable(net, A)
    assert find_blocking_set(net, set()) is not None


# -- Partition ---------------------------------------------------------------------


def _subset_sum_oracle(w):
    total = sum(w)
    if total % 2:
        return []
    return [
        frozenset(i + 1 for i in I)
        for r in range(len(w) + 1)
        for I in combinations(range(len(w)), r)
        if 2 * sum(w[i] for i in I) == total
    ]


def test_partition_instance_validation():
    with pytest.raises(ModelError):
        PartitionInstance(())
    with pytest.raises(ModelError):
        PartitionInstance((2, 1))
    with pytest.raises(ModelError):
        PartitionInstance((0, 1))
    assert PartitionInstance.from_unsorted([3, 1, 2]).weights == (1, 2, 3)


@pytest.mark.parametrize(
    "weights,expected",
    [((2, 2), {1}), ((1, 1, 2), {1, 2}), ((1, 1, 3), None), ((1,), None), ((3, 3, 4, 4, 6), {1, 2, 3})],
)
def test_solve_partition_examples(weights, expected):
    got = solve_partition(PartitionInstance(weights))
    assert got == (None if expected is None else frozenset(expected))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 12), min_size=1, max_size=8))
def test_partition_reduction_bijection(raw):
    P = PartitionInstance.from_unsorted(raw)
    net, A = reduce_partition_to_instability(P)
    valid = _subset_sum_oracle(P.weights)
    got = solve_partition(P)
    assert (got is None) == (not valid)
    if got is not None:
        assert got in valid
    blocks = all_blocking_sets(net, A)
    assert sorted(map(sorted, (block_to_partition_witness(Z) for Z in blocks))) == sorted(map(sorted, valid))
    for I in valid:
        assert partition_witness_to_block(I) in blocks


def test_block_to_witness_needs_y():
    with pytest.raises(ModelError):
        block_to_partition_witness({"x1"})
    assert block_to_partition_witness({"y", "x2", "x10"}) == {2, 10}


# -- oracle experiment -------------------------------------------------------------


@pytest.mark.parametrize("n,binom", [(1, 2), (2, 6)])
def test_oracle_experiment(n, binom):
    rep = oracle_lower_bound_experiment(n)
    assert rep.queries_needed == rep.binomial == binom
    assert rep.decider_covers_all and rep.c0_stable and rep.all_flips_ok
    assert len(rep.hidden_results) == binom
    doc = rep.to_json()
    assert doc["all_flips_ok"] and len(doc["hidden"]) == binom


def test_oracle_experiment_range():
    with pytest.raises(ModelError):
        oracle_lower_bound_experiment(0)


def test_random_digraph_reduction_smoke():
    rng = random.Random(11)
    vs = ("1", "2", "3", "4")
    D = Digraph(vs, tuple((u, v) for u in vs for v in vs if u != v and rng.random() < 0.3))
    net, rmap = reduce_acyclic_bipartition(D)
    sol = solve_acyclic_bipartition(D)
    if sol is not None:
        A = bipartition_to_outcome(rmap, *sol)
        assert is_path_or_cycle_stable(net, A)
