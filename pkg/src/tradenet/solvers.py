"""Trail-stable outcomes by deferred acceptance, and exact checks for four stability concepts.

All searches work on the contracts outside the challenged outcome ``A``.
Exponential searches take ``budget_bits`` and raise
:class:`~tradenet.errors.BudgetExceeded` rather than answering "no" when the
cap is hit; :func:`exists_outcome` turns that into an ``unknown`` verdict.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal

from .choice import FlowBasedChoice
from .errors import BudgetExceeded, ModelError, NotFullySubstitutableError
from .model import TradingNetwork, canonical, is_flow_network, validate_sequence
from .search import DEFAULT_BUDGET_BITS, SearchStats, SubsetSearch

BlockKind = Literal[
    "locally_blocking_trail",
    "blocking_path",
    "blocking_cycle",
    "blocking_set",
    "sequentially_blocking_trail",
]
Concept = Literal["trail", "weak_trail", "path_or_cycle", "stable"]
CONCEPTS: tuple[str, ...] = ("trail", "weak_trail", "path_or_cycle", "stable")


@dataclass(frozen=True)
class BlockReport:
    """A blocking structure plus the acceptability facts that make it block.

    ``evidence`` holds ``(firm, contracts)`` pairs; each must be
    (A, firm)-acceptable for the block to stand.
    """

    kind: BlockKind
    contracts: tuple[str, ...]
    evidence: tuple[tuple[str, tuple[str, ...]], ...]

    @property
    def contract_set(self) -> frozenset[str]:
        return frozenset(self.contracts)

    def replay(self, net: TradingNetwork, A: Iterable[str]) -> bool:
        A = frozenset(A)
        if not self.contracts or A & self.contract_set:
            return False
        if self.kind != "blocking_set":
            shape = validate_sequence(net, list(self.contracts))
            wanted = {"blocking_path": ("path",), "blocking_cycle": ("cycle",)}.get(
                self.kind, ("trail", "path", "cycle")
            )
            if shape not in wanted:
                return False
        return all(net.is_w_acceptable(S, A, f) for f, S in self.evidence)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "contracts": list(self.contracts),
            "evidence": [{"firm": f, "contracts": list(S)} for f, S in self.evidence],
        }


def _set_evidence(net: TradingNetwork, B: Iterable[str]) -> tuple:
    B = frozenset(B)
    return tuple((f, tuple(canonical(net.restrict(f, B)))) for f in net.firms_of(B))


class _Acceptability:
    """Memoised (A, f)-acceptability for one challenged outcome."""

    def __init__(self, net: TradingNetwork, A: frozenset[str]):
        self.net = net
        self.A = A
        self._memo: dict[tuple[str, frozenset[str]], bool] = {}

    def __call__(self, f: str, S: Iterable[str]) -> bool:
        key = (f, frozenset(S))
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = self.net.is_w_acceptable(key[1], self.A, f)
        return hit

    def starts(self, x: str) -> bool:
        return self(self.net.seller(x), (x,))

    def ends(self, x: str) -> bool:
        return self(self.net.buyer(x), (x,))


def _free(net: TradingNetwork, A: frozenset[str]) -> list[str]:
    return [c for c in net.contract_ids if c not in A]


def _successors(net: TradingNetwork, contracts: Iterable[str]) -> dict[str, list[str]]:
    by_seller: dict[str, list[str]] = {}
    for c in contracts:
        by_seller.setdefault(net.seller(c), []).append(c)
    return {c: by_seller.get(net.buyer(c), []) for c in contracts}


# -- deferred acceptance ---------------------------------------------------------


@dataclass
class DAResult:
    outcome: frozenset[str]
    rounds: int
    rejections: int
    evaluations: int
    offered: frozenset[str]
    requested: frozenset[str]


def run_deferred_acceptance(net: TradingNetwork, verify: bool = True) -> DAResult:
    """Iterate the generalized Gale-Shapley operator from (X, ∅) to its fixed point.

    ``offered`` holds contracts no seller has rejected, ``requested`` those
    no buyer has rejected; each firm is offered its own upstream part of
    ``offered`` and downstream part of ``requested``.  The outcome is their
    intersection.  With ``verify`` the result is checked for acceptability
    and for locally blocking trails before it is returned.
    """
    X = net.all_contracts
    offered, requested = X, frozenset()
    limit = 2 * len(X) + 1
    evals_before = net.evaluations
    rejections = 0
    rounds = 0
    while True:
        rounds += 1
        if rounds > limit:
            raise NotFullySubstitutableError(f"no fixed point within {limit} rounds")
        rejected_by_sellers: set[str] = set()
        rejected_by_buyers: set[str] = set()
        for f in net.firms:
            up = net.upstream_of(f, offered)
            down = net.downstream_of(f, requested)
            if not up and not down:
                continue
            kept = net.choose(f, up | down)
            rejected_by_buyers |= up - kept
            rejected_by_sellers |= down - kept
        new_offered = X - rejected_by_sellers
        new_requested = X - rejected_by_buyers
        if not (new_offered <= offered and requested <= new_requested):
            raise NotFullySubstitutableError(f"round {rounds}: offers grew or requests shrank")
        if new_offered == offered and new_requested == requested:
            break
        rejections += len(offered - new_offered) + len(new_requested - requested)
        offered, requested = new_offered, new_requested

    A = offered & requested
    result = DAResult(A, rounds, rejections, net.evaluations - evals_before, offered, requested)
    if verify:
        if not net.is_acceptable(A):
            raise NotFullySubstitutableError("deferred acceptance output is not acceptable")
        trail = find_locally_blocking_trail(net, A)
        if trail is not None:
            raise NotFullySubstitutableError(f"deferred acceptance output is blocked by trail {trail.contracts}")
    return result


def deferred_acceptance(net: TradingNetwork) -> frozenset[str]:
    return run_deferred_acceptance(net).outcome


# -- trail stability -------------------------------------------------------------


def find_locally_blocking_trail(net: TradingNetwork, A: Iterable[str]) -> BlockReport | None:
    """Breadth-first search over contracts outside ``A``.

    Sources are contracts their seller would offer alone, edges join
    consecutive contracts that the middle firm accepts as a pair, and the
    search stops at a contract its buyer would accept alone.  Shortest walks
    never repeat a contract, so the result is a trail.
    """
    A = net.check_outcome(A)
    acc = _Acceptability(net, A)
    free = _free(net, A)
    succ = _successors(net, free)

    parent: dict[str, str | None] = {}
    queue: deque[str] = deque()
    for x in free:
        if acc.starts(x):
            parent[x] = None
            queue.append(x)
    while queue:
        x = queue.popleft()
        if acc.ends(x):
            seq = [x]
            while parent[seq[-1]] is not None:
                seq.append(parent[seq[-1]])
            seq.reverse()
            evidence = [(net.seller(seq[0]), (seq[0],))]
            evidence += [(net.buyer(a), (a, b)) for a, b in zip(seq, seq[1:])]
            evidence.append((net.buyer(seq[-1]), (seq[-1],)))
            return BlockReport("locally_blocking_trail", tuple(seq), tuple(evidence))
        f = net.buyer(x)
        for y in succ[x]:
            if y not in parent and acc(f, (x, y)):
                parent[y] = x
                queue.append(y)
    return None


def is_trail_stable(net: TradingNetwork, A: Iterable[str]) -> bool:
    A = net.check_outcome(A)
    return net.is_acceptable(A) and find_locally_blocking_trail(net, A) is None


# -- path-or-cycle stability -----------------------------------------------------


def _find_cycle(net: TradingNetwork, contracts: list[str]) -> list[str] | None:
    """Some directed cycle (distinct firms) in the firm graph spanned by ``contracts``."""
    out: dict[str, list[str]] = {}
    for c in contracts:
        out.setdefault(net.seller(c), []).append(c)
    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    for root in canonical(out):
        if root in state:
            continue
        stack_firms = [root]
        stack_edges: list[str] = []
        iters = [iter(out.get(root, []))]
        state[root] = 1
        while iters:
            c = next(iters[-1], None)
            if c is None:
                state[stack_firms.pop()] = 2
                iters.pop()
                if stack_edges:
                    stack_edges.pop()
                continue
            b = net.buyer(c)
            if state.get(b) == 1:
                start = stack_firms.index(b)
                return stack_edges[start:] + [c]
            if b not in state:
                state[b] = 1
                stack_firms.append(b)
                stack_edges.append(c)
                iters.append(iter(out.get(b, [])))
    return None


def _flow_path_or_cycle(net: TradingNetwork, A: frozenset[str]) -> BlockReport | None:
    free = _free(net, A)
    cyc = _find_cycle(net, free)
    if cyc is not None:
        return BlockReport("blocking_cycle", tuple(cyc), _set_evidence(net, cyc))
    acc = _Acceptability(net, A)
    succ = _successors(net, free)
    parent: dict[str, str | None] = {}
    queue: deque[str] = deque()
    for x in free:
        if acc.starts(x):
            parent[x] = None
            queue.append(x)
    while queue:
        x = queue.popleft()
        if acc.ends(x):
            seq = [x]
            while parent[seq[-1]] is not None:
                seq.append(parent[seq[-1]])
            seq.reverse()
            return BlockReport("blocking_path", tuple(seq), _set_evidence(net, seq))
        for y in succ[x]:
            if y not in parent:
                parent[y] = x
                queue.append(y)
    return None


def _enumerate_path_or_cycle(
    net: TradingNetwork, A: frozenset[str], budget_bits: int, stats: SearchStats
) -> BlockReport | None:
    free = _free(net, A)
    succ = _successors(net, free)
    order = {c: i for i, c in enumerate(free)}
    budget = 1 << budget_bits

    def check(seq: list[str], kind: BlockKind) -> BlockReport | None:
        stats.candidates += 1
        if net.is_w_acceptable_all(seq, A):
            return BlockReport(kind, tuple(seq), _set_evidence(net, seq))
        return None

    for x1 in free:
        origin = net.seller(x1)
        seq = [x1]
        firms = {origin, net.buyer(x1)}
        hit = check(seq, "blocking_path")
        if hit:
            return hit
        iters = [iter(succ[x1])]
        while iters:
            y = next(iters[-1], None)
            if y is None:
                iters.pop()
                last = seq.pop()
                firms.discard(net.buyer(last))
                continue
            stats.nodes += 1
            if stats.nodes > budget:
                raise BudgetExceeded("path/cycle enumeration", budget)
            b = net.buyer(y)
            if b == origin:
                # each cycle is reported from its canonically first contract only
                if order[y] > order[x1] and all(order[c] > order[x1] for c in seq[1:]):
                    hit = check(seq + [y], "blocking_cycle")
                    if hit:
                        return hit
                continue
            if b in firms:
                continue
            seq.append(y)
            firms.add(b)
            hit = check(seq, "blocking_path")
            if hit:
                return hit
            iters.append(iter(succ[y]))
    return None


def find_blocking_path_or_cycle(
    net: TradingNetwork,
    A: Iterable[str],
    method: Literal["auto", "enumerate"] = "auto",
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
) -> BlockReport | None:
    """Blocking path or cycle disjoint from ``A``.

    On a flow network with acceptable ``A`` every cycle outside ``A``
    blocks, and a path blocks iff its end contracts are acceptable alone, so
    a cycle search plus one BFS decide it in linear time.  Elsewhere all
    paths and cycles outside ``A`` are enumerated.
    """
    return _path_or_cycle(net, net.check_outcome(A), method, budget_bits, stats, None)


def _path_or_cycle(net, A, method, budget_bits, stats, acceptable: bool | None) -> BlockReport | None:
    # ``acceptable`` is passed when the caller already knows it
    if method == "auto" and is_flow_network(net):
        if acceptable is None:
            acceptable = net.is_acceptable(A)
        if acceptable:
            return _flow_path_or_cycle(net, A)
    return _enumerate_path_or_cycle(net, A, budget_bits, stats or SearchStats())


def is_path_or_cycle_stable(
    net: TradingNetwork,
    A: Iterable[str],
    method: Literal["auto", "enumerate"] = "auto",
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
) -> bool:
    A = net.check_outcome(A)
    return net.is_acceptable(A) and _path_or_cycle(net, A, method, budget_bits, stats, True) is None


# -- stability -------------------------------------------------------------------


def _terminal_flow(net: TradingNetwork, f: str) -> bool:
    cf = net.choice_function(f)
    return isinstance(cf, FlowBasedChoice) and cf.terminal


def blocking_set_search(
    net: TradingNetwork,
    A: Iterable[str],
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
    table_cache: dict | None = None,
) -> SubsetSearch:
    """Search object whose solutions are exactly the blocking sets of ``A`` (plus ∅).

    Pass the same ``table_cache`` dict when checking many outcomes of one
    network: a firm's table depends only on its own part of ``A``.
    """
    A = net.check_outcome(A)
    return SubsetSearch(
        net,
        _free(net, A),
        lambda f, S: net.is_w_acceptable(S, A, f),
        skip=lambda f: _terminal_flow(net, f),
        budget_bits=budget_bits,
        stats=stats,
        table_cache=table_cache,
        table_key=lambda f: net.restrict(f, A),
    )


def find_blocking_set(
    net: TradingNetwork,
    A: Iterable[str],
    method: Literal["auto", "enumerate"] = "auto",
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
    minimal: bool = True,
    table_cache: dict | None = None,
) -> BlockReport | None:
    """Non-empty Z outside ``A`` that every firm of Z accepts alongside A.

    Exhaustive: with ``minimal`` the witness has minimum cardinality and is
    the first such set in canonical contract order; without it the first set
    found is returned.  On flow networks with acceptable ``A``,
    ``method="auto"`` uses the equivalence with blocking paths and cycles.
    """
    return _blocking_set(net, net.check_outcome(A), method, budget_bits, stats, minimal, table_cache, None)


def _blocking_set(net, A, method, budget_bits, stats, minimal, table_cache, acceptable: bool | None) -> BlockReport | None:
    if method == "auto" and is_flow_network(net):
        if acceptable is None:
            acceptable = net.is_acceptable(A)
        if acceptable:
            rep = _flow_path_or_cycle(net, A)
            if rep is None:
                return None
            return BlockReport("blocking_set", rep.contracts, rep.evidence)
    search = blocking_set_search(net, A, budget_bits, stats, table_cache)
    Z = search.first_minimum() if minimal else next(search.solutions(nonempty=True), None)
    if Z is None:
        return None
    return BlockReport("blocking_set", tuple(canonical(Z)), _set_evidence(net, Z))


def all_blocking_sets(net: TradingNetwork, A: Iterable[str], budget_bits: int = DEFAULT_BUDGET_BITS) -> list[frozenset[str]]:
    return list(blocking_set_search(net, A, budget_bits).solutions(nonempty=True))


def is_stable(
    net: TradingNetwork,
    A: Iterable[str],
    method: Literal["auto", "enumerate"] = "auto",
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
    minimal: bool = False,
    table_cache: dict | None = None,
) -> bool:
    """Acceptable and no blocking set; the search stops at the first block found."""
    A = net.check_outcome(A)
    if not net.is_acceptable(A):
        return False
    return _blocking_set(net, A, method, budget_bits, stats, minimal, table_cache, True) is None


# -- weak trail stability --------------------------------------------------------


def find_sequentially_blocking_trail(
    net: TradingNetwork,
    A: Iterable[str],
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
) -> BlockReport | None:
    """Depth-first search over every trail outside ``A``.

    A trail blocks when its first seller offers x_1 alone, its last buyer
    accepts x_M alone, and either every intermediate firm accepts all of its
    trail contracts seen so far (prefix form) or every intermediate firm
    accepts all of its trail contracts from the previous one onwards (suffix
    form).  Branches that can no longer reach an end contract are cut.
    """
    A = net.check_outcome(A)
    stats = stats or SearchStats()
    acc = _Acceptability(net, A)
    free = _free(net, A)
    succ = _successors(net, free)
    budget = 1 << budget_bits

    # contracts from which some end contract is reachable
    pred: dict[str, list[str]] = {c: [] for c in free}
    for c, nxt in succ.items():
        for d in nxt:
            pred[d].append(c)
    alive = {c for c in free if acc.ends(c)}
    queue = deque(alive)
    while queue:
        c = queue.popleft()
        for p in pred[c]:
            if p not in alive:
                alive.add(p)
                queue.append(p)

    def evidence(seq: list[str], prefix_ok: bool) -> tuple:
        ev = [(net.seller(seq[0]), (seq[0],))]
        T = set(seq)
        for m in range(1, len(seq)):
            f = net.seller(seq[m])
            part = seq[: m + 1] if prefix_ok else seq[m - 1 :]
            ev.append((f, tuple(canonical(c for c in part if c in T and f in (net.seller(c), net.buyer(c))))))
        ev.append((net.buyer(seq[-1]), (seq[-1],)))
        return tuple(ev)

    def suffix_ok(seq: list[str]) -> bool:
        for m in range(1, len(seq)):
            f = net.seller(seq[m])
            part = [c for c in seq[m - 1 :] if f in (net.seller(c), net.buyer(c))]
            if not acc(f, part):
                return False
        return True

    def prefix_piece(seq: list[str]) -> bool:
        f = net.seller(seq[-1])
        return acc(f, [c for c in seq if f in (net.seller(c), net.buyer(c))])

    for x1 in free:
        if x1 not in alive or not acc.starts(x1):
            continue
        seq = [x1]
        used = {x1}
        prefix = [True]
        iters: list[Iterator[str]] = [iter(succ[x1])]
        stats.candidates += 1
        if acc.ends(x1):
            return BlockReport("sequentially_blocking_trail", (x1,), evidence(seq, True))
        while iters:
            y = next(iters[-1], None)
            if y is None:
                iters.pop()
                used.discard(seq.pop())
                prefix.pop()
                continue
            if y in used or y not in alive:
                continue
            stats.nodes += 1
            if stats.nodes > budget:
                raise BudgetExceeded("trail enumeration", budget)
            seq.append(y)
            used.add(y)
            prefix.append(prefix[-1] and prefix_piece(seq))
            if acc.ends(y):
                stats.candidates += 1
                if prefix[-1]:
                    return BlockReport("sequentially_blocking_trail", tuple(seq), evidence(seq, True))
                if suffix_ok(seq):
                    return BlockReport("sequentially_blocking_trail", tuple(seq), evidence(seq, False))
            iters.append(iter(succ[y]))
    return None


def is_weakly_trail_stable(net: TradingNetwork, A: Iterable[str], **kw) -> bool:
    A = net.check_outcome(A)
    return net.is_acceptable(A) and find_sequentially_blocking_trail(net, A, **kw) is None


# -- existence -------------------------------------------------------------------


def _acceptable_order(net: TradingNetwork) -> list[str]:
    """Contract order that closes firms early: breadth-first over firms."""
    placed: list[str] = []
    seen_c: set[str] = set()
    seen_f: set[str] = set()
    for root in net.firms:
        if root in seen_f:
            continue
        queue = deque([root])
        seen_f.add(root)
        while queue:
            f = queue.popleft()
            for c in canonical(net.contracts_of(f)):
                if c in seen_c:
                    continue
                seen_c.add(c)
                placed.append(c)
                other = net.buyer(c) if net.seller(c) == f else net.seller(c)
                if other not in seen_f:
                    seen_f.add(other)
                    queue.append(other)
    return placed


def enumerate_acceptable_outcomes(
    net: TradingNetwork,
    budget_bits: int = DEFAULT_BUDGET_BITS,
    stats: SearchStats | None = None,
    acyclic_rest: bool = False,
) -> Iterator[frozenset[str]]:
    """Every acceptable outcome exactly once.

    Each firm's individually rational pieces are tabulated and combined by
    backtracking; for flow networks the pieces are the balanced ones, so this
    walks the unit circulations.  The tables are exact (terminal flow firms,
    which keep everything, are the only ones left out), so every complete
    assignment is acceptable without a further check.
    With ``acyclic_rest`` only outcomes A with X∖A acyclic are produced.
    """
    search = SubsetSearch(
        net,
        _acceptable_order(net),
        lambda f, S: net.choose(f, S) == S,
        skip=lambda f: _terminal_flow(net, f),
        budget_bits=budget_bits,
        stats=stats,
        acyclic_rest=acyclic_rest,
    )
    yield from search.solutions()


@dataclass
class ExistenceResult:
    concept: str
    verdict: Literal["yes", "no", "unknown"]
    witness: frozenset[str] | None = None
    examined: int = 0
    stats: SearchStats = field(default_factory=SearchStats)
    reason: str = ""


def _blocked(net: TradingNetwork, A: frozenset[str], concept: Concept, budget_bits: int, flow: bool) -> bool:
    """Whether an already acceptable ``A`` is blocked in the sense of ``concept``."""
    if concept == "trail":
        return find_locally_blocking_trail(net, A) is not None
    if concept == "weak_trail":
        return find_sequentially_blocking_trail(net, A, budget_bits) is not None
    if concept in ("path_or_cycle", "stable") and flow:
        return _flow_path_or_cycle(net, A) is not None
    if concept == "path_or_cycle":
        return _enumerate_path_or_cycle(net, A, budget_bits, SearchStats()) is not None
    if concept == "stable":
        return find_blocking_set(net, A, "enumerate", budget_bits, minimal=False) is not None
    raise ModelError(f"unknown concept {concept!r}")


def check_concept(net: TradingNetwork, A: Iterable[str], concept: Concept, budget_bits: int = DEFAULT_BUDGET_BITS) -> bool:
    A = net.check_outcome(A)
    if concept not in CONCEPTS:
        raise ModelError(f"unknown concept {concept!r}")
    return net.is_acceptable(A) and not _blocked(net, A, concept, budget_bits, is_flow_network(net))


def exists_outcome(net: TradingNetwork, concept: Concept, budget_bits: int = DEFAULT_BUDGET_BITS) -> ExistenceResult:
    """Witness outcome for ``concept`` or an exhaustive negative; ``unknown`` on budget."""
    if concept == "trail":
        res = run_deferred_acceptance(net)
        return ExistenceResult(concept, "yes", res.outcome, 1)
    if concept not in CONCEPTS:
        raise ModelError(f"unknown concept {concept!r}")
    result = ExistenceResult(concept, "no")
    # on flow networks a cycle outside an acceptable A blocks it, for both
    # concepts below, so those outcomes need not be generated at all
    flow = is_flow_network(net)
    prune = flow and concept in ("path_or_cycle", "stable")
    try:
        for A in enumerate_acceptable_outcomes(net, budget_bits, result.stats, acyclic_rest=prune):
            result.examined += 1
            if not _blocked(net, A, concept, budget_bits, flow):
                result.verdict = "yes"
                result.witness = A
                return result
    except BudgetExceeded as exc:
        result.verdict = "unknown"
        result.reason = str(exc)
    return result
