"""Exact backtracking over contract subsets subject to per-firm local constraints.

Both "enumerate every acceptable outcome" and "find a blocking set" have the
form: pick Z ⊆ U such that for every firm f the local piece Z_f lies in an
allowed family.  The families are tabulated once per firm (2^{|U_f|} choice
evaluations).  After each decision the search checks, for every firm touching
the decided contract, that its partial piece still extends to some allowed
piece (forward checking against the table itself).  No monotonicity of the
families is assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterator, Sequence

from .errors import BudgetExceeded
from .model import TradingNetwork

DEFAULT_BUDGET_BITS = 24


@dataclass
class SearchStats:
    nodes: int = 0
    candidates: int = 0
    tables: int = 0


class SubsetSearch:
    """Enumerate subsets of ``universe`` (in the given order) accepted by every firm.

    ``local_ok(f, S)`` decides the piece ``S ⊆ universe_f``; it is called for
    every subset of every firm's local universe.  ``skip`` names firms known
    to accept every piece (no table is built for them).  Subsets are yielded
    in include-first depth-first order, which for a fixed cardinality is the
    lexicographic order of index tuples.

    With ``acyclic_rest`` a branch is cut as soon as the contracts decided
    *out* contain a directed cycle (seller to buyer).

    ``table_cache`` (a dict owned by the caller) reuses firm tables across
    searches; ``table_key(f)`` must capture everything besides the firm and
    its local universe that ``local_ok`` depends on.
    """

    def __init__(
        self,
        net: TradingNetwork,
        universe: Sequence[str],
        local_ok: Callable[[str, frozenset[str]], bool],
        *,
        skip: Callable[[str], bool] = lambda f: False,
        budget_bits: int = DEFAULT_BUDGET_BITS,
        stats: SearchStats | None = None,
        acyclic_rest: bool = False,
        table_cache: dict | None = None,
        table_key: Callable[[str], Hashable] | None = None,
    ):
        self.universe = list(universe)
        self.acyclic_rest = acyclic_rest
        self._ends = [(net.seller(c), net.buyer(c)) for c in self.universe]
        self.stats = stats if stats is not None else SearchStats()
        self.node_budget = 1 << budget_bits
        pos = {c: i for i, c in enumerate(self.universe)}

        local: dict[str, list[str]] = {}
        for c, ends in zip(self.universe, self._ends):
            for f in ends:
                local.setdefault(f, []).append(c)

        # per contract position: list of (firm slot, bit)
        self._bits: list[list[tuple[int, int]]] = [[] for _ in self.universe]
        # per contract position: (slot, partial masks that extend to an allowed piece)
        self._checks: list[list[tuple[int, frozenset[int]]]] = [[] for _ in self.universe]
        self._tables: list[frozenset[int]] = []
        for f, cs in local.items():
            if skip(f):
                continue
            if len(cs) > budget_bits:
                raise BudgetExceeded(f"local table for firm {f!r}", budget_bits, len(cs))
            key = None
            if table_cache is not None and table_key is not None:
                key = (f, tuple(cs), table_key(f))
            entry = table_cache.get(key) if key is not None else None
            if entry is None:
                entry = self._tabulate(f, cs, local_ok)
                if key is not None:
                    table_cache[key] = entry
            allowed, prefixes = entry
            if allowed is None:
                continue
            slot = len(self._tables)
            self._tables.append(allowed)
            for i, c in enumerate(cs):
                self._bits[pos[c]].append((slot, 1 << i))
                self._checks[pos[c]].append((slot, prefixes[i]))

    def _tabulate(self, f: str, cs: list[str], local_ok) -> tuple:
        """Allowed masks for ``f`` (None if every piece is allowed) and their prefix sets."""
        allowed = set()
        for mask in range(1 << len(cs)):
            piece = frozenset(c for i, c in enumerate(cs) if mask >> i & 1)
            self.stats.tables += 1
            if local_ok(f, piece):
                allowed.add(mask)
        if len(allowed) == 1 << len(cs):
            return None, None
        prefixes = [frozenset(m & ((1 << (i + 1)) - 1) for m in allowed) for i in range(len(cs))]
        return frozenset(allowed), prefixes

    def solutions(self, max_size: int | None = None, nonempty: bool = False) -> Iterator[frozenset[str]]:
        n = len(self.universe)
        masks = [0] * len(self._tables)
        chosen: list[str] = []
        stats = self.stats
        budget = self.node_budget
        out_arcs: dict[str, list[str]] = {}

        def closes_cycle(i: int) -> bool:
            seller, buyer = self._ends[i]
            seen, stack = {buyer}, [buyer]
            while stack:
                u = stack.pop()
                if u == seller:
                    return True
                for w in out_arcs.get(u, ()):
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            return False

        universe, all_bits, all_checks = self.universe, self._bits, self._checks
        acyclic_rest, ends = self.acyclic_rest, self._ends
        # stage[i]: 0 = enter, 1 = back from the include branch, 2 = back from the exclude branch
        stage = [0] * (n + 1)
        i = 0
        while i >= 0:
            st = stage[i]
            if st == 0:
                stats.nodes += 1
                if stats.nodes > budget:
                    raise BudgetExceeded("subset search nodes", budget)
                if i == n:
                    if chosen or not nonempty:
                        stats.candidates += 1
                        yield frozenset(chosen)
                    i -= 1
                    continue
                if max_size is None or len(chosen) < max_size:
                    for slot, b in all_bits[i]:
                        masks[slot] |= b
                    chosen.append(universe[i])
                    for slot, ok in all_checks[i]:
                        if masks[slot] not in ok:
                            break
                    else:
                        stage[i] = 1
                        i += 1
                        stage[i] = 0
                        continue
                    st = 1
                else:
                    st = -1
            if st == 1:
                chosen.pop()
                for slot, b in all_bits[i]:
                    masks[slot] &= ~b
            if st == 1 or st == -1:
                if acyclic_rest:
                    if closes_cycle(i):
                        i -= 1
                        continue
                    seller, buyer = ends[i]
                    out_arcs.setdefault(seller, []).append(buyer)
                for slot, ok in all_checks[i]:
                    if masks[slot] not in ok:
                        break
                else:
                    stage[i] = 2
                    i += 1
                    stage[i] = 0
                    continue
                st = 2
            # st == 2: leave this level
            if acyclic_rest:
                out_arcs[ends[i][0]].pop()
            i -= 1

    def first_minimum(self) -> frozenset[str] | None:
        """Smallest non-empty solution; ties broken lexicographically by position."""
        first = next(self.solutions(nonempty=True), None)
        if first is None:
            return None
        for k in range(1, len(first)):
            hit = next(self.solutions(max_size=k, nonempty=True), None)
            if hit is not None:
                return hit
        return next(self.solutions(max_size=len(first), nonempty=True))
