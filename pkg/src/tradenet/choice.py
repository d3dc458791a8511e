"""Concrete choice-function families and exhaustive auditors for IRC and full substitutability.

A choice function maps the set of a firm's contracts on offer to the subset the
firm keeps.  Every family here works on contract ids and never sees contracts
of other firms (:meth:`TradingNetwork.choose` strips them first).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Literal, Mapping, Sequence

from .errors import BudgetExceeded, ChoiceContractError, ModelError
from .model import ChoiceFunction, canonical

DEFAULT_AUDIT_CAP = 12
FLOW_MEMO_CAP = 1 << 14


def _unknown(offered: Iterable[str], known: frozenset[str], family: str) -> None:
    stray = set(offered) - known
    if stray:
        raise ChoiceContractError(f"{family}: contracts {canonical(stray)} are outside the firm's domain")


@dataclass(frozen=True)
class FlowBasedChoice:
    """Unit-capacity flow firm.

    Terminal firms keep everything.  A non-terminal firm keeps its ``k`` best
    upstream and ``k`` best downstream contracts, ``k`` being the smaller of
    the two offered counts, so kept contracts always balance.
    """

    buyer_pref: tuple[str, ...] = ()
    seller_pref: tuple[str, ...] = ()
    terminal: bool = False
    _rank: dict = field(init=False, repr=False, compare=False)
    _memo: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buyer_pref", tuple(self.buyer_pref))
        object.__setattr__(self, "seller_pref", tuple(self.seller_pref))
        both = self.buyer_pref + self.seller_pref
        if len(set(both)) != len(both):
            raise ModelError("flow-based preference lists repeat a contract")
        rank = {c: (0, i) for i, c in enumerate(self.buyer_pref)}
        rank.update({c: (1, i) for i, c in enumerate(self.seller_pref)})
        object.__setattr__(self, "_rank", rank)
        object.__setattr__(self, "_memo", {})

    @classmethod
    def terminal_firm(cls) -> "FlowBasedChoice":
        return cls(terminal=True)

    def choose(self, offered: frozenset[str]) -> frozenset[str]:
        if self.terminal:
            return frozenset(offered)
        hit = self._memo.get(offered)
        if hit is not None:
            return hit
        rank = self._rank
        up, down = [], []
        for c in offered:
            r = rank.get(c)
            if r is None:
                raise ChoiceContractError(f"flow-based choice has no preference over contract {c!r}")
            (up if r[0] == 0 else down).append(r[1])
        k = min(len(up), len(down))
        chosen = frozenset()
        if k:
            up.sort()
            down.sort()
            chosen = frozenset(self.buyer_pref[i] for i in up[:k]) | frozenset(self.seller_pref[i] for i in down[:k])
        # pure function of the offer; the memo is capped so long runs stay bounded
        if len(self._memo) >= FLOW_MEMO_CAP:
            self._memo.clear()
        if isinstance(offered, frozenset):
            self._memo[offered] = chosen
        return chosen


@dataclass(frozen=True)
class PartitionBuyerChoice:
    """Firm buying the weighted contracts x_i and selling one contract y.

    All upstream contracts are always kept; y is kept only when the offered
    upstream weight reaches half the total weight.  The half is compared in
    doubled form so odd totals stay integral.
    """

    weights: Mapping[str, int]
    special: str

    def __post_init__(self):
        object.__setattr__(self, "weights", dict(self.weights))
        if any(w <= 0 for w in self.weights.values()):
            raise ModelError("partition weights must be positive integers")
        if self.special in self.weights:
            raise ModelError("special contract cannot carry a weight")

    @property
    def doubled_threshold(self) -> int:
        return sum(self.weights.values())

    def choose(self, offered: frozenset[str]) -> frozenset[str]:
        _unknown(offered, frozenset(self.weights) | {self.special}, "partition_f")
        xs = frozenset(c for c in offered if c in self.weights)
        if self.special in offered and 2 * sum(self.weights[c] for c in xs) >= self.doubled_threshold:
            return xs | {self.special}
        return xs


@dataclass(frozen=True)
class PartitionSellerChoice:
    """Firm buying y and selling the weighted contracts x_1..x_k (listed in index order).

    Without y nothing is kept.  With y, the firm keeps y plus the longest
    index-order prefix of the offered x's whose weight stays within half the
    total.
    """

    order: tuple[str, ...]
    weights: Mapping[str, int]
    special: str

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        object.__setattr__(self, "weights", dict(self.weights))
        if set(self.order) != set(self.weights) or len(self.order) != len(self.weights):
            raise ModelError("partition_g order must list each weighted contract exactly once")
        if any(w <= 0 for w in self.weights.values()):
            raise ModelError("partition weights must be positive integers")

    @property
    def doubled_threshold(self) -> int:
        return sum(self.weights.values())

    def choose(self, offered: frozenset[str]) -> frozenset[str]:
        _unknown(offered, frozenset(self.order) | {self.special}, "partition_g")
        if self.special not in offered:
            return frozenset()
        kept = [self.special]
        acc = 0
        for c in self.order:
            if c not in offered:
                continue
            acc += self.weights[c]
            if 2 * acc > self.doubled_threshold:
                break
            kept.append(c)
        return frozenset(kept)


@dataclass(eq=False)
class OracleFamilyChoice:
    """Query-counting choice functions for the oracle lower-bound construction.

    The network has 2n contracts x_1..x_2n from g to f and one contract y
    from f to g.  With ``role="f"`` this is the "needs more than n" rule for
    y, optionally with one hidden n-subset ``hidden`` (1-based indices) on
    which y is also accepted.  With ``role="g"`` it is the unit-weight seller
    rule: y plus the first n offered x's.
    """

    n: int
    special: str
    xs: tuple[str, ...]
    role: Literal["f", "g"] = "f"
    hidden: frozenset[int] | None = None
    queries: int = field(default=0, init=False)
    distinct: set = field(default_factory=set, init=False, repr=False)

    def __post_init__(self):
        self.xs = tuple(self.xs)
        if self.n < 1 or len(self.xs) != 2 * self.n:
            raise ModelError(f"oracle family needs exactly 2n={2 * self.n} x-contracts, got {len(self.xs)}")
        if self.role not in ("f", "g"):
            raise ModelError(f"unknown oracle role {self.role!r}")
        if self.hidden is not None:
            self.hidden = frozenset(self.hidden)
            if self.role != "f":
                raise ModelError("only the f-side oracle carries a hidden set")
            if len(self.hidden) != self.n or not self.hidden <= set(range(1, 2 * self.n + 1)):
                raise ModelError(f"hidden set must be an n-subset of 1..{2 * self.n}")
        self._lock = threading.Lock()
        self._domain = frozenset(self.xs) | {self.special}

    @property
    def hidden_contracts(self) -> frozenset[str] | None:
        if self.hidden is None:
            return None
        return frozenset(self.xs[i - 1] for i in self.hidden)

    def reset(self) -> None:
        with self._lock:
            self.queries = 0
            self.distinct.clear()

    def choose(self, offered: frozenset[str]) -> frozenset[str]:
        _unknown(offered, self._domain, "oracle_family")
        offered = frozenset(offered)
        with self._lock:
            self.queries += 1
            self.distinct.add(offered)
        xs = offered - {self.special}
        if self.role == "f":
            if self.special in offered and (len(xs) >= self.n + 1 or xs == self.hidden_contracts):
                return offered
            return xs
        if self.special not in offered:
            return frozenset()
        kept = [c for c in self.xs if c in xs][: self.n]
        return frozenset(kept) | {self.special}


class TableChoice:
    """Choice function given by an explicit table over every subset of ``domain``."""

    def __init__(self, domain: Iterable[str], table: Mapping[Iterable[str], Iterable[str]]):
        self.domain = frozenset(domain)
        self.table: dict[frozenset[str], frozenset[str]] = {}
        for key, val in table.items():
            k, v = frozenset(key), frozenset(val)
            if not k <= self.domain:
                raise ModelError(f"table key {canonical(k)} leaves the domain")
            if not v <= k:
                raise ModelError(f"table maps {canonical(k)} to a non-subset {canonical(v)}")
            self.table[k] = v
        expected = 2 ** len(self.domain)
        if len(self.table) != expected:
            raise ModelError(f"table covers {len(self.table)} of {expected} subsets")

    @classmethod
    def from_function(cls, domain: Iterable[str], fn) -> "TableChoice":
        dom = canonical(domain)
        table = {}
        for r in range(len(dom) + 1):
            for sub in combinations(dom, r):
                table[frozenset(sub)] = frozenset(fn(frozenset(sub)))
        return cls(dom, table)

    @classmethod
    def with_overrides(cls, domain: Iterable[str], overrides: Mapping[Iterable[str], Iterable[str]]) -> "TableChoice":
        """Every subset chooses itself except the listed ones."""
        base = cls.from_function(domain, lambda s: s)
        table = dict(base.table)
        table.update({frozenset(k): frozenset(v) for k, v in overrides.items()})
        return cls(base.domain, table)

    def __repr__(self):
        return f"TableChoice(domain={canonical(self.domain)})"

    def choose(self, offered: frozenset[str]) -> frozenset[str]:
        try:
            return self.table[frozenset(offered)]
        except KeyError:
            raise ChoiceContractError(f"table has no row for {canonical(offered)}") from None


# -- auditors -----------------------------------------------------------------


@dataclass(frozen=True)
class AuditViolation:
    """One failed inclusion.

    For IRC, ``lhs`` is Y and ``rhs`` is Z with C(Y) ⊆ Z ⊆ Y.  For the four
    substitutability conditions, ``witness`` lists contracts on ``side``
    rejected at offer ``lhs`` but kept (or not rejected) at offer ``rhs``.
    """

    condition: str
    lhs: frozenset[str]
    rhs: frozenset[str]
    side: Literal["B", "S", ""]
    witness: frozenset[str]

    def replay(self, cf: ChoiceFunction, upstream: Iterable[str] = (), downstream: Iterable[str] = ()) -> bool:
        """Re-evaluate ``cf`` and confirm the violation is real."""
        if self.condition == "IRC":
            cy = frozenset(cf.choose(self.lhs))
            if not (cy <= self.rhs <= self.lhs):
                return False
            return frozenset(cf.choose(self.rhs)) != cy
        side_set = frozenset(upstream if self.side == "B" else downstream)
        rej_l = (self.lhs & side_set) - frozenset(cf.choose(self.lhs))
        rej_r = (self.rhs & side_set) - frozenset(cf.choose(self.rhs))
        return bool(self.witness) and self.witness <= rej_l - rej_r


def _submasks(mask: int) -> Iterator[int]:
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class _Tabulated:
    def __init__(self, cf: ChoiceFunction, contracts: Sequence[str], cap: int):
        if len(contracts) > cap:
            raise BudgetExceeded("audit", cap, len(contracts))
        self.elems = list(contracts)
        n = len(self.elems)
        self.choice = [0] * (1 << n)
        index = {c: i for i, c in enumerate(self.elems)}
        for mask in range(1 << n):
            offered = frozenset(self.elems[i] for i in range(n) if mask >> i & 1)
            chosen = cf.choose(offered)
            m = 0
            for c in chosen:
                if c not in offered:
                    raise ChoiceContractError(f"choice returned unoffered contract {c!r}")
                m |= 1 << index[c]
            self.choice[mask] = m

    def mask(self, ids: Iterable[str]) -> int:
        m = 0
        for c in ids:
            m |= 1 << self.elems.index(c)
        return m

    def unmask(self, m: int) -> frozenset[str]:
        return frozenset(c for i, c in enumerate(self.elems) if m >> i & 1)


def audit_irc(
    cf: ChoiceFunction,
    contracts: Iterable[str],
    cap: int = DEFAULT_AUDIT_CAP,
    max_violations: int = 100,
) -> list[AuditViolation]:
    """Check C(Z) = C(Y) for every Y and every Z with C(Y) ⊆ Z ⊆ Y."""
    tab = _Tabulated(cf, canonical(contracts), cap)
    out: list[AuditViolation] = []
    for y in range(len(tab.choice)):
        cy = tab.choice[y]
        for extra in _submasks(y & ~cy):
            z = cy | extra
            if tab.choice[z] != cy:
                out.append(
                    AuditViolation("IRC", tab.unmask(y), tab.unmask(z), "", tab.unmask(tab.choice[z] ^ cy))
                )
                if len(out) >= max_violations:
                    return out
    return out


def audit_full_substitutability(
    cf: ChoiceFunction,
    upstream: Iterable[str],
    downstream: Iterable[str],
    cap: int = DEFAULT_AUDIT_CAP,
    max_violations: int = 100,
) -> list[AuditViolation]:
    """Check same-side substitutability and cross-side complementarity.

    Every nested pair is enumerated: conditions 1a and 2b range over
    Y' ⊆ Y ⊆ upstream for each downstream Z, conditions 1b and 2a over
    Z' ⊆ Z ⊆ downstream for each upstream Y.
    """
    upstream, downstream = frozenset(upstream), frozenset(downstream)
    if upstream & downstream:
        raise ModelError("a contract cannot be both upstream and downstream")
    tab = _Tabulated(cf, canonical(upstream | downstream), cap)
    B, S = tab.mask(upstream), tab.mask(downstream)
    choice = tab.choice
    out: list[AuditViolation] = []

    def rej(offer: int, side: int) -> int:
        return offer & side & ~choice[offer]

    def record(cond, lhs, rhs, side_name, bad):
        out.append(AuditViolation(cond, tab.unmask(lhs), tab.unmask(rhs), side_name, tab.unmask(bad)))
        return len(out) >= max_violations

    for z in _submasks(S):
        for y in _submasks(B):
            big = y | z
            rb, rs = rej(big, B), rej(big, S)
            for y2 in _submasks(y):
                if y2 == y:
                    continue
                small = y2 | z
                bad = rej(small, B) & ~rb  # 1a: R_B(Y'|Z) ⊆ R_B(Y|Z)
                if bad and record("SSS-1a", small, big, "B", bad):
                    return out
                bad = rs & ~rej(small, S)  # 2b: R_S(Z|Y) ⊆ R_S(Z|Y')
                if bad and record("CSC-2b", big, small, "S", bad):
                    return out
    for y in _submasks(B):
        for z in _submasks(S):
            big = y | z
            rb, rs = rej(big, B), rej(big, S)
            for z2 in _submasks(z):
                if z2 == z:
                    continue
                small = y | z2
                bad = rej(small, S) & ~rs  # 1b: R_S(Z'|Y) ⊆ R_S(Z|Y)
                if bad and record("SSS-1b", small, big, "S", bad):
                    return out
                bad = rb & ~rej(small, B)  # 2a: R_B(Y|Z) ⊆ R_B(Y|Z')
                if bad and record("CSC-2a", big, small, "B", bad):
                    return out
    return out


def audit_firm(net, f: str, prop: Literal["irc", "full-sub"], cap: int = DEFAULT_AUDIT_CAP) -> list[AuditViolation]:
    cf = net.choice_function(f)
    if prop == "irc":
        return audit_irc(cf, net.contracts_of(f), cap=cap)
    return audit_full_substitutability(cf, net.upstream(f), net.downstream(f), cap=cap)
