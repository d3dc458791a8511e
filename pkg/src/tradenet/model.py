"""Trading networks: firms, bilateral contracts, outcomes and the basic predicates.

Contracts and firms are identified by strings.  Every collection the package
returns is ordered by :func:`natural_key`, so iteration (and therefore every
solver) is deterministic.  Outcomes are plain ``frozenset`` objects of
contract ids.
"""

from __future__ import annotations

import graphlib
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal, Mapping, Protocol, Sequence

from .errors import ChoiceContractError, ModelError, UnknownFirmError

Outcome = frozenset  # frozenset[str] of contract ids
SequenceKind = Literal["trail", "path", "cycle", "invalid"]

_DIGITS = re.compile(r"(\d+)")


@lru_cache(maxsize=1 << 16)
def natural_key(ident: str) -> tuple:
    """Sort key that orders ``x2`` before ``x10``."""
    parts = _DIGITS.split(ident)
    return tuple(int(p) if i % 2 else p for i, p in enumerate(parts))


def canonical(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=natural_key)


class ChoiceFunction(Protocol):
    def choose(self, offered: frozenset[str]) -> frozenset[str]: ...


@dataclass(frozen=True)
class Contract:
    id: str
    seller: str
    buyer: str

    def __post_init__(self):
        if self.seller == self.buyer:
            raise ModelError(f"contract {self.id!r}: seller and buyer are both {self.seller!r}")

    def __str__(self):
        return f"{self.id}({self.seller}->{self.buyer})"


class TradingNetwork:
    """Immutable set of firms and contracts with one choice function per firm.

    ``evaluations`` counts calls to :meth:`choose`; it is instrumentation only
    and is not part of the network's identity.
    """

    def __init__(
        self,
        firms: Iterable[str],
        contracts: Iterable[Contract],
        choice: Mapping[str, ChoiceFunction],
    ):
        firm_list = canonical(firms)
        if len(set(firm_list)) != len(firm_list):
            raise ModelError("duplicate firm id")
        self.firms: tuple[str, ...] = tuple(firm_list)
        firm_set = set(firm_list)

        by_id: dict[str, Contract] = {}
        for c in contracts:
            if c.id in by_id:
                raise ModelError(f"duplicate contract id {c.id!r}")
            for end in (c.seller, c.buyer):
                if end not in firm_set:
                    raise UnknownFirmError(f"contract {c.id!r} references unknown firm {end!r}")
            by_id[c.id] = c
        self._contracts = {cid: by_id[cid] for cid in canonical(by_id)}
        self.contract_ids: tuple[str, ...] = tuple(self._contracts)
        self.all_contracts: frozenset[str] = frozenset(self._contracts)

        missing = firm_set - set(choice)
        extra = set(choice) - firm_set
        if missing or extra:
            raise ModelError(
                f"choice functions must cover exactly the firms (missing={sorted(missing)}, extra={sorted(extra)})"
            )
        self._choice = {f: choice[f] for f in self.firms}
        self._flow: bool | None = None  # memo for is_flow_network

        up: dict[str, set[str]] = {f: set() for f in self.firms}
        down: dict[str, set[str]] = {f: set() for f in self.firms}
        for c in self._contracts.values():
            up[c.buyer].add(c.id)
            down[c.seller].add(c.id)
        self._up = {f: frozenset(v) for f, v in up.items()}
        self._down = {f: frozenset(v) for f, v in down.items()}
        self._own = {f: self._up[f] | self._down[f] for f in self.firms}
        self.evaluations = 0

    # -- accessors ---------------------------------------------------------

    def __repr__(self):
        return f"TradingNetwork({len(self.firms)} firms, {len(self.contract_ids)} contracts)"

    def contract(self, cid: str) -> Contract:
        try:
            return self._contracts[cid]
        except KeyError:
            raise ModelError(f"unknown contract {cid!r}") from None

    @property
    def contracts(self) -> tuple[Contract, ...]:
        return tuple(self._contracts.values())

    def seller(self, cid: str) -> str:
        c = self._contracts.get(cid)
        return c.seller if c is not None else self.contract(cid).seller

    def buyer(self, cid: str) -> str:
        c = self._contracts.get(cid)
        return c.buyer if c is not None else self.contract(cid).buyer

    def choice_function(self, f: str) -> ChoiceFunction:
        self._check_firm(f)
        return self._choice[f]

    def _check_firm(self, f: str) -> None:
        if f not in self._own:
            raise UnknownFirmError(f"unknown firm {f!r}")

    def upstream(self, f: str) -> frozenset[str]:
        """X_f^B: every contract in which ``f`` is the buyer."""
        self._check_firm(f)
        return self._up[f]

    def downstream(self, f: str) -> frozenset[str]:
        self._check_firm(f)
        return self._down[f]

    def contracts_of(self, f: str) -> frozenset[str]:
        self._check_firm(f)
        return self._own[f]

    def upstream_of(self, f: str, Y: Iterable[str]) -> frozenset[str]:
        return self.upstream(f).intersection(Y)

    def downstream_of(self, f: str, Y: Iterable[str]) -> frozenset[str]:
        return self.downstream(f).intersection(Y)

    def restrict(self, f: str, Y: Iterable[str]) -> frozenset[str]:
        """Y_f, the contracts of ``Y`` that involve ``f``."""
        own = self._own.get(f)
        if own is None:
            self._check_firm(f)
        return own.intersection(Y)

    def firms_of(self, Y: Iterable[str]) -> list[str]:
        """F(Y) in canonical order."""
        out = set()
        for cid in Y:
            c = self.contract(cid)
            out.add(c.seller)
            out.add(c.buyer)
        return canonical(out)

    def check_outcome(self, A: Iterable[str]) -> frozenset[str]:
        A = frozenset(A)
        unknown = A - self.all_contracts
        if unknown:
            raise ModelError(f"outcome mentions unknown contracts {canonical(unknown)}")
        return A

    # -- choice ------------------------------------------------------------

    def choose(self, f: str, Y: Iterable[str]) -> frozenset[str]:
        """C^f(Y_f).  Contracts not involving ``f`` are dropped first."""
        return self._choose_local(f, self.restrict(f, Y))

    def _choose_local(self, f: str, offered: frozenset[str]) -> frozenset[str]:
        self.evaluations += 1
        chosen = frozenset(self._choice[f].choose(offered))
        if not chosen <= offered:
            raise ChoiceContractError(
                f"choice function of {f!r} returned {canonical(chosen - offered)} which were not offered"
            )
        return chosen

    def chosen_buyer(self, f: str, Y: Iterable[str], Z: Iterable[str]) -> frozenset[str]:
        """C_B^f(Y|Z): upstream contracts kept when offered Y upstream and Z downstream."""
        offered = self.upstream_of(f, Y) | self.downstream_of(f, Z)
        return self.choose(f, offered) & self._up[f]

    def chosen_seller(self, f: str, Z: Iterable[str], Y: Iterable[str]) -> frozenset[str]:
        offered = self.downstream_of(f, Z) | self.upstream_of(f, Y)
        return self.choose(f, offered) & self._down[f]

    def rejected_buyer(self, f: str, Y: Iterable[str], Z: Iterable[str]) -> frozenset[str]:
        Y = frozenset(Y)
        return self.upstream_of(f, Y) - self.chosen_buyer(f, Y, Z)

    def rejected_seller(self, f: str, Z: Iterable[str], Y: Iterable[str]) -> frozenset[str]:
        Z = frozenset(Z)
        return self.downstream_of(f, Z) - self.chosen_seller(f, Z, Y)

    # -- acceptability -----------------------------------------------------

    def is_individually_rational(self, A: Iterable[str], f: str) -> bool:
        A_f = self.restrict(f, A)
        return self._choose_local(f, A_f) == A_f

    def is_acceptable(self, A: Iterable[str]) -> bool:
        A = frozenset(A)
        return all(self.is_individually_rational(A, f) for f in self.firms)

    def is_w_acceptable(self, S: Iterable[str], W: Iterable[str], f: str) -> bool:
        """True iff ``f`` keeps all of S_f when offered S alongside W."""
        S_f = self.restrict(f, S)
        if not S_f:
            return True
        W_f = self.restrict(f, W)
        return S_f <= self._choose_local(f, W_f | S_f)

    def is_w_acceptable_all(self, S: Iterable[str], W: Iterable[str]) -> bool:
        S = frozenset(S)
        W = frozenset(W)
        return all(self.is_w_acceptable(S, W, f) for f in self.firms_of(S))


def validate_sequence(net: TradingNetwork, seq: Sequence[str]) -> SequenceKind:
    """Classify an ordered list of contracts as the strictest of cycle, path, trail."""
    if not seq:
        raise ModelError("empty contract sequence")
    if len(set(seq)) != len(seq):
        return "invalid"
    cs = [net.contract(cid) for cid in seq]
    for prev, nxt in zip(cs, cs[1:]):
        if prev.buyer != nxt.seller:
            return "invalid"
    sellers = [c.seller for c in cs]
    if len(set(sellers)) == len(sellers):
        last_buyer = cs[-1].buyer
        if last_buyer == sellers[0]:
            return "cycle"
        if last_buyer not in sellers:
            return "path"
    return "trail"


def classify_terminals(net: TradingNetwork) -> tuple[list[str], list[str]]:
    """Return (terminal sellers, terminal buyers).

    A firm without any contract is both.
    """
    sellers = [f for f in net.firms if not net.upstream(f)]
    buyers = [f for f in net.firms if not net.downstream(f)]
    return sellers, buyers


def terminal_agents(net: TradingNetwork) -> list[str]:
    sellers, buyers = classify_terminals(net)
    return canonical(set(sellers) | set(buyers))


def is_flow_network(net: TradingNetwork) -> bool:
    """Exactly two terminal agents, flow-based choice everywhere, terminal flags matching."""
    if net._flow is None:
        net._flow = _is_flow_network(net)
    return net._flow


def _is_flow_network(net: TradingNetwork) -> bool:
    from .choice import FlowBasedChoice

    terminals = set(terminal_agents(net))
    if len(terminals) != 2:
        return False
    for f in net.firms:
        cf = net.choice_function(f)
        if not isinstance(cf, FlowBasedChoice):
            return False
        if cf.terminal != (f in terminals):
            return False
    return True


def is_acyclic(net: TradingNetwork) -> bool:
    """No firm buys from and sells to another firm, even through intermediaries."""
    sorter = graphlib.TopologicalSorter({f: set() for f in net.firms})
    for c in net.contracts:
        sorter.add(c.buyer, c.seller)
    try:
        sorter.prepare()
    except graphlib.CycleError:
        return False
    return True
