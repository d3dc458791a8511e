from __future__ import annotations

from itertools import combinations, permutations

import pytest

from tradenet.choice import FlowBasedChoice
from tradenet.model import Contract, TradingNetwork, validate_sequence

T = FlowBasedChoice.terminal_firm()


def flow_net(contracts: list[tuple[str, str, str]], prefs: dict[str, tuple[list[str], list[str]]]) -> TradingNetwork:
    """Network from (id, seller, buyer) triples; firms missing from ``prefs`` are terminal."""
    firms = sorted({c[1] for c in contracts} | {c[2] for c in contracts} | set(prefs))
    choice = {f: FlowBasedChoice(tuple(prefs[f][0]), tuple(prefs[f][1])) if f in prefs else T for f in firms}
    return TradingNetwork(firms, [Contract(*c) for c in contracts], choice)


def powerset(items):
    items = list(items)
    for r in range(len(items) + 1):
        for sub in combinations(items, r):
            yield frozenset(sub)


def brute_blocking_sets(net: TradingNetwork, A) -> list[frozenset[str]]:
    A = frozenset(A)
    free = [c for c in net.contract_ids if c not in A]
    return [Z for Z in powerset(free) if Z and net.is_w_acceptable_all(Z, A)]


def brute_acceptable(net: TradingNetwork) -> set[frozenset[str]]:
    return {A for A in powerset(net.contract_ids) if net.is_acceptable(A)}


def brute_locally_blocking_trail_exists(net: TradingNetwork, A) -> bool:
    """Every ordering of every subset of X∖A, checked clause by clause."""
    A = frozenset(A)
    free = [c for c in net.contract_ids if c not in A]
    for r in range(1, len(free) + 1):
        for seq in permutations(free, r):
            if validate_sequence(net, list(seq)) == "invalid":
                continue
            if not net.is_w_acceptable({seq[0]}, A, net.seller(seq[0])):
                continue
            if not net.is_w_acceptable({seq[-1]}, A, net.buyer(seq[-1])):
                continue
            if all(net.is_w_acceptable({a, b}, A, net.buyer(a)) for a, b in zip(seq, seq[1:])):
                return True
    return False


@pytest.fixture
def line_net() -> TradingNetwork:
    """s -> f -> t with f flow-based."""
    return flow_net([("x1", "s", "f"), ("x2", "f", "t")], {"f": (["x1"], ["x2"])})


@pytest.fixture
def single_net() -> TradingNetwork:
    return flow_net([("x", "a", "b")], {})


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
