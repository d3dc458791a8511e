"""Stability in trading networks with bilateral contracts."""

from .choice import (
    FlowBasedChoice,
    OracleFamilyChoice,
    PartitionBuyerChoice,
    PartitionSellerChoice,
    TableChoice,
    audit_full_substitutability,
    audit_irc,
)
from .errors import BudgetExceeded, ChoiceContractError, ModelError, NotFullySubstitutableError, SchemaError
from .model import Contract, TradingNetwork, classify_terminals, is_acyclic, is_flow_network, validate_sequence
from .solvers import (
    BlockReport,
    deferred_acceptance,
    enumerate_acceptable_outcomes,
    exists_outcome,
    find_blocking_path_or_cycle,
    find_blocking_set,
    find_locally_blocking_trail,
    find_sequentially_blocking_trail,
    is_path_or_cycle_stable,
    is_stable,
    is_trail_stable,
    is_weakly_trail_stable,
    run_deferred_acceptance,
)

__version__ = "0.1.0"
