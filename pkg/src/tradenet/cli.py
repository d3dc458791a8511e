"""Command-line entry point.

Exit codes: 0 yes / stable / found, 3 no / unstable / none, 4 unknown
(budget exhausted), 2 usage or schema error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import io
from .choice import DEFAULT_AUDIT_CAP, audit_firm
from .errors import BudgetExceeded, SchemaError, TradeNetError
from .generate import export_dot, random_flow_network
from .model import canonical
from .reductions import (
    PartitionInstance,
    oracle_lower_bound_experiment,
    reduce_acyclic_bipartition,
    reduce_partition_to_instability,
)
from .search import DEFAULT_BUDGET_BITS, SearchStats
from .solvers import (
    exists_outcome,
    find_blocking_path_or_cycle,
    find_blocking_set,
    find_locally_blocking_trail,
    find_sequentially_blocking_trail,
    run_deferred_acceptance,
)

EXIT_YES, EXIT_USAGE, EXIT_NO, EXIT_UNKNOWN = 0, 2, 3, 4
VERDICT_EXIT = {"yes": EXIT_YES, "no": EXIT_NO, "unknown-budget": EXIT_UNKNOWN}
BUDGET_ENV = "TRADENET_BUDGET_BITS"
CLI_CONCEPTS = {"trail": "trail", "weak-trail": "weak_trail", "pc": "path_or_cycle", "stable": "stable"}


@dataclass
class RunReport:
    command: list[str]
    verdict: str
    concept: str | None = None
    witness: Any = None
    counters: dict[str, int] = field(default_factory=dict)
    budget_bits: int | None = None
    detail: str = ""
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def _default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    return int(raw) if raw else DEFAULT_BUDGET_BITS


def _stats_counters(stats: SearchStats) -> dict[str, int]:
    return {"search_nodes": stats.nodes, "candidates": stats.candidates, "table_evaluations": stats.tables}


# -- commands ----------------------------------------------------------------------


def cmd_solve(args) -> RunReport:
    net = io.load_network(args.network)
    res = run_deferred_acceptance(net)
    if args.output:
        io.save_outcome(res.outcome, args.output)
    return RunReport(
        [],
        "yes",
        "trail",
        canonical(res.outcome),
        {"rounds": res.rounds, "rejections": res.rejections, "choice_evaluations": res.evaluations, "contracts": len(net.contract_ids)},
    )


def cmd_check(args) -> RunReport:
    net = io.load_network(args.network)
    A = io.load_outcome(args.outcome, net) if args.outcome else frozenset()
    concept = CLI_CONCEPTS[args.concept]
    stats = SearchStats()
    report = RunReport([], "yes", concept, budget_bits=args.budget_bits)
    before = net.evaluations
    if not net.is_acceptable(A):
        bad = [f for f in net.firms if not net.is_individually_rational(A, f)]
        report.verdict = "no"
        report.witness = {"kind": "not_acceptable", "firms": bad}
    else:
        try:
            if concept == "trail":
                block = find_locally_blocking_trail(net, A)
            elif concept == "weak_trail":
                block = find_sequentially_blocking_trail(net, A, budget_bits=args.budget_bits, stats=stats)
            elif concept == "path_or_cycle":
                block = find_blocking_path_or_cycle(net, A, budget_bits=args.budget_bits, stats=stats)
            else:
                block = find_blocking_set(net, A, budget_bits=args.budget_bits, stats=stats)
        except BudgetExceeded as exc:
            report.verdict = "unknown-budget"
            report.detail = str(exc)
        else:
            if block is not None:
                report.verdict = "no"
                report.witness = block.to_json()
    report.counters = {**_stats_counters(stats), "choice_evaluations": net.evaluations - before}
    return report


def cmd_exists(args) -> RunReport:
    net = io.load_network(args.network)
    concept = CLI_CONCEPTS[args.concept]
    res = exists_outcome(net, concept, budget_bits=args.budget_bits)
    verdict = {"yes": "yes", "no": "no", "unknown": "unknown-budget"}[res.verdict]
    witness = canonical(res.witness) if res.witness is not None else None
    if witness is not None and args.output:
        io.save_outcome(res.witness, args.output)
    return RunReport(
        [], verdict, concept, witness, {"outcomes_examined": res.examined, **_stats_counters(res.stats)}, args.budget_bits, res.reason
    )


def cmd_reduce(args) -> RunReport:
    if args.problem == "acyclic-bipartition":
        D = io.load_digraph(args.input)
        net, rmap = reduce_acyclic_bipartition(D)
        if args.map:
            Path(args.map).write_text(io.dumps(rmap.to_json()), encoding="utf-8")
        A = None
    else:
        if not args.weights:
            raise SchemaError("reduce partition needs --weights")
        net, A = reduce_partition_to_instability(PartitionInstance.from_unsorted(args.weights))
        if args.outcome_out:
            io.save_outcome(A, args.outcome_out)
    if args.output:
        io.save_network(net, args.output)
    else:
        sys.stdout.write(io.dumps(io.network_to_json(net)))
    return RunReport([], "yes", None, None, {"firms": len(net.firms), "contracts": len(net.contract_ids)})


def cmd_audit(args) -> RunReport:
    net = io.load_network(args.network)
    firms = [args.firm] if args.firm else list(net.firms)
    found: list[dict] = []
    try:
        for f in firms:
            for v in audit_firm(net, f, args.property, cap=args.cap):
                found.append({"firm": f, "condition": v.condition, "lhs": canonical(v.lhs), "rhs": canonical(v.rhs), "witness": canonical(v.witness)})
    except BudgetExceeded as exc:
        return RunReport([], "unknown-budget", args.property, None, {"firms": len(firms)}, args.cap, str(exc))
    return RunReport([], "no" if found else "yes", args.property, found or None, {"firms": len(firms), "violations": len(found)})


def cmd_experiment(args) -> RunReport:
    rep = oracle_lower_bound_experiment(args.n)
    ok = rep.queries_needed == rep.binomial and rep.decider_covers_all and rep.all_flips_ok
    return RunReport(
        [],
        "yes" if ok else "no",
        "oracle-calls",
        rep.to_json(),
        {"queries_needed": rep.queries_needed, "binomial": rep.binomial, "decider_queries": rep.decider_queries_on_c0},
    )


def cmd_gen(args) -> RunReport:
    net = random_flow_network(args.seed, args.firms, args.density, args.max_contracts)
    if args.output:
        io.save_network(net, args.output)
    else:
        sys.stdout.write(io.dumps(io.network_to_json(net)))
    return RunReport([], "yes", None, None, {"firms": len(net.firms), "contracts": len(net.contract_ids)})


def cmd_export_dot(args) -> RunReport:
    net = io.load_network(args.network)
    A = io.load_outcome(args.outcome, net) if args.outcome else None
    text = export_dot(net, A)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return RunReport([], "yes")


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--budget-bits", type=int, default=_default_budget(), help=f"search cap as a power of two (env {BUDGET_ENV})")
    common.add_argument("--json", action="store_true", help="print a machine-readable run report")

    parser = argparse.ArgumentParser(prog="tradenet", description="Stability in trading networks with bilateral contracts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="trail-stable outcome by deferred acceptance")
    p.add_argument("network")
    p.add_argument("-o", "--output", help="write the outcome here")
    p.set_defaults(func=cmd_solve, quiet=False)

    p = sub.add_parser("check", parents=[common], help="test an outcome against a stability concept")
    p.add_argument("network")
    p.add_argument("--outcome", help="outcome JSON (default: the empty outcome)")
    p.add_argument("--concept", choices=list(CLI_CONCEPTS), required=True)
    p.set_defaults(func=cmd_check, quiet=False)

    p = sub.add_parser("exists", parents=[common], help="search for an outcome satisfying a concept")
    p.add_argument("network")
    p.add_argument("--concept", choices=list(CLI_CONCEPTS), required=True)
    p.add_argument("-o", "--output", help="write the witness outcome here")
    p.set_defaults(func=cmd_exists, quiet=False)

    p = sub.add_parser("reduce", parents=[common], help="generate a hardness-reduction instance")
    p.add_argument("problem", choices=["acyclic-bipartition", "partition"])
    p.add_argument("input", nargs="?", help="digraph JSON (acyclic-bipartition)")
    p.add_argument("--weights", type=int, nargs="+", help="Partition weights")
    p.add_argument("-o", "--output", help="network JSON output (default: stdout)")
    p.add_argument("--map", help="sidecar reduction map (acyclic-bipartition)")
    p.add_argument("--outcome-out", help="challenged outcome (partition)")
    p.set_defaults(func=cmd_reduce, quiet=True)

    p = sub.add_parser("audit", parents=[common], help="exhaustive IRC / full-substitutability audit")
    p.add_argument("network")
    p.add_argument("--property", choices=["irc", "full-sub"], required=True)
    p.add_argument("--firm")
    p.add_argument("--cap", type=int, default=DEFAULT_AUDIT_CAP, help="largest contract set to enumerate")
    p.set_defaults(func=cmd_audit, quiet=False)

    p = sub.add_parser("experiment", parents=[common], help="run an experiment")
    p.add_argument("name", choices=["oracle-calls"])
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_experiment, quiet=False)

    p = sub.add_parser("gen", parents=[common], help="generate a random instance")
    p.add_argument("family", choices=["flow"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--firms", type=int, default=8)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--max-contracts", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen, quiet=True)

    p = sub.add_parser("export-dot", parents=[common], help="render a network as Graphviz DOT")
    p.add_argument("network")
    p.add_argument("--outcome")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_dot, quiet=True)
    return parser


def _print_text(report: RunReport) -> None:
    line = f"verdict: {report.verdict}"
    if report.concept:
        line += f" ({report.concept})"
    print(line)
    if report.witness is not None:
        print("witness: " + json.dumps(report.witness, sort_keys=True))
    for k, v in report.counters.items():
        print(f"{k}: {v}")
    if report.detail:
        print(f"detail: {report.detail}")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_YES
    start = time.perf_counter()
    try:
        report = args.func(args)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TradeNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report.command = argv
    report.wall_time = round(time.perf_counter() - start, 6)
    if args.json:
        # keep stdout parseable when the command itself printed a document
        stream = sys.stderr if args.quiet and not args.output else sys.stdout
        print(json.dumps(report.to_json(), sort_keys=True), file=stream)
    elif not args.quiet:
        _print_text(report)
    return VERDICT_EXIT[report.verdict]


if __name__ == "__main__":
    sys.exit(main())
