"""JSON documents for networks, outcomes and digraphs.

Every document written here is canonical: firms, contracts and preference
payload keys are sorted, so ``save(load(doc))`` reproduces ``doc`` byte for
byte.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .choice import (
    FlowBasedChoice,
    OracleFamilyChoice,
    PartitionBuyerChoice,
    PartitionSellerChoice,
    TableChoice,
)
from .errors import ModelError, SchemaError
from .model import Contract, TradingNetwork, canonical
from .reductions import Digraph

SCHEMA_VERSION = 1

_ids = {"type": "array", "items": {"type": "string"}}

CHOICE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["terminal", "flow_based", "partition_f", "partition_g", "oracle_family", "table"]}},
    "allOf": [
        {
            "if": {"properties": {"kind": {"const": "flow_based"}}},
            "then": {"required": ["buyer_pref", "seller_pref"], "properties": {"buyer_pref": _ids, "seller_pref": _ids}},
        },
        {
            "if": {"properties": {"kind": {"const": "partition_f"}}},
            "then": {
                "required": ["weights", "special"],
                "properties": {
                    "weights": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
                    "special": {"type": "string"},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "partition_g"}}},
            "then": {
                "required": ["order", "weights", "special"],
                "properties": {
                    "order": _ids,
                    "weights": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
                    "special": {"type": "string"},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "oracle_family"}}},
            "then": {
                "required": ["role", "n", "special", "xs"],
                "properties": {
                    "role": {"enum": ["f", "g"]},
                    "n": {"type": "integer", "minimum": 1},
                    "special": {"type": "string"},
                    "xs": _ids,
                    "hidden": {"type": ["array", "null"], "items": {"type": "integer"}},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "table"}}},
            "then": {
                "required": ["domain", "rows"],
                "properties": {
                    "domain": _ids,
                    "rows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["offered", "chosen"],
                            "properties": {"offered": _ids, "chosen": _ids},
                        },
                    },
                },
            },
        },
    ],
}

NETWORK_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["schema_version", "firms", "contracts"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "firms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "choice"],
                "additionalProperties": False,
                "properties": {"id": {"type": "string", "minLength": 1}, "choice": CHOICE_SCHEMA},
            },
        },
        "contracts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "seller", "buyer"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "seller": {"type": "string"},
                    "buyer": {"type": "string"},
                },
            },
        },
    },
}

OUTCOME_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["schema_version", "contracts"],
    "additionalProperties": False,
    "properties": {"schema_version": {"const": SCHEMA_VERSION}, "contracts": _ids},
}

DIGRAPH_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["vertices", "arcs"],
    "properties": {
        "vertices": {"type": "array", "items": {"type": ["string", "integer"]}},
        "arcs": {
            "type": "array",
            "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": ["string", "integer"]}},
        },
    },
}


def _validate(doc: Any, schema: dict, what: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{what}: {where}: {err.message}")
        raise SchemaError("\n".join(lines))


def _read_json(path: str | Path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path: str | Path, doc: Any) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


# -- choice payloads ---------------------------------------------------------------


def choice_to_json(cf) -> dict:
    if isinstance(cf, FlowBasedChoice):
        if cf.terminal:
            return {"kind": "terminal"}
        return {"kind": "flow_based", "buyer_pref": list(cf.buyer_pref), "seller_pref": list(cf.seller_pref)}
    if isinstance(cf, PartitionBuyerChoice):
        return {"kind": "partition_f", "weights": dict(cf.weights), "special": cf.special}
    if isinstance(cf, PartitionSellerChoice):
        return {"kind": "partition_g", "order": list(cf.order), "weights": dict(cf.weights), "special": cf.special}
    if isinstance(cf, OracleFamilyChoice):
        return {
            "kind": "oracle_family",
            "role": cf.role,
            "n": cf.n,
            "special": cf.special,
            "xs": list(cf.xs),
            "hidden": None if cf.hidden is None else sorted(cf.hidden),
        }
    if isinstance(cf, TableChoice):
        rows = [
            {"offered": canonical(k), "chosen": canonical(v)}
            for k, v in sorted(cf.table.items(), key=lambda kv: (len(kv[0]), canonical(kv[0])))
        ]
        return {"kind": "table", "domain": canonical(cf.domain), "rows": rows}
    raise SchemaError(f"cannot serialise choice function of type {type(cf).__name__}")


def choice_from_json(doc: dict, firm: str, upstream: frozenset[str], downstream: frozenset[str]):
    kind = doc["kind"]
    where = f"firm {firm!r}"
    try:
        if kind == "terminal":
            return FlowBasedChoice.terminal_firm()
        if kind == "flow_based":
            if set(doc["buyer_pref"]) != upstream or len(doc["buyer_pref"]) != len(upstream):
                raise SchemaError(f"{where}: buyer_pref must rank exactly {canonical(upstream)}")
            if set(doc["seller_pref"]) != downstream or len(doc["seller_pref"]) != len(downstream):
                raise SchemaError(f"{where}: seller_pref must rank exactly {canonical(downstream)}")
            return FlowBasedChoice(tuple(doc["buyer_pref"]), tuple(doc["seller_pref"]))
        if kind == "partition_f":
            return PartitionBuyerChoice(doc["weights"], doc["special"])
        if kind == "partition_g":
            return PartitionSellerChoice(tuple(doc["order"]), doc["weights"], doc["special"])
        if kind == "oracle_family":
            hidden = doc.get("hidden")
            return OracleFamilyChoice(doc["n"], doc["special"], tuple(doc["xs"]), doc["role"], None if hidden is None else frozenset(hidden))
        if kind == "table":
            table = {frozenset(r["offered"]): frozenset(r["chosen"]) for r in doc["rows"]}
            return TableChoice(doc["domain"], table)
    except ModelError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    raise SchemaError(f"{where}: unknown choice kind {kind!r}")


# -- networks ----------------------------------------------------------------------


def network_to_json(net: TradingNetwork) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "firms": [{"id": f, "choice": choice_to_json(net.choice_function(f))} for f in net.firms],
        "contracts": [{"id": c.id, "seller": c.seller, "buyer": c.buyer} for c in net.contracts],
    }


def network_from_json(doc: Any) -> TradingNetwork:
    _validate(doc, NETWORK_SCHEMA, "network")
    firm_ids = [f["id"] for f in doc["firms"]]
    dup = {f for f in firm_ids if firm_ids.count(f) > 1}
    if dup:
        raise SchemaError(f"network: duplicate firm ids {canonical(dup)}")
    known = set(firm_ids)
    contracts = []
    seen: set[str] = set()
    for i, c in enumerate(doc["contracts"]):
        if c["id"] in seen:
            raise SchemaError(f"network: contracts/{i}: duplicate contract id {c['id']!r}")
        seen.add(c["id"])
        for end in ("seller", "buyer"):
            if c[end] not in known:
                raise SchemaError(f"network: contracts/{i}/{end}: unknown firm {c[end]!r}")
        try:
            contracts.append(Contract(c["id"], c["seller"], c["buyer"]))
        except ModelError as exc:
            raise SchemaError(f"network: contracts/{i}: {exc}") from None
    up: dict[str, set[str]] = {f: set() for f in firm_ids}
    down: dict[str, set[str]] = {f: set() for f in firm_ids}
    for c in contracts:
        up[c.buyer].add(c.id)
        down[c.seller].add(c.id)
    choice = {
        f["id"]: choice_from_json(f["choice"], f["id"], frozenset(up[f["id"]]), frozenset(down[f["id"]]))
        for f in doc["firms"]
    }
    try:
        return TradingNetwork(firm_ids, contracts, choice)
    except ModelError as exc:
        raise SchemaError(f"network: {exc}") from None


def load_network(path: str | Path) -> TradingNetwork:
    return network_from_json(_read_json(path))


def save_network(net: TradingNetwork, path: str | Path) -> None:
    _write(path, network_to_json(net))


# -- outcomes and digraphs -----------------------------------------------------------


def outcome_to_json(A: Iterable[str]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "contracts": canonical(set(A))}


def outcome_from_json(doc: Any, net: TradingNetwork | None = None) -> frozenset[str]:
    _validate(doc, OUTCOME_SCHEMA, "outcome")
    ids = doc["contracts"]
    if len(set(ids)) != len(ids):
        raise SchemaError("outcome: duplicate contract id")
    A = frozenset(ids)
    if net is not None:
        unknown = A - net.all_contracts
        if unknown:
            raise SchemaError(f"outcome: unknown contracts {canonical(unknown)}")
    return A


def load_outcome(path: str | Path, net: TradingNetwork | None = None) -> frozenset[str]:
    return outcome_from_json(_read_json(path), net)


def save_outcome(A: Iterable[str], path: str | Path) -> None:
    _write(path, outcome_to_json(A))


def digraph_to_json(D: Digraph) -> dict:
    return {"vertices": list(D.vertices), "arcs": [list(a) for a in D.arcs]}


def digraph_from_json(doc: Any) -> Digraph:
    _validate(doc, DIGRAPH_SCHEMA, "digraph")
    try:
        return Digraph(tuple(str(v) for v in doc["vertices"]), tuple((str(u), str(v)) for u, v in doc["arcs"]))
    except ModelError as exc:
        raise SchemaError(f"digraph: {exc}") from None


def load_digraph(path: str | Path) -> Digraph:
    return digraph_from_json(_read_json(path))


def save_digraph(D: Digraph, path: str | Path) -> None:
    _write(path, digraph_to_json(D))

