"""JSON scenario files.

A scenario is one JSON object::

    {"schema": "multiple-domains",
     "nodes": [{"id": "h0", "sort": "human"},
               {"id": "d0", "sort": "domain", "owner": "h0", "name": "SDSS"}, ...],
     "edges": [{"source": "h0", "label": "votedOn", "target": "s0", "weight": 0.6}, ...]}

An optional ``"extensions"`` object registers extra edge labels, mapping each
label to a list of ``[source sort, target sort]`` pairs. Unknown keys are
rejected. Files are written with nodes sorted by id and edges by
``(source, label, target)`` so the same network always produces the same bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .errors import DuplicateNode, GraphError, InvalidNetwork, ScenarioFormatError
from .network import Edge, MultiRelationalNetwork, Node, Schema, SchemaMode, Sort

_TOP_KEYS = {"schema", "nodes", "edges", "extensions"}
_NODE_KEYS = {"id", "sort", "owner", "parent", "name", "payload"}
_EDGE_KEYS = {"source", "label", "target", "weight"}


def _fail(message: str) -> ScenarioFormatError:
    return ScenarioFormatError(message)


def _text(obj: dict, key: str, where: str, required: bool = True) -> str | None:
    value = obj.get(key)
    if value is None:
        if required:
            raise _fail(f"{where}: missing {key!r}")
        return None
    if not isinstance(value, str) or not value:
        raise _fail(f"{where}: {key!r} must be a non-empty string")
    return value


def _number(obj: dict, key: str, where: str, required: bool = True) -> float | None:
    value = obj.get(key)
    if value is None:
        if required:
            raise _fail(f"{where}: missing {key!r}")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(f"{where}: {key!r} must be a number")
    return float(value)


def network_from_dict(data: Any, *, strict: bool = True) -> MultiRelationalNetwork:
    """Build a network from parsed JSON.

    Structural problems (wrong types, unknown keys, duplicate ids) raise
    :class:`ScenarioFormatError`. Semantic problems such as schema
    violations or dangling references are collected by
    :meth:`MultiRelationalNetwork.validate`; with ``strict`` they raise
    :class:`InvalidNetwork`, otherwise the network is returned as loaded.
    """
    if not isinstance(data, dict):
        raise _fail("scenario must be a JSON object")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise _fail(f"unknown top-level field(s): {', '.join(sorted(extra))}")
    try:
        mode = SchemaMode(data.get("schema", SchemaMode.MULTIPLE_DOMAINS.value))
    except ValueError:
        raise _fail(f"unknown schema {data.get('schema')!r}; expected "
                    "'multiple-domains' or 'single-domain'") from None
    extensions = data.get("extensions", {})
    if not isinstance(extensions, dict):
        raise _fail("'extensions' must be an object")
    schema = Schema(mode)
    for label, pairs in extensions.items():
        if not isinstance(pairs, list) or not all(
                isinstance(p, list) and len(p) == 2 and all(isinstance(s, str) for s in p)
                for p in pairs):
            raise _fail(f"extension {label!r} must be a list of [source sort, target sort] pairs")
        try:
            schema.register(label, [tuple(p) for p in pairs])
        except (ValueError, GraphError) as exc:
            raise _fail(f"extension {label!r}: {exc}") from None

    network = MultiRelationalNetwork(schema)
    nodes = data.get("nodes", [])
    edges = data.get("edges", [])
    if not isinstance(nodes, list) or not isinstance(edges, list):
        raise _fail("'nodes' and 'edges' must be arrays")
    for i, raw in enumerate(nodes):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise _fail(f"{where}: must be an object")
        extra = set(raw) - _NODE_KEYS
        if extra:
            raise _fail(f"{where}: unknown field(s): {', '.join(sorted(extra))}")
        node_id = _text(raw, "id", where)
        try:
            sort = Sort.parse(_text(raw, "sort", where))
        except ValueError as exc:
            raise _fail(f"{where}: {exc}") from None
        payload = _number(raw, "payload", where, required=False)
        if payload is not None and not math.isfinite(payload):
            raise _fail(f"{where}: payload must be finite")
        node = Node(node_id, sort, _text(raw, "owner", where, False),
                    _text(raw, "parent", where, False), _text(raw, "name", where, False), payload)
        try:
            network._insert_node(node)
        except DuplicateNode as exc:
            raise _fail(f"{where}: {exc}") from None
    seen = set()
    for i, raw in enumerate(edges):
        where = f"edges[{i}]"
        if not isinstance(raw, dict):
            raise _fail(f"{where}: must be an object")
        extra = set(raw) - _EDGE_KEYS
        if extra:
            raise _fail(f"{where}: unknown field(s): {', '.join(sorted(extra))}")
        edge = Edge(_text(raw, "source", where), _text(raw, "label", where),
                    _text(raw, "target", where), _number(raw, "weight", where))
        if edge.key in seen:
            raise _fail(f"{where}: duplicate edge {edge.source} -{edge.label}-> {edge.target}")
        seen.add(edge.key)
        network._insert_edge(edge)

    if strict:
        violations = network.validate()
        if violations:
            raise InvalidNetwork(violations)
    return network


def load_network(path: str | Path, *, strict: bool = True) -> MultiRelationalNetwork:
    """Read a scenario file. ``OSError`` and :class:`ScenarioFormatError` propagate."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return network_from_dict(data, strict=strict)


def network_to_dict(network: MultiRelationalNetwork) -> dict:
    nodes = []
    for node_id in sorted(network.nodes):
        node = network.nodes[node_id]
        entry: dict[str, Any] = {"id": node.id, "sort": node.sort.value}
        for key in ("owner", "parent", "name", "payload"):
            value = getattr(node, key)
            if value is not None:
                entry[key] = value
        nodes.append(entry)
    data: dict[str, Any] = {"schema": network.schema.mode.value}
    extensions = network.schema.extensions
    if extensions:
        data["extensions"] = {
            label: sorted([a.value, b.value] for a, b in pairs)
            for label, pairs in sorted(extensions.items())
        }
    data["nodes"] = nodes
    data["edges"] = [{"source": e.source, "label": e.label, "target": e.target, "weight": e.weight}
                     for e in network.edges]
    return data


def dumps_network(network: MultiRelationalNetwork) -> str:
    return json.dumps(network_to_dict(network), indent=2) + "\n"


def save_network(network: MultiRelationalNetwork, path: str | Path) -> None:
    Path(path).write_text(dumps_network(network), encoding="utf-8")
