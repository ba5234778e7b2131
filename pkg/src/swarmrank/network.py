"""Typed multi-relational network of humans, domains, problems and solutions.

The network is a directed, labeled, weighted graph whose nodes fall into
exactly one of four sorts. Which labels may join which sorts is governed by a
:class:`Schema`; the two stock schemas differ only in where ``trusts`` edges
originate (a human's domain, or the human directly).

Mutation is not synchronized. Callers that share a network between threads
must not mutate it while a swarm is running; the engine compiles its own
snapshot before propagating particles.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

from .errors import (
    DuplicateEdge,
    DuplicateNode,
    EmptyDistribution,
    GraphError,
    MissingOwner,
    MissingParent,
    NegativeWeight,
    SchemaViolation,
    UnknownNode,
    WrongReferentSort,
    ZeroTotalWeight,
)

NodeId = str


class Sort(str, enum.Enum):
    HUMAN = "human"
    DOMAIN = "domain"
    PROBLEM = "problem"
    SOLUTION = "solution"

    @property
    def title(self) -> str:
        return self.value.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Sort":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(f"unknown node sort {text!r}") from None


_ID_PREFIX = {Sort.HUMAN: "h", Sort.DOMAIN: "d", Sort.PROBLEM: "p", Sort.SOLUTION: "s"}


class SchemaMode(str, enum.Enum):
    MULTIPLE_DOMAINS = "multiple-domains"
    SINGLE_DOMAIN = "single-domain"


# Core edge labels.
USES = "uses"
TRUSTS = "trusts"
SIMILAR_TO = "similarTo"
HAS_PROPOSED = "hasProposed"
CREATED = "created"
CATEGORIZED_AS = "categorizedAs"
PROPOSED = "proposed"
VOTED_ON = "votedOn"

_H, _D, _P, _S = Sort.HUMAN, Sort.DOMAIN, Sort.PROBLEM, Sort.SOLUTION

_PROBLEM_SPACE_RULES = {
    HAS_PROPOSED: {(_P, _S)},
    CREATED: {(_H, _P)},
    CATEGORIZED_AS: {(_D, _P)},
    PROPOSED: {(_H, _S)},
    VOTED_ON: {(_H, _S)},
}

_CORE_RULES = {
    SchemaMode.MULTIPLE_DOMAINS: {
        USES: {(_H, _D)},
        TRUSTS: {(_D, _H)},
        SIMILAR_TO: {(_D, _D)},
        **_PROBLEM_SPACE_RULES,
    },
    SchemaMode.SINGLE_DOMAIN: {
        USES: {(_H, _D)},
        TRUSTS: {(_H, _H)},
        SIMILAR_TO: {(_D, _D)},
        **_PROBLEM_SPACE_RULES,
    },
}


@dataclass(frozen=True)
class Node:
    id: NodeId
    sort: Sort
    owner: NodeId | None = None
    parent: NodeId | None = None
    name: str | None = None
    payload: float | None = None


@dataclass(frozen=True)
class Edge:
    source: NodeId
    label: str
    target: NodeId
    weight: float

    @property
    def key(self) -> tuple[NodeId, str, NodeId]:
        return (self.source, self.label, self.target)


@dataclass(frozen=True)
class Violation:
    """One broken rule found by :meth:`MultiRelationalNetwork.validate`."""

    kind: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.subject}: {self.message}"


class Schema:
    """Allowed ``(source sort, target sort)`` pairs per edge label.

    Labels outside the core set (for example ``pro``/``con`` argumentation
    links) can be added with :meth:`register`; the swarm algorithms only look
    at the labels their grammar names, so extra labels are inert.
    """

    def __init__(self, mode: SchemaMode | str = SchemaMode.MULTIPLE_DOMAINS,
                 extensions: Mapping[str, Iterable[tuple[Sort, Sort]]] | None = None):
        self.mode = SchemaMode(mode)
        self._rules: dict[str, set[tuple[Sort, Sort]]] = {
            label: set(pairs) for label, pairs in _CORE_RULES[self.mode].items()
        }
        self._extensions: dict[str, set[tuple[Sort, Sort]]] = {}
        for label, pairs in (extensions or {}).items():
            self.register(label, pairs)

    def register(self, label: str, pairs: Iterable[tuple[Sort | str, Sort | str]]) -> None:
        if label in _CORE_RULES[self.mode]:
            raise GraphError(f"cannot redefine core label {label!r}")
        resolved = {(Sort.parse(a) if isinstance(a, str) else a,
                     Sort.parse(b) if isinstance(b, str) else b) for a, b in pairs}
        if not resolved:
            raise GraphError(f"label {label!r} needs at least one endpoint rule")
        self._extensions.setdefault(label, set()).update(resolved)
        self._rules.setdefault(label, set()).update(resolved)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(self._rules)

    @property
    def extensions(self) -> dict[str, frozenset[tuple[Sort, Sort]]]:
        return {label: frozenset(pairs) for label, pairs in self._extensions.items()}

    def endpoints(self, label: str) -> frozenset[tuple[Sort, Sort]]:
        return frozenset(self._rules.get(label, ()))

    def target_sorts(self, label: str) -> frozenset[Sort]:
        return frozenset(t for _, t in self._rules.get(label, ()))

    def check(self, source: Node, label: str, target: Node) -> str | None:
        """Return a description of the broken rule, or ``None`` if the edge is allowed."""
        pairs = self._rules.get(label)
        if pairs is None:
            return f"label {label!r} is not in the {self.mode.value} schema"
        if (source.sort, target.sort) not in pairs:
            return (f"{label} may not join {source.sort.title} {source.id!r} "
                    f"to {target.sort.title} {target.id!r}")
        if label == USES and target.owner != source.id:
            return f"uses edge must point at a domain owned by {source.id!r}"
        if label == HAS_PROPOSED and target.parent != source.id:
            return f"hasProposed edge must point at a solution of problem {source.id!r}"
        return None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self.mode == other.mode and self._rules == other._rules

    def __repr__(self) -> str:
        return f"Schema({self.mode.value!r}, extensions={sorted(self._extensions)})"


EdgeGuard = Callable[[Edge], bool]


class MultiRelationalNetwork:
    """Nodes of four sorts joined by labeled, weighted, directed edges.

    Parallel edges with the same ``(source, label, target)`` are rejected; use
    :meth:`set_weight` to change an existing edge. Weights need not be
    normalized; traversal normalizes over whatever set of edges a particle is
    allowed to take.
    """

    def __init__(self, schema: Schema | SchemaMode | str | None = None):
        if schema is None:
            schema = Schema()
        elif not isinstance(schema, Schema):
            schema = Schema(schema)
        self.schema = schema
        self._nodes: dict[NodeId, Node] = {}
        self._edges: dict[tuple[NodeId, str, NodeId], Edge] = {}
        self._out: dict[tuple[NodeId, str], dict[NodeId, Edge]] = {}
        self._counters = {prefix: itertools.count() for prefix in _ID_PREFIX.values()}

    # -- construction -------------------------------------------------

    def add_node(self, sort: Sort | str, *, owner: NodeId | None = None,
                 parent: NodeId | None = None, name: str | None = None,
                 payload: float | None = None, node_id: NodeId | None = None) -> NodeId:
        """Add a node and return its id.

        Domains need an ``owner`` human and a ``name``; solutions need a
        ``parent`` problem. A fresh id such as ``h0`` or ``s3`` is generated
        unless ``node_id`` is given.
        """
        sort = Sort.parse(sort) if isinstance(sort, str) else Sort(sort)
        if sort is Sort.DOMAIN:
            if owner is None:
                raise MissingOwner("domain nodes need an owner human")
            self._require_referent(owner, Sort.HUMAN, "owner")
            if not name:
                raise GraphError("domain nodes need a name")
        elif owner is not None:
            raise GraphError(f"only domain nodes have an owner, not {sort.value} nodes")
        elif name is not None:
            raise GraphError(f"only domain nodes have a name, not {sort.value} nodes")
        if sort is Sort.SOLUTION:
            if parent is None:
                raise MissingParent("solution nodes need a parent problem")
            self._require_referent(parent, Sort.PROBLEM, "parent")
        elif parent is not None:
            raise GraphError(f"only solution nodes have a parent, not {sort.value} nodes")
        if payload is not None:
            payload = float(payload)
            if not math.isfinite(payload):
                raise GraphError("payload must be finite")

        if node_id is None:
            node_id = self._fresh_id(sort)
        elif node_id in self._nodes:
            raise DuplicateNode(f"node {node_id!r} already exists")
        self._nodes[node_id] = Node(node_id, sort, owner, parent, name, payload)
        return node_id

    def _require_referent(self, ref: NodeId, sort: Sort, role: str) -> None:
        node = self._nodes.get(ref)
        if node is None:
            raise UnknownNode(f"{role} {ref!r} does not exist")
        if node.sort is not sort:
            raise WrongReferentSort(f"{role} {ref!r} is a {node.sort.value}, expected a {sort.value}")

    def _fresh_id(self, sort: Sort) -> NodeId:
        prefix = _ID_PREFIX[sort]
        for n in self._counters[prefix]:
            candidate = f"{prefix}{n}"
            if candidate not in self._nodes:
                return candidate
        raise AssertionError("unreachable")

    def add_edge(self, source: NodeId, label: str, target: NodeId, weight: float = 1.0) -> Edge:
        weight = _check_weight(weight)
        src, tgt = self._node_or_raise(source), self._node_or_raise(target)
        problem = self.schema.check(src, label, tgt)
        if problem is not None:
            raise SchemaViolation(problem)
        key = (source, label, target)
        if key in self._edges:
            raise DuplicateEdge(f"edge {source} -{label}-> {target} already exists; use set_weight")
        return self._insert_edge(Edge(source, label, target, weight))

    def set_weight(self, source: NodeId, label: str, target: NodeId, weight: float) -> Edge:
        weight = _check_weight(weight)
        key = (source, label, target)
        if key not in self._edges:
            raise GraphError(f"no edge {source} -{label}-> {target}")
        return self._insert_edge(Edge(source, label, target, weight))

    # Unchecked inserts, used by the scenario loader so that a bad file can
    # still be loaded and reported on by validate().
    def _insert_node(self, node: Node) -> None:
        if node.id in self._nodes:
            raise DuplicateNode(f"node {node.id!r} already exists")
        self._nodes[node.id] = node

    def _insert_edge(self, edge: Edge) -> Edge:
        self._edges[edge.key] = edge
        self._out.setdefault((edge.source, edge.label), {})[edge.target] = edge
        return edge

    # -- queries --------------------------------------------------------

    def _node_or_raise(self, node_id: NodeId) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"node {node_id!r} does not exist") from None

    def node(self, node_id: NodeId) -> Node:
        return self._node_or_raise(node_id)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> Mapping[NodeId, Node]:
        return self._nodes

    @property
    def edges(self) -> list[Edge]:
        """All edges sorted by ``(source, label, target)``."""
        return [self._edges[k] for k in sorted(self._edges)]

    def edge(self, source: NodeId, label: str, target: NodeId) -> Edge | None:
        return self._edges.get((source, label, target))

    def nodes_of(self, sort: Sort | str) -> list[NodeId]:
        sort = Sort.parse(sort) if isinstance(sort, str) else sort
        return sorted(n.id for n in self._nodes.values() if n.sort is sort)

    def domains_of(self, human: NodeId) -> list[NodeId]:
        return sorted(n.id for n in self._nodes.values()
                      if n.sort is Sort.DOMAIN and n.owner == human)

    def solutions_of(self, problem: NodeId) -> list[NodeId]:
        return sorted(n.id for n in self._nodes.values()
                      if n.sort is Sort.SOLUTION and n.parent == problem)

    def out_edges(self, node: NodeId, labels: str | Iterable[str],
                  guard: EdgeGuard | None = None, context=None) -> list[Edge]:
        """Outgoing edges of ``node`` a particle could take, sorted by target.

        Only edges whose label is in ``labels``, whose weight is positive and
        which pass ``guard`` are returned. With a problem ``context``, edges
        into solutions of other problems are dropped, and any virtual edges
        the context defines for a ``(node, label)`` pair replace the stored
        ones.
        """
        self._node_or_raise(node)
        if isinstance(labels, str):
            labels = (labels,)
        result: list[Edge] = []
        for label in sorted(set(labels)):
            virtual = context.virtual_edges(node, label) if context is not None else None
            if virtual is not None:
                candidates = virtual
            else:
                candidates = self._out.get((node, label), {}).values()
            for edge in candidates:
                if edge.weight <= 0.0:
                    continue
                if context is not None and not context.in_scope(self._nodes[edge.target]):
                    continue
                if guard is not None and not guard(edge):
                    continue
                result.append(edge)
        result.sort(key=lambda e: (e.target, e.label))
        return result

    def iter_out(self, node: NodeId) -> Iterator[Edge]:
        """Every stored outgoing edge of ``node`` regardless of label or weight."""
        for (source, _), targets in self._out.items():
            if source == node:
                yield from targets.values()

    # -- validation -------------------------------------------------------

    def validate(self) -> list[Violation]:
        """Check every node and edge; an empty list means the network is well formed."""
        found: list[Violation] = []
        for node_id in sorted(self._nodes):
            node = self._nodes[node_id]
            if node.sort is Sort.DOMAIN:
                found += self._check_referent(node, node.owner, Sort.HUMAN, "owner",
                                              "MissingOwner")
                if not node.name:
                    found.append(Violation("MissingName", node_id, "domain has no name"))
            elif node.owner is not None:
                found.append(Violation("UnexpectedOwner", node_id,
                                       f"{node.sort.value} nodes have no owner"))
            if node.sort is Sort.SOLUTION:
                found += self._check_referent(node, node.parent, Sort.PROBLEM, "parent",
                                              "MissingParent")
            elif node.parent is not None:
                found.append(Violation("UnexpectedParent", node_id,
                                       f"{node.sort.value} nodes have no parent"))
        for key in sorted(self._edges):
            edge = self._edges[key]
            subject = f"{edge.source} -{edge.label}-> {edge.target}"
            if not (math.isfinite(edge.weight) and edge.weight >= 0.0):
                found.append(Violation("NegativeWeight", subject,
                                       f"weight {edge.weight!r} is not finite and non-negative"))
            missing = [n for n in (edge.source, edge.target) if n not in self._nodes]
            for n in missing:
                found.append(Violation("UnknownNode", subject, f"endpoint {n!r} does not exist"))
            if missing:
                continue
            problem = self.schema.check(self._nodes[edge.source], edge.label,
                                        self._nodes[edge.target])
            if problem is not None:
                found.append(Violation("SchemaViolation", subject, problem))
        return found

    def _check_referent(self, node: Node, ref: NodeId | None, sort: Sort, role: str,
                        missing_kind: str) -> list[Violation]:
        if ref is None:
            return [Violation(missing_kind, node.id, f"{node.sort.value} has no {role}")]
        other = self._nodes.get(ref)
        if other is None:
            return [Violation("UnknownNode", node.id, f"{role} {ref!r} does not exist")]
        if other.sort is not sort:
            return [Violation("WrongReferentSort", node.id,
                              f"{role} {ref!r} is a {other.sort.value}, expected a {sort.value}")]
        return []

    def __repr__(self) -> str:
        return (f"MultiRelationalNetwork({self.schema.mode.value}, "
                f"{len(self._nodes)} nodes, {len(self._edges)} edges)")


def _check_weight(weight: float) -> float:
    weight = float(weight)
    if math.isnan(weight) or math.isinf(weight):
        raise NegativeWeight(f"weight must be finite, got {weight!r}")
    if weight < 0.0:
        raise NegativeWeight(f"weight must be non-negative, got {weight!r}")
    return weight


def normalize_distribution(edges: Iterable[Edge | tuple[NodeId, float]]) -> dict[NodeId, float]:
    """Turn a set of weighted edges into a probability distribution over targets.

    Accepts :class:`Edge` objects or ``(target, weight)`` pairs. Raises
    :class:`EmptyDistribution` for an empty set and :class:`ZeroTotalWeight`
    when the weights sum to zero.
    """
    pairs = [(e.target, e.weight) if isinstance(e, Edge) else (e[0], e[1]) for e in edges]
    if not pairs:
        raise EmptyDistribution("no edges to choose from")
    total = math.fsum(w for _, w in pairs)
    if not total > 0.0:
        raise ZeroTotalWeight("edge weights sum to zero")
    dist: dict[NodeId, float] = {}
    for target, weight in pairs:
        dist[target] = dist.get(target, 0.0) + weight / total
    return dist
