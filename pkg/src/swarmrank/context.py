"""The active problem a swarm runs against."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import UnknownProblem
from .network import USES, VOTED_ON, Edge, MultiRelationalNetwork, Node, NodeId, Sort


@dataclass(frozen=True)
class ProblemContext:
    """Run-time facts derived from one problem before any particle moves.

    ``solutions`` scopes traversal: edges into solutions of other problems are
    never admissible. ``voters`` are the humans with a positive ``votedOn``
    edge into ``solutions``. ``named_sets`` backs the ``current_in`` and
    ``target_in`` guards; ``problem``, ``solutions`` and ``dictators`` are
    always present. ``uses`` holds the run-time ``uses`` weights keyed by
    ``(human, domain)``; when set, they replace any stored ``uses`` edges.
    """

    problem: NodeId | None = None
    solutions: frozenset[NodeId] = frozenset()
    voters: frozenset[NodeId] = frozenset()
    named_sets: Mapping[str, frozenset[NodeId]] = field(default_factory=dict)
    uses: Mapping[tuple[NodeId, NodeId], float] | None = None
    _virtual: Mapping[tuple[NodeId, str], tuple[Edge, ...]] = field(
        default_factory=dict, repr=False, compare=False)

    @classmethod
    def for_problem(cls, network: MultiRelationalNetwork, problem: NodeId, *,
                    uses: Mapping[tuple[NodeId, NodeId], float] | None = None,
                    dictators: Iterable[NodeId] = (),
                    extra_sets: Mapping[str, Iterable[NodeId]] | None = None) -> "ProblemContext":
        node = network.nodes.get(problem)
        if node is None or node.sort is not Sort.PROBLEM:
            raise UnknownProblem(f"{problem!r} is not a problem in this network")
        solutions = frozenset(network.solutions_of(problem))
        voters = frozenset(
            e.source for e in network.edges
            if e.label == VOTED_ON and e.target in solutions and e.weight > 0.0
        )
        named = {name: frozenset(ids) for name, ids in (extra_sets or {}).items()}
        named.update(problem=frozenset({problem}), solutions=solutions,
                     dictators=frozenset(dictators))
        virtual: dict[tuple[NodeId, str], list[Edge]] = {}
        if uses is not None:
            for (human, domain), weight in sorted(uses.items()):
                virtual.setdefault((human, USES), []).append(Edge(human, USES, domain, float(weight)))
            # Humans absent from the map get no uses edges at all.
            for human in network.nodes_of(Sort.HUMAN):
                virtual.setdefault((human, USES), [])
        return cls(problem, solutions, voters, named, None if uses is None else dict(uses),
                   {k: tuple(v) for k, v in virtual.items()})

    def virtual_edges(self, node: NodeId, label: str) -> tuple[Edge, ...] | None:
        return self._virtual.get((node, label))

    def in_scope(self, target: Node) -> bool:
        if self.problem is None or target.sort is not Sort.SOLUTION:
            return True
        return target.id in self.solutions

    def named_set(self, name: str) -> frozenset[NodeId]:
        return self.named_sets.get(name, frozenset())
