"""Named aggregation algorithms on top of the swarm engine.

Solution ranking runs one particle per human and reads the energy that lands
on a problem's solutions:

``dd``
    direct democracy; only voters count.
``rd``
    representative democracy; non-voters delegate through their domains to a
    trusted human who voted.
``ddd``
    dynamically distributed democracy; delegation may chain through
    non-voting representatives.
``dictator``
    only the dictator's particle survives.

Representation needs to know which of a human's domains a problem belongs
to. Humans who categorized the problem themselves use their own
``categorizedAs`` weights; everyone else gets weights from a collective
domain ranking (:func:`rank_domains`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .context import ProblemContext
from .engine import RunResult, SwarmConfig, run
from .errors import (
    AggregationError,
    MissingPayload,
    NoCategorizations,
    NoHumans,
    UnknownProblem,
)
from .grammar import TraversalGrammar, builtin
from .network import (
    CATEGORIZED_AS,
    TRUSTS,
    USES,
    MultiRelationalNetwork,
    NodeId,
    SchemaMode,
    Sort,
)

ALGORITHMS = ("dd", "rd", "ddd", "dictator", "custom")
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Ranking:
    """Weights in descending order; equal weights are ordered by node id.

    ``ties`` lists every group of two or more nodes whose weights agree to
    within ``TIE_TOLERANCE``.
    """

    entries: tuple[tuple[NodeId, float], ...]
    ties: tuple[tuple[NodeId, ...], ...] = ()

    @classmethod
    def from_weights(cls, weights: Mapping[NodeId, float]) -> "Ranking":
        entries = tuple(sorted(weights.items(), key=lambda kv: (-kv[1], kv[0])))
        ties = []
        group = list(entries[:1])
        for node, w in entries[1:]:
            if abs(group[-1][1] - w) <= TIE_TOLERANCE:
                group.append((node, w))
            else:
                if len(group) > 1:
                    ties.append(tuple(n for n, _ in group))
                group = [(node, w)]
        if len(group) > 1:
            ties.append(tuple(n for n, _ in group))
        return cls(entries, tuple(ties))

    def as_dict(self) -> dict[NodeId, float]:
        return dict(self.entries)

    def __getitem__(self, node: NodeId) -> float:
        return self.as_dict()[node]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def nodes(self) -> list[NodeId]:
        return [n for n, _ in self.entries]


@dataclass
class SolutionRanking:
    problem: NodeId
    algorithm: str
    ranking: Ranking
    result: RunResult
    uses: dict[tuple[NodeId, NodeId], float] | None = None
    dictator: NodeId | None = None


@dataclass
class DomainRanking:
    problem: NodeId
    method: str
    ranking: Ranking
    names: dict[str, float]
    result: RunResult


@dataclass(frozen=True)
class DictatorChoice:
    human: NodeId
    tied: tuple[NodeId, ...]
    scores: dict[NodeId, float] = field(default_factory=dict)

    @property
    def is_tie(self) -> bool:
        return len(self.tied) > 1


@dataclass(frozen=True)
class Outcome:
    value: NodeId | float
    tie: bool = False
    tied: tuple[NodeId, ...] = ()


def _check_problem(network: MultiRelationalNetwork, problem: NodeId) -> None:
    node = network.nodes.get(problem)
    if node is None or node.sort is not Sort.PROBLEM:
        raise UnknownProblem(f"{problem!r} is not a problem in this network")


def _grammar_for(algorithm: str, network: MultiRelationalNetwork) -> TraversalGrammar:
    if algorithm in ("rd", "ddd") and network.schema.mode is SchemaMode.SINGLE_DOMAIN:
        return builtin(f"{algorithm}_single")
    return builtin(algorithm)


def rank_solutions(network: MultiRelationalNetwork, problem: NodeId, algorithm: str = "dd",
                   config: SwarmConfig | None = None, *, dictator: NodeId | None = None,
                   dictator_metric: str = "indegree", categorization: str = "recursive",
                   uses: Mapping[tuple[NodeId, NodeId], float] | None = None,
                   grammar: TraversalGrammar | None = None) -> SolutionRanking:
    """Collective ranking of ``problem``'s solutions.

    For ``rd``, ``ddd`` and custom grammars that follow ``uses`` edges, the
    ``uses`` weights are derived with :func:`compute_uses_weights` unless
    given explicitly. ``dictator``
    defaults to the human chosen by :func:`select_dictator`. ``custom`` runs
    ``grammar`` from every node of its start sort.
    """
    _check_problem(network, problem)
    if algorithm not in ALGORITHMS:
        raise AggregationError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    solutions = network.solutions_of(problem)
    if not solutions:
        raise AggregationError(f"problem {problem!r} has no solutions")
    config = config or SwarmConfig()

    dictators: tuple[NodeId, ...] = ()
    if algorithm == "custom":
        if grammar is None:
            raise AggregationError("the custom algorithm needs a grammar")
        inputs = network.nodes_of(grammar.start_sort)
    else:
        grammar = _grammar_for(algorithm, network)
        inputs = network.nodes_of(Sort.HUMAN)
    if algorithm == "dictator":
        if dictator is None:
            dictator = select_dictator(network, dictator_metric).human
        node = network.nodes.get(dictator)
        if node is None or node.sort is not Sort.HUMAN:
            raise AggregationError(f"dictator {dictator!r} is not a human")
        dictators = (dictator,)
        inputs = [dictator]
    if not inputs:
        raise NoHumans("no input nodes to release particles from")

    wants_uses = algorithm in ("rd", "ddd") or (algorithm == "custom" and USES in grammar.labels())
    if uses is None and wants_uses and network.schema.mode is SchemaMode.MULTIPLE_DOMAINS:
        uses = compute_uses_weights(network, problem, categorization, config)
    context = ProblemContext.for_problem(network, problem, uses=uses, dictators=dictators)
    result = run(network, grammar, inputs, solutions, context=context, config=config)
    return SolutionRanking(problem, algorithm, Ranking.from_weights(result.ranking), result,
                           None if uses is None else dict(uses), dictator)


def rank_domains(network: MultiRelationalNetwork, problem: NodeId, method: str = "recursive",
                 config: SwarmConfig | None = None) -> DomainRanking:
    """Rank the domains that categorize ``problem`` by the particles they collect.

    Every domain releases a particle. Under ``direct`` it may only follow a
    ``categorizedAs`` edge to the problem; under ``recursive`` it may also
    hop along ``similarTo`` edges to find one. ``names`` sums the ranking
    over domains sharing a name.
    """
    _check_problem(network, problem)
    if method not in ("direct", "recursive"):
        raise AggregationError(f"unknown categorization method {method!r}")
    grammar = builtin(f"domain_{method}")
    domains = network.nodes_of(Sort.DOMAIN)
    categorizers = sorted({e.source for e in network.edges
                           if e.label == CATEGORIZED_AS and e.target == problem and e.weight > 0.0})
    if not categorizers:
        raise NoCategorizations(f"no domain categorizes problem {problem!r}")
    context = ProblemContext.for_problem(network, problem)
    result = run(network, grammar, domains, categorizers, context=context, config=config)
    names: dict[str, float] = {}
    for domain, weight in result.ranking.items():
        name = network.node(domain).name
        names[name] = names.get(name, 0.0) + weight
    return DomainRanking(problem, method, Ranking.from_weights(result.ranking),
                         dict(sorted(names.items())), result)


def compute_uses_weights(network: MultiRelationalNetwork, problem: NodeId,
                         method: str = "recursive", config: SwarmConfig | None = None,
                         domain_ranking: DomainRanking | None = None,
                         ) -> dict[tuple[NodeId, NodeId], float]:
    """Run-time ``uses`` weight for every ``(human, owned domain)`` pair.

    A human who categorized the problem from one of their own domains gets
    that domain's ``categorizedAs`` weight per domain (0 for their other
    domains). Everyone else gets, per owned domain, the collective weight of
    that domain's name, rescaled to sum to one across the human's domains;
    names nobody used to categorize the problem get 0.
    """
    _check_problem(network, problem)
    categorized: dict[NodeId, float] = {}
    for e in network.edges:
        if e.label == CATEGORIZED_AS and e.target == problem and e.weight > 0.0:
            categorized[e.source] = e.weight

    weights: dict[tuple[NodeId, NodeId], float] = {}
    collective: dict[NodeId, list[NodeId]] = {}
    for human in network.nodes_of(Sort.HUMAN):
        owned = network.domains_of(human)
        if any(d in categorized for d in owned):
            for d in owned:
                weights[(human, d)] = categorized.get(d, 0.0)
        elif owned:
            collective[human] = owned

    if collective:
        name_weight: dict[str, float] = {}
        if categorized:
            if domain_ranking is None:
                domain_ranking = rank_domains(network, problem, method, config)
            name_weight = domain_ranking.names
        for human, owned in collective.items():
            raw = [name_weight.get(network.node(d).name, 0.0) for d in owned]
            total = math.fsum(raw)
            for d, w in zip(owned, raw):
                weights[(human, d)] = w / total if total > 0.0 else 0.0
    return dict(sorted(weights.items()))


def _trust_projection(network: MultiRelationalNetwork) -> dict[tuple[NodeId, NodeId], float]:
    """Human-to-human trust weights; domain trust is credited to the domain's owner."""
    pairs: dict[tuple[NodeId, NodeId], float] = {}
    for e in network.edges:
        if e.label != TRUSTS:
            continue
        source = network.node(e.source)
        truster = source.owner if source.sort is Sort.DOMAIN else source.id
        if truster is None or e.target not in network.nodes:
            continue
        pairs[(truster, e.target)] = pairs.get((truster, e.target), 0.0) + e.weight
    return pairs


def _eigenvector_centrality(humans: list[NodeId], pairs, tol: float = 1e-10,
                            max_iter: int = 10_000) -> dict[NodeId, float]:
    index = {h: i for i, h in enumerate(humans)}
    n = len(humans)
    incoming: list[list[tuple[int, float]]] = [[] for _ in humans]
    for (a, b), w in pairs.items():
        if a in index and b in index:
            incoming[index[b]].append((index[a], w))
    x = [1.0 / n] * n
    for _ in range(max_iter):
        # x + A^T x keeps the iteration from oscillating on bipartite graphs.
        nxt = [x[i] + math.fsum(x[j] * w for j, w in incoming[i]) for i in range(n)]
        norm = math.sqrt(math.fsum(v * v for v in nxt)) or 1.0
        nxt = [v / norm for v in nxt]
        if math.fsum(abs(a - b) for a, b in zip(nxt, x)) < n * tol:
            x = nxt
            break
        x = nxt
    return {h: x[index[h]] for h in humans}


def select_dictator(network: MultiRelationalNetwork, metric: str = "indegree") -> DictatorChoice:
    """Human who maximizes ``metric`` over the trust graph; ties go to the smallest id.

    ``indegree`` counts incoming ``trusts`` edges; ``eigenvector`` runs power
    iteration on the weighted human-to-human trust projection.
    """
    humans = network.nodes_of(Sort.HUMAN)
    if not humans:
        raise NoHumans("the network has no humans")
    pairs = _trust_projection(network)
    if metric == "indegree":
        scores = {h: 0.0 for h in humans}
        for e in network.edges:
            if e.label == TRUSTS and e.target in scores:
                scores[e.target] += 1.0
        tol = 0.0
    elif metric == "eigenvector":
        scores = _eigenvector_centrality(humans, pairs)
        tol = 1e-9
    else:
        raise AggregationError(f"unknown dictator metric {metric!r}")
    best = max(scores.values())
    tied = tuple(h for h in humans if best - scores[h] <= tol * max(1.0, abs(best)))
    return DictatorChoice(tied[0], tied, scores)


def select_outcome(ranking: Ranking | Mapping[NodeId, float], rule: str = "plurality",
                   payloads: Mapping[NodeId, float | None] | MultiRelationalNetwork | None = None,
                   ) -> Outcome:
    """Collapse a ranking to one outcome.

    ``plurality`` picks the top-ranked solution. ``average`` returns the
    ranking-weighted mean of the solutions' numeric payloads.
    """
    if not isinstance(ranking, Ranking):
        ranking = Ranking.from_weights(ranking)
    if not ranking.entries:
        raise AggregationError("cannot select from an empty ranking")
    if rule == "plurality":
        top = ranking.entries[0]
        tied = next((group for group in ranking.ties if top[0] in group), ())
        return Outcome(top[0], bool(tied), tied)
    if rule == "average":
        if isinstance(payloads, MultiRelationalNetwork):
            network = payloads
            payloads = {n: network.node(n).payload for n, _ in ranking.entries}
        payloads = payloads or {}
        missing = [n for n, _ in ranking.entries if payloads.get(n) is None]
        if missing:
            raise MissingPayload(f"solutions without a numeric payload: {', '.join(missing)}")
        return Outcome(math.fsum(w * float(payloads[n]) for n, w in ranking.entries))
    raise AggregationError(f"unknown selection rule {rule!r}")


__all__ = [
    "ALGORITHMS", "DictatorChoice", "DomainRanking", "Outcome", "Ranking", "SolutionRanking",
    "compute_uses_weights", "rank_domains", "rank_solutions", "select_dictator", "select_outcome",
]
