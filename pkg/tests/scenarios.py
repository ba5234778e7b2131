"""Scenario builders shared by the test modules."""

from __future__ import annotations

import random
from fractions import Fraction

from swarmrank import MultiRelationalNetwork, SchemaMode

NAMES = "ABC"


def split_vote() -> MultiRelationalNetwork:
    """One human splitting a vote 0.6 / 0.4 across two solutions."""
    net = MultiRelationalNetwork()
    net.add_node("human", node_id="h1")
    net.add_node("problem", node_id="p0")
    net.add_node("solution", parent="p0", node_id="s1")
    net.add_node("solution", parent="p0", node_id="s2")
    net.add_edge("h1", "votedOn", "s1", 0.6)
    net.add_edge("h1", "votedOn", "s2", 0.4)
    return net


def quarter(rng: random.Random) -> float:
    # k/4 is exact in binary floating point, so Fraction(w) is the intended rational.
    return rng.randint(1, 4) / 4


def small_scenario(rng: random.Random, *, single: bool = False,
                   full_participation: bool = False, max_nodes: int = 12):
    """Random scenario with at most ``max_nodes`` nodes, problem ``p0``.

    Returns ``(network, uses)`` where ``uses`` is a random run-time uses map
    over every (human, owned domain) pair (``None`` in single-domain mode).
    """
    net = MultiRelationalNetwork(SchemaMode.SINGLE_DOMAIN if single else SchemaMode.MULTIPLE_DOMAINS)
    n_humans = rng.randint(2, 4)
    n_solutions = rng.randint(2, 3)
    humans = [net.add_node("human") for _ in range(n_humans)]
    net.add_node("problem", node_id="p0")
    solutions = [net.add_node("solution", parent="p0") for _ in range(n_solutions)]
    budget = max_nodes - len(net)
    other = None
    if budget >= 2 and rng.random() < 0.4:
        net.add_node("problem", node_id="p1")
        other = net.add_node("solution", parent="p1")
        budget -= 2
    domains = []
    if not single:
        for h in humans:
            for _ in range(rng.randint(0, 2)):
                if budget <= 0:
                    break
                domains.append(net.add_node("domain", owner=h, name=rng.choice(NAMES)))
                budget -= 1
    assert len(net) <= max_nodes

    for h in humans:
        if full_participation or rng.random() < 0.45:
            for s in rng.sample(solutions, rng.randint(1, n_solutions)):
                net.add_edge(h, "votedOn", s, quarter(rng))
        if other is not None and rng.random() < 0.5:
            net.add_edge(h, "votedOn", other, quarter(rng))
    if single:
        for h in humans:
            for t in rng.sample(humans, rng.randint(0, 2)):
                if t != h:
                    net.add_edge(h, "trusts", t, quarter(rng))
    for d in domains:
        for t in rng.sample(humans, rng.randint(0, 2)):
            net.add_edge(d, "trusts", t, quarter(rng))
        if len(domains) > 1 and rng.random() < 0.5:
            t = rng.choice([x for x in domains if x != d])
            net.add_edge(d, "similarTo", t, quarter(rng))
        if rng.random() < 0.5:
            net.add_edge(d, "categorizedAs", "p0", quarter(rng))
    uses = None
    if not single:
        uses = {(net.node(d).owner, d): quarter(rng) for d in domains}
    return net, uses


def population(rng: random.Random, n_humans: int = 10, n_solutions: int = 3,
               vote_prob: float = 0.4) -> MultiRelationalNetwork:
    """A larger multiple-domains scenario with problem ``p0``."""
    net = MultiRelationalNetwork()
    humans = [net.add_node("human") for _ in range(n_humans)]
    net.add_node("problem", node_id="p0")
    solutions = [net.add_node("solution", parent="p0") for _ in range(n_solutions)]
    domains = []
    for h in humans:
        for name in rng.sample(NAMES, rng.randint(1, 2)):
            domains.append(net.add_node("domain", owner=h, name=name))
    voted = False
    for h in humans:
        if rng.random() < vote_prob:
            voted = True
            for s in rng.sample(solutions, rng.randint(1, n_solutions)):
                net.add_edge(h, "votedOn", s, quarter(rng))
    if not voted:
        net.add_edge(humans[0], "votedOn", solutions[0], 1.0)
    for d in domains:
        for t in rng.sample(humans, rng.randint(1, min(3, n_humans))):
            net.add_edge(d, "trusts", t, quarter(rng))
        if rng.random() < 0.5:
            t = rng.choice([x for x in domains if x != d])
            net.add_edge(d, "similarTo", t, quarter(rng))
        if rng.random() < 0.4:
            net.add_edge(d, "categorizedAs", "p0", quarter(rng))
    return net


def normalized_votes(net: MultiRelationalNetwork, human: str, problem: str = "p0") -> dict:
    """A human's votedOn weights on ``problem``'s solutions, rescaled to sum to one."""
    sols = set(net.solutions_of(problem))
    raw = {e.target: Fraction(e.weight) for e in net.edges
           if e.source == human and e.label == "votedOn" and e.target in sols and e.weight > 0}
    total = sum(raw.values())
    return {s: raw.get(s, Fraction(0)) / total for s in sorted(sols)}


def random_grammar(rng: random.Random, name: str = "g"):
    """A random grammar that is valid under the multiple-domains schema."""
    from swarmrank import Schema
    from swarmrank.grammar import GrammarState, Guard, Rule, TraversalGrammar
    from swarmrank.network import Sort

    schema = Schema()
    sorts = list(Sort)
    terminal = frozenset(rng.sample(sorts, rng.randint(0, 2)))
    n_states = rng.randint(1, 4)
    state_sorts = [rng.choice(sorts) for _ in range(n_states)]
    ids = [f"S{i}" for i in range(n_states)]
    targets = [(sid, s) for sid, s in zip(ids, state_sorts)] + [(s.title, s) for s in terminal]
    guards = [Guard(), Guard(), Guard("target_voted"), Guard("current_in", "dictators"),
              Guard("target_in", "problem"), Guard("target_in", "solutions")]
    states = []
    for sid, sort in zip(ids, state_sorts):
        options = [(label, tid) for label in sorted(schema.labels)
                   for tid, tsort in targets if (sort, tsort) in schema.endpoints(label)]
        rules = tuple(Rule(label, tid, rng.choice(guards))
                      for label, tid in rng.sample(options, min(len(options), rng.randint(0, 3))))
        states.append(GrammarState(sid, sort, rules))
    return TraversalGrammar(tuple(states), ids[0], terminal, name=name)
