"""Exhaustive path-enumeration oracle.

Walks every grammar-admissible path from every input node with exact
rational arithmetic and sums probability x decayed energy per node. It reads
the raw edge list and the grammar's rule tables directly and shares no code
with the engine's transition table, ``out_edges`` or ``admissible_edges``.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from swarmrank.network import Sort


class Oracle:
    def __init__(self, network, grammar, *, problem=None, uses=None, named_sets=None,
                 decay=Fraction(0), epsilon=Fraction(1, 10**6), max_depth=400):
        self.network = network
        self.grammar = grammar
        self.problem = problem
        self.decay = Fraction(decay)
        self.epsilon = Fraction(epsilon)
        self.max_depth = max_depth
        self.uses = uses
        self.sorts = {n.id: n.sort for n in network.nodes.values()}
        self.solutions = {n.id for n in network.nodes.values()
                          if n.sort is Sort.SOLUTION and n.parent == problem}
        self.edges = defaultdict(list)
        for e in network.edges:
            self.edges[(e.source, e.label)].append((e.target, Fraction(e.weight)))
        self.voters = {e.source for e in network.edges
                       if e.label == "votedOn" and e.target in self.solutions and e.weight > 0}
        sets = {"problem": {problem}, "solutions": self.solutions, "dictators": set()}
        sets.update({k: set(v) for k, v in (named_sets or {}).items()})
        self.sets = sets
        self.states = {s.id: s for s in grammar.states}
        self.terminal = set(grammar.terminal)

    def _candidates(self, node, label):
        if label == "uses" and self.uses is not None:
            return [(d, Fraction(w)) for (h, d), w in self.uses.items() if h == node]
        return self.edges.get((node, label), [])

    def _passes(self, guard, node, target):
        if guard.kind is None:
            return True
        if guard.kind == "target_voted":
            return target in self.voters
        if guard.kind == "current_in":
            return node in self.sets.get(guard.set_name, set())
        if guard.kind == "target_in":
            return target in self.sets.get(guard.set_name, set())
        raise AssertionError(guard.kind)

    def _admissible(self, state, node):
        for rule in self.states[state].rules:
            found = []
            for target, w in self._candidates(node, rule.label):
                if w <= 0:
                    continue
                if self.problem is not None and self.sorts[target] is Sort.SOLUTION \
                        and target not in self.solutions:
                    continue
                if self._passes(rule.guard, node, target):
                    found.append((target, w))
            if found:
                return rule.next_state, found
        return None

    def energies(self, inputs) -> dict:
        energy = defaultdict(Fraction)
        keep = 1 - self.decay

        def visit(node, state, prob, depth):
            energy[node] += prob * keep ** depth
            if self.sorts[node] in self.terminal:
                return
            found = self._admissible(state, node)
            if found is None:
                return
            if keep ** (depth + 1) < self.epsilon:
                return
            if depth + 1 > self.max_depth:
                raise RecursionError("oracle path too long; pick a graph without free cycles")
            next_state, edges = found
            total = sum(w for _, w in edges)
            for target, w in edges:
                visit(target, next_state, prob * w / total, depth + 1)

        for origin in sorted(set(inputs)):
            visit(origin, self.grammar.start, Fraction(1), 0)
        return dict(energy)

    def ranking(self, inputs, outputs) -> dict:
        energy = self.energies(inputs)
        total = sum(energy.get(o, Fraction(0)) for o in outputs)
        if total == 0:
            return {}
        return {o: energy.get(o, Fraction(0)) / total for o in outputs}
