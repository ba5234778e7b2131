"""Exception hierarchy.

Every error raised by the library derives from :class:`SwarmRankError` so the
CLI can map it onto a single exit status.
"""

from __future__ import annotations


class SwarmRankError(Exception):
    """Base class for all library errors."""


# graph-core


class GraphError(SwarmRankError):
    pass


class MissingOwner(GraphError):
    pass


class MissingParent(GraphError):
    pass


class WrongReferentSort(GraphError):
    pass


class SchemaViolation(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class NegativeWeight(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class DuplicateNode(GraphError):
    pass


class EmptyDistribution(GraphError):
    pass


class ZeroTotalWeight(GraphError):
    pass


class InvalidNetwork(GraphError):
    """Raised by strict loading when :meth:`validate` reports violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"network has {len(self.violations)} violation(s): {lines}{more}")


class ScenarioFormatError(SwarmRankError):
    """Malformed scenario file (bad JSON, wrong types, unknown fields)."""


# grammar


class GrammarError(SwarmRankError):
    """A grammar problem, optionally located at ``line``/``column`` (1-based)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class UnknownGrammar(GrammarError):
    pass


class GrammarSyntaxError(GrammarError):
    pass


class UnknownLabel(GrammarError):
    pass


class UnknownGuard(GrammarError):
    pass


class DanglingState(GrammarError):
    pass


class SortMismatch(GrammarError):
    pass


# swarm-engine


class EngineError(SwarmRankError):
    pass


class NoOutputEnergy(EngineError):
    pass


class ZeroVector(EngineError):
    pass


class ConfigError(EngineError):
    pass


# aggregation


class AggregationError(SwarmRankError):
    pass


class UnknownProblem(AggregationError):
    pass


class NoCategorizations(AggregationError):
    pass


class NoHumans(AggregationError):
    pass


class MissingPayload(AggregationError):
    pass
