"""Collective rankings over typed social-decision graphs with grammar-constrained particle swarms."""

__version__ = "0.1.0"

from .aggregation import (
    DictatorChoice,
    DomainRanking,
    Outcome,
    Ranking,
    SolutionRanking,
    compute_uses_weights,
    rank_domains,
    rank_solutions,
    select_dictator,
    select_outcome,
)
from .context import ProblemContext
from .engine import (
    Deterministic,
    MonteCarlo,
    Particle,
    RunResult,
    SwarmConfig,
    cosine_similarity,
    deposit_and_decay,
    normalize_output,
    run,
    run_epoch,
    step,
    walk,
)
from .grammar import (
    Guard,
    GrammarState,
    Rule,
    TraversalGrammar,
    admissible_edges,
    builtin,
    parse_grammar,
    serialize_grammar,
)
from .network import (
    Edge,
    MultiRelationalNetwork,
    Node,
    Schema,
    SchemaMode,
    Sort,
    Violation,
    normalize_distribution,
)
from .scenario import dumps_network, load_network, network_from_dict, save_network
