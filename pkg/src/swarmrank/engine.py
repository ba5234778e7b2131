"""Grammar-constrained particle swarm.

Each epoch places particles with energy 1.0 on every input node and lets them
walk until they die. At every node a particle visits it first deposits its
current energy, then its energy decays by ``(1 - decay)``; it then dies if the
node is of a terminal sort, if the grammar admits no edge, or if its energy
has fallen below ``epsilon``. Otherwise it moves along one admissible edge
chosen with probability proportional to the edge weights.

Energy accumulates over epochs and the output nodes' share of it is the
ranking. Runs stop once the ranking stops moving (cosine similarity between
successive epochs within ``tolerance`` of 1) or after ``max_epochs``.

Two execution modes share that contract:

* :class:`Deterministic` splits a particle across every admissible edge in
  proportion to the transition probabilities, which yields the expected
  deposits exactly. It is the default and serves as the oracle for
  :class:`MonteCarlo`.
* :class:`MonteCarlo` samples walks. Random streams are keyed on
  ``(seed, origin, epoch, block)`` with a fixed block size, so results do not
  depend on how many worker threads run the blocks.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence, TextIO

import numpy as np

from .context import ProblemContext
from .errors import ConfigError, NoOutputEnergy, SortMismatch, ZeroVector, ZeroTotalWeight
from .grammar import TraversalGrammar, admissible_edges
from .network import MultiRelationalNetwork, NodeId, normalize_distribution

DEFAULT_EPSILON = 1e-6
DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_EPOCHS = 50
DEFAULT_MAX_STEPS = 10_000
DEFAULT_DECAY = 0.15
# Walks under these grammars are one hop long, so decay cannot matter.
NO_DECAY_GRAMMARS = frozenset({"dd", "dictator"})
BLOCK_SIZE = 16_384
THREADS_ENV = "SWARMRANK_THREADS"


@dataclass(frozen=True)
class MonteCarlo:
    seed: int = 0
    particles: int = 1000

    def __post_init__(self):
        if self.particles < 1:
            raise ConfigError("particles per source must be positive")


@dataclass(frozen=True)
class Deterministic:
    prune: float = 0.0

    def __post_init__(self):
        if not self.prune >= 0.0:
            raise ConfigError("prune threshold must be non-negative")


@dataclass(frozen=True)
class SwarmConfig:
    """Engine parameters.

    ``decay=None`` picks 0 for one-hop grammars (``dd``, ``dictator``) and
    0.15 otherwise. ``epsilon`` is the energy below which a particle dies.
    ``max_steps`` caps the moves of a single walk, which only matters for
    cyclic graphs with no decay. ``workers=None`` reads
    ``SWARMRANK_THREADS`` and falls back to one thread.
    """

    decay: float | None = None
    epsilon: float = DEFAULT_EPSILON
    max_epochs: int = DEFAULT_MAX_EPOCHS
    tolerance: float = DEFAULT_TOLERANCE
    mode: MonteCarlo | Deterministic = field(default_factory=Deterministic)
    max_steps: int = DEFAULT_MAX_STEPS
    workers: int | None = None

    def __post_init__(self):
        if self.decay is not None and not 0.0 <= self.decay <= 1.0:
            raise ConfigError(f"decay must lie in [0, 1], got {self.decay}")
        if not self.epsilon > 0.0:
            raise ConfigError("epsilon must be positive")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be at least 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not isinstance(self.mode, (MonteCarlo, Deterministic)):
            raise ConfigError(f"unknown mode {self.mode!r}")

    def decay_for(self, grammar: TraversalGrammar) -> float:
        if self.decay is not None:
            return self.decay
        return 0.0 if grammar.name in NO_DECAY_GRAMMARS else DEFAULT_DECAY

    def worker_count(self) -> int:
        if self.workers is not None:
            return self.workers
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n


# -- single particles -----------------------------------------------------------

@dataclass(frozen=True)
class Particle:
    current: NodeId
    energy: float
    state: str
    origin: NodeId
    steps: int = 0


class Moved(NamedTuple):
    particle: Particle


class Died(NamedTuple):
    particle: Particle
    reason: str  # "terminal", "no_edge" or "exhausted"


def deposit_and_decay(particle: Particle, energy: dict[NodeId, float],
                      decay: float) -> tuple[Particle, dict[NodeId, float]]:
    """Add the particle's energy to its node, then decay the particle."""
    energy[particle.current] = energy.get(particle.current, 0.0) + particle.energy
    return replace(particle, energy=particle.energy * (1.0 - decay)), energy


def step(particle: Particle, network: MultiRelationalNetwork, grammar: TraversalGrammar,
         context: ProblemContext | None, rng, energy: dict[NodeId, float], *,
         decay: float, epsilon: float = DEFAULT_EPSILON) -> Moved | Died:
    """Advance one particle by one step, sampling with ``rng.random()``."""
    particle, _ = deposit_and_decay(particle, energy, decay)
    sort = network.node(particle.current).sort
    if sort in grammar.terminal:
        return Died(particle, "terminal")
    choice = admissible_edges(grammar, particle.state, particle.current, network, context)
    if choice is None:
        return Died(particle, "no_edge")
    if particle.energy < epsilon:
        return Died(particle, "exhausted")
    dist = normalize_distribution(choice.edges)
    targets = list(dist)
    u = rng.random()
    acc = 0.0
    target = targets[-1]
    for t in targets:
        acc += dist[t]
        if u < acc:
            target = t
            break
    _check_target_sort(grammar, choice.rule.next_state, network, target)
    return Moved(replace(particle, current=target, state=choice.rule.next_state,
                         steps=particle.steps + 1))


def walk(origin: NodeId, network: MultiRelationalNetwork, grammar: TraversalGrammar,
         context: ProblemContext | None, rng, energy: dict[NodeId, float] | None = None, *,
         decay: float, epsilon: float = DEFAULT_EPSILON,
         max_steps: int = DEFAULT_MAX_STEPS) -> tuple[list[Particle], Died | None]:
    """Walk one particle from ``origin`` until it dies.

    Returns the particle as it arrived at each node and the final outcome
    (``None`` if the walk was cut off by ``max_steps``).
    """
    _check_origin(grammar, network, origin)
    if energy is None:
        energy = {}
    p = Particle(origin, 1.0, grammar.start, origin)
    history = [p]
    for _ in range(max_steps):
        outcome = step(p, network, grammar, context, rng, energy, decay=decay, epsilon=epsilon)
        if isinstance(outcome, Died):
            return history, outcome
        p = outcome.particle
        history.append(p)
    return history, None


def _check_origin(grammar: TraversalGrammar, network: MultiRelationalNetwork, origin: NodeId):
    sort = network.node(origin).sort
    if sort is not grammar.start_sort:
        raise SortMismatch(f"input {origin!r} is a {sort.title} but grammar {grammar.name!r} "
                           f"starts at {grammar.start_sort.title} nodes")


def _check_target_sort(grammar, next_state, network, target):
    sort = network.node(target).sort
    if grammar.is_terminal(next_state):
        expected = next_state
    else:
        expected = grammar.state(next_state).sort.title
    if sort.title != expected:
        raise SortMismatch(f"edge leads to {sort.title} {target!r} but state "
                           f"{next_state!r} expects {expected}")


# -- vectors ----------------------------------------------------------------------

def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    nu = math.sqrt(math.fsum(x * x for x in u))
    nv = math.sqrt(math.fsum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    c = math.fsum(x * y for x, y in zip(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, c))


def normalize_output(energy: Mapping[NodeId, float], outputs: Iterable[NodeId]) -> dict[NodeId, float]:
    """Restrict ``energy`` to ``outputs`` and scale it to sum to one."""
    outputs = list(dict.fromkeys(outputs))
    total = math.fsum(energy.get(n, 0.0) for n in outputs)
    if not total > 0.0:
        raise ZeroTotalWeight("no energy on the output set")
    return {n: energy.get(n, 0.0) / total for n in outputs}


# -- compiled transitions -----------------------------------------------------------

class _Table:
    """Reachable (state, node) pairs with their transition distributions.

    Built once per run from a snapshot of the network, so the hot loops never
    touch the graph or the grammar again.
    """

    def __init__(self, network: MultiRelationalNetwork, grammar: TraversalGrammar,
                 inputs: Sequence[NodeId], context: ProblemContext):
        self.node_ids = sorted(network.nodes)
        self.node_index = {n: i for i, n in enumerate(self.node_ids)}
        keys: dict[tuple[str, NodeId], int] = {}
        order: list[tuple[str, NodeId]] = []

        def key_for(state, node):
            k = keys.get((state, node))
            if k is None:
                k = keys[(state, node)] = len(order)
                order.append((state, node))
            return k

        for origin in inputs:
            _check_origin(grammar, network, origin)
        self.origin_keys = [key_for(grammar.start, o) for o in inputs]

        node_of, terminal, seg_start, seg_len = [], [], [], []
        targets: list[int] = []
        probs: list[float] = []
        i = 0
        while i < len(order):
            state, node = order[i]
            node_of.append(self.node_index[node])
            seg_start.append(len(targets))
            is_term = network.node(node).sort in grammar.terminal
            terminal.append(is_term)
            choice = None if is_term else admissible_edges(grammar, state, node, network, context)
            if choice is not None:
                next_state = choice.rule.next_state
                for target, p in normalize_distribution(choice.edges).items():
                    _check_target_sort(grammar, next_state, network, target)
                    targets.append(key_for(next_state, target))
                    probs.append(p)
            seg_len.append(len(targets) - seg_start[-1])
            i += 1

        self.size = len(order)
        self.node_of = np.asarray(node_of, dtype=np.int64)
        self.terminal = np.asarray(terminal, dtype=bool)
        self.seg_start = np.asarray(seg_start, dtype=np.int64)
        self.seg_len = np.asarray(seg_len, dtype=np.int64)
        self.next_key = np.asarray(targets, dtype=np.int64)
        self.prob = np.asarray(probs, dtype=np.float64)
        # Segment k's cumulative probabilities shifted into (k, k + 1] so one
        # searchsorted call samples every particle at once.
        shifted = np.empty(len(probs), dtype=np.float64)
        for k in range(self.size):
            a, n = seg_start[k], seg_len[k]
            if n:
                cum = np.cumsum(self.prob[a:a + n])
                cum[-1] = 1.0
                shifted[a:a + n] = k + cum
        self.shifted_cum = shifted
        self.can_move = (~self.terminal) & (self.seg_len > 0)


class _EpochOutcome(NamedTuple):
    deposits: np.ndarray
    steps: int
    alive: int


def _deterministic_epoch(table: _Table, decay: float, config: SwarmConfig,
                         prune: float) -> _EpochOutcome:
    parts: list[list[float]] = [[] for _ in table.node_ids]
    frontier: dict[int, float] = defaultdict(float)
    for k in table.origin_keys:
        frontier[k] += 1.0
    steps = alive = 0
    t = 0
    keep = 1.0 - decay
    while frontier:
        energy = keep ** t
        for k, mass in frontier.items():
            parts[table.node_of[k]].append(mass * energy)
        steps += len(frontier)
        next_energy = keep ** (t + 1)
        if next_energy < config.epsilon:
            break
        nxt: dict[int, float] = defaultdict(float)
        for k, mass in frontier.items():
            if not table.can_move[k]:
                continue
            a = table.seg_start[k]
            for j in range(a, a + table.seg_len[k]):
                nxt[int(table.next_key[j])] += mass * table.prob[j]
        if prune > 0.0:
            nxt = {k: m for k, m in nxt.items() if m * next_energy >= prune}
        t += 1
        if nxt and t >= config.max_steps:
            alive = len(nxt)
            break
        frontier = nxt
    deposits = np.array([math.fsum(p) for p in parts], dtype=np.float64)
    return _EpochOutcome(deposits, steps, alive)


def _origin_tag(origin: NodeId) -> int:
    return int.from_bytes(hashlib.blake2b(origin.encode("utf-8"), digest_size=8).digest(), "little")


def _mc_block(table: _Table, origin_key: int, count: int, seed_words: list[int],
              decay: float, config: SwarmConfig) -> _EpochOutcome:
    rng = np.random.default_rng(np.random.SeedSequence(seed_words))
    n_nodes = len(table.node_ids)
    deposits = np.zeros(n_nodes, dtype=np.float64)
    keys = np.full(count, origin_key, dtype=np.int64)
    keep = 1.0 - decay
    steps = alive = 0
    t = 0
    while keys.size:
        counts = np.bincount(table.node_of[keys], minlength=n_nodes)
        deposits += counts * (keep ** t)
        steps += int(keys.size)
        if keep ** (t + 1) < config.epsilon:
            break
        keys = keys[table.can_move[keys]]
        if not keys.size:
            break
        if t + 1 >= config.max_steps:
            alive = int(keys.size)
            break
        pos = np.searchsorted(table.shifted_cum, keys + rng.random(keys.size), side="right")
        keys = table.next_key[pos]
        t += 1
    return _EpochOutcome(deposits, steps, alive)


def _mc_epoch(table: _Table, inputs: Sequence[NodeId], epoch: int, decay: float,
              config: SwarmConfig, mode: MonteCarlo) -> _EpochOutcome:
    seed = mode.seed & 0xFFFF_FFFF_FFFF_FFFF
    jobs = []
    for origin, key in zip(inputs, table.origin_keys):
        tag = _origin_tag(origin)
        for block, start in enumerate(range(0, mode.particles, BLOCK_SIZE)):
            count = min(BLOCK_SIZE, mode.particles - start)
            jobs.append((key, count, [seed, tag, epoch, block]))

    def run_job(job):
        key, count, words = job
        return _mc_block(table, key, count, words, decay, config)

    workers = min(config.worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(job) for job in jobs]
    # fsum rounds exactly once, so the merge is independent of summation order.
    stacked = np.stack([r.deposits for r in results])
    deposits = np.array([math.fsum(col) for col in stacked.T], dtype=np.float64)
    return _EpochOutcome(deposits, sum(r.steps for r in results), sum(r.alive for r in results))


# -- runs -------------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochStats:
    epoch: int
    cosine: float | None
    steps: int
    alive: int


@dataclass
class RunResult:
    ranking: dict[NodeId, float]
    energy: dict[NodeId, float]
    epochs: int
    converged: bool
    trace: list[EpochStats]

    @property
    def convergence_trace(self) -> list[float]:
        return [s.cosine for s in self.trace if s.cosine is not None]

    @property
    def steps(self) -> int:
        return sum(s.steps for s in self.trace)


def _prepare(network, grammar, inputs, context, config):
    inputs = sorted(set(inputs))
    if not inputs:
        raise ConfigError("input set is empty")
    config = config or SwarmConfig()
    context = context or ProblemContext()
    return inputs, context, config, _Table(network, grammar, inputs, context)


def _epoch(table, inputs, epoch, decay, config) -> _EpochOutcome:
    mode = config.mode
    if isinstance(mode, MonteCarlo):
        return _mc_epoch(table, inputs, epoch, decay, config, mode)
    return _deterministic_epoch(table, decay, config, mode.prune)


def run_epoch(network: MultiRelationalNetwork, grammar: TraversalGrammar,
              inputs: Iterable[NodeId], *, context: ProblemContext | None = None,
              config: SwarmConfig | None = None, energy: dict[NodeId, float] | None = None,
              epoch: int = 0) -> tuple[dict[NodeId, float], int]:
    """Run one epoch and add its deposits to ``energy``. Returns the vector and step count."""
    inputs, context, config, table = _prepare(network, grammar, inputs, context, config)
    out = _epoch(table, inputs, epoch, config.decay_for(grammar), config)
    energy = {} if energy is None else energy
    for node, value in zip(table.node_ids, out.deposits):
        if value:
            energy[node] = energy.get(node, 0.0) + float(value)
    return energy, out.steps


def run(network: MultiRelationalNetwork, grammar: TraversalGrammar, inputs: Iterable[NodeId],
        outputs: Iterable[NodeId], *, context: ProblemContext | None = None,
        config: SwarmConfig | None = None) -> RunResult:
    """Run epochs until the output ranking converges or ``max_epochs`` is reached.

    Raises :class:`NoOutputEnergy` if no particle ever deposits on an output node.
    """
    outputs = list(dict.fromkeys(outputs))
    if not outputs:
        raise ConfigError("output set is empty")
    inputs, context, config, table = _prepare(network, grammar, inputs, context, config)
    for n in outputs:
        network.node(n)
    decay = config.decay_for(grammar)
    out_idx = np.array([table.node_index[n] for n in outputs], dtype=np.int64)

    energy = np.zeros(len(table.node_ids), dtype=np.float64)
    trace: list[EpochStats] = []
    previous = None
    converged = False
    cached = None
    for epoch in range(1, config.max_epochs + 1):
        if isinstance(config.mode, Deterministic):
            # Deterministic epochs are identical; compute once.
            cached = cached or _epoch(table, inputs, epoch, decay, config)
            out = cached
        else:
            out = _epoch(table, inputs, epoch, decay, config)
        energy += out.deposits
        total = math.fsum(energy[out_idx])
        current = energy[out_idx] / total if total > 0.0 else None
        cos = None
        if previous is not None and current is not None:
            cos = cosine_similarity(previous.tolist(), current.tolist())
        trace.append(EpochStats(epoch, cos, out.steps, out.alive))
        if cos is not None and 1.0 - cos <= config.tolerance:
            converged = True
            break
        previous = current

    raw = {n: float(v) for n, v in zip(table.node_ids, energy) if v}
    try:
        ranking = normalize_output(raw, outputs)
    except ZeroTotalWeight:
        raise NoOutputEnergy("no output energy: no particle reached the output set") from None
    return RunResult(ranking, raw, len(trace), converged, trace)


def write_trace_csv(result: RunResult, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["epoch", "cosine", "total_steps", "alive_particles_end"])
    for s in result.trace:
        writer.writerow([s.epoch, "" if s.cosine is None else repr(s.cosine), s.steps, s.alive])
