"""Command-line interface.

Exit status: 0 success, 1 validation or domain error, 2 usage error,
3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import __version__
from .aggregation import (
    ALGORITHMS,
    compute_uses_weights,
    rank_domains,
    rank_solutions,
    select_outcome,
)
from .engine import (
    DEFAULT_DECAY,
    DEFAULT_EPSILON,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_MAX_STEPS,
    DEFAULT_TOLERANCE,
    Deterministic,
    MonteCarlo,
    SwarmConfig,
    write_trace_csv,
)
from .errors import (
    ConfigError,
    GrammarError,
    InvalidNetwork,
    ScenarioFormatError,
    SwarmRankError,
)
from .grammar import load_grammar, parse_grammar, serialize_grammar
from .scenario import load_network

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

_DEFAULTS_NOTE = (
    "Decay, epsilon and convergence tolerance defaults are implementation "
    "choices; the underlying model does not fix their values. "
    "Set SWARMRANK_THREADS to cap Monte Carlo worker threads."
)


class _UsageError(Exception):
    pass


def _round12(x: float) -> float:
    return float(f"{x:.12g}")


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("swarm engine")
    g.add_argument("--mode", choices=("det", "mc"), default="det",
                   help="deterministic expectation or Monte Carlo sampling")
    g.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    g.add_argument("--particles", type=int, default=1000, help="Monte Carlo particles per source")
    g.add_argument("--delta", type=float, default=None,
                   help=f"energy decay per step (default: 0 for dd/dictator, {DEFAULT_DECAY} otherwise)")
    g.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                   help="particles with less energy than this die")
    g.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help="stop once 1 - cosine between successive rankings is at most this")
    g.add_argument("--max-epochs", type=int, default=DEFAULT_MAX_EPOCHS)
    g.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS,
                   help="cap on moves per walk")
    g.add_argument("--prune", type=float, default=0.0,
                   help="deterministic mode: drop fragments carrying less energy than this")
    g.add_argument("--workers", type=int, default=None,
                   help="Monte Carlo worker threads (default: $SWARMRANK_THREADS or 1)")


def _config(args) -> SwarmConfig:
    try:
        mode = (MonteCarlo(args.seed, args.particles) if args.mode == "mc"
                else Deterministic(args.prune))
        return SwarmConfig(decay=args.delta, epsilon=args.epsilon, max_epochs=args.max_epochs,
                           tolerance=args.tolerance, mode=mode, max_steps=args.max_steps,
                           workers=args.workers)
    except ConfigError as exc:
        raise _UsageError(str(exc)) from None


def _ranking_rows(ranking) -> list[dict]:
    return [{"solution": n, "weight": _round12(w)} for n, w in ranking.entries]


def _solution_ranking(args, network):
    grammar = None
    if args.alg == "custom":
        if not args.grammar:
            raise _UsageError("--alg custom requires --grammar")
        grammar = load_grammar(args.grammar, network.schema)
    elif args.grammar:
        raise _UsageError("--grammar is only valid with --alg custom")
    return rank_solutions(network, args.problem, args.alg, _config(args),
                          dictator=args.dictator, dictator_metric=args.dictator_metric,
                          categorization=args.method, grammar=grammar)


def _print_table(rows: list[tuple[str, str]], header: tuple[str, str]) -> None:
    width = max([len(header[0])] + [len(r[0]) for r in rows])
    print(f"{header[0]:<{width}}  {header[1]}")
    for a, b in rows:
        print(f"{a:<{width}}  {b}")


def cmd_validate(args) -> int:
    network = load_network(args.graph, strict=False)
    violations = network.validate()
    if violations:
        for v in violations:
            print(v)
        return EXIT_DOMAIN
    print(f"OK, {len(network.nodes)} nodes, {len(network.edges)} edges")
    return EXIT_OK


def cmd_rank(args) -> int:
    network = load_network(args.graph)
    sr = _solution_ranking(args, network)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(sr.result, fh)
    if args.pretty:
        _print_table([(n, f"{w:.6f}") for n, w in sr.ranking.entries], ("solution", "weight"))
        return EXIT_OK
    _emit({
        "problem": args.problem,
        "algorithm": args.alg,
        "ranking": _ranking_rows(sr.ranking),
        "ties": [list(t) for t in sr.ranking.ties],
        "epochs": sr.result.epochs,
        "converged": sr.result.converged,
    }, args.out)
    return EXIT_OK


def cmd_categorize(args) -> int:
    network = load_network(args.graph)
    config = _config(args)
    dr = rank_domains(network, args.problem, args.method, config)
    uses = compute_uses_weights(network, args.problem, args.method, config, domain_ranking=dr)
    if args.pretty:
        _print_table([(n, f"{w:.6f}") for n, w in sorted(dr.names.items(), key=lambda kv: (-kv[1], kv[0]))],
                     ("domain name", "weight"))
        print()
        _print_table([(f"{h} {d}", f"{w:.6f}") for (h, d), w in uses.items()], ("human domain", "uses"))
        return EXIT_OK
    _emit({
        "problem": args.problem,
        "method": args.method,
        "names": [{"name": n, "weight": _round12(w)}
                  for n, w in sorted(dr.names.items(), key=lambda kv: (-kv[1], kv[0]))],
        "domains": [{"domain": d, "name": network.node(d).name, "weight": _round12(w)}
                    for d, w in dr.ranking.entries],
        "uses": [{"human": h, "domain": d, "weight": _round12(w)} for (h, d), w in uses.items()],
        "epochs": dr.result.epochs,
        "converged": dr.result.converged,
    }, args.out)
    return EXIT_OK


def cmd_decide(args) -> int:
    network = load_network(args.graph)
    sr = _solution_ranking(args, network)
    rule = "plurality" if args.selection == "plurality" else "average"
    outcome = select_outcome(sr.ranking, rule, network)
    value = outcome.value if rule == "plurality" else _round12(outcome.value)
    if args.pretty:
        print(f"outcome: {value}" + (" (tie)" if outcome.tie else ""))
        return EXIT_OK
    _emit({
        "problem": args.problem,
        "algorithm": args.alg,
        "selection": args.selection,
        "outcome": value,
        "tie": outcome.tie,
        "ranking": _ranking_rows(sr.ranking),
    }, args.out)
    return EXIT_OK


def cmd_grammar_check(args) -> int:
    with open(args.path, encoding="utf-8") as fh:
        text = fh.read()
    schema = load_network(args.graph).schema if args.graph else None
    try:
        grammar = parse_grammar(text, schema)
    except GrammarError as exc:
        where = f"{exc.line}:{exc.column}: " if exc.line is not None else ""
        print(f"{args.path}:{where}{type(exc).__name__}: {exc.message}", file=sys.stderr)
        return EXIT_DOMAIN
    sys.stdout.write(serialize_grammar(grammar))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmrank",
        description="Collective rankings over social-decision graphs with particle swarms.",
        epilog=_DEFAULTS_NOTE)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    for name, func, helptext in (("rank", cmd_rank, "rank a problem's solutions"),
                                 ("decide", cmd_decide, "rank solutions and select an outcome")):
        p = sub.add_parser(name, help=helptext, epilog=_DEFAULTS_NOTE)
        p.add_argument("graph")
        p.add_argument("--problem", required=True)
        p.add_argument("--alg", choices=ALGORITHMS, default="dd")
        p.add_argument("--grammar", help="grammar file or built-in name for --alg custom")
        p.add_argument("--dictator", help="dictator human id (default: chosen by --dictator-metric)")
        p.add_argument("--dictator-metric", choices=("indegree", "eigenvector"), default="indegree")
        p.add_argument("--method", choices=("direct", "recursive"), default="recursive",
                       help="problem categorization used for rd/ddd uses weights")
        if name == "decide":
            p.add_argument("--selection", choices=("plurality", "average"), default="plurality")
        else:
            p.add_argument("--trace", help="write the convergence trace CSV here")
        p.add_argument("--out", help="write JSON here instead of stdout")
        p.add_argument("--pretty", action="store_true", help="human-readable table")
        _add_engine_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("categorize", help="rank domains for a problem and derive uses weights",
                       epilog=_DEFAULTS_NOTE)
    p.add_argument("graph")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", choices=("direct", "recursive"), default="recursive")
    p.add_argument("--out")
    p.add_argument("--pretty", action="store_true")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_categorize)

    p = sub.add_parser("grammar-check", help="parse a grammar file and print its canonical form")
    p.add_argument("path")
    p.add_argument("--graph", help="check labels against this scenario's schema")
    p.set_defaults(func=cmd_grammar_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"swarmrank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ScenarioFormatError) as exc:
        print(f"swarmrank: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GrammarError as exc:
        print(f"swarmrank: error: grammar: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidNetwork as exc:
        print(f"swarmrank: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConfigError as exc:
        print(f"swarmrank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SwarmRankError as exc:
        print(f"swarmrank: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
