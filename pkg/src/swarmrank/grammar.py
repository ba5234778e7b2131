"""Traversal grammars: finite state machines that steer particles by edge label.

A grammar is a set of states, each bound to one node sort and holding an
ordered list of rules. At a node, the first rule whose guarded edge set is
non-empty decides where the particle may go next; if every rule comes up
empty the particle dies. Particles that reach a node of a terminal sort
deposit their energy there and die.

Grammars have a small text form::

    grammar rd {
      start Human;
      terminal Solution;
      state Human : Human {
        try votedOn -> Solution;
        try uses -> Domain;
        else die;
      }
      state Domain : Domain {
        try trusts where target_voted -> Human;
        try similarTo -> Domain;
        else die;
      }
    }

A rule's target is either a declared state or one of the terminal sorts.
Guards are ``target_voted``, ``current_in(<set>)`` and ``target_in(<set>)``,
where ``<set>`` names a node set supplied by the problem context
(``problem``, ``solutions`` and ``dictators`` always exist).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .context import ProblemContext
from .errors import (
    DanglingState,
    GrammarSyntaxError,
    SortMismatch,
    UnknownGrammar,
    UnknownGuard,
    UnknownLabel,
)
from .network import (
    CATEGORIZED_AS,
    SIMILAR_TO,
    TRUSTS,
    USES,
    VOTED_ON,
    Edge,
    MultiRelationalNetwork,
    NodeId,
    Schema,
    SchemaMode,
    Sort,
)

GUARD_KINDS = ("target_voted", "current_in", "target_in")
_GUARDS_WITH_SET = {"current_in", "target_in"}


@dataclass(frozen=True)
class Guard:
    """Edge filter applied on top of a rule's label.

    ``kind`` is ``None`` for an unguarded rule.
    """

    kind: str | None = None
    set_name: str | None = None

    def __post_init__(self):
        if self.kind is not None and self.kind not in GUARD_KINDS:
            raise UnknownGuard(f"unknown guard {self.kind!r}")
        needs_set = self.kind in _GUARDS_WITH_SET
        if needs_set != (self.set_name is not None):
            raise UnknownGuard(f"guard {self.kind!r} "
                               + ("needs a set name" if needs_set else "takes no argument"))

    def bind(self, node: NodeId, context: ProblemContext):
        """Return an edge predicate for a particle sitting at ``node``, or ``None``."""
        if self.kind is None:
            return None
        if self.kind == "target_voted":
            voters = context.voters
            return lambda edge: edge.target in voters
        members = context.named_set(self.set_name)
        if self.kind == "current_in":
            inside = node in members
            return lambda edge: inside
        return lambda edge: edge.target in members

    def __str__(self) -> str:
        if self.kind is None:
            return ""
        return self.kind if self.set_name is None else f"{self.kind}({self.set_name})"


NO_GUARD = Guard()


@dataclass(frozen=True)
class Rule:
    label: str
    next_state: str
    guard: Guard = NO_GUARD


@dataclass(frozen=True)
class GrammarState:
    id: str
    sort: Sort
    rules: tuple[Rule, ...] = ()


@dataclass(frozen=True)
class TraversalGrammar:
    """An immutable traversal grammar.

    Equality is structural: the ``name`` is ignored.
    """

    states: tuple[GrammarState, ...]
    start: str
    terminal: frozenset[Sort] = frozenset()
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "terminal", frozenset(self.terminal))
        seen: set[str] = set()
        terminal_titles = {s.title for s in self.terminal}
        for state in self.states:
            if state.id in seen:
                raise GrammarSyntaxError(f"state {state.id!r} declared twice")
            if state.id in terminal_titles:
                raise GrammarSyntaxError(f"state {state.id!r} shadows terminal sort {state.id}")
            seen.add(state.id)
        if self.start not in seen:
            raise DanglingState(f"start state {self.start!r} is not declared")
        for state in self.states:
            for rule in state.rules:
                if rule.next_state not in seen and rule.next_state not in terminal_titles:
                    raise DanglingState(f"state {state.id!r} moves to undeclared "
                                        f"state {rule.next_state!r}")

    def state(self, state_id: str) -> GrammarState:
        for state in self.states:
            if state.id == state_id:
                return state
        raise DanglingState(f"no state {state_id!r}")

    @property
    def start_sort(self) -> Sort:
        return self.state(self.start).sort

    def is_terminal(self, next_state: str) -> bool:
        return any(s.title == next_state for s in self.terminal)

    def labels(self) -> frozenset[str]:
        return frozenset(r.label for s in self.states for r in s.rules)

    def map_rules(self, fn) -> "TraversalGrammar":
        """Copy of this grammar with ``fn`` applied to every rule."""
        states = tuple(replace(s, rules=tuple(fn(r) for r in s.rules)) for s in self.states)
        return replace(self, states=states)


class Choice(NamedTuple):
    """The rule that fired at a node and the edges it admits."""

    rule_index: int
    rule: Rule
    edges: list[Edge]


def admissible_edges(grammar: TraversalGrammar, state_id: str, node: NodeId,
                     network: MultiRelationalNetwork,
                     context: ProblemContext | None = None) -> Choice | None:
    """Apply a state's rules in priority order.

    Returns the first rule with a non-empty admissible edge set, or ``None``
    when all rules come up empty (the particle dies).
    """
    state = grammar.state(state_id)
    actual = network.node(node).sort
    if actual is not state.sort:
        raise SortMismatch(f"state {state_id!r} applies to {state.sort.title} nodes, "
                           f"but {node!r} is a {actual.title}")
    if context is None:
        context = ProblemContext()
    for index, rule in enumerate(state.rules):
        edges = network.out_edges(node, rule.label, rule.guard.bind(node, context), context)
        if edges:
            return Choice(index, rule, edges)
    return None


# -- built-in grammars ----------------------------------------------------------

def _g(name, start, terminal, *states):
    return TraversalGrammar(tuple(GrammarState(sid, sort, tuple(rules)) for sid, sort, rules in states),
                            start, frozenset(terminal), name=name)


_VOTED = Guard("target_voted")


def _build(name: str) -> TraversalGrammar:
    H, D, P, S = Sort.HUMAN, Sort.DOMAIN, Sort.PROBLEM, Sort.SOLUTION
    vote = Rule(VOTED_ON, "Solution")
    if name == "dd":
        return _g(name, "Human", {S}, ("Human", H, [vote]))
    if name in ("rd", "ddd"):
        trust_guard = _VOTED if name == "rd" else NO_GUARD
        return _g(name, "Human", {S},
                  ("Human", H, [vote, Rule(USES, "Domain")]),
                  ("Domain", D, [Rule(TRUSTS, "Human", trust_guard), Rule(SIMILAR_TO, "Domain")]))
    if name in ("rd_single", "ddd_single"):
        trust_guard = _VOTED if name == "rd_single" else NO_GUARD
        return _g(name, "Human", {S}, ("Human", H, [vote, Rule(TRUSTS, "Human", trust_guard)]))
    if name == "dictator":
        return _g(name, "Human", {S},
                  ("Human", H, [Rule(VOTED_ON, "Solution", Guard("current_in", "dictators"))]))
    if name in ("domain_direct", "domain_recursive"):
        rules = [Rule(CATEGORIZED_AS, "Problem", Guard("target_in", "problem"))]
        if name == "domain_recursive":
            rules.append(Rule(SIMILAR_TO, "Domain"))
        return _g(name, "Domain", {P}, ("Domain", D, rules))
    raise UnknownGrammar(f"unknown built-in grammar {name!r}")


BUILTIN_NAMES = ("dd", "rd", "ddd", "dictator", "domain_direct", "domain_recursive",
                 "rd_single", "ddd_single")
_BUILTINS = {name: _build(name) for name in BUILTIN_NAMES}


def builtin(name: str) -> TraversalGrammar:
    try:
        return _BUILTINS[name]
    except KeyError:
        raise UnknownGrammar(f"unknown built-in grammar {name!r}; "
                             f"choose from {', '.join(BUILTIN_NAMES)}") from None


# -- text form ------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<space>[ \t\r\f]+)
  | (?P<newline>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<punct>[{};:,()])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

_KEYWORDS = {"grammar", "start", "terminal", "state", "try", "where", "else", "die"}


class _Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "newline":
            line, line_start = line + 1, m.end()
        elif kind not in ("space", "comment"):
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: _Token | None = None) -> GrammarSyntaxError:
        tok = tok or self.peek()
        return GrammarSyntaxError(message, tok.line, tok.column)

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        return self.advance()

    def ident(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _KEYWORDS:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {what}, found {found}")
        return self.advance()

    def sort(self) -> tuple[Sort, _Token]:
        tok = self.ident("a node sort")
        for sort in Sort:
            if sort.title == tok.text:
                return sort, tok
        raise self.error(f"unknown sort {tok.text!r}; expected one of "
                         + ", ".join(s.title for s in Sort), tok)

    def parse(self):
        self.expect("grammar")
        name = self.ident("a grammar name").text
        self.expect("{")
        start = None
        terminal: list[Sort] = []
        terminal_tok = None
        states = []
        while self.peek().text != "}":
            tok = self.peek()
            if tok.text == "start":
                if start is not None:
                    raise self.error("duplicate start declaration")
                self.advance()
                start = self.ident("a state name")
                self.expect(";")
            elif tok.text == "terminal":
                if terminal_tok is not None:
                    raise self.error("duplicate terminal declaration")
                terminal_tok = self.advance()
                terminal.append(self.sort()[0])
                while self.peek().text == ",":
                    self.advance()
                    terminal.append(self.sort()[0])
                self.expect(";")
            elif tok.text == "state":
                states.append(self.state())
            else:
                found = "end of input" if tok.kind == "eof" else repr(tok.text)
                raise self.error(f"expected 'start', 'terminal', 'state' or '}}', found {found}")
        self.expect("}")
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r} after grammar")
        if start is None:
            raise self.error("grammar has no start declaration")
        return name, start, terminal, states

    def state(self):
        self.expect("state")
        sid = self.ident("a state name")
        self.expect(":")
        sort, sort_tok = self.sort()
        self.expect("{")
        rules = []
        while self.peek().text == "try":
            rules.append(self.rule())
        if self.peek().text == "else":
            self.advance()
            self.expect("die")
            self.expect(";")
        self.expect("}")
        return sid, sort, sort_tok, rules

    def rule(self):
        self.expect("try")
        label = self.ident("an edge label")
        guard = None
        if self.peek().text == "where":
            self.advance()
            kind = self.ident("a guard")
            arg = None
            if self.peek().text == "(":
                self.advance()
                arg = self.ident("a node set name")
                self.expect(")")
            guard = (kind, arg)
        self.expect("->")
        target = self.ident("a state name")
        self.expect(";")
        return label, guard, target


def _endpoint_pairs(label: str, schema: Schema | None) -> frozenset[tuple[Sort, Sort]]:
    if schema is not None:
        return schema.endpoints(label)
    return Schema(SchemaMode.MULTIPLE_DOMAINS).endpoints(label) | \
        Schema(SchemaMode.SINGLE_DOMAIN).endpoints(label)


def parse_grammar(text: str, schema: Schema | None = None) -> TraversalGrammar:
    """Parse grammar text, checking labels and sorts against ``schema``.

    Without a schema, the labels of both stock schemas are accepted. Every
    error carries the 1-based line and column it was found at.
    """
    name, start_tok, terminal, raw_states = _Parser(text).parse()
    terminal_titles = {s.title: s for s in terminal}
    declared: dict[str, Sort] = {}
    for sid, sort, _, _ in raw_states:
        if sid.text in declared:
            raise GrammarSyntaxError(f"state {sid.text!r} declared twice", sid.line, sid.column)
        if sid.text in terminal_titles:
            raise GrammarSyntaxError(f"state {sid.text!r} shadows terminal sort {sid.text}",
                                     sid.line, sid.column)
        declared[sid.text] = sort
    if start_tok.text not in declared:
        raise DanglingState(f"start state {start_tok.text!r} is not declared",
                            start_tok.line, start_tok.column)

    states = []
    for sid, sort, _, raw_rules in raw_states:
        rules = []
        for label_tok, raw_guard, target_tok in raw_rules:
            pairs = _endpoint_pairs(label_tok.text, schema)
            if not pairs:
                raise UnknownLabel(f"unknown edge label {label_tok.text!r}",
                                   label_tok.line, label_tok.column)
            guard = NO_GUARD
            if raw_guard is not None:
                kind_tok, arg_tok = raw_guard
                if kind_tok.text not in GUARD_KINDS:
                    raise UnknownGuard(f"unknown guard {kind_tok.text!r}; expected one of "
                                       + ", ".join(GUARD_KINDS), kind_tok.line, kind_tok.column)
                if (kind_tok.text in _GUARDS_WITH_SET) != (arg_tok is not None):
                    need = "needs a set name" if arg_tok is None else "takes no argument"
                    raise UnknownGuard(f"guard {kind_tok.text!r} {need}",
                                       kind_tok.line, kind_tok.column)
                guard = Guard(kind_tok.text, arg_tok.text if arg_tok else None)
            target = target_tok.text
            if target in declared:
                target_sort = declared[target]
            elif target in terminal_titles:
                target_sort = terminal_titles[target]
            else:
                raise DanglingState(f"state {target!r} is not declared",
                                    target_tok.line, target_tok.column)
            if (sort, target_sort) not in pairs:
                raise SortMismatch(f"{label_tok.text} does not join {sort.title} to "
                                   f"{target_sort.title}", label_tok.line, label_tok.column)
            rules.append(Rule(label_tok.text, target, guard))
        states.append(GrammarState(sid.text, sort, tuple(rules)))
    return TraversalGrammar(tuple(states), start_tok.text, frozenset(terminal), name=name)


def serialize_grammar(grammar: TraversalGrammar) -> str:
    """Canonical text form; :func:`parse_grammar` reads it back unchanged."""
    lines = [f"grammar {grammar.name} {{", f"  start {grammar.start};"]
    if grammar.terminal:
        ordered = [s.title for s in Sort if s in grammar.terminal]
        lines.append(f"  terminal {', '.join(ordered)};")
    for state in grammar.states:
        lines.append(f"  state {state.id} : {state.sort.title} {{")
        for rule in state.rules:
            where = f" where {rule.guard}" if rule.guard.kind else ""
            lines.append(f"    try {rule.label}{where} -> {rule.next_state};")
        lines.append("    else die;")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_grammar(source: str, schema: Schema | None = None) -> TraversalGrammar:
    """Resolve a built-in name or read a grammar file."""
    if source in _BUILTINS:
        return _BUILTINS[source]
    with open(source, encoding="utf-8") as fh:
        return parse_grammar(fh.read(), schema)


def reachable_states(grammar: TraversalGrammar) -> list[str]:
    """State ids reachable from the start state, in declaration order."""
    seen = {grammar.start}
    frontier = [grammar.start]
    while frontier:
        for rule in grammar.state(frontier.pop()).rules:
            if not grammar.is_terminal(rule.next_state) and rule.next_state not in seen:
                seen.add(rule.next_state)
                frontier.append(rule.next_state)
    return [s.id for s in grammar.states if s.id in seen]


__all__ = [
    "BUILTIN_NAMES", "Choice", "Guard", "GrammarState", "NO_GUARD", "Rule", "TraversalGrammar",
    "admissible_edges", "builtin", "load_grammar", "parse_grammar", "reachable_states",
    "serialize_grammar",
]
