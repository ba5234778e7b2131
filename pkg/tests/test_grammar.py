import random
from dataclasses import replace

import pytest

from swarmrank import MultiRelationalNetwork, ProblemContext, Schema, SchemaMode
from swarmrank.errors import (
    DanglingState,
    GrammarError,
    GrammarSyntaxError,
    SortMismatch,
    UnknownGrammar,
    UnknownGuard,
    UnknownLabel,
)
from swarmrank.grammar import (
    BUILTIN_NAMES,
    NO_GUARD,
    Guard,
    GrammarState,
    Rule,
    TraversalGrammar,
    admissible_edges,
    builtin,
    load_grammar,
    parse_grammar,
    reachable_states,
    serialize_grammar,
)
from swarmrank.network import Sort

from scenarios import split_vote, random_grammar

DD_TEXT = """\
# direct democracy
grammar dd {
  start Human;
  terminal Solution;
  state Human : Human {
    try votedOn -> Solution;
    else die;
  }
}
"""


class TestBuiltins:
    def test_dd(self):
        g = builtin("dd")
        assert g.start == "Human"
        assert g.terminal == {Sort.SOLUTION}
        assert [(r.label, r.next_state) for r in g.state("Human").rules] == [("votedOn", "Solution")]

    def test_rd(self):
        g = builtin("rd")
        assert [r.label for r in g.state("Human").rules] == ["votedOn", "uses"]
        domain = g.state("Domain").rules
        assert [(r.label, r.guard.kind) for r in domain] == [("trusts", "target_voted"),
                                                             ("similarTo", None)]

    def test_domain_direct(self):
        g = builtin("domain_direct")
        assert g.start_sort is Sort.DOMAIN
        assert g.terminal == {Sort.PROBLEM}
        (rule,) = g.state("Domain").rules
        assert rule.label == "categorizedAs"
        assert rule.guard == Guard("target_in", "problem")

    def test_unknown(self):
        with pytest.raises(UnknownGrammar):
            builtin("anarchy")

    def test_rd_without_guards_is_ddd(self):
        stripped = builtin("rd").map_rules(lambda r: replace(r, guard=NO_GUARD))
        assert stripped == builtin("ddd")
        stripped = builtin("rd_single").map_rules(lambda r: replace(r, guard=NO_GUARD))
        assert stripped == builtin("ddd_single")

    def test_dd_is_rd_first_human_rule(self):
        rd = builtin("rd")
        first = GrammarState("Human", Sort.HUMAN, rd.state("Human").rules[:1])
        assert TraversalGrammar((first,), rd.start, rd.terminal) == builtin("dd")

    def test_reachable_states(self):
        assert reachable_states(builtin("rd")) == ["Human", "Domain"]


class TestGrammarInvariants:
    def test_dangling_next_state(self):
        with pytest.raises(DanglingState):
            TraversalGrammar((GrammarState("A", Sort.HUMAN, (Rule("votedOn", "Ghost"),)),),
                             "A", frozenset({Sort.SOLUTION}))

    def test_missing_start(self):
        with pytest.raises(DanglingState):
            TraversalGrammar((GrammarState("A", Sort.HUMAN, ()),), "B", frozenset())

    def test_bad_guard(self):
        with pytest.raises(UnknownGuard):
            Guard("sometimes")
        with pytest.raises(UnknownGuard):
            Guard("target_in")


class TestParse:
    def test_dd_text_equals_builtin(self):
        assert parse_grammar(DD_TEXT) == builtin("dd")

    def test_unknown_label_is_located(self):
        text = "grammar g {\n  start Human;\n  terminal Solution;\n" \
               "  state Human : Human { try fly -> Solution; }\n}\n"
        with pytest.raises(UnknownLabel) as err:
            parse_grammar(text, Schema())
        assert (err.value.line, err.value.column) == (4, 29)

    def test_dangling_state(self):
        text = "grammar g { start A; state A : Human { try votedOn -> Ghost; } }"
        with pytest.raises(DanglingState) as err:
            parse_grammar(text)
        assert err.value.line == 1 and err.value.column == text.index("Ghost") + 1

    def test_unknown_guard(self):
        text = "grammar g { start A; terminal Solution; state A : Human " \
               "{ try votedOn where lucky -> Solution; } }"
        with pytest.raises(UnknownGuard):
            parse_grammar(text)

    def test_sort_mismatch(self):
        text = "grammar g { start A; terminal Problem; state A : Human { try votedOn -> Problem; } }"
        with pytest.raises(SortMismatch):
            parse_grammar(text)

    def test_schema_dependent_labels(self):
        text = "grammar g { start A; state A : Human { try trusts -> A; } }"
        assert parse_grammar(text, Schema(SchemaMode.SINGLE_DOMAIN)).state("A").rules[0].label == "trusts"
        with pytest.raises(SortMismatch):
            parse_grammar(text, Schema(SchemaMode.MULTIPLE_DOMAINS))

    def test_extension_label(self):
        schema = Schema()
        schema.register("pro", [("human", "solution")])
        text = "grammar g { start A; terminal Solution; state A : Human { try pro -> Solution; } }"
        assert parse_grammar(text, schema).labels() == {"pro"}
        with pytest.raises(UnknownLabel):
            parse_grammar(text, Schema())

    @pytest.mark.parametrize("text", [
        "",
        "grammar",
        "grammar g {",
        "grammar g { start A; }",
        "grammar g { state A : Human { } }",
        "grammar g { start A; start A; state A : Human { } }",
        "grammar g { start A; state A : Robot { } }",
        "grammar g { start A; state A : Human { try votedOn -> } }",
        "grammar g { start A; state A : Human { } } trailing",
        "grammar g { start A; state A : Human { } state A : Human { } }",
        "grammar g { start A; state A : Human { try votedOn -> A; else live; } }",
        "grammar g { start Human; terminal Human; state Human : Human { } }",
        "grammar g { start A; state A : Human { try uses where target_in -> A; } }",
        "grammar g $",
    ])
    def test_invalid_inputs_are_located(self, text):
        with pytest.raises(GrammarError) as err:
            parse_grammar(text)
        assert err.value.line is not None and err.value.column is not None
        assert err.value.line >= 1 and err.value.column >= 1

    def test_syntax_error_position(self):
        with pytest.raises(GrammarSyntaxError) as err:
            parse_grammar("grammar g {\n  start A\n}")
        assert (err.value.line, err.value.column) == (3, 1)


class TestSerialize:
    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_roundtrip_builtins(self, name):
        g = builtin(name)
        assert parse_grammar(serialize_grammar(g)) == g

    def test_canonical_dd(self):
        assert serialize_grammar(builtin("dd")) == DD_TEXT.split("\n", 1)[1]

    def test_deterministic(self):
        assert serialize_grammar(builtin("ddd")) == serialize_grammar(builtin("ddd"))

    def test_roundtrip_random(self):
        rng = random.Random(7)
        for i in range(25):
            g = random_grammar(rng, f"g{i}")
            text = serialize_grammar(g)
            assert parse_grammar(text) == g
            assert serialize_grammar(parse_grammar(text)) == text

    def test_load_grammar(self, tmp_path):
        path = tmp_path / "dd.fsm"
        path.write_text(DD_TEXT)
        assert load_grammar(str(path)) == builtin("dd")
        assert load_grammar("rd") is builtin("rd")


def rd_network():
    n = MultiRelationalNetwork()
    for h in ("h0", "h1", "h2"):
        n.add_node("human", node_id=h)
    n.add_node("problem", node_id="p0")
    n.add_node("solution", parent="p0", node_id="s0")
    n.add_node("domain", owner="h0", name="A", node_id="d0")
    n.add_node("domain", owner="h1", name="A", node_id="d1")
    n.add_edge("h0", "uses", "d0", 1.0)
    n.add_edge("h1", "votedOn", "s0", 1.0)
    return n


class TestAdmissibleEdges:
    def test_dd_at_voter(self):
        net = split_vote()
        choice = admissible_edges(builtin("dd"), "Human", "h1", net)
        assert choice.rule_index == 0
        assert [(e.target, e.weight) for e in choice.edges] == [("s1", 0.6), ("s2", 0.4)]

    def test_rd_at_non_voter_uses_domains(self):
        net = rd_network()
        ctx = ProblemContext.for_problem(net, "p0")
        choice = admissible_edges(builtin("rd"), "Human", "h0", net, ctx)
        assert choice.rule_index == 1
        assert [e.target for e in choice.edges] == ["d0"]

    def test_rd_dies_at_domain_trusting_non_voter(self):
        net = rd_network()
        net.add_edge("d0", "trusts", "h2", 1.0)
        ctx = ProblemContext.for_problem(net, "p0")
        assert admissible_edges(builtin("rd"), "Domain", "d0", net, ctx) is None
        # DDD has no guard on trusts.
        assert admissible_edges(builtin("ddd"), "Domain", "d0", net, ctx).edges[0].target == "h2"

    def test_guard_soundness(self):
        net = rd_network()
        for h in ("h1", "h2"):
            net.add_edge("d0", "trusts", h, 1.0)
        ctx = ProblemContext.for_problem(net, "p0")
        choice = admissible_edges(builtin("rd"), "Domain", "d0", net, ctx)
        assert all(e.target in ctx.voters for e in choice.edges)
        assert [e.target for e in choice.edges] == ["h1"]

    def test_dictator_guard(self):
        net = split_vote()
        ctx = ProblemContext.for_problem(net, "p0", dictators=["h1"])
        assert admissible_edges(builtin("dictator"), "Human", "h1", net, ctx) is not None
        ctx = ProblemContext.for_problem(net, "p0", dictators=["h9"])
        assert admissible_edges(builtin("dictator"), "Human", "h1", net, ctx) is None

    def test_sort_mismatch(self):
        with pytest.raises(SortMismatch):
            admissible_edges(builtin("dd"), "Human", "s1", split_vote())

    def test_pure(self):
        net = rd_network()
        ctx = ProblemContext.for_problem(net, "p0")
        a = admissible_edges(builtin("rd"), "Human", "h0", net, ctx)
        b = admissible_edges(builtin("rd"), "Human", "h0", net, ctx)
        assert a == b

    def test_virtual_uses_replace_stored(self):
        net = rd_network()
        ctx = ProblemContext.for_problem(net, "p0", uses={})
        assert admissible_edges(builtin("rd"), "Human", "h0", net, ctx) is None
