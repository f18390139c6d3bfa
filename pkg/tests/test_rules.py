import hypothesis.strategies as st
from hypothesis import given, settings

from shopassist.rules import (
    NO_RULE,
    RuleKind,
    compile_rules,
    route_by_rules,
)
from shopassist.textutil import normalize, tokenize


def _route(text, rows):
    trie = compile_rules(rows)
    return route_by_rules(tokenize(normalize(text)), trie)


class TestRouteByRules:
    def test_assist_booking(self):
        decision = _route(
            "i want to book a flight ticket",
            [("book a flight ticket", "assist", "book_flight")],
        )
        assert decision.kind is RuleKind.ASSIST and decision.value == "book_flight"

    def test_human_request(self):
        decision = _route("real person, please", [("real person", "human", "")])
        assert decision.kind is RuleKind.HUMAN

    def test_no_rule(self):
        decision = _route("how do i cook rice", [("real person", "human", "")])
        assert decision is NO_RULE

    def test_norule_iff_no_matches(self):
        rows = [("alpha beta", "promo", "p")]
        hit = _route("alpha beta", rows)
        miss = _route("gamma delta", rows)
        assert not hit.is_norule and hit.matched
        assert miss.is_norule and not miss.matched

    def test_human_beats_assist_beats_promo(self):
        rows = [
            ("deal", "promo", "p1"),
            ("book it", "assist", "t1"),
            ("real person", "human", ""),
        ]
        d = _route("deal book it real person", rows)
        assert d.kind is RuleKind.HUMAN
        d = _route("deal and book it", rows)
        assert d.kind is RuleKind.ASSIST
        d = _route("deal only", rows)
        assert d.kind is RuleKind.PROMO

    def test_earliest_start_breaks_ties_within_class(self):
        rows = [("late", "promo", "p_late"), ("early", "promo", "p_early")]
        d = _route("early bird late riser", rows)
        assert d.value == "p_early"

    def test_registration_order_breaks_same_span_ties(self):
        rows = [("same words", "promo", "first"), ("same words", "promo", "second")]
        d = _route("same words", rows)
        assert d.value == "first"

    def test_pure_function_of_inputs(self):
        rows = [("hello", "promo", "p")]
        trie = compile_rules(rows)
        tokens = tokenize(normalize("hello world"))
        assert route_by_rules(tokens, trie) == route_by_rules(tokens, trie)

    @given(
        st.lists(
            st.tuples(
                st.lists(st.sampled_from("pqrs"), min_size=1, max_size=3),
                st.sampled_from(["human", "assist", "promo"]),
            ),
            min_size=1,
            max_size=8,
        ),
        st.lists(st.sampled_from("pqrs"), min_size=1, max_size=20),
    )
    @settings(max_examples=200, deadline=None)
    def test_multi_match_yields_exactly_one_decision(self, raw_rows, tokens):
        rows = [(" ".join(seq), kind, f"v{i}") for i, (seq, kind) in enumerate(raw_rows)]
        trie = compile_rules(rows)
        decision = route_by_rules(tokens, trie)
        if decision.matched:
            assert decision.kind is not None
            priorities = {RuleKind.HUMAN: 0, RuleKind.ASSIST: 1, RuleKind.PROMO: 2}
            best = min(priorities[m.payload.kind] for m in decision.matched)
            assert priorities[decision.kind] == best
        else:
            assert decision is NO_RULE
