import pytest

from shopassist.demo import build_demo_router
from shopassist.intent import EmptyQuestion
from shopassist.router import STAGES, SessionState, enrich_with_context
from shopassist.slots import MockExecutor


def stages_of(trace):
    return [rec.stage for rec in trace]


class TestEnrichWithContext:
    def test_prepends_previous_question(self):
        session = SessionState("s", prev_question="i want to check")
        assert enrich_with_context("taobao account", session) == "i want to check taobao account"
        assert session.enrichment_used

    def test_first_question_unchanged(self):
        session = SessionState("s")
        assert enrich_with_context("taobao account", session) == "taobao account"

    def test_once_per_turn(self):
        session = SessionState("s", prev_question="previous")
        first = enrich_with_context("q", session)
        second = enrich_with_context("q", session)
        assert first == "previous q"
        assert second == "q"


class TestBranches:
    def test_empty_question_rejected(self, demo_router, fresh_session):
        with pytest.raises(EmptyQuestion):
            demo_router.handle_turn(fresh_session, "   ")

    def test_promo_short_circuits(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(
            fresh_session, "what is the entry of grabbing red envelopes"
        )
        assert resp.source == "rule"
        assert stages_of(trace) == ["rule"]
        assert "red envelope" in resp.text

    def test_human_request_routes_to_staff_with_label(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(fresh_session, "real person, please")
        assert stages_of(trace) == ["rule", "intent", "staff"]
        assert resp.source == "staff"
        assert resp.staff_scenario == resp.intent

    def test_flight_booking_start_to_confirmation(self, demo_router, fresh_session):
        r1, t1 = demo_router.handle_turn(fresh_session, "i want to book a flight ticket")
        assert stages_of(t1) == ["rule", "slotfill"]
        assert r1.source == "slotfill" and "depart" in r1.text
        r2, _ = demo_router.handle_turn(fresh_session, "from hangzhou to beijing")
        assert "date" in r2.text
        r3, t3 = demo_router.handle_turn(fresh_session, "tomorrow")
        assert r3.source == "slotfill"
        assert "AB123" in r3.text and "2025-01-16" in r3.text
        assert t3[-1].data["event"] == "executed"
        assert fresh_session.slot is None

    def test_kg_answer(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(
            fresh_session, "how to find my lost login password"
        )
        assert resp.source == "kg"
        assert "recovery" in resp.text
        assert stages_of(trace) == ["intent", "semantic_parse", "kg"]

    def test_enrichment_recovers_kg_answer(self, demo_router, fresh_session):
        r1, t1 = demo_router.handle_turn(fresh_session, "i want to check")
        assert r1.source == "clarify"
        assert stages_of(t1) == ["intent", "semantic_parse", "kg", "clarify"]
        r2, t2 = demo_router.handle_turn(fresh_session, "taobao account")
        assert r2.source == "kg"
        assert stages_of(t2) == [
            "intent", "semantic_parse", "kg", "enrich", "semantic_parse", "kg",
        ]

    def test_clarify_fires_iff_single_distinct_node(self, demo_router):
        r, t = build_demo_router().handle_turn(SessionState("x"), "check please")
        assert r.source == "clarify"
        assert t[-1].stage == "clarify"
        r2, t2 = build_demo_router().handle_turn(
            SessionState("y"), "refund my taobao account"
        )
        assert r2.source != "clarify"
        assert "clarify" not in stages_of(t2)

    def test_retrieval_fallback(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(
            fresh_session, "how long does standard delivery take"
        )
        assert resp.source == "retrieval"
        assert "3 to 5" in resp.text
        assert trace[-1].stage == "retrieval" and trace[-1].data["accepted"]

    def test_chat_branch(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(fresh_session, "i am unhappy")
        assert resp.source == "chat"
        assert resp.intent == "chat"
        assert "with you" in resp.text

    def test_staff_handoff_carries_scenario(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(fresh_session, "refund my taobao account")
        assert resp.source == "staff"
        assert resp.staff_scenario == resp.intent
        assert trace[-1].stage == "staff"

    def test_default_answer_for_nonchat_nonbusiness(self, demo_router, fresh_session):
        resp, trace = demo_router.handle_turn(fresh_session, "what is the answer to everything")
        assert resp.source == "chat"
        assert trace[-1].data["mode"] == "default"
        assert resp.text == demo_router.config.default_answer


class TestInvariants:
    SCRIPT = [
        "i want to book a flight ticket",
        "from hangzhou to beijing",
        "tomorrow",
        "i want to check",
        "taobao account",
        "what is the entry of grabbing red envelopes",
        "i am unhappy",
        "how long does standard delivery take",
        "refund my taobao account",
        "real person, please",
    ]

    def run_script(self):
        router = build_demo_router()
        session = SessionState("inv")
        return [router.handle_turn(session, q) for q in self.SCRIPT]

    def test_stage_names_in_vocabulary(self):
        for _, trace in self.run_script():
            for rec in trace:
                assert rec.stage in STAGES

    def test_trace_nonempty_and_source_is_last_stage(self):
        for resp, trace in self.run_script():
            assert trace
            assert trace[-1].stage == resp.source

    def test_at_most_one_enrich_per_turn(self):
        for _, trace in self.run_script():
            assert stages_of(trace).count("enrich") <= 1

    def test_rule_hit_short_circuits(self):
        for _, trace in self.run_script():
            stages = stages_of(trace)
            if "rule" in stages:
                after = stages[stages.index("rule") + 1 :]
                assert not ({"kg", "retrieval", "chat"} & set(after))

    def test_replay_is_deterministic(self):
        a = self.run_script()
        b = self.run_script()
        for (resp_a, trace_a), (resp_b, trace_b) in zip(a, b):
            assert resp_a == resp_b
            assert trace_a == trace_b


class TestDegradation:
    def test_executor_failure_degrades_to_staff(self):
        router = build_demo_router()
        router.engines.executor = MockExecutor(unavailable=True)
        session = SessionState("f")
        router.handle_turn(session, "i want to book a flight ticket")
        router.handle_turn(session, "from hangzhou to beijing")
        resp, trace = router.handle_turn(session, "tomorrow")
        assert resp.source == "staff"
        assert session.slot is None

    def test_executor_rejection_degrades_to_staff(self):
        router = build_demo_router()
        router.engines.executor = MockExecutor(fail_reason="no seats")
        session = SessionState("g")
        router.handle_turn(session, "i want to book a flight ticket")
        resp, _ = router.handle_turn(session, "from hangzhou to beijing tomorrow")
        assert resp.source == "staff"

    def test_internal_error_degrades_to_staff(self):
        router = build_demo_router()

        class Boom:
            def find_matches(self, tokens):
                raise RuntimeError("boom")

        router.engines.rules = Boom()
        resp, trace = router.handle_turn(SessionState("h"), "hello world")
        assert resp.source == "staff"
        assert "error" in trace[-1].data

    def test_retry_exhaustion_hands_off(self):
        router = build_demo_router()
        session = SessionState("i")
        router.handle_turn(session, "i want to book a flight ticket")
        router.handle_turn(session, "rubbish")
        router.handle_turn(session, "more rubbish")
        resp, _ = router.handle_turn(session, "still rubbish")
        assert resp.source == "staff"
        assert session.slot is None

    def test_history_appended_every_turn(self):
        router = build_demo_router()
        session = SessionState("j")
        for i, q in enumerate(["hello there", "i am unhappy", "check please"], 1):
            router.handle_turn(session, q)
            assert len(session.history) == i
        assert session.prev_question == "check please"
