import json
import threading
from datetime import date
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from shopassist.slots import (
    AttributeKind,
    DuplicateSlot,
    ExecutorRejected,
    ExecutorUnavailable,
    GiveUp,
    HttpExecutor,
    MalformedFile,
    MockExecutor,
    NextPrompt,
    NoMandatorySlot,
    ReadyToExecute,
    SlotSpec,
    SlotState,
    TaskSchema,
    UnknownTask,
    advance,
    default_registry,
    execute_task,
    extract_slots,
    load_schemas,
    load_schema_file,
)

CLOCK = lambda: date(2025, 1, 15)  # noqa: E731


def flight_schema():
    return TaskSchema(
        "book_flight",
        (
            SlotSpec("departure", "location", True, "where from?", ("from",)),
            SlotSpec("destination", "location", True, "where to?", ("to",)),
            SlotSpec("date", "date", True, "which date?"),
        ),
        "flight {departure} -> {destination} on {date}, ref {reference}",
    )


class TestSchemas:
    def test_flight_schema_parses(self, tmp_path):
        doc = {
            "tasks": [{
                "task_id": "book_flight",
                "confirmation": "ok {reference}",
                "slots": [
                    {"name": "departure", "kind": "location", "mandatory": True,
                     "prompt": "from?", "markers": ["from"]},
                    {"name": "destination", "kind": "location", "mandatory": True,
                     "prompt": "to?", "markers": ["to"]},
                    {"name": "date", "kind": "date", "mandatory": True, "prompt": "when?"},
                ],
            }]
        }
        path = tmp_path / "schemas.json"
        path.write_text(json.dumps(doc))
        schemas = load_schemas(path)
        assert len(schemas) == 1
        assert [s.name for s in schemas[0].mandatory_slots()] == [
            "departure", "destination", "date",
        ]

    def test_duplicate_slot_rejected(self):
        with pytest.raises(DuplicateSlot):
            TaskSchema(
                "t",
                (SlotSpec("date", "date", True, "p"), SlotSpec("date", "date", False, "p")),
                "c",
            )

    def test_mandatory_slot_required(self):
        with pytest.raises(NoMandatorySlot):
            TaskSchema("t", (SlotSpec("a", "date", False, "p"),), "c")

    def test_empty_file_gives_empty_list(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        assert load_schemas(path) == []

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json at all {")
        with pytest.raises(MalformedFile):
            load_schemas(path)

    def test_unknown_kind_rejected(self, tmp_path):
        doc = {"tasks": [{"task_id": "t", "confirmation": "c", "slots": [
            {"name": "x", "kind": "no_such_kind", "mandatory": True, "prompt": "p"}]}]}
        path = tmp_path / "schemas.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(MalformedFile):
            load_schemas(path)

    def test_custom_kind_extends_registry(self, tmp_path):
        doc = {
            "kinds": [{"name": "color", "gazetteer": ["red", "blue"]}],
            "tasks": [{"task_id": "t", "confirmation": "c", "slots": [
                {"name": "shade", "kind": "color", "mandatory": True, "prompt": "which?"}]}],
        }
        path = tmp_path / "schemas.json"
        path.write_text(json.dumps(doc))
        schemas, registry = load_schema_file(path)
        assert "color" in registry
        found = extract_slots("i want red please", schemas[0], registry, CLOCK)
        assert found["shade"][0] == "red"


class TestExtractSlots:
    def test_markers_disambiguate(self):
        found = extract_slots(
            "fly from hangzhou to beijing tomorrow", flight_schema(),
            default_registry(), CLOCK,
        )
        assert found["departure"][0] == "hangzhou"
        assert found["destination"][0] == "beijing"
        assert found["date"][0] == "2025-01-16"

    def test_marker_order_does_not_matter(self):
        found = extract_slots(
            "to beijing from hangzhou", flight_schema(), default_registry(), CLOCK,
        )
        assert found["departure"][0] == "hangzhou"
        assert found["destination"][0] == "beijing"

    def test_no_values_in_trigger_utterance(self):
        found = extract_slots(
            "i want to book a flight ticket", flight_schema(), default_registry(), CLOCK,
        )
        assert found == {}

    def test_declaration_order_without_markers(self):
        found = extract_slots("hangzhou beijing", flight_schema(), default_registry(), CLOCK)
        assert found["departure"][0] == "hangzhou"
        assert found["destination"][0] == "beijing"

    def test_each_span_fills_one_slot(self):
        found = extract_slots("hangzhou", flight_schema(), default_registry(), CLOCK)
        assert found == {"departure": ("hangzhou", "hangzhou")}

    def test_pure_given_fixed_clock(self):
        a = extract_slots("to beijing tomorrow", flight_schema(), default_registry(), CLOCK)
        b = extract_slots("to beijing tomorrow", flight_schema(), default_registry(), CLOCK)
        assert a == b


class TestAdvance:
    def test_all_mandatory_filled_is_ready(self):
        state = SlotState("book_flight")
        outcome = advance(state, flight_schema(),
                          "from hangzhou to beijing tomorrow",
                          default_registry(), CLOCK)
        assert isinstance(outcome, ReadyToExecute)
        assert set(outcome.filled) == {"departure", "destination", "date"}

    def test_first_unfilled_mandatory_prompted(self):
        state = SlotState("book_flight")
        outcome = advance(state, flight_schema(), "from hangzhou to beijing",
                          default_registry(), CLOCK)
        assert outcome == NextPrompt("date", "which date?")
        assert state.awaiting == "date"

    def test_awaited_slot_free_text_fallback(self):
        state = SlotState("book_flight",
                          filled={"departure": ("hangzhou", "hangzhou"),
                                  "destination": ("beijing", "beijing")},
                          awaiting="date")
        outcome = advance(state, flight_schema(), "tomorrow", default_registry(), CLOCK)
        assert isinstance(outcome, ReadyToExecute)
        assert outcome.filled["date"][0] == "2025-01-16"

    def test_awaited_iso_date_accepted(self):
        state = SlotState("book_flight",
                          filled={"departure": ("a", "a"), "destination": ("b", "b")},
                          awaiting="date")
        # location values here are raw but the awaited date is what matters
        outcome = advance(state, flight_schema(), "2025-02-01", default_registry(), CLOCK)
        assert isinstance(outcome, ReadyToExecute)
        assert outcome.filled["date"][0] == "2025-02-01"

    def test_invalid_answer_reprompts_then_gives_up(self):
        state = SlotState("book_flight", awaiting="departure")
        schema = flight_schema()
        out1 = advance(state, schema, "no idea", default_registry(), CLOCK, retry_limit=2)
        assert out1 == NextPrompt("departure", "where from?")
        out2 = advance(state, schema, "still nothing", default_registry(), CLOCK, retry_limit=2)
        assert out2 == NextPrompt("departure", "where from?")
        out3 = advance(state, schema, "nope", default_registry(), CLOCK, retry_limit=2)
        assert out3 == GiveUp("departure")

    def test_never_loses_filled_slot(self):
        state = SlotState("book_flight")
        advance(state, flight_schema(), "from hangzhou", default_registry(), CLOCK)
        keys_before = set(state.filled)
        advance(state, flight_schema(), "to beijing", default_registry(), CLOCK)
        assert keys_before <= set(state.filled)

    def test_at_most_n_mandatory_prompts_when_answers_valid(self):
        state = SlotState("book_flight")
        schema = flight_schema()
        answers = {"departure": "hangzhou", "destination": "beijing", "date": "tomorrow"}
        outcome = advance(state, schema, "book it", default_registry(), CLOCK)
        prompts = 0
        while isinstance(outcome, NextPrompt):
            prompts += 1
            outcome = advance(state, schema, answers[outcome.slot],
                              default_registry(), CLOCK)
        assert isinstance(outcome, ReadyToExecute)
        assert prompts <= len(schema.mandatory_slots())

    def test_unknown_task(self):
        state = SlotState("other_task")
        with pytest.raises(UnknownTask):
            advance(state, flight_schema(), "hello", default_registry(), CLOCK)


class TestExecuteTask:
    FILLED = {
        "departure": ("hangzhou", "hangzhou"),
        "destination": ("beijing", "beijing"),
        "date": ("2025-01-16", "tomorrow"),
    }

    def test_confirmation_contains_reference(self):
        text = execute_task(self.FILLED, flight_schema(), MockExecutor(reference="AB123"))
        assert "AB123" in text and "hangzhou" in text

    def test_unavailable_executor(self):
        with pytest.raises(ExecutorUnavailable):
            execute_task(self.FILLED, flight_schema(), MockExecutor(unavailable=True))

    def test_rejected_executor(self):
        with pytest.raises(ExecutorRejected) as err:
            execute_task(self.FILLED, flight_schema(), MockExecutor(fail_reason="no seats"))
        assert err.value.reason == "no seats"

    def test_http_executor_round_trip(self):
        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                assert body["task_id"] == "book_flight"
                payload = json.dumps({"ok": True, "reference": "HTTP9"}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_port}/exec"
            text = execute_task(self.FILLED, flight_schema(), HttpExecutor(url))
            assert "HTTP9" in text
        finally:
            server.shutdown()

    def test_http_executor_unreachable(self):
        executor = HttpExecutor("http://127.0.0.1:1/nothing", timeout=0.2)
        with pytest.raises(ExecutorUnavailable):
            executor.execute("t", {})


class TestAttributeKinds:
    def test_registry_has_at_least_three_kinds(self):
        assert len(default_registry()) >= 3

    def test_quantity_and_phone(self):
        schema = TaskSchema(
            "recharge",
            (
                SlotSpec("amount", "quantity", True, "how much?"),
                SlotSpec("number", "phone", True, "which number?"),
            ),
            "recharged {amount} for {number} ({reference})",
        )
        found = extract_slots("recharge 50 for 13900001111", schema,
                              default_registry(), CLOCK)
        assert found["amount"][0] == "50"
        assert found["number"][0] == "13900001111"

    def test_freeform_kind_accepts_prompt_answer(self):
        schema = TaskSchema(
            "find_item",
            (SlotSpec("item", "product", True, "what product?"),),
            "looking for {item} {reference}",
        )
        state = SlotState("find_item", awaiting="item")
        outcome = advance(state, schema, "a very obscure gadget",
                          default_registry(), CLOCK)
        assert isinstance(outcome, ReadyToExecute)
        assert outcome.filled["item"][0] == "a very obscure gadget"
