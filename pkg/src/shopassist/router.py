"""Turn orchestrator: business rules, intent, semantic parse + knowledge
graph (with one-shot context enrichment), clarify, retrieval fallback, chat
and staff handoff, in that order, with a per-stage trace for every turn.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from . import chat as chat_engine
from . import retrieval
from .intent import EmptyQuestion, IntentModel, predict
from .kg import KnowledgeGraph, answer_by_graph, parse_semantic_tags
from .rules import RuleKind, route_by_rules
from .slots import (
    AttributeKind,
    ExecutorRejected,
    ExecutorUnavailable,
    GiveUp,
    NextPrompt,
    ReadyToExecute,
    SlotState,
    TaskExecutor,
    TaskSchema,
    advance,
    execute_task,
)
from .textutil import normalize, tokenize
from .trie import PatternTrie

STAGES = (
    "rule", "intent", "semantic_parse", "kg", "enrich",
    "clarify", "retrieval", "chat", "slotfill", "staff",
)


@dataclass
class TurnRecord:
    question: str
    reply: str
    source: str
    timestamp: float


@dataclass
class SessionState:
    session_id: str
    history: list[TurnRecord] = field(default_factory=list)
    prev_question: str | None = None
    slot: SlotState | None = None
    enrichment_used: bool = False  # per-turn latch, reset at turn start


@dataclass(frozen=True)
class StageRecord:
    stage: str
    data: dict


RouteTrace = list[StageRecord]


@dataclass(frozen=True)
class Response:
    text: str
    source: str
    intent: str | None = None
    staff_scenario: str | None = None


@dataclass
class RouterConfig:
    promo_answers: dict[str, str] = field(default_factory=dict)
    default_answer: str = "sorry, i did not get that. could you rephrase?"
    human_prompt: str = "please describe your problem and i will bring in a colleague."
    clarify_template: str = "could you tell me a bit more about {label}?"
    staff_template: str = "let me transfer you to our service staff ({scenario})."
    giveup_text: str = "i could not complete the task; transferring you to our service staff."
    chat_labels: frozenset[str] = frozenset({"chat"})
    k: int = 5
    threshold: float = 0.3
    s_min: float = 0.5
    retry_limit: int = 2


@dataclass
class Engines:
    rules: PatternTrie
    intent_model: IntentModel
    graph: KnowledgeGraph
    kb_index: retrieval.InvertedIndex
    chat_index: retrieval.InvertedIndex
    chat_model: chat_engine.Seq2SeqModel
    schemas: dict[str, TaskSchema]
    registry: dict[str, AttributeKind]
    executor: TaskExecutor
    clock: Callable | None = None  # date factory for slot extraction; None = today


def enrich_with_context(q: str, session: SessionState) -> str:
    """Prepend the previous customer question, at most once per turn."""
    if session.prev_question and not session.enrichment_used:
        session.enrichment_used = True
        return session.prev_question + " " + q
    return q


def _round(x: float) -> float:
    return round(float(x), 6)


class Router:
    def __init__(self, engines: Engines, config: RouterConfig | None = None,
                 now: Callable[[], float] = time.time):
        self.engines = engines
        self.config = config or RouterConfig()
        self.now = now

    # -- public entry -----------------------------------------------------

    def handle_turn(self, session: SessionState, q: str) -> tuple[Response, RouteTrace]:
        norm_q = normalize(q)
        if not norm_q:
            raise EmptyQuestion("question is empty after normalization")
        session.enrichment_used = False
        trace: RouteTrace = []
        try:
            response = self._route(session, norm_q, trace)
        except EmptyQuestion:
            raise
        except Exception as exc:  # degrade to staff, never crash a turn
            trace.append(StageRecord("staff", {"error": f"{type(exc).__name__}: {exc}"}))
            response = Response(
                self.config.staff_template.format(scenario="error"),
                "staff", None, "error",
            )
        session.history.append(TurnRecord(norm_q, response.text, response.source, self.now()))
        session.prev_question = norm_q
        return response, trace

    # -- the flow ----------------------------------------------------------

    def _route(self, session: SessionState, q: str, trace: RouteTrace) -> Response:
        cfg = self.config
        eng = self.engines

        # (a) an active slot-filling task preempts everything
        if session.slot is not None:
            return self._slot_turn(session, q, trace)

        # (b) business rules
        tokens = tokenize(q)
        decision = route_by_rules(tokens, eng.rules)
        if not decision.is_norule:
            trace.append(StageRecord("rule", {
                "decision": decision.kind.value,
                "value": decision.value,
                "matches": [[m.start, m.end, m.payload.kind.value, m.payload.value]
                            for m in decision.matched],
            }))
            if decision.kind is RuleKind.PROMO:
                text = cfg.promo_answers.get(decision.value, cfg.default_answer)
                return Response(text, "rule")
            if decision.kind is RuleKind.HUMAN:
                label = self._intent_label(session, q, trace)
                trace.append(StageRecord("staff", {"scenario": label, "reason": "human_request"}))
                return Response(cfg.human_prompt, "staff", label, label)
            # assist: start the task and run the trigger utterance through it
            session.slot = SlotState(task_id=decision.value)
            return self._slot_turn(session, q, trace)

        # (c) intent scenario label
        label = self._intent_label(session, q, trace)

        # (d) semantic parse, knowledge graph, one-shot enrichment
        tags = parse_semantic_tags(q, eng.graph)
        trace.append(StageRecord("semantic_parse", {
            "question": q, "tags": [[t.node_id, t.start, t.end] for t in tags],
        }))
        if tags:
            item = answer_by_graph(tags, eng.graph)
            trace.append(StageRecord("kg", self._kg_summary(item)))
            if item is not None:
                return Response(item.answer, "kg", label)
            enriched = enrich_with_context(q, session)
            if enriched != q:
                trace.append(StageRecord("enrich", {"enriched": enriched}))
                tags = parse_semantic_tags(enriched, eng.graph)
                trace.append(StageRecord("semantic_parse", {
                    "question": enriched,
                    "tags": [[t.node_id, t.start, t.end] for t in tags],
                }))
                if tags:
                    item = answer_by_graph(tags, eng.graph)
                    trace.append(StageRecord("kg", self._kg_summary(item)))
                    if item is not None:
                        return Response(item.answer, "kg", label)

        # (e) exactly one distinct tagged node -> ask for more information
        distinct = sorted({t.node_id for t in tags})
        if len(distinct) == 1:
            node = eng.graph.nodes[distinct[0]]
            trace.append(StageRecord("clarify", {"node": node.id}))
            return Response(cfg.clarify_template.format(label=node.label), "clarify", label)

        # (f) retrieval over the QA knowledge base
        hits = retrieval.search(eng.kb_index, q, cfg.k)
        accepted = bool(hits) and hits[0][1] >= cfg.s_min
        trace.append(StageRecord("retrieval", {
            "top": [[pid, _round(score)] for pid, score in hits],
            "accepted": accepted,
        }))
        if accepted:
            return Response(eng.kb_index.pairs[hits[0][0]].answer, "retrieval", label)

        # (g) business-irrelevant chat
        if not tags and label in cfg.chat_labels:
            reply = chat_engine.chat_answer(q, eng.chat_index, eng.chat_model,
                                            cfg.k, cfg.threshold)
            trace.append(StageRecord("chat", {
                "mode": "engine", "source": reply.source,
                "confidence": _round(reply.confidence),
            }))
            # a stripped-empty generation falls back to the configured answer
            return Response(reply.text or cfg.default_answer, "chat", label)

        # (h) business question nothing answered -> staff by scenario
        if tags:
            trace.append(StageRecord("staff", {"scenario": label, "reason": "no_answer"}))
            return Response(cfg.staff_template.format(scenario=label), "staff", label, label)

        # (i) not business, not chat -> the pre-configured default answer
        trace.append(StageRecord("chat", {"mode": "default"}))
        return Response(cfg.default_answer, "chat", label)

    # -- helpers -----------------------------------------------------------

    def _intent_label(self, session: SessionState, q: str, trace: RouteTrace) -> str:
        eng = self.engines
        q_tags = [t.node_id for t in parse_semantic_tags(q, eng.graph)]
        ctx_tags = (
            [t.node_id for t in parse_semantic_tags(session.prev_question, eng.graph)]
            if session.prev_question else []
        )
        pred = predict(eng.intent_model, q, q_tags, ctx_tags)
        trace.append(StageRecord("intent", {
            "label": pred.label, "top_prob": _round(pred.probs.max()),
        }))
        return pred.label

    @staticmethod
    def _kg_summary(item) -> dict:
        if item is None:
            return {"result": "no_answer"}
        return {"result": "item", "item_id": item.id}

    def _slot_turn(self, session: SessionState, q: str, trace: RouteTrace) -> Response:
        cfg = self.config
        eng = self.engines
        state = session.slot
        schema = eng.schemas.get(state.task_id)
        if schema is None:
            session.slot = None
            trace.append(StageRecord("staff", {"scenario": "error",
                                               "reason": f"unknown task {state.task_id}"}))
            return Response(cfg.staff_template.format(scenario="error"), "staff", None, "error")
        kwargs = {} if eng.clock is None else {"clock": eng.clock}
        outcome = advance(state, schema, q, eng.registry, retry_limit=cfg.retry_limit, **kwargs)
        if isinstance(outcome, NextPrompt):
            trace.append(StageRecord("slotfill", {
                "task": state.task_id, "event": "prompt", "slot": outcome.slot,
                "filled": {k: v for k, (v, _) in state.filled.items()},
            }))
            return Response(outcome.prompt, "slotfill")
        if isinstance(outcome, GiveUp):
            session.slot = None
            trace.append(StageRecord("staff", {
                "scenario": "slotfill", "reason": f"retries exhausted on {outcome.slot}",
            }))
            return Response(cfg.giveup_text, "staff", None, "slotfill")
        assert isinstance(outcome, ReadyToExecute)
        try:
            confirmation = execute_task(outcome.filled, schema, eng.executor)
        except (ExecutorRejected, ExecutorUnavailable) as exc:
            session.slot = None
            trace.append(StageRecord("staff", {
                "scenario": "slotfill", "reason": f"executor: {exc}",
            }))
            return Response(cfg.giveup_text, "staff", None, "slotfill")
        session.slot = None
        trace.append(StageRecord("slotfill", {
            "task": schema.task_id, "event": "executed",
            "filled": {k: v for k, (v, _) in outcome.filled.items()},
        }))
        return Response(confirmation, "slotfill")


def trace_to_dict(question: str, response: Response, trace: RouteTrace) -> dict:
    """Stable JSON-ready form used by the golden suite and the UI debug panel."""
    return {
        "question": question,
        "response": {
            "text": response.text,
            "source": response.source,
            "intent": response.intent,
            "staff_scenario": response.staff_scenario,
        },
        "stages": [{"stage": rec.stage, **rec.data} for rec in trace],
    }
