"""Deterministic demo bundle: a small rule set, task schema, knowledge graph,
QA knowledge bases and hand-set models that together exercise every routing
branch without any training step.

The hand-set intent model puts each class keyword on its own embedding axis
(one window of width 1, identity output), so predictions are exact argmaxes
over keyword hits and stable across platforms.  The hand-set chat reranker
has all-zero weights: every candidate scores 1/|target vocab|, ties resolve
by retrieval score, which keeps the demo deterministic while still walking
the rerank code path.
"""

from __future__ import annotations

import json
from datetime import date
from pathlib import Path

import numpy as np

from . import chat, intent, retrieval
from .kg import KnowledgeGraph, GraphEdge, GraphNode, KnowledgeItem, save_graph
from .router import Engines, Router, RouterConfig
from .rules import compile_rules
from .slots import MockExecutor, parse_schema_doc
from .textutil import Vocabulary
from .trie import write_pattern_file

DEMO_CLOCK = lambda: date(2025, 1, 15)  # noqa: E731 - injected everywhere a date resolves

RULE_ROWS = [
    ("book a flight ticket", "assist", "book_flight"),
    ("book a flight", "assist", "book_flight"),
    ("red envelope", "promo", "promo_red_envelope"),
    ("red envelopes", "promo", "promo_red_envelope"),
    ("real person", "human", ""),
    ("human agent", "human", ""),
]

PROMO_ANSWERS = {
    "promo_red_envelope": "tap the red envelope banner on the home page to grab yours!",
}

SCHEMA_DOC = {
    "tasks": [
        {
            "task_id": "book_flight",
            "confirmation": "your flight from {departure} to {destination} on {date} is booked, reference {reference}.",
            "slots": [
                {"name": "departure", "kind": "location", "mandatory": True,
                 "prompt": "where will you depart from?", "markers": ["from"]},
                {"name": "destination", "kind": "location", "mandatory": True,
                 "prompt": "where are you flying to?", "markers": ["to"]},
                {"name": "date", "kind": "date", "mandatory": True,
                 "prompt": "what date do you want to fly?"},
            ],
        }
    ]
}

NODES = [
    GraphNode("check", "check", "action", ("check",)),
    GraphNode("refund_req", "refund", "action", ("refund",)),
    GraphNode("account", "account", "entity", ("account",)),
    GraphNode("taobao_account", "taobao account", "entity", ("taobao account",)),
    GraphNode("find_lost_password", "find lost password", "action", ("lost password",)),
    GraphNode("find_lost_login_password", "find lost login password", "action",
              ("lost login password",)),
]

EDGES = [
    GraphEdge("taobao_account", "account", "is_a"),
    GraphEdge("find_lost_login_password", "find_lost_password", "is_a"),
    GraphEdge("find_lost_password", "account", "about"),
]

ITEMS = [
    KnowledgeItem("item_check_account", frozenset({"check", "taobao_account"}),
                  "you can check your taobao account under settings, account security."),
    KnowledgeItem("item_lost_password", frozenset({"find_lost_password"}),
                  "open the password recovery page and verify with your phone number."),
]

KB_PAIRS = [
    retrieval.QAPair(1, "how long does standard delivery take",
                     "standard delivery takes 3 to 5 business days."),
    retrieval.QAPair(2, "how do i return goods and get money back",
                     "file a return request within 7 days of delivery."),
    retrieval.QAPair(3, "which payment methods are supported",
                     "we support bank cards and balance payments."),
]

CHAT_PAIRS = [
    retrieval.QAPair(1, "i am unhappy", "do not worry, i am always here with you."),
    retrieval.QAPair(2, "hello there", "hi! how can i help you today?"),
    retrieval.QAPair(3, "tell me a joke", "why did the parcel blush? it saw the packing tape!"),
]

INTENT_LABELS = ["account", "chat", "logistics", "refund"]

_CLASS_KEYWORDS = {
    "account": ["account", "password", "login", "check"],
    "chat": ["unhappy", "hello", "bored", "joke", "lonely"],
    "logistics": ["delivery", "package", "express", "shipping"],
    "refund": ["refund", "return", "money"],
}

_TAG_CLASS = {
    "check": "account",
    "account": "account",
    "taobao_account": "account",
    "find_lost_password": "account",
    "find_lost_login_password": "account",
    "refund_req": "refund",
}


def build_intent_model() -> intent.IntentModel:
    """Keyword-indicator CNN: exact, platform-stable argmax predictions."""
    labels = sorted(INTENT_LABELS)
    n = len(labels)
    surfaces: dict[str, int] = {}
    next_id = 2
    for words in _CLASS_KEYWORDS.values():
        for w in words:
            if w not in surfaces:
                surfaces[w] = next_id
                next_id += 1
    for tag in _TAG_CLASS:
        if tag not in surfaces:
            surfaces[tag] = next_id
            next_id += 1
    vocab = Vocabulary(surfaces)
    cfg = intent.IntentConfig(emb_dim=n, windows=(1,), filters=n, max_len=16, seed=0)
    emb = np.zeros((len(vocab), n))
    for ci, label in enumerate(labels):
        for w in _CLASS_KEYWORDS[label]:
            emb[vocab.id_of(w), ci] = 3.0
    for tag, label in _TAG_CLASS.items():
        emb[vocab.id_of(tag), labels.index(label)] = 3.0
    conv_w = np.zeros((n, 1, n))
    for f in range(n):
        conv_w[f, 0, f] = 1.0
    params = {
        "emb": emb,
        "conv_w1": conv_w,
        "conv_b1": np.zeros(n),
        "out_w": np.eye(n),
        "out_b": np.zeros(n),
    }
    return intent.IntentModel(vocab, tuple(labels), cfg, params)


def build_chat_model() -> chat.Seq2SeqModel:
    """All-zero reranker: uniform token probabilities, deterministic scores."""
    src_tokens = [t for p in CHAT_PAIRS for t in p.question.split()]
    tgt_tokens = [chat.BOS, chat.EOS] + [t for p in CHAT_PAIRS for t in p.answer.split()]
    src_vocab = Vocabulary.build(iter(src_tokens))
    tgt_vocab = Vocabulary.build(iter(tgt_tokens))
    cfg = chat.Seq2SeqConfig(hidden=4, emb_dim=4, max_decode_len=6, seed=0)
    model = chat.init_model(src_vocab, tgt_vocab, cfg)
    for key in model.params:
        model.params[key] = np.zeros_like(model.params[key])
    return model


def build_demo_engines() -> tuple[Engines, RouterConfig]:
    graph = KnowledgeGraph(NODES, EDGES, ITEMS)
    schemas, registry = parse_schema_doc(SCHEMA_DOC)
    engines = Engines(
        rules=compile_rules(RULE_ROWS),
        intent_model=build_intent_model(),
        graph=graph,
        kb_index=retrieval.build_index(KB_PAIRS),
        chat_index=retrieval.build_index(CHAT_PAIRS),
        chat_model=build_chat_model(),
        schemas={s.task_id: s for s in schemas},
        registry=registry,
        executor=MockExecutor(reference="AB123"),
        clock=DEMO_CLOCK,
    )
    config = RouterConfig(
        promo_answers=dict(PROMO_ANSWERS),
        chat_labels=frozenset({"chat"}),
        k=3,
        threshold=0.02,
        s_min=2.0,
        retry_limit=2,
    )
    return engines, config


def build_demo_router(now=None) -> Router:
    engines, config = build_demo_engines()
    counter = iter(range(1, 1_000_000))
    return Router(engines, config, now=now or (lambda: float(next(counter))))


# scripted conversations covering every routing branch: slot filling start to
# confirmation, context enrichment, clarify, kg generalization, promo, chat,
# retrieval fallback, staff handoff, human request, default answer, retry giveup
GOLDEN_SCRIPT = [
    ("demo_a", [
        "i want to book a flight ticket",
        "from hangzhou to beijing",
        "tomorrow",
    ]),
    ("demo_b", [
        "i want to check",
        "taobao account",
    ]),
    ("demo_c", [
        "i am unhappy",
        "hello there",
        "tell me a joke",
    ]),
    ("branches", [
        "what is the entry of grabbing red envelopes",
        "how to find my lost login password",
        "how long does standard delivery take",
        "refund my taobao account",
    ]),
    ("misc", [
        "real person, please",
        "what is the answer to everything",
    ]),
    ("giveup", [
        "i want to book a flight ticket",
        "no clue",
        "what do you mean",
        "seriously no idea",
    ]),
]


def run_golden_script() -> list[dict]:
    """Replay the scripted conversations; returns one trace record per turn."""
    from .router import SessionState, trace_to_dict

    router = build_demo_router()
    records = []
    for sid, questions in GOLDEN_SCRIPT:
        session = SessionState(sid)
        for q in questions:
            response, trace = router.handle_turn(session, q)
            rec = trace_to_dict(q, response, trace)
            rec["session"] = sid
            records.append(rec)
    return records


def write_demo_files(out_dir: str | Path) -> dict:
    """Write every artifact the service config needs; returns the config dict."""
    out = Path(out_dir).resolve()
    out.mkdir(parents=True, exist_ok=True)
    write_pattern_file(out / "rules.tsv", RULE_ROWS)
    (out / "schemas.json").write_text(json.dumps(SCHEMA_DOC, indent=2), encoding="utf-8")
    graph = KnowledgeGraph(NODES, EDGES, ITEMS)
    save_graph(graph, out / "nodes.jsonl", out / "edges.jsonl", out / "items.jsonl")
    retrieval.save_kb(out / "kb.jsonl", KB_PAIRS)
    retrieval.save_kb(out / "chat_kb.jsonl", CHAT_PAIRS)
    intent.save_model(build_intent_model(), out / "intent_model.npz")
    chat.save_model(build_chat_model(), out / "chat_model.npz")
    config = {
        "rules_path": str(out / "rules.tsv"),
        "schemas_path": str(out / "schemas.json"),
        "nodes_path": str(out / "nodes.jsonl"),
        "edges_path": str(out / "edges.jsonl"),
        "items_path": str(out / "items.jsonl"),
        "kb_path": str(out / "kb.jsonl"),
        "chat_kb_path": str(out / "chat_kb.jsonl"),
        "intent_model_path": str(out / "intent_model.npz"),
        "chat_model_path": str(out / "chat_model.npz"),
        "promo_answers": PROMO_ANSWERS,
        "chat_labels": ["chat"],
        "threshold": 0.02,
        "k": 3,
        "s_min": 2.0,
        "retry_limit": 2,
        "port": 8080,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config
