"""Configuration file handling and engine assembly.

The config is a flat JSON object; any key can be overridden by an
environment variable named ``SHOPASSIST_<KEY>`` (uppercased).  Engine
loading fails fast with a diagnostic naming the missing artifact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import chat, intent, retrieval
from .kg import load_graph
from .router import Engines, RouterConfig
from .rules import load_rules
from .slots import HttpExecutor, MockExecutor, load_schema_file

ENV_PREFIX = "SHOPASSIST_"


class StartupError(RuntimeError):
    pass


@dataclass
class AppConfig:
    rules_path: str = ""
    schemas_path: str = ""
    nodes_path: str = ""
    edges_path: str = ""
    items_path: str = ""
    kb_path: str = ""
    chat_kb_path: str = ""
    intent_model_path: str = ""
    chat_model_path: str = ""
    promo_answers: dict = field(default_factory=dict)
    default_answer: str = RouterConfig.default_answer
    human_prompt: str = RouterConfig.human_prompt
    chat_labels: list = field(default_factory=lambda: ["chat"])
    threshold: float = 0.3
    k: int = 5
    s_min: float = 0.5
    retry_limit: int = 2
    executor_url: str = ""  # empty -> deterministic in-process mock
    host: str = "127.0.0.1"
    port: int = 8080
    journal_path: str = ""
    seed: int = 0

    @classmethod
    def load(cls, path: str | Path | None) -> "AppConfig":
        doc = {}
        if path:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls()
        valid = {f.name: f.type for f in fields(cls)}
        for key, value in doc.items():
            if key not in valid:
                raise StartupError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        for f in fields(cls):
            env = os.environ.get(ENV_PREFIX + f.name.upper())
            if env is None:
                continue
            current = getattr(cfg, f.name)
            if isinstance(current, bool):
                setattr(cfg, f.name, env.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(cfg, f.name, int(env))
            elif isinstance(current, float):
                setattr(cfg, f.name, float(env))
            elif isinstance(current, (dict, list)):
                setattr(cfg, f.name, json.loads(env))
            else:
                setattr(cfg, f.name, env)
        return cfg


def _need(path: str, what: str) -> Path:
    if not path:
        raise StartupError(f"config is missing a path for {what}")
    p = Path(path)
    if not p.exists():
        raise StartupError(f"{what} artifact not found: {p}")
    return p


def build_engines(cfg: AppConfig) -> tuple[Engines, RouterConfig]:
    rules = load_rules(_need(cfg.rules_path, "rule patterns"))
    schemas, registry = load_schema_file(_need(cfg.schemas_path, "task schemas"))
    graph = load_graph(
        _need(cfg.nodes_path, "graph nodes"),
        _need(cfg.edges_path, "graph edges"),
        _need(cfg.items_path, "knowledge items"),
    )
    kb_index = retrieval.build_index(retrieval.load_kb(_need(cfg.kb_path, "qa knowledge base")))
    chat_index = retrieval.build_index(
        retrieval.load_kb(_need(cfg.chat_kb_path, "chat knowledge base"))
    )
    intent_model = intent.load_model(_need(cfg.intent_model_path, "intent model"))
    chat_model = chat.load_model(_need(cfg.chat_model_path, "chat model"))
    executor = HttpExecutor(cfg.executor_url) if cfg.executor_url else MockExecutor()
    engines = Engines(
        rules=rules,
        intent_model=intent_model,
        graph=graph,
        kb_index=kb_index,
        chat_index=chat_index,
        chat_model=chat_model,
        schemas={s.task_id: s for s in schemas},
        registry=registry,
        executor=executor,
    )
    router_config = RouterConfig(
        promo_answers=dict(cfg.promo_answers),
        default_answer=cfg.default_answer,
        human_prompt=cfg.human_prompt,
        chat_labels=frozenset(cfg.chat_labels),
        k=cfg.k,
        threshold=cfg.threshold,
        s_min=cfg.s_min,
        retry_limit=cfg.retry_limit,
    )
    return engines, router_config
