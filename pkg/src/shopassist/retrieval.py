"""BM25 retrieval over QA pairs, indexed on the question side.

Candidate generator for the hybrid chat engine and the router's retrieval
fallback.  Answers are returned, never scored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .textutil import CorpusStats, compute_idf, normalize, tokenize

K1 = 1.2
B = 0.75


class DuplicateId(ValueError):
    pass


class EmptyQuery(ValueError):
    pass


@dataclass(frozen=True)
class QAPair:
    id: int
    question: str
    answer: str
    scenario: str | None = None

    def __post_init__(self):
        if not self.question or not self.answer:
            raise ValueError("question and answer must be non-empty")


@dataclass
class InvertedIndex:
    pairs: dict[int, QAPair]
    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc id, tf)], sorted by doc id
    doc_len: dict[int, int]
    avg_doc_len: float
    stats: CorpusStats = field(default_factory=CorpusStats)


def build_index(kb: list[QAPair]) -> InvertedIndex:
    seen: set[int] = set()
    postings: dict[str, dict[int, int]] = {}
    doc_len: dict[int, int] = {}
    docs: list[list[str]] = []
    for pair in kb:
        if pair.id in seen:
            raise DuplicateId(f"duplicate kb id {pair.id}")
        seen.add(pair.id)
        tokens = tokenize(normalize(pair.question))
        docs.append(tokens)
        doc_len[pair.id] = len(tokens)
        for tok in tokens:
            postings.setdefault(tok, {}).setdefault(pair.id, 0)
            postings[tok][pair.id] += 1
    sorted_postings = {t: sorted(tf.items()) for t, tf in postings.items()}
    n = len(kb)
    avg = sum(doc_len.values()) / n if n else 0.0
    return InvertedIndex(
        pairs={p.id: p for p in kb},
        postings=sorted_postings,
        doc_len=doc_len,
        avg_doc_len=avg,
        stats=CorpusStats.from_documents(docs),
    )


def bm25_score(index: InvertedIndex, query_tokens: list[str], doc_id: int) -> float:
    score = 0.0
    dl = index.doc_len[doc_id]
    norm = K1 * (1 - B + B * dl / index.avg_doc_len)
    for tok in query_tokens:
        tf = 0
        for d, f in index.postings.get(tok, ()):
            if d == doc_id:
                tf = f
                break
        if tf == 0:
            continue
        idf = compute_idf(index.stats, tok)
        score += idf * (tf * (K1 + 1)) / (tf + norm)
    return score


def search(index: InvertedIndex, q: str, k: int) -> list[tuple[int, float]]:
    """Top-k (pair id, BM25 score) over shared query/question terms.

    Ties break toward the smaller doc id; documents scoring 0 are dropped,
    so fewer than k results may come back.  Raises EmptyQuery when the
    query normalizes to nothing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query_tokens = tokenize(normalize(q))
    if not query_tokens:
        raise EmptyQuery("query has no tokens")
    scores: dict[int, float] = {}
    for tok in query_tokens:
        for doc_id, tf in index.postings.get(tok, ()):
            if doc_id not in scores:
                scores[doc_id] = 0.0
            dl = index.doc_len[doc_id]
            norm = K1 * (1 - B + B * dl / index.avg_doc_len)
            idf = compute_idf(index.stats, tok)
            scores[doc_id] += idf * (tf * (K1 + 1)) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(d, s) for d, s in ranked[:k] if s > 0]


def load_kb(path: str | Path) -> list[QAPair]:
    """KB file: one JSON record per line {id, question, answer, scenario?}."""
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        pairs.append(QAPair(rec["id"], rec["question"], rec["answer"], rec.get("scenario")))
    return pairs


def save_kb(path: str | Path, pairs: list[QAPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            rec = {"id": p.id, "question": p.question, "answer": p.answer}
            if p.scenario is not None:
                rec["scenario"] = p.scenario
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def save_index(index: InvertedIndex, path: str | Path) -> None:
    doc = {
        "pairs": [
            {"id": p.id, "question": p.question, "answer": p.answer, "scenario": p.scenario}
            for p in index.pairs.values()
        ],
        "postings": {t: [[d, f] for d, f in plist] for t, plist in index.postings.items()},
        "doc_len": {str(d): n for d, n in index.doc_len.items()},
        "avg_doc_len": index.avg_doc_len,
        "stats": {"doc_count": index.stats.doc_count, "doc_freq": index.stats.doc_freq},
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return InvertedIndex(
        pairs={
            p["id"]: QAPair(p["id"], p["question"], p["answer"], p.get("scenario"))
            for p in doc["pairs"]
        },
        postings={t: [(d, f) for d, f in plist] for t, plist in doc["postings"].items()},
        doc_len={int(d): n for d, n in doc["doc_len"].items()},
        avg_doc_len=doc["avg_doc_len"],
        stats=CorpusStats(doc["stats"]["doc_count"], dict(doc["stats"]["doc_freq"])),
    )
