"""Offline knowledge-graph construction pipeline.

Stages: candidate term extraction (lexicon + tf-idf), high-order entity
mining (sentence-level PMI), utterance harvesting by answer similarity
(idf-weighted sentence embeddings), and wording-pattern mining (Apriori).
All stages are pure given their inputs; outputs are canonically ordered.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .textutil import CorpusStats, compute_idf, normalize, tokenize


@dataclass(frozen=True)
class TermCandidate:
    surface: str
    pos_class: str  # noun | verb | other
    tfidf: float


@dataclass(frozen=True)
class CompoundEntity:
    first: str
    second: str
    pmi: float
    count: int  # sentences containing both terms

    @property
    def surface(self) -> str:
        return f"{self.first} {self.second}"


@dataclass
class UtteranceCluster:
    item_id: str
    utterances: list[tuple[str, float]] = field(default_factory=list)  # (question, similarity)


def load_lexicon(path: str | Path) -> dict[str, str]:
    """Lexicon file: ``surface<TAB>class`` lines; class in {noun, verb, other}."""
    lex: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        surface, cls = line.split("\t")
        lex[surface] = cls
    return lex


def extract_candidate_terms(
    corpus: list[str], lexicon: dict[str, str], tfidf_min: float
) -> list[TermCandidate]:
    """Nouns/verbs whose best per-document tf-idf clears the floor.

    tf is the raw in-document count; idf is the shared smoothed form.
    Deduplicated by surface, sorted by score descending (surface breaks ties).
    """
    docs = [tokenize(normalize(doc)) for doc in corpus]
    stats = CorpusStats.from_documents(docs)
    best: dict[str, float] = {}
    for doc in docs:
        counts: dict[str, int] = {}
        for tok in doc:
            counts[tok] = counts.get(tok, 0) + 1
        for tok, tf in counts.items():
            score = tf * compute_idf(stats, tok)
            if score > best.get(tok, 0.0):
                best[tok] = score
    out = []
    for surface, score in best.items():
        pos = lexicon.get(surface, "other")
        if pos in ("noun", "verb") and score >= tfidf_min:
            out.append(TermCandidate(surface, pos, score))
    out.sort(key=lambda c: (-c.tfidf, c.surface))
    return out


def mine_high_order(
    corpus: list[str], terms: list[str] | set[str], pmi_min: float, count_min: int
) -> list[CompoundEntity]:
    """Adjacent term pairs promoted to compound entities by PMI.

    A pair is a candidate when both tokens are known terms and appear
    adjacent in some sentence.  Probabilities come from sentence-level
    co-occurrence counts with add-one smoothing:
    PMI = ln( p(a,b) / (p(a) p(b)) ), p(x) = (count(x)+1) / (N+1).
    Pairs need raw co-occurrence count >= count_min and PMI >= pmi_min.
    """
    term_set = set(terms)
    sentences = [tokenize(normalize(s)) for s in corpus]
    n = len(sentences)
    occur: dict[str, int] = {}
    cooccur: dict[frozenset[str], int] = {}
    adjacent: set[tuple[str, str]] = set()
    for toks in sentences:
        present = {t for t in toks if t in term_set}
        for t in present:
            occur[t] = occur.get(t, 0) + 1
        for a, b in combinations(sorted(present), 2):
            cooccur[frozenset((a, b))] = cooccur.get(frozenset((a, b)), 0) + 1
        for a, b in zip(toks, toks[1:]):
            if a in term_set and b in term_set and a != b:
                adjacent.add((a, b))

    out = []
    for a, b in sorted(adjacent):
        count = cooccur.get(frozenset((a, b)), 0)
        if count < count_min:
            continue
        pmi = pmi_of(occur.get(a, 0), occur.get(b, 0), count, n)
        if pmi >= pmi_min:
            out.append(CompoundEntity(a, b, pmi, count))
    out.sort(key=lambda c: (-c.pmi, c.first, c.second))
    return out


def pmi_of(count_a: int, count_b: int, count_ab: int, n_sentences: int) -> float:
    """Add-one smoothed pointwise mutual information; symmetric in a and b."""
    n = n_sentences + 1
    p_a = (count_a + 1) / n
    p_b = (count_b + 1) / n
    p_ab = (count_ab + 1) / n
    return math.log(p_ab / (p_a * p_b))


def sentence_embed(
    text: str, vectors: dict[str, np.ndarray], stats: CorpusStats
) -> np.ndarray:
    """idf-weighted mean of token vectors, unit-normalized.

    Returns the zero vector when no token has a known embedding (the
    sentinel: cosine against anything is 0).
    """
    dim = len(next(iter(vectors.values()))) if vectors else 0
    acc = np.zeros(dim, dtype=np.float64)
    weight = 0.0
    for tok in tokenize(normalize(text)):
        vec = vectors.get(tok)
        if vec is None:
            continue
        w = compute_idf(stats, tok)
        acc += w * vec
        weight += w
    if weight == 0.0:
        return acc
    acc /= weight
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        return acc
    return acc / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    # embeddings are unit-norm or the zero sentinel, so the dot product is enough
    return float(np.dot(u, v))


def normalize_utterances(
    items: list[tuple[str, str]],
    chat_log: list[tuple[str, str]],
    tau: float,
    vectors: dict[str, np.ndarray],
    stats: CorpusStats,
) -> list[UtteranceCluster]:
    """Harvest chat-log questions whose answers are similar to an item answer.

    ``items`` are (item id, answer text); ``chat_log`` is (question, answer)
    pairs.  A chat-log pair may join multiple clusters.
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    log_vecs = [sentence_embed(ans, vectors, stats) for _, ans in chat_log]
    clusters = []
    for item_id, answer in items:
        item_vec = sentence_embed(answer, vectors, stats)
        cluster = UtteranceCluster(item_id)
        for (question, _), vec in zip(chat_log, log_vecs):
            sim = cosine(item_vec, vec)
            if sim >= tau:
                cluster.utterances.append((question, sim))
        clusters.append(cluster)
    return clusters


def mine_wording_patterns(
    utterances: list[str], min_support: float
) -> list[tuple[tuple[str, ...], float]]:
    """Apriori over utterance token sets.

    Returns every itemset with relative support >= min_support, each with
    its support, ordered by itemset size ascending then lexicographically.
    Itemsets are sorted token tuples.
    """
    if not 0.0 < min_support <= 1.0:
        raise ValueError("min_support must be in (0, 1]")
    baskets = [frozenset(tokenize(normalize(u))) for u in utterances]
    n = len(baskets)
    if n == 0:
        return []

    def frequent(count: int) -> bool:
        return count / n >= min_support

    def support_count(itemset: frozenset[str]) -> int:
        return sum(1 for b in baskets if itemset <= b)

    # L1
    item_counts: dict[str, int] = {}
    for b in baskets:
        for tok in b:
            item_counts[tok] = item_counts.get(tok, 0) + 1
    level: list[tuple[str, ...]] = sorted(
        (tok,) for tok, c in item_counts.items() if frequent(c)
    )
    results: list[tuple[tuple[str, ...], float]] = [
        (itemset, item_counts[itemset[0]] / n) for itemset in level
    ]

    while level:
        prefix_groups: dict[tuple[str, ...], list[str]] = {}
        for itemset in level:
            prefix_groups.setdefault(itemset[:-1], []).append(itemset[-1])
        frequent_prev = set(level)
        next_level: list[tuple[str, ...]] = []
        for prefix, tails in prefix_groups.items():
            tails.sort()
            for a, b in combinations(tails, 2):
                candidate = prefix + (a, b)
                # all (k-1)-subsets must already be frequent
                if any(
                    candidate[:i] + candidate[i + 1 :] not in frequent_prev
                    for i in range(len(candidate))
                ):
                    continue
                count = support_count(frozenset(candidate))
                if frequent(count):
                    next_level.append(candidate)
                    results.append((candidate, count / n))
        next_level.sort()
        level = next_level

    results.sort(key=lambda r: (len(r[0]), r[0]))
    return results


def patterns_to_rows(
    mined: list[tuple[tuple[str, ...], float]], payload_kind: str, payload_value: str
) -> list[tuple[str, str, str]]:
    """Render mined itemsets as trie-compatible pattern rows (canonical token order)."""
    return [(" ".join(itemset), payload_kind, payload_value) for itemset, _ in mined]


def save_entities(path: str | Path, entities: list[CompoundEntity]) -> None:
    """Mined-entities review file; analysts edit this before graph load."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in entities:
            fh.write(json.dumps(
                {"surface": e.surface, "first": e.first, "second": e.second,
                 "pmi": e.pmi, "count": e.count, "keep": True},
                ensure_ascii=False) + "\n")


def load_entities(path: str | Path) -> list[CompoundEntity]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("keep", True):
            out.append(CompoundEntity(rec["first"], rec["second"], rec["pmi"], rec["count"]))
    return out


def load_chat_log(path: str | Path) -> list[tuple[str, str]]:
    """Chat-log file: one JSON record per line {question, answer}."""
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        pairs.append((rec["question"], rec["answer"]))
    return pairs
