"""Synthetic desk-scale corpora for benchmarks and evaluation.

Real production data behind the pipeline is proprietary, so benchmarks here
are built from templated utterances with controlled ambiguity: intent
classes that only tags can separate, and retrieval decoys that only the
reranker can recover from.  Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .retrieval import QAPair
from .textutil import Vocabulary, normalize, tokenize

_TEMPLATES = (
    "how do i {a} my {b}",
    "i want to {a} the {b}",
    "please help me {a} {b}",
    "can you {a} my {b} now",
    "{a} {b} not working",
    "trouble with {a} {b}",
)


@dataclass
class IntentExample:
    text: str
    tags: list[str]
    ctx_tags: list[str]
    label: str


@dataclass
class IntentBenchmark:
    train: list[IntentExample]
    held: list[IntentExample]
    labels: list[str]
    vocab: Vocabulary


def intent_benchmark(
    n_classes: int = 10, per_class: int = 200, seed: int = 0, ambiguous_frac: float = 0.35
) -> IntentBenchmark:
    """Templated utterances for ``n_classes`` scenarios, in confusable pairs.

    Classes 2i and 2i+1 share a verb/noun pool; an ``ambiguous_frac`` slice
    of each class uses only shared words, so the class is recoverable there
    solely from its semantic tag.  Tags are class-informative by design.
    """
    rng = np.random.default_rng(seed)
    labels = [f"scenario_{i:02d}" for i in range(n_classes)]
    shared_verbs = {}
    shared_nouns = {}
    own_words = {}
    for pair in range((n_classes + 1) // 2):
        shared_verbs[pair] = [f"verb{pair}a", f"verb{pair}b"]
        shared_nouns[pair] = [f"noun{pair}a", f"noun{pair}b", f"noun{pair}c"]
    for i, label in enumerate(labels):
        own_words[label] = [f"kw{i}x", f"kw{i}y"]

    examples = []
    for i, label in enumerate(labels):
        pair = i // 2
        tag = f"tag_{label}"
        for j in range(per_class):
            template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
            verb = shared_verbs[pair][int(rng.integers(2))]
            ambiguous = rng.random() < ambiguous_frac
            if ambiguous:
                noun = shared_nouns[pair][int(rng.integers(3))]
            else:
                noun = own_words[label][int(rng.integers(2))]
            text = template.format(a=verb, b=noun)
            ctx_tags = [tag] if rng.random() < 0.3 else []
            examples.append(IntentExample(text, [tag], ctx_tags, label))
    order = rng.permutation(len(examples))
    examples = [examples[int(k)] for k in order]
    split = int(len(examples) * 0.8)
    train, held = examples[:split], examples[split:]

    tokens = []
    for ex in train:
        tokens.extend(tokenize(normalize(ex.text)))
        tokens.extend(ex.tags)
        tokens.extend(ex.ctx_tags)
    vocab = Vocabulary.build(iter(tokens))
    return IntentBenchmark(train, held, labels, vocab)


def encode_intent_examples(
    bench: IntentBenchmark, examples: list[IntentExample], max_len: int, with_tags: bool
) -> list[tuple[np.ndarray, int]]:
    from .intent import build_input

    label_index = {lbl: i for i, lbl in enumerate(sorted(bench.labels))}
    out = []
    for ex in examples:
        tags = ex.tags if with_tags else []
        ctx = ex.ctx_tags if with_tags else []
        ids = build_input(tokenize(normalize(ex.text)), tags, ctx, bench.vocab, max_len)
        out.append((ids, label_index[ex.label]))
    return out


@dataclass
class ParaphraseBenchmark:
    kb: list[QAPair]
    train_pairs: list[tuple[str, str]]  # (post, reply) for the reranker
    eval_set: list[tuple[str, set[str]]]  # (question, acceptable answers)


def paraphrase_benchmark(
    n_topics: int = 24, seed: int = 0, eval_per_topic: int = 9
) -> ParaphraseBenchmark:
    """Paraphrase-template evaluation for the hybrid-vs-IR ordering.

    Topics come in groups of three sharing a ``common`` term.  Each topic
    has an alias keyword that never occurs in its own KB question but is
    planted as a filler in a decoy topic's KB question, so BM25 ranks the
    decoy first on alias phrasings while the right pair stays in the top-k.
    The reranker trains on paraphrases (aliases included) and recovers them.
    """
    rng = np.random.default_rng(seed)
    topics = list(range(n_topics))
    group = {t: t // 3 for t in topics}
    kw = {t: f"thing{t}" for t in topics}
    alias = {t: f"alias{t}" for t in topics}
    answer = {t: f"resolution {t} applies" for t in topics}
    decoy = {t: (t + 3) % n_topics for t in topics}  # different group

    kb = []
    for t in topics:
        planted = alias[decoy[t]]
        kb.append(QAPair(
            id=t,
            question=f"{kw[t]} common{group[t]} {planted} question",
            answer=answer[t],
        ))

    train_pairs = []
    for t in topics:
        phrasings = [
            f"{kw[t]} common{group[t]} question",
            f"my {kw[t]} common{group[t]} broke",
            f"{alias[t]} common{group[t]} issue",
            f"help with {alias[t]} common{group[t]}",
            f"what about {kw[t]} common{group[t]}",
            f"{alias[t]} common{group[t]} please",
        ]
        for phrase in phrasings:
            train_pairs.append((phrase, answer[t]))

    eval_set = []
    for t in topics:
        for j in range(eval_per_topic):
            if j % 3 == 2:
                q = f"{alias[t]} common{group[t]} {'issue' if j % 2 else 'please'}"
            else:
                suffix = ["question", "broke", "today"][int(rng.integers(3))]
                q = f"{kw[t]} common{group[t]} {suffix}"
            eval_set.append((q, {answer[t]}))
    return ParaphraseBenchmark(kb, train_pairs, eval_set)


def toy_chat_corpus(n_pairs: int = 50, seed: int = 0) -> list[tuple[str, str]]:
    """Small open-domain corpus sized for memorization checks."""
    rng = np.random.default_rng(seed)
    posts = []
    verbs = ["like", "hate", "want", "miss", "see"]
    things = ["rain", "cats", "coffee", "music", "work", "games", "food", "books"]
    moods = ["happy", "sad", "tired", "bored", "excited"]
    for i in range(n_pairs):
        kind = i % 3
        if kind == 0:
            post = f"i {verbs[int(rng.integers(len(verbs)))]} {things[int(rng.integers(len(things)))]} {i}"
            reply = f"tell me more about that {i}"
        elif kind == 1:
            post = f"i feel {moods[int(rng.integers(len(moods)))]} today {i}"
            reply = f"i hear you friend {i}"
        else:
            post = f"question {i} what do you think"
            reply = f"thought {i} sounds good"
        posts.append((post, reply))
    return posts
