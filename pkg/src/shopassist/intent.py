"""Intent classifier: one-layer convolution-pooling network over word and
semantic-tag embeddings of a question plus its previous question's tags.

Written against plain numpy (float64 throughout) with hand-derived
gradients; ``grad_check`` validates them against central finite differences.
Training is deterministic given the seed.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .textutil import PAD_ID, UNK_ID, Vocabulary, normalize, tokenize


class EmptyDataset(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


class EmptyQuestion(ValueError):
    pass


@dataclass(frozen=True)
class IntentConfig:
    emb_dim: int = 32
    windows: tuple[int, ...] = (2, 3, 4)
    filters: int = 16
    max_len: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.max_len < max(self.windows):
            raise ValueError("max_len must cover the largest window")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 0.15
    batch_size: int = 32
    seed: int = 0


@dataclass
class IntentModel:
    vocab: Vocabulary
    labels: tuple[str, ...]  # sorted scenario ids; index = class
    cfg: IntentConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class IntentPrediction:
    label: str
    probs: np.ndarray


def init_model(
    vocab: Vocabulary,
    labels: list[str],
    cfg: IntentConfig,
    pretrained: dict[str, np.ndarray] | None = None,
) -> IntentModel:
    """Seeded parameter init; PAD row zeroed, pretrained vectors copied in."""
    rng = np.random.default_rng(cfg.seed)
    d, f = cfg.emb_dim, cfg.filters
    v = len(vocab)
    params: dict[str, np.ndarray] = {}
    emb = rng.uniform(-0.5 / d, 0.5 / d, size=(v, d))
    emb[PAD_ID] = 0.0
    if pretrained:
        for surface, vec in pretrained.items():
            if surface in vocab and len(vec) == d:
                emb[vocab.id_of(surface)] = vec
    params["emb"] = emb
    for w in sorted(cfg.windows):
        scale = np.sqrt(1.0 / (w * d))
        params[f"conv_w{w}"] = rng.uniform(-scale, scale, size=(f, w, d))
        params[f"conv_b{w}"] = np.zeros(f)
    total = f * len(cfg.windows)
    scale = np.sqrt(1.0 / total)
    params["out_w"] = rng.uniform(-scale, scale, size=(len(labels), total))
    params["out_b"] = np.zeros(len(labels))
    return IntentModel(vocab, tuple(sorted(labels)), cfg, params)


def build_input(
    q_tokens: list[str],
    q_tags: list[str],
    ctx_tags: list[str],
    vocab: Vocabulary,
    max_len: int,
) -> np.ndarray:
    """Fixed-length id sequence: words(q) ++ tags(q) ++ tags(context).

    Words are truncated (from the tail) before tags are; PAD fills the rest.
    OOV surfaces map to UNK.
    """
    tag_ids = vocab.encode(q_tags + ctx_tags)
    if len(tag_ids) >= max_len:
        ids = tag_ids[:max_len]
    else:
        room = max_len - len(tag_ids)
        ids = vocab.encode(q_tokens)[:room] + tag_ids
    ids = ids + [PAD_ID] * (max_len - len(ids))
    return np.asarray(ids, dtype=np.int64)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(model: IntentModel, ids: np.ndarray, want_cache: bool = False):
    """Batched forward pass; ids is (B, L) int64. Returns probs (B, C)."""
    p = model.params
    x = p["emb"][ids]  # (B, L, d)
    pooled_parts = []
    cache = {"x": x, "ids": ids, "per_window": {}}
    for w in sorted(model.cfg.windows):
        t = model.cfg.max_len - w + 1
        windows = np.stack([x[:, i : t + i, :] for i in range(w)], axis=2)  # (B,T,w,d)
        scores = np.einsum("btwd,fwd->btf", windows, p[f"conv_w{w}"]) + p[f"conv_b{w}"]
        activ = np.maximum(scores, 0.0)
        amax = activ.argmax(axis=1)  # (B, F), first max wins
        pooled = np.take_along_axis(activ, amax[:, None, :], axis=1)[:, 0, :]
        pooled_parts.append(pooled)
        if want_cache:
            cache["per_window"][w] = (windows, scores, amax)
    feats = np.concatenate(pooled_parts, axis=1)  # (B, F*|W|)
    logits = feats @ p["out_w"].T + p["out_b"]
    probs = _softmax(logits)
    if want_cache:
        cache["feats"] = feats
        return probs, cache
    return probs


def forward(model: IntentModel, ids: np.ndarray) -> np.ndarray:
    """Class probabilities for one input id sequence of length max_len."""
    return _forward_batch(model, ids[None, :])[0]


def _backward_batch(model: IntentModel, cache, probs: np.ndarray, y: np.ndarray):
    """Gradients of mean cross-entropy over the batch."""
    p = model.params
    b = probs.shape[0]
    f = model.cfg.filters
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dlogits = probs.copy()
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    grads["out_w"] = dlogits.T @ cache["feats"]
    grads["out_b"] = dlogits.sum(axis=0)
    dfeats = dlogits @ p["out_w"]  # (B, F*|W|)
    dx = np.zeros_like(cache["x"])
    for wi, w in enumerate(sorted(model.cfg.windows)):
        windows, scores, amax = cache["per_window"][w]
        dpooled = dfeats[:, wi * f : (wi + 1) * f]  # (B, F)
        dactiv = np.zeros_like(scores)
        np.put_along_axis(dactiv, amax[:, None, :], dpooled[:, None, :], axis=1)
        dscores = dactiv * (scores > 0.0)
        grads[f"conv_w{w}"] = np.einsum("btf,btwd->fwd", dscores, windows)
        grads[f"conv_b{w}"] = dscores.sum(axis=(0, 1))
        dwindows = np.einsum("btf,fwd->btwd", dscores, p[f"conv_w{w}"])
        t = model.cfg.max_len - w + 1
        for i in range(w):
            dx[:, i : t + i, :] += dwindows[:, :, i, :]
    np.add.at(grads["emb"], cache["ids"], dx)
    return grads


def loss_of(model: IntentModel, ids: np.ndarray, y: np.ndarray) -> float:
    probs = _forward_batch(model, ids)
    return float(-np.log(probs[np.arange(len(y)), y]).mean())


def train(
    dataset: list[tuple[np.ndarray, int]],
    labels: list[str],
    vocab: Vocabulary,
    cfg: IntentConfig,
    tcfg: TrainConfig,
    pretrained: dict[str, np.ndarray] | None = None,
) -> IntentModel:
    """Mini-batch SGD on mean cross-entropy; embeddings are fine-tuned.

    epochs=0 returns the seeded initial model untouched.
    """
    if not dataset:
        raise EmptyDataset("training set is empty")
    n_classes = len(labels)
    for _, y in dataset:
        if not 0 <= y < n_classes:
            raise LabelOutOfRange(f"label {y} outside 0..{n_classes - 1}")
    model = init_model(vocab, labels, cfg, pretrained)
    if tcfg.epochs == 0:
        return model
    ids = np.stack([x for x, _ in dataset])
    y = np.asarray([lbl for _, lbl in dataset], dtype=np.int64)
    rng = np.random.default_rng(tcfg.seed)
    n = len(dataset)
    for _epoch in range(tcfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, tcfg.batch_size):
            sel = perm[lo : lo + tcfg.batch_size]
            probs, cache = _forward_batch(model, ids[sel], want_cache=True)
            grads = _backward_batch(model, cache, probs, y[sel])
            for key, g in grads.items():
                model.params[key] -= tcfg.lr * g
    return model


def predict(
    model: IntentModel, q: str, q_tags: list[str], ctx_tags: list[str]
) -> IntentPrediction:
    """Classify one question given its tags and the previous question's tags."""
    tokens = tokenize(normalize(q))
    if not tokens:
        raise EmptyQuestion("question normalizes to nothing")
    ids = build_input(tokens, q_tags, ctx_tags, model.vocab, model.cfg.max_len)
    probs = forward(model, ids)
    return IntentPrediction(model.labels[int(np.argmax(probs))], probs)


def evaluate(model: IntentModel, dataset: list[tuple[np.ndarray, int]]) -> float:
    ids = np.stack([x for x, _ in dataset])
    y = np.asarray([lbl for _, lbl in dataset])
    probs = _forward_batch(model, ids)
    return float((probs.argmax(axis=1) == y).mean())


def grad_check(
    model: IntentModel, ids: np.ndarray, label: int, eps: float = 1e-5
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Covers every parameter; relative error uses max(|ga|, |gn|, 1e-8) as the
    denominator so exactly-zero pairs contribute 0.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-6, 1e-3]")
    batch_ids = ids[None, :]
    y = np.asarray([label])
    probs, cache = _forward_batch(model, batch_ids, want_cache=True)
    grads = _backward_batch(model, cache, probs, y)
    worst = 0.0
    for key, tensor in model.params.items():
        flat = tensor.reshape(-1)
        gflat = grads[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_of(model, batch_ids, y)
            flat[i] = orig - eps
            lo = loss_of(model, batch_ids, y)
            flat[i] = orig
            numeric = (hi - lo) / (2 * eps)
            denom = max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


# --- persistence ----------------------------------------------------------


def save_model(model: IntentModel, path: str | Path) -> None:
    """Self-describing npz; round-trips bit-exactly."""
    meta = {
        "labels": list(model.labels),
        "cfg": {
            "emb_dim": model.cfg.emb_dim,
            "windows": list(model.cfg.windows),
            "filters": model.cfg.filters,
            "max_len": model.cfg.max_len,
            "seed": model.cfg.seed,
        },
        "vocab": [model.vocab.surface_of(i) for i in range(len(model.vocab))],
    }
    arrays = {k: v for k, v in model.params.items()}
    arrays["meta"] = np.array(json.dumps(meta, ensure_ascii=False))
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> IntentModel:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"][()]))
        params = {k: data[k].copy() for k in data.files if k != "meta"}
    cfg = IntentConfig(
        emb_dim=meta["cfg"]["emb_dim"],
        windows=tuple(meta["cfg"]["windows"]),
        filters=meta["cfg"]["filters"],
        max_len=meta["cfg"]["max_len"],
        seed=meta["cfg"]["seed"],
    )
    surfaces = {s: i for i, s in enumerate(meta["vocab"]) if i >= 2}
    vocab = Vocabulary(surfaces)
    return IntentModel(vocab, tuple(meta["labels"]), cfg, params)


def load_training_file(path: str | Path) -> list[dict]:
    """Training data: one JSON record per line {text, context?, label}."""
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        records.append(
            {"text": rec["text"], "context": rec.get("context", ""), "label": rec["label"]}
        )
    return records
