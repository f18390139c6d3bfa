"""Hybrid chat engine: retrieve candidates, rerank them with an attentive
encoder-decoder, fall back to generation under a confidence threshold.

The sequence model is a single-layer GRU encoder and GRU decoder with
additive attention, written directly in numpy (float64) with hand-derived
gradients.  Confidence of a candidate is the geometric mean of its per-token
teacher-forced probabilities, so it always lies in (0, 1].
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import retrieval
from .textutil import PAD_ID, UNK_ID, Vocabulary, normalize, tokenize

BOS, EOS = "<bos>", "<eos>"


class EmptyCorpus(ValueError):
    pass


class EmptyCandidate(ValueError):
    pass


@dataclass(frozen=True)
class Seq2SeqConfig:
    hidden: int = 32
    emb_dim: int = 16
    max_decode_len: int = 12
    seed: int = 0


@dataclass(frozen=True)
class ChatTrainConfig:
    epochs: int = 200
    lr: float = 0.01
    seed: int = 0
    clip: float = 5.0


@dataclass
class Seq2SeqModel:
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    cfg: Seq2SeqConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def bos_id(self) -> int:
        return self.tgt_vocab.id_of(BOS)

    @property
    def eos_id(self) -> int:
        return self.tgt_vocab.id_of(EOS)


@dataclass(frozen=True)
class ScoredCandidate:
    answer: str
    retrieval_score: float
    confidence: float
    pair_id: int


@dataclass(frozen=True)
class ChatResponse:
    text: str
    source: str  # "reranked_candidate" | "generated"
    confidence: float


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def init_model(src_vocab: Vocabulary, tgt_vocab: Vocabulary, cfg: Seq2SeqConfig) -> Seq2SeqModel:
    rng = np.random.default_rng(cfg.seed)
    h, d = cfg.hidden, cfg.emb_dim
    scale = 0.08

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    params = {
        "e_src": u(len(src_vocab), d),
        "e_tgt": u(len(tgt_vocab), d),
        "enc_w": u(3 * h, d),
        "enc_u": u(3 * h, h),
        "enc_b": np.zeros(3 * h),
        "dec_w": u(3 * h, d + h),
        "dec_u": u(3 * h, h),
        "dec_b": np.zeros(3 * h),
        "att_w": u(h, h),
        "att_u": u(h, h),
        "att_v": u(h),
        "out_w": u(len(tgt_vocab), 2 * h),
        "out_b": np.zeros(len(tgt_vocab)),
    }
    params["e_src"][PAD_ID] = 0.0
    params["e_tgt"][PAD_ID] = 0.0
    return Seq2SeqModel(src_vocab, tgt_vocab, cfg, params)


def _gru_forward(pre_x: np.ndarray, h_prev: np.ndarray, u_mat: np.ndarray, b: np.ndarray):
    """One GRU step from precomputed W@x; returns (h, cache)."""
    h = h_prev.shape[0]
    uh = u_mat @ h_prev
    z = _sigmoid(pre_x[:h] + uh[:h] + b[:h])
    r = _sigmoid(pre_x[h : 2 * h] + uh[h : 2 * h] + b[h : 2 * h])
    un = uh[2 * h :]
    n = np.tanh(pre_x[2 * h :] + r * un + b[2 * h :])
    h_new = (1.0 - z) * n + z * h_prev
    return h_new, (z, r, un, n, h_prev)


def _gru_backward(dh: np.ndarray, cache, x: np.ndarray, w_mat: np.ndarray, u_mat: np.ndarray,
                  dw: np.ndarray, du: np.ndarray, db: np.ndarray):
    """Backprop one GRU step; returns (dx, dh_prev). Accumulates dw/du/db."""
    z, r, un, n, h_prev = cache
    dn = dh * (1.0 - z)
    dh_prev = dh * z
    dz = dh * (h_prev - n)
    dn_pre = dn * (1.0 - n * n)
    dr = dn_pre * un
    dun = dn_pre * r
    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)
    dgates = np.concatenate([dz_pre, dr_pre, dn_pre])
    dw += np.outer(dgates, x)
    db += dgates
    dgates_u = np.concatenate([dz_pre, dr_pre, dun])
    du += np.outer(dgates_u, h_prev)
    dx = w_mat.T @ dgates
    dh_prev = dh_prev + u_mat.T @ dgates_u
    return dx, dh_prev


def _encode(model: Seq2SeqModel, src_ids: list[int]):
    p = model.params
    h = model.cfg.hidden
    xs = p["e_src"][src_ids]  # (S, d)
    pre = xs @ p["enc_w"].T  # (S, 3h)
    states = np.zeros((len(src_ids), h))
    caches = []
    h_prev = np.zeros(h)
    for t in range(len(src_ids)):
        h_prev, cache = _gru_forward(pre[t], h_prev, p["enc_u"], p["enc_b"])
        states[t] = h_prev
        caches.append(cache)
    return states, caches, xs


def _attend(model: Seq2SeqModel, s_prev: np.ndarray, states: np.ndarray, keys: np.ndarray):
    p = model.params
    att_pre = np.tanh(p["att_w"] @ s_prev + keys)  # (S, h)
    e = att_pre @ p["att_v"]
    alpha = _softmax(e)
    context = alpha @ states
    return alpha, att_pre, context


def _decode_step(model: Seq2SeqModel, y_prev: int, s_prev: np.ndarray,
                 states: np.ndarray, keys: np.ndarray):
    p = model.params
    alpha, att_pre, context = _attend(model, s_prev, states, keys)
    x = np.concatenate([p["e_tgt"][y_prev], context])
    pre = p["dec_w"] @ x
    s_new, gru_cache = _gru_forward(pre, s_prev, p["dec_u"], p["dec_b"])
    o = np.concatenate([s_new, context])
    probs = _softmax(p["out_w"] @ o + p["out_b"])
    cache = (y_prev, s_prev, alpha, att_pre, context, x, gru_cache, s_new, o, probs)
    return s_new, probs, alpha, cache


def _seq_loss_and_grads(model: Seq2SeqModel, src_ids: list[int], tgt_ids: list[int],
                        grads: dict[str, np.ndarray] | None):
    """Teacher-forced loss (summed over tokens) for one pair; accumulates grads.

    Returns (loss_sum, n_tokens).  With grads=None only the loss is computed.
    """
    p = model.params
    h = model.cfg.hidden
    states, enc_caches, xs = _encode(model, src_ids)
    keys = states @ p["att_u"].T
    s = states[-1]
    caches = []
    loss = 0.0
    inputs = [model.bos_id] + tgt_ids[:-1]
    for y_in, y_out in zip(inputs, tgt_ids):
        s, probs, _alpha, cache = _decode_step(model, y_in, s, states, keys)
        loss -= np.log(probs[y_out])
        caches.append(cache)
    if grads is None:
        return float(loss), len(tgt_ids)

    d_states = np.zeros_like(states)
    ds = np.zeros(h)
    for (y_in, y_out), cache in zip(reversed(list(zip(inputs, tgt_ids))), reversed(caches)):
        (_, s_prev, alpha, att_pre, context, x, gru_cache, s_new, o, probs) = cache
        dlogits = probs.copy()
        dlogits[y_out] -= 1.0
        grads["out_w"] += np.outer(dlogits, o)
        grads["out_b"] += dlogits
        do = p["out_w"].T @ dlogits
        ds_t = do[:h] + ds
        dcontext = do[h:].copy()
        dx, ds_prev = _gru_backward(ds_t, gru_cache, x, p["dec_w"], p["dec_u"],
                                    grads["dec_w"], grads["dec_u"], grads["dec_b"])
        grads["e_tgt"][y_in] += dx[: model.cfg.emb_dim]
        dcontext += dx[model.cfg.emb_dim :]
        # attention backward
        dalpha = states @ dcontext
        d_states += np.outer(alpha, dcontext)
        de = alpha * (dalpha - float(alpha @ dalpha))
        grads["att_v"] += att_pre.T @ de
        datt_pre = np.outer(de, p["att_v"])
        dpre = datt_pre * (1.0 - att_pre * att_pre)  # (S, h)
        dq = dpre.sum(axis=0)
        grads["att_w"] += np.outer(dq, s_prev)
        ds_prev = ds_prev + p["att_w"].T @ dq
        grads["att_u"] += dpre.T @ states
        d_states += dpre @ p["att_u"]
        ds = ds_prev
    d_states[-1] += ds

    dh = np.zeros(h)
    dxs = np.zeros_like(xs)
    for t in range(len(src_ids) - 1, -1, -1):
        dh = dh + d_states[t]
        dx, dh = _gru_backward(dh, enc_caches[t], xs[t], p["enc_w"], p["enc_u"],
                               grads["enc_w"], grads["enc_u"], grads["enc_b"])
        dxs[t] = dx
    np.add.at(grads["e_src"], src_ids, dxs)
    return float(loss), len(tgt_ids)


def _encode_src(model: Seq2SeqModel, text: str) -> list[int]:
    ids = model.src_vocab.encode(tokenize(normalize(text)))
    return ids if ids else [UNK_ID]


def _encode_tgt(model: Seq2SeqModel, text: str) -> list[int]:
    return model.tgt_vocab.encode(tokenize(normalize(text)))


def train_seq2seq(
    corpus: list[tuple[str, str]],
    cfg: Seq2SeqConfig = Seq2SeqConfig(),
    tcfg: ChatTrainConfig = ChatTrainConfig(),
) -> Seq2SeqModel:
    """Teacher-forced training with Adam; deterministic given the seed.

    Targets are reply tokens followed by EOS.  epochs=0 returns the seeded
    initialization unchanged.
    """
    if not corpus:
        raise EmptyCorpus("chat corpus is empty")
    src_vocab = Vocabulary.build(
        tok for post, _ in corpus for tok in tokenize(normalize(post))
    )
    tgt_tokens = [BOS, EOS]
    for _, reply in corpus:
        tgt_tokens.extend(tokenize(normalize(reply)))
    tgt_vocab = Vocabulary.build(iter(tgt_tokens))
    model = init_model(src_vocab, tgt_vocab, cfg)
    if tcfg.epochs == 0:
        return model

    pairs = [
        (_encode_src(model, post), _encode_tgt(model, reply) + [model.eos_id])
        for post, reply in corpus
    ]
    rng = np.random.default_rng(tcfg.seed)
    m_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    v_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    for _epoch in range(tcfg.epochs):
        for idx in rng.permutation(len(pairs)):
            src_ids, tgt_ids = pairs[idx]
            grads = {k: np.zeros_like(v) for k, v in model.params.items()}
            _, n_tok = _seq_loss_and_grads(model, src_ids, tgt_ids, grads)
            step += 1
            for key, g in grads.items():
                g /= n_tok
                norm = float(np.sqrt((g * g).sum()))
                if norm > tcfg.clip:
                    g *= tcfg.clip / norm
                m_state[key] = beta1 * m_state[key] + (1 - beta1) * g
                v_state[key] = beta2 * v_state[key] + (1 - beta2) * g * g
                m_hat = m_state[key] / (1 - beta1**step)
                v_hat = v_state[key] / (1 - beta2**step)
                model.params[key] -= tcfg.lr * m_hat / (np.sqrt(v_hat) + eps)
    return model


def corpus_loss(model: Seq2SeqModel, corpus: list[tuple[str, str]]) -> float:
    """Mean per-token teacher-forced cross-entropy over the corpus."""
    total, tokens = 0.0, 0
    for post, reply in corpus:
        loss, n = _seq_loss_and_grads(
            model, _encode_src(model, post), _encode_tgt(model, reply) + [model.eos_id], None
        )
        total += loss
        tokens += n
    return total / max(tokens, 1)


def teacher_forced_accuracy(model: Seq2SeqModel, corpus: list[tuple[str, str]]) -> float:
    """Fraction of reply tokens (incl. EOS) the model predicts at argmax."""
    hit, total = 0, 0
    for post, reply in corpus:
        src_ids = _encode_src(model, post)
        tgt_ids = _encode_tgt(model, reply) + [model.eos_id]
        states, _, _ = _encode(model, src_ids)
        keys = states @ model.params["att_u"].T
        s = states[-1]
        for y_in, y_out in zip([model.bos_id] + tgt_ids[:-1], tgt_ids):
            s, probs, _, _ = _decode_step(model, y_in, s, states, keys)
            hit += int(int(np.argmax(probs)) == y_out)
            total += 1
    return hit / max(total, 1)


def score_candidate(model: Seq2SeqModel, q: str, candidate_text: str) -> float:
    """Geometric-mean per-token probability of the candidate as the reply to q."""
    tgt_ids = _encode_tgt(model, candidate_text)
    if not tgt_ids:
        raise EmptyCandidate("candidate text has no tokens")
    src_ids = _encode_src(model, q)
    states, _, _ = _encode(model, src_ids)
    keys = states @ model.params["att_u"].T
    s = states[-1]
    log_sum = 0.0
    for y_in, y_out in zip([model.bos_id] + tgt_ids[:-1], tgt_ids):
        s, probs, _, _ = _decode_step(model, y_in, s, states, keys)
        log_sum += float(np.log(probs[y_out]))
    return float(np.exp(log_sum / len(tgt_ids)))


def decode_greedy(model: Seq2SeqModel, q: str) -> tuple[list[int], list[np.ndarray]]:
    """Greedy decode; returns (token ids incl. EOS if reached, attention rows)."""
    src_ids = _encode_src(model, q)
    states, _, _ = _encode(model, src_ids)
    keys = states @ model.params["att_u"].T
    s = states[-1]
    y = model.bos_id
    out_ids: list[int] = []
    attentions: list[np.ndarray] = []
    for _ in range(model.cfg.max_decode_len):
        s, probs, alpha, _ = _decode_step(model, y, s, states, keys)
        attentions.append(alpha)
        y = int(np.argmax(probs))  # ties resolve to the smaller id
        out_ids.append(y)
        if y == model.eos_id:
            break
    return out_ids, attentions


def generate(model: Seq2SeqModel, q: str) -> str:
    """Greedy reply with special/UNK tokens stripped from the surface."""
    out_ids, _ = decode_greedy(model, q)
    special = {PAD_ID, UNK_ID, model.bos_id, model.eos_id}
    return " ".join(model.tgt_vocab.surface_of(i) for i in out_ids if i not in special)


def chat_answer(
    q: str,
    index: retrieval.InvertedIndex,
    model: Seq2SeqModel,
    k: int = 5,
    threshold: float = 0.3,
) -> ChatResponse:
    """Rerank top-k retrieved answers; generate when none clears the threshold.

    Candidate ties break by higher retrieval score, then smaller pair id.
    """
    hits = retrieval.search(index, q, k)
    candidates = [
        ScoredCandidate(
            answer=index.pairs[pid].answer,
            retrieval_score=score,
            confidence=score_candidate(model, q, index.pairs[pid].answer),
            pair_id=pid,
        )
        for pid, score in hits
    ]
    if candidates:
        best = max(candidates, key=lambda c: (c.confidence, c.retrieval_score, -c.pair_id))
        if best.confidence >= threshold:
            return ChatResponse(best.answer, "reranked_candidate", best.confidence)
        top_conf = best.confidence
    else:
        top_conf = 0.0
    return ChatResponse(generate(model, q), "generated", top_conf)


# --- persistence and corpus I/O -------------------------------------------


def save_model(model: Seq2SeqModel, path: str | Path) -> None:
    meta = {
        "cfg": {
            "hidden": model.cfg.hidden,
            "emb_dim": model.cfg.emb_dim,
            "max_decode_len": model.cfg.max_decode_len,
            "seed": model.cfg.seed,
        },
        "src_vocab": [model.src_vocab.surface_of(i) for i in range(len(model.src_vocab))],
        "tgt_vocab": [model.tgt_vocab.surface_of(i) for i in range(len(model.tgt_vocab))],
    }
    arrays = dict(model.params)
    arrays["meta"] = np.array(json.dumps(meta, ensure_ascii=False))
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> Seq2SeqModel:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"][()]))
        params = {k: data[k].copy() for k in data.files if k != "meta"}
    cfg = Seq2SeqConfig(**meta["cfg"])
    src_vocab = Vocabulary({s: i for i, s in enumerate(meta["src_vocab"]) if i >= 2})
    tgt_vocab = Vocabulary({s: i for i, s in enumerate(meta["tgt_vocab"]) if i >= 2})
    return Seq2SeqModel(src_vocab, tgt_vocab, cfg, params)


def load_chat_corpus(path: str | Path) -> list[tuple[str, str]]:
    """Chat corpus: one JSON record per line {post, reply}."""
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        pairs.append((rec["post"], rec["reply"]))
    return pairs


def grad_check(model: Seq2SeqModel, src_ids: list[int], tgt_ids: list[int],
               eps: float = 1e-5) -> float:
    """Analytic vs central-difference gradients over every parameter."""
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    loss, n_tok = _seq_loss_and_grads(model, src_ids, tgt_ids, grads)
    worst = 0.0
    for key, tensor in model.params.items():
        flat = tensor.reshape(-1)
        gflat = grads[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi, _ = _seq_loss_and_grads(model, src_ids, tgt_ids, None)
            flat[i] = orig - eps
            lo, _ = _seq_loss_and_grads(model, src_ids, tgt_ids, None)
            flat[i] = orig
            numeric = (hi - lo) / (2 * eps)
            denom = max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
