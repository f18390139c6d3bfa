"""Command-line toolchain: offline stages, evaluation, repl and serving.

Every subcommand is deterministic given ``--seed``; exit code is 0 on
success and 1 with a diagnostic on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import chat, intent, kgbuild, retrieval
from .appconfig import AppConfig, StartupError, build_engines
from .embeddings import load_embeddings
from .router import Router, trace_to_dict
from .service import AssistantService, SessionStore
from .textutil import CorpusStats, Vocabulary, normalize, tokenize
from .trie import write_pattern_file


class EmptyEvalSet(ValueError):
    pass


@dataclass
class EvalReport:
    p_top1: dict[str, float]
    total: int
    acceptable: dict[str, int]
    k: int
    threshold: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "p_top1": self.p_top1,
            "total": self.total,
            "acceptable": self.acceptable,
            "config": {"k": self.k, "threshold": self.threshold, "seed": self.seed},
        }


def run_eval(
    labeled: list[tuple[str, set[str]]],
    systems: list[str],
    k: int,
    threshold: float,
    index: retrieval.InvertedIndex,
    model: chat.Seq2SeqModel | None,
    seed: int = 0,
) -> EvalReport:
    """P_top1 per system: is the top-1 output in the acceptable set?

    Acceptability is exact string match after normalization.
    """
    if not labeled:
        raise EmptyEvalSet("evaluation set is empty")
    counts = {s: 0 for s in systems}
    for question, acceptable in labeled:
        normalized = {normalize(a) for a in acceptable}
        for system in systems:
            if system == "ir":
                hits = retrieval.search(index, question, k)
                out = index.pairs[hits[0][0]].answer if hits else ""
            elif system == "seq2seq":
                out = chat.generate(model, question)
            elif system == "hybrid":
                out = chat.chat_answer(question, index, model, k, threshold).text
            else:
                raise ValueError(f"unknown system {system!r}")
            if normalize(out) in normalized:
                counts[system] += 1
    total = len(labeled)
    return EvalReport(
        p_top1={s: counts[s] / total for s in systems},
        total=total,
        acceptable=counts,
        k=k,
        threshold=threshold,
        seed=seed,
    )


def load_eval_file(path: str | Path) -> list[tuple[str, set[str]]]:
    """Labeled eval file: one JSON record per line {question, acceptable: [...]}."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        out.append((rec["question"], set(rec["acceptable"])))
    return out


# --- subcommand implementations -------------------------------------------


def _cmd_train_intent(args) -> int:
    records = intent.load_training_file(args.data)
    if not records:
        print("error: training file is empty", file=sys.stderr)
        return 1
    tagger = None
    if args.graph_nodes:
        from .kg import load_graph, parse_semantic_tags

        graph = load_graph(args.graph_nodes, args.graph_edges, args.graph_items)

        def tagger(text):
            return [t.node_id for t in parse_semantic_tags(text, graph)] if text else []

    labels = sorted({r["label"] for r in records})
    label_index = {lbl: i for i, lbl in enumerate(labels)}
    featurized = []
    for r in records:
        q_tags = tagger(r["text"]) if tagger else []
        ctx_tags = tagger(r["context"]) if tagger else []
        featurized.append((tokenize(normalize(r["text"])), q_tags, ctx_tags, r["label"]))
    tokens = []
    for words, q_tags, ctx_tags, _ in featurized:
        tokens.extend(words)
        tokens.extend(q_tags)
        tokens.extend(ctx_tags)
    vocab = Vocabulary.build(iter(tokens))
    cfg = intent.IntentConfig(
        emb_dim=args.emb_dim, windows=tuple(args.windows), filters=args.filters,
        max_len=args.max_len, seed=args.seed,
    )
    dataset = []
    for words, q_tags, ctx_tags, label in featurized:
        ids = intent.build_input(words, q_tags, ctx_tags, vocab, cfg.max_len)
        dataset.append((ids, label_index[label]))
    pretrained = load_embeddings(args.embeddings) if args.embeddings else None
    tcfg = intent.TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch,
                              seed=args.seed)
    model = intent.train(dataset, labels, vocab, cfg, tcfg, pretrained)
    intent.save_model(model, args.out)
    acc = intent.evaluate(model, dataset)
    print(f"trained intent model on {len(dataset)} examples, "
          f"{len(labels)} classes; train accuracy {acc:.4f}; saved to {args.out}")
    return 0


def _cmd_build_kg(args) -> int:
    corpus = [ln for ln in Path(args.corpus).read_text(encoding="utf-8").splitlines()
              if ln.strip()]
    lexicon = kgbuild.load_lexicon(args.lexicon)
    terms = kgbuild.extract_candidate_terms(corpus, lexicon, args.tfidf_min)
    entities = kgbuild.mine_high_order(
        corpus, {t.surface for t in terms}, args.pmi_min, args.count_min
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "terms.jsonl", "w", encoding="utf-8") as fh:
        for t in terms:
            fh.write(json.dumps(
                {"surface": t.surface, "pos": t.pos_class, "tfidf": t.tfidf}) + "\n")
    kgbuild.save_entities(out_dir / "entities.jsonl", entities)
    clusters = []
    if args.items and args.chatlog:
        vectors = load_embeddings(args.embeddings) if args.embeddings else {}
        chat_log = kgbuild.load_chat_log(args.chatlog)
        stats = CorpusStats.from_documents(
            [tokenize(normalize(line)) for line in corpus]
        )
        items = []
        for line in Path(args.items).read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = json.loads(line)
                items.append((rec["id"], rec["answer"]))
        clusters = kgbuild.normalize_utterances(items, chat_log, args.tau, vectors, stats)
        with open(out_dir / "clusters.jsonl", "w", encoding="utf-8") as fh:
            for c in clusters:
                fh.write(json.dumps({
                    "item_id": c.item_id,
                    "utterances": [[q, s] for q, s in c.utterances],
                }, ensure_ascii=False) + "\n")
    print(f"extracted {len(terms)} terms, {len(entities)} compound entities, "
          f"{len(clusters)} utterance clusters into {out_dir}")
    print("review entities.jsonl (flip \"keep\" to false to drop a row) before mining patterns")
    return 0


def _cmd_mine_patterns(args) -> int:
    rows = []
    for line in Path(args.clusters).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        utterances = [q for q, _ in rec["utterances"]]
        mined = kgbuild.mine_wording_patterns(utterances, args.min_support)
        rows.extend(kgbuild.patterns_to_rows(mined, args.payload_kind, rec["item_id"]))
    write_pattern_file(args.out, rows)
    print(f"wrote {len(rows)} wording patterns to {args.out}")
    return 0


def _cmd_index_kb(args) -> int:
    kb = retrieval.load_kb(getattr(args, "in"))
    index = retrieval.build_index(kb)
    retrieval.save_index(index, args.out)
    print(f"indexed {len(kb)} qa pairs into {args.out}")
    return 0


def _cmd_train_chat(args) -> int:
    corpus = chat.load_chat_corpus(args.corpus)
    cfg = chat.Seq2SeqConfig(hidden=args.hidden, emb_dim=args.emb_dim,
                             max_decode_len=args.max_decode_len, seed=args.seed)
    tcfg = chat.ChatTrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed)
    model = chat.train_seq2seq(corpus, cfg, tcfg)
    chat.save_model(model, args.out)
    acc = chat.teacher_forced_accuracy(model, corpus)
    print(f"trained chat model on {len(corpus)} pairs; "
          f"teacher-forced token accuracy {acc:.4f}; saved to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    labeled = load_eval_file(args.qa)
    if not args.index and not args.kb:
        print("error: eval needs --kb or --index", file=sys.stderr)
        return 1
    if args.index:
        index = retrieval.load_index(args.index)
    else:
        index = retrieval.build_index(retrieval.load_kb(args.kb))
    model = chat.load_model(args.chat_model) if args.chat_model else None
    systems = args.systems.split(",")
    if model is None and ({"seq2seq", "hybrid"} & set(systems)):
        print("error: --chat-model is required for seq2seq/hybrid", file=sys.stderr)
        return 1
    report = run_eval(labeled, systems, args.k, args.threshold, index, model, args.seed)
    print(json.dumps(report.to_dict(), indent=2))
    for system in systems:
        print(f"P_top1[{system}] = {report.p_top1[system]:.4f}")
    return 0


def _make_service(config_path: str | None, journal_override: str | None = None) -> AssistantService:
    cfg = AppConfig.load(config_path)
    engines, router_config = build_engines(cfg)
    journal = journal_override if journal_override is not None else (cfg.journal_path or None)
    store = SessionStore(journal_path=journal)
    return AssistantService(Router(engines, router_config), store)


def _cmd_repl(args) -> int:
    service = _make_service(args.config)
    print("type a message (ctrl-d to quit)")
    session_id = None
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        envelope = service.handle_message(text, session_id, debug=args.verbose)
        session_id = envelope["session_id"]
        print(f"[{envelope['source']}] {envelope['reply']}")
        if args.verbose and "trace" in envelope:
            print(json.dumps(envelope["trace"], ensure_ascii=False))
    return 0


def _cmd_serve(args) -> int:
    from .service import start_server

    cfg = AppConfig.load(args.config)
    if args.port:
        cfg.port = args.port
    start_server(cfg)
    return 0


def _cmd_make_demo(args) -> int:
    from .demo import write_demo_files

    config = write_demo_files(args.out_dir)
    print(f"demo artifacts written to {args.out_dir}")
    print(f"serve with: shopassist serve --config {Path(args.out_dir) / 'config.json'}")
    _ = config
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="shared config file (JSON)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="shopassist", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("train-intent", help="train the intent classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--graph-nodes", default=None,
                   help="tag questions with this graph's semantic parser")
    p.add_argument("--graph-edges", default=None)
    p.add_argument("--graph-items", default=None)
    p.add_argument("--emb-dim", type=int, default=32)
    p.add_argument("--windows", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--filters", type=int, default=16)
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.15)
    p.add_argument("--batch", type=int, default=32)
    p.set_defaults(func=_cmd_train_intent)

    p = add_parser("build-kg", help="mine terms, compound entities and clusters")
    p.add_argument("--corpus", required=True, help="one document per line")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--items", default=None, help="knowledge items jsonl ({id, answer})")
    p.add_argument("--chatlog", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tfidf-min", type=float, default=1.0)
    p.add_argument("--pmi-min", type=float, default=0.5)
    p.add_argument("--count-min", type=int, default=2)
    p.add_argument("--tau", type=float, default=0.85)
    p.set_defaults(func=_cmd_build_kg)

    p = add_parser("mine-patterns", help="frequent-itemset wording patterns")
    p.add_argument("--clusters", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-support", type=float, default=0.4)
    p.add_argument("--payload-kind", default="tag")
    p.set_defaults(func=_cmd_mine_patterns)

    p = add_parser("index-kb", help="build a bm25 index from a kb file")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index_kb)

    p = add_parser("train-chat", help="train the seq2seq reranker/generator")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--emb-dim", type=int, default=16)
    p.add_argument("--max-decode-len", type=int, default=12)
    p.set_defaults(func=_cmd_train_chat)

    p = add_parser("eval", help="P_top1 per system on a labeled file")
    p.add_argument("--qa", required=True)
    p.add_argument("--kb", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--chat-model", default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--systems", default="ir,seq2seq,hybrid")
    p.set_defaults(func=_cmd_eval)

    p = add_parser("repl", help="interactive loop over the same router as serve")
    p.set_defaults(func=_cmd_repl)

    p = add_parser("serve", help="start the http service")
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    p = add_parser("make-demo", help="write the deterministic demo artifact bundle")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_make_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, StartupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
