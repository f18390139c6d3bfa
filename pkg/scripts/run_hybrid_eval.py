#!/usr/bin/env python3
"""Hybrid-vs-IR evaluation on the synthetic paraphrase benchmark.

Trains the reranker on paraphrase/answer pairs, then reports P_top1 for
pure retrieval, pure generation and the hybrid rerank-with-fallback, plus a
threshold sweep.

    python scripts/run_hybrid_eval.py [--seed S] [--epochs E] [--k K]
"""

import argparse
import time

from shopassist import chat, retrieval
from shopassist.cli import run_eval
from shopassist.synth import paraphrase_benchmark


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=120)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--threshold", type=float, default=0.2)
    args = parser.parse_args()

    bench = paraphrase_benchmark(n_topics=24, seed=args.seed, eval_per_topic=9)
    index = retrieval.build_index(bench.kb)
    cfg = chat.Seq2SeqConfig(hidden=32, emb_dim=16, max_decode_len=8, seed=args.seed)
    start = time.perf_counter()
    model = chat.train_seq2seq(
        bench.train_pairs, cfg,
        chat.ChatTrainConfig(epochs=args.epochs, lr=0.02, seed=args.seed),
    )
    train_s = time.perf_counter() - start

    report = run_eval(bench.eval_set, ["ir", "seq2seq", "hybrid"],
                      k=args.k, threshold=args.threshold, index=index, model=model,
                      seed=args.seed)
    print(f"kb {len(bench.kb)} pairs, reranker trained on {len(bench.train_pairs)} "
          f"pairs in {train_s:.0f}s, eval {report.total} questions")
    for system in ("ir", "seq2seq", "hybrid"):
        print(f"P_top1[{system:8s}] = {report.p_top1[system]:.4f}")

    print("\nthreshold sweep (hybrid):")
    for t10 in range(1, 10):
        t = t10 / 10
        rep = run_eval(bench.eval_set, ["hybrid"], k=args.k, threshold=t,
                       index=index, model=model, seed=args.seed)
        print(f"  T={t:.1f}  P_top1={rep.p_top1['hybrid']:.4f}")


if __name__ == "__main__":
    main()
