#!/usr/bin/env python3
"""Intent classifier benchmark: 10 classes x 200 templated utterances, with
the tag-ablation comparison (tags on vs off) and a held-out split.

    python scripts/run_intent_benchmark.py [--seed S] [--epochs E]
"""

import argparse
import time

from shopassist import intent
from shopassist.synth import encode_intent_examples, intent_benchmark


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epochs", type=int, default=12)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--per-class", type=int, default=200)
    args = parser.parse_args()

    bench = intent_benchmark(n_classes=args.classes, per_class=args.per_class, seed=args.seed)
    cfg = intent.IntentConfig(emb_dim=32, windows=(2, 3, 4), filters=16, max_len=16,
                              seed=args.seed)
    tcfg = intent.TrainConfig(epochs=args.epochs, lr=0.25, batch_size=32, seed=args.seed)
    labels = sorted(bench.labels)

    rows = []
    for with_tags in (True, False):
        train_set = encode_intent_examples(bench, bench.train, cfg.max_len, with_tags)
        held_set = encode_intent_examples(bench, bench.held, cfg.max_len, with_tags)
        start = time.perf_counter()
        model = intent.train(train_set, labels, bench.vocab, cfg, tcfg)
        elapsed = time.perf_counter() - start
        rows.append((
            "with tags" if with_tags else "without tags",
            intent.evaluate(model, train_set),
            intent.evaluate(model, held_set),
            elapsed,
        ))

    print(f"{args.classes} classes x {args.per_class} utterances "
          f"({len(bench.train)} train / {len(bench.held)} held out)")
    print(f"{'variant':<14} {'train acc':>10} {'held acc':>10} {'train s':>9}")
    for name, train_acc, held_acc, secs in rows:
        print(f"{name:<14} {train_acc:>10.4f} {held_acc:>10.4f} {secs:>9.1f}")
    delta = rows[0][2] - rows[1][2]
    print(f"tag gain on held-out: {delta:+.4f}")


if __name__ == "__main__":
    main()
