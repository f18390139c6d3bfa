"""Word-vector file I/O shared by the intent model and sentence embedding.

Format: first line ``count dim``; then one ``surface v1 ... v_dim`` per line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def load_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        return {}
    count, dim = (int(x) for x in lines[0].split())
    vectors: dict[str, np.ndarray] = {}
    for line in lines[1 : count + 1]:
        parts = line.rstrip().split(" ")
        surface = parts[0]
        vec = np.array([float(x) for x in parts[1 : dim + 1]], dtype=np.float64)
        if vec.shape[0] != dim:
            raise ValueError(f"embedding row for {surface!r} has wrong dimension")
        vectors[surface] = vec
    return vectors


def save_embeddings(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    if vectors:
        dim = len(next(iter(vectors.values())))
    else:
        dim = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for surface, vec in vectors.items():
            fh.write(surface + " " + " ".join(repr(float(x)) for x in vec) + "\n")
