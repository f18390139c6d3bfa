"""Text normalization, tokenization, vocabulary and document-frequency stats.

Every other module funnels text through ``normalize`` + ``tokenize`` so the
whole pipeline shares one notion of a token.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


def normalize(text: str) -> str:
    """Lowercase, NFKC-fold and collapse whitespace. Total function."""
    text = unicodedata.normalize("NFKC", text).lower()
    return " ".join(text.split())


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return (
        0x4E00 <= code <= 0x9FFF
        or 0x3400 <= code <= 0x4DBF
        or 0xF900 <= code <= 0xFAFF
        or 0x3040 <= code <= 0x30FF  # kana
    )


def _units(text: str) -> list[str]:
    """Split into atomic units: alphanumeric words, with CJK runs broken into
    single characters and punctuation characters kept as their own units."""
    units: list[str] = []
    for chunk in text.split():
        word = ""
        for ch in chunk:
            if _is_cjk(ch) or not ch.isalnum():
                if word:
                    units.append(word)
                    word = ""
                units.append(ch)
            else:
                word += ch
        if word:
            units.append(word)
    return units


def _join_units(units: list[str]) -> str:
    """Re-join units: single spaces between word units, none between CJK chars."""
    out = ""
    prev_cjk = False
    for u in units:
        u_cjk = len(u) == 1 and _is_cjk(u)
        if out and not (prev_cjk and u_cjk):
            out += " "
        out += u
        prev_cjk = u_cjk
    return out


def tokenize(text: str, term_dict: set[str] | None = None) -> list[str]:
    """Segment normalized text into token surfaces.

    Whitespace-delimited words stay whole; CJK runs fall back to one token
    per character.  When ``term_dict`` is given, greedy longest match merges
    unit runs into dictionary terms (multi-word terms keep their internal
    spaces; CJK terms are joined without separators).
    """
    units = _units(text)
    if not term_dict:
        return units
    entries: dict[tuple[str, ...], str] = {}
    max_len = 1
    for term in term_dict:
        key = tuple(_units(term))
        if key:
            entries[key] = _join_units(list(key))
            max_len = max(max_len, len(key))
    tokens: list[str] = []
    i = 0
    while i < len(units):
        matched = None
        for k in range(min(max_len, len(units) - i), 1, -1):
            surface = entries.get(tuple(units[i : i + k]))
            if surface is not None:
                matched = (k, surface)
                break
        if matched:
            tokens.append(matched[1])
            i += matched[0]
        else:
            tokens.append(units[i])
            i += 1
    return tokens


@dataclass(frozen=True)
class Token:
    surface: str
    id: int

    def __post_init__(self):
        if not self.surface:
            raise ValueError("token surface must be non-empty")
        if self.id < 0:
            raise ValueError("token id must be non-negative")


class Vocabulary:
    """Dense surface -> id map with PAD=0 and UNK=1 reserved.

    Immutable once built; ``build`` is the only growth path.
    """

    def __init__(self, surfaces: dict[str, int] | None = None):
        self._ids: dict[str, int] = {PAD: PAD_ID, UNK: UNK_ID}
        if surfaces:
            for surface, idx in surfaces.items():
                self._ids[surface] = idx
        self._surfaces = {i: s for s, i in self._ids.items()}
        ids = sorted(self._surfaces)
        if ids != list(range(len(ids))):
            raise ValueError("vocabulary ids must be dense 0..size-1")

    @classmethod
    def build(cls, token_iter) -> "Vocabulary":
        surfaces: dict[str, int] = {}
        next_id = 2
        for tok in token_iter:
            if tok not in (PAD, UNK) and tok not in surfaces:
                surfaces[tok] = next_id
                next_id += 1
        return cls(surfaces)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, surface: str) -> bool:
        return surface in self._ids

    def id_of(self, surface: str) -> int:
        return self._ids.get(surface, UNK_ID)

    def surface_of(self, idx: int) -> str:
        return self._surfaces[idx]

    def encode(self, surfaces: list[str]) -> list[int]:
        return [self.id_of(s) for s in surfaces]

    def save(self, path: str | Path) -> None:
        lines = [f"{self._surfaces[i]}\t{i}" for i in sorted(self._surfaces)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        surfaces: dict[str, int] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            surface, idx = line.rsplit("\t", 1)
            if surface not in (PAD, UNK):
                surfaces[surface] = int(idx)
        return cls(surfaces)


@dataclass
class CorpusStats:
    """Document count and per-term document frequencies for idf."""

    doc_count: int = 0
    doc_freq: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_documents(cls, docs: list[list[str]]) -> "CorpusStats":
        df: dict[str, int] = {}
        for doc in docs:
            for term in set(doc):
                df[term] = df.get(term, 0) + 1
        return cls(doc_count=len(docs), doc_freq=df)


def compute_idf(stats: CorpusStats, term: str) -> float:
    """Smoothed idf: ln((N+1)/(df+1)) + 1, strictly positive."""
    df = stats.doc_freq.get(term, 0)
    return math.log((stats.doc_count + 1) / (df + 1)) + 1.0
