"""Token-level trie with payloads: leftmost-longest multi-pattern matching.

Backs both the business rule parser and the semantic parser.  Patterns are
token sequences (run them through ``textutil.tokenize`` first); payloads are
arbitrary hashable-or-not objects attached at terminal nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Generic, Iterable, Sequence, TypeVar

P = TypeVar("P")


class EmptyPattern(ValueError):
    """Raised when a pattern with an empty token sequence is compiled."""


@dataclass
class _Node:
    children: dict[str, "_Node"] = field(default_factory=dict)
    payloads: list[Any] = field(default_factory=list)


@dataclass(frozen=True)
class Match(Generic[P]):
    start: int
    end: int  # exclusive
    payload: P


class PatternTrie(Generic[P]):
    """Immutable after ``compile``; concurrent reads are safe."""

    def __init__(self):
        self._root = _Node()
        self._size = 0

    @classmethod
    def compile(cls, patterns: Iterable[tuple[Sequence[str], P]]) -> "PatternTrie[P]":
        trie = cls()
        for tokens, payload in patterns:
            trie._insert(tokens, payload)
        return trie

    def _insert(self, tokens: Sequence[str], payload: P) -> None:
        if not tokens:
            raise EmptyPattern("pattern token sequence is empty")
        node = self._root
        for tok in tokens:
            node = node.children.setdefault(tok, _Node())
        if payload not in node.payloads:
            node.payloads.append(payload)
            self._size += 1

    def __len__(self) -> int:
        return self._size

    def longest_match_at(self, tokens: Sequence[str], start: int) -> tuple[int, list[P]] | None:
        """Longest pattern starting at ``start``; returns (end, payloads) or None."""
        node = self._root
        best: tuple[int, list[P]] | None = None
        i = start
        while i < len(tokens):
            node = node.children.get(tokens[i])
            if node is None:
                break
            i += 1
            if node.payloads:
                best = (i, node.payloads)
        return best

    def find_matches(self, tokens: Sequence[str]) -> list[Match[P]]:
        """Leftmost-longest non-overlapping matches, ordered by start offset.

        At each position the longest matching pattern wins and the scan
        resumes after its end; a node holding several payloads yields one
        Match per payload (registration order).
        """
        matches: list[Match[P]] = []
        i = 0
        n = len(tokens)
        while i < n:
            hit = self.longest_match_at(tokens, i)
            if hit is None:
                i += 1
                continue
            end, payloads = hit
            for payload in payloads:
                matches.append(Match(i, end, payload))
            i = end
        return matches


def parse_pattern_file(path: str | Path) -> list[tuple[str, str, str]]:
    """Read ``pattern<TAB>payload_kind<TAB>payload_value`` lines.

    ``#`` starts a comment line; blank lines are skipped.  Returns rows in
    file order (registration order matters for rule tie-breaking).
    """
    rows: list[tuple[str, str, str]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
        rows.append((parts[0], parts[1], parts[2]))
    return rows


def write_pattern_file(path: str | Path, rows: Iterable[tuple[str, str, str]]) -> None:
    lines = [f"{p}\t{k}\t{v}" for p, k, v in rows]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
