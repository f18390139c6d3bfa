"""Business rule parser: pattern hits -> assistance task, promo answer or human handoff."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .textutil import normalize, tokenize
from .trie import Match, PatternTrie, parse_pattern_file


class RuleKind(Enum):
    HUMAN = "human"
    ASSIST = "assist"
    PROMO = "promo"


# Human > Assist > Promo: an explicit request for a person must never be
# hijacked by a promo answer.
_PRIORITY = {RuleKind.HUMAN: 0, RuleKind.ASSIST: 1, RuleKind.PROMO: 2}


@dataclass(frozen=True)
class RulePayload:
    kind: RuleKind
    value: str  # task_id for assist, answer_id for promo, "" for human
    order: int  # registration order, used as the final tie-break


@dataclass(frozen=True)
class RuleDecision:
    kind: RuleKind | None  # None means no rule fired
    value: str
    matched: tuple[Match, ...]

    @property
    def is_norule(self) -> bool:
        return self.kind is None


NO_RULE = RuleDecision(None, "", ())


def compile_rules(rows: list[tuple[str, str, str]], term_dict: set[str] | None = None) -> PatternTrie[RulePayload]:
    """Build the rule trie from (pattern, kind, value) rows in registration order."""
    patterns = []
    for order, (pattern, kind, value) in enumerate(rows):
        tokens = tokenize(normalize(pattern), term_dict)
        patterns.append((tokens, RulePayload(RuleKind(kind), value, order)))
    return PatternTrie.compile(patterns)


def load_rules(path: str | Path, term_dict: set[str] | None = None) -> PatternTrie[RulePayload]:
    return compile_rules(parse_pattern_file(path), term_dict)


def route_by_rules(tokens: list[str], trie: PatternTrie[RulePayload]) -> RuleDecision:
    """Decide among matched rule payloads.

    Highest priority kind wins (Human > Assist > Promo); ties within a kind
    break by earliest match start, then by pattern registration order.
    Returns NO_RULE when nothing matches.
    """
    matches = trie.find_matches(tokens)
    if not matches:
        return NO_RULE
    best = min(matches, key=lambda m: (_PRIORITY[m.payload.kind], m.start, m.payload.order))
    return RuleDecision(best.payload.kind, best.payload.value, tuple(matches))
