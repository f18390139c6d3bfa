"""Schema-driven slot filling for task-oriented assistance.

A task schema declares mandatory and optional slots; extractors (gazetteers
and token patterns, with optional role markers like "from X" / "to X") fill
them from customer turns, missing mandatory slots are prompted for, and a
completed task goes to an external executor.
"""

from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Callable, Protocol

from .textutil import normalize, tokenize
from .trie import PatternTrie


class DuplicateSlot(ValueError):
    pass


class NoMandatorySlot(ValueError):
    pass


class MalformedFile(ValueError):
    pass


class UnknownTask(KeyError):
    pass


class ExecutorUnavailable(RuntimeError):
    pass


class ExecutorRejected(RuntimeError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


Clock = Callable[[], date]


@dataclass(frozen=True)
class AttributeKind:
    """One extractable attribute family (location, date, ...).

    ``gazetteer`` holds literal phrases; ``matcher`` names a builtin token
    matcher; ``freeform`` kinds accept a whole prompt answer verbatim.
    """

    name: str
    gazetteer: frozenset[str] = frozenset()
    matcher: str | None = None  # relative_date | integer | phone
    freeform: bool = False


_RELATIVE_DATES = {
    "today": 0,
    "tomorrow": 1,
    "yesterday": -1,
}
_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_PHONE = re.compile(r"^\d{7,15}$")
_INT = re.compile(r"^\d{1,6}$")


def default_registry() -> dict[str, AttributeKind]:
    """Five desk-scale attribute kinds; extend via the schema file."""
    return {
        "product": AttributeKind(
            "product",
            frozenset({"flight ticket", "train ticket", "phone", "laptop", "data plan"}),
            freeform=True,
        ),
        "location": AttributeKind(
            "location",
            frozenset({"hangzhou", "beijing", "shanghai", "shenzhen", "guangzhou", "chengdu"}),
        ),
        "date": AttributeKind("date", frozenset(), matcher="relative_date"),
        "quantity": AttributeKind("quantity", frozenset(), matcher="integer"),
        "phone": AttributeKind("phone", frozenset(), matcher="phone"),
    }


@dataclass(frozen=True)
class SlotSpec:
    name: str
    kind: str
    mandatory: bool
    prompt: str
    markers: tuple[str, ...] = ()


@dataclass(frozen=True)
class TaskSchema:
    task_id: str
    slots: tuple[SlotSpec, ...]
    confirmation: str

    def __post_init__(self):
        names = [s.name for s in self.slots]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DuplicateSlot(f"task {self.task_id}: duplicate slot(s) {sorted(dupes)}")
        if not any(s.mandatory for s in self.slots):
            raise NoMandatorySlot(f"task {self.task_id}: needs at least one mandatory slot")

    def slot(self, name: str) -> SlotSpec:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    def mandatory_slots(self) -> list[SlotSpec]:
        return [s for s in self.slots if s.mandatory]


@dataclass
class SlotState:
    task_id: str
    filled: dict[str, tuple[str, str]] = field(default_factory=dict)  # name -> (value, raw span)
    awaiting: str | None = None
    retries: int = 0


# --- extraction ---------------------------------------------------------


def _match_token(kind: AttributeKind, token: str, clock: Clock) -> str | None:
    """Value for a single token under the kind's builtin matcher, or None."""
    if kind.matcher == "relative_date":
        if token in _RELATIVE_DATES:
            return (clock() + timedelta(days=_RELATIVE_DATES[token])).isoformat()
        if _ISO_DATE.match(token):
            return token
    elif kind.matcher == "integer":
        if _INT.match(token):
            return str(int(token))
    elif kind.matcher == "phone":
        if _PHONE.match(token):
            return token
    return None


def _kind_candidates(
    tokens: list[str], kinds: dict[str, AttributeKind], clock: Clock
) -> list[tuple[int, int, str, str, str]]:
    """All (start, end, kind, value, raw) candidates, non-overlapping, by start.

    Gazetteer phrases match leftmost-longest via a shared trie; builtin
    matchers then claim single tokens the trie left free.
    """
    patterns = []
    for kind in kinds.values():
        for phrase in kind.gazetteer:
            patterns.append((tuple(tokenize(normalize(phrase))), kind.name))
    trie: PatternTrie[str] = PatternTrie.compile(patterns)
    taken = [False] * len(tokens)
    candidates = []
    for m in trie.find_matches(tokens):
        raw = " ".join(tokens[m.start : m.end])
        candidates.append((m.start, m.end, m.payload, raw, raw))
        for i in range(m.start, m.end):
            taken[i] = True
    for i, tok in enumerate(tokens):
        if taken[i]:
            continue
        for kind in kinds.values():
            value = _match_token(kind, tok, clock)
            if value is not None:
                candidates.append((i, i + 1, kind.name, value, tok))
                break
    candidates.sort(key=lambda c: (c[0], c[1]))
    return [(s, e, k, v, r) for s, e, k, v, r in candidates]


def extract_slots(
    text: str,
    schema: TaskSchema,
    registry: dict[str, AttributeKind],
    clock: Clock = date.today,
) -> dict[str, tuple[str, str]]:
    """Fill schema slots from one utterance.

    Role markers (the token right before a candidate span) disambiguate
    same-kind slots; leftovers are assigned in slot-declaration order.  Each
    input span fills at most one slot.
    """
    tokens = tokenize(normalize(text))
    kinds = {s.kind: registry[s.kind] for s in schema.slots if s.kind in registry}
    candidates = _kind_candidates(tokens, kinds, clock)
    assigned: dict[str, tuple[str, str]] = {}
    used = [False] * len(candidates)

    for slot in schema.slots:
        if not slot.markers:
            continue
        for idx, (start, end, kind, value, raw) in enumerate(candidates):
            if used[idx] or kind != slot.kind:
                continue
            if start > 0 and tokens[start - 1] in slot.markers:
                assigned[slot.name] = (value, raw)
                used[idx] = True
                break

    for slot in schema.slots:
        if slot.name in assigned:
            continue
        for idx, (start, end, kind, value, raw) in enumerate(candidates):
            if used[idx] or kind != slot.kind:
                continue
            assigned[slot.name] = (value, raw)
            used[idx] = True
            break

    return assigned


# --- dialog advancement --------------------------------------------------


@dataclass(frozen=True)
class NextPrompt:
    slot: str
    prompt: str


@dataclass(frozen=True)
class ReadyToExecute:
    filled: dict[str, tuple[str, str]]


@dataclass(frozen=True)
class GiveUp:
    """Retry budget for the awaited slot is exhausted; hand off to staff."""

    slot: str


def advance(
    state: SlotState,
    schema: TaskSchema,
    user_text: str,
    registry: dict[str, AttributeKind],
    clock: Clock = date.today,
    retry_limit: int = 2,
) -> NextPrompt | ReadyToExecute | GiveUp:
    """Merge one user turn into the slot state and decide what happens next.

    Previously filled slots are never dropped.  When a prompt is pending and
    extraction finds nothing for it, the whole (normalized) answer fills the
    awaited slot if it validates against the slot's kind; otherwise the slot
    is re-prompted up to ``retry_limit`` times.
    """
    if state.task_id != schema.task_id:
        raise UnknownTask(state.task_id)
    found = extract_slots(user_text, schema, registry, clock)
    state.filled.update(found)

    if state.awaiting and state.awaiting not in state.filled:
        slot = schema.slot(state.awaiting)
        kind = registry[slot.kind]
        norm = normalize(user_text)
        value = None
        if kind.matcher == "relative_date" and _ISO_DATE.match(norm):
            value = norm
        for tok in tokenize(norm):
            if value is not None:
                break
            value = _match_token(kind, tok, clock)
        if value is None and norm in kind.gazetteer:
            value = norm
        if value is None and kind.freeform and norm:
            value = norm
        if value is not None:
            state.filled[state.awaiting] = (value, norm)
            state.retries = 0
        else:
            state.retries += 1
            if state.retries > retry_limit:
                return GiveUp(state.awaiting)
            return NextPrompt(slot.name, slot.prompt)

    for slot in schema.mandatory_slots():
        if slot.name not in state.filled:
            if state.awaiting != slot.name:
                state.retries = 0
            state.awaiting = slot.name
            return NextPrompt(slot.name, slot.prompt)
    state.awaiting = None
    return ReadyToExecute(dict(state.filled))


# --- execution -----------------------------------------------------------


@dataclass(frozen=True)
class ExecutorResult:
    ok: bool
    reference: str | None = None
    reason: str | None = None


class TaskExecutor(Protocol):
    def execute(self, task_id: str, slots: dict[str, str]) -> ExecutorResult: ...


class MockExecutor:
    """Deterministic in-process executor for tests and the demo service.

    ``fail_reason`` makes every call come back rejected; ``unavailable``
    simulates a transport fault.
    """

    def __init__(self, reference: str = "AB123", fail_reason: str | None = None,
                 unavailable: bool = False):
        self.reference = reference
        self.fail_reason = fail_reason
        self.unavailable = unavailable
        self.calls: list[tuple[str, dict[str, str]]] = []

    def execute(self, task_id: str, slots: dict[str, str]) -> ExecutorResult:
        self.calls.append((task_id, dict(slots)))
        if self.unavailable:
            raise ExecutorUnavailable("executor timed out")
        if self.fail_reason is not None:
            return ExecutorResult(False, reason=self.fail_reason)
        return ExecutorResult(True, reference=self.reference)


class HttpExecutor:
    """POSTs {task_id, slots} as JSON; expects {ok, reference|reason} back."""

    def __init__(self, url: str, timeout: float = 5.0):
        self.url = url
        self.timeout = timeout

    def execute(self, task_id: str, slots: dict[str, str]) -> ExecutorResult:
        body = json.dumps({"task_id": task_id, "slots": slots}).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ExecutorUnavailable(str(exc)) from exc
        return ExecutorResult(
            bool(payload.get("ok")), payload.get("reference"), payload.get("reason")
        )


def execute_task(
    filled: dict[str, tuple[str, str]], schema: TaskSchema, executor: TaskExecutor
) -> str:
    """Run the executor and render the confirmation template.

    Raises ExecutorRejected when the executor answers ok=false and
    ExecutorUnavailable on transport failure (propagated).
    """
    values = {name: value for name, (value, _raw) in filled.items()}
    result = executor.execute(schema.task_id, values)
    if not result.ok:
        raise ExecutorRejected(result.reason or "rejected")
    return schema.confirmation.format(reference=result.reference or "", **values)


# --- schema file ---------------------------------------------------------


def load_schema_file(path: str | Path) -> tuple[list[TaskSchema], dict[str, AttributeKind]]:
    """Parse the schema file; returns (schemas, registry incl. custom kinds)."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return [], default_registry()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    return parse_schema_doc(doc, origin=str(path))


def parse_schema_doc(doc, origin: str = "<doc>") -> tuple[list[TaskSchema], dict[str, AttributeKind]]:
    path = origin
    if not isinstance(doc, dict) or "tasks" not in doc:
        raise MalformedFile(f"{path}: expected an object with a tasks list")
    registry = default_registry()
    for rec in doc.get("kinds", []):
        registry[rec["name"]] = AttributeKind(
            rec["name"],
            frozenset(rec.get("gazetteer", ())),
            rec.get("matcher"),
            bool(rec.get("freeform", False)),
        )
    schemas = []
    for rec in doc["tasks"]:
        try:
            slots = tuple(
                SlotSpec(
                    s["name"], s["kind"], bool(s.get("mandatory", False)),
                    s.get("prompt", f"please provide {s['name']}"),
                    tuple(s.get("markers", ())),
                )
                for s in rec["slots"]
            )
            schemas.append(TaskSchema(rec["task_id"], slots, rec["confirmation"]))
        except (KeyError, TypeError) as exc:
            raise MalformedFile(f"{path}: bad task record {rec!r}") from exc
    for schema in schemas:
        for slot in schema.slots:
            if slot.kind not in registry:
                raise MalformedFile(f"{path}: unknown attribute kind {slot.kind!r}")
    return schemas, registry


def load_schemas(path: str | Path) -> list[TaskSchema]:
    return load_schema_file(path)[0]
