"""Knowledge-graph engine: hierarchical entities/actions with attached answers.

Questions are tagged by a trie-based semantic parser over per-node wording
patterns; answering tries an exact node-set match first, then generalizes
tagged nodes to is_a ancestors with at most two total hops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .textutil import normalize, tokenize
from .trie import PatternTrie

RELATIONS = {"is_a", "refines", "about"}
MAX_HOPS = 2


class CycleDetected(ValueError):
    pass


class DanglingReference(ValueError):
    pass


class DuplicateId(ValueError):
    pass


class EmptyTags(ValueError):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: str
    label: str
    kind: str  # "entity" | "action"
    patterns: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.label:
            raise ValueError(f"node {self.id}: label must be non-empty")
        if self.kind not in ("entity", "action"):
            raise ValueError(f"node {self.id}: kind must be entity or action")


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    rel: str

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class KnowledgeItem:
    id: str
    node_ids: frozenset[str]
    answer: str

    def __post_init__(self):
        if not self.node_ids:
            raise ValueError(f"item {self.id}: attached node set must be non-empty")
        if not self.answer:
            raise ValueError(f"item {self.id}: answer must be non-empty")


@dataclass(frozen=True)
class SemanticTag:
    node_id: str
    start: int
    end: int


class KnowledgeGraph:
    def __init__(self, nodes: list[GraphNode], edges: list[GraphEdge], items: list[KnowledgeItem]):
        self.nodes: dict[str, GraphNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise DuplicateId(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        self.edges = list(edges)
        self.items: dict[str, KnowledgeItem] = {}
        for item in items:
            if item.id in self.items:
                raise DuplicateId(f"duplicate item id {item.id}")
            self.items[item.id] = item

        self._parents: dict[str, list[str]] = {n: [] for n in self.nodes}
        for edge in self.edges:
            if edge.src not in self.nodes or edge.dst not in self.nodes:
                raise DanglingReference(f"edge {edge.src}->{edge.dst} references unknown node")
            if edge.rel == "is_a":
                self._parents[edge.src].append(edge.dst)
        for item in items:
            for nid in item.node_ids:
                if nid not in self.nodes:
                    raise DanglingReference(f"item {item.id} references unknown node {nid}")
        self._check_acyclic()

        self._items_by_nodeset: dict[frozenset[str], list[KnowledgeItem]] = {}
        for item in items:
            self._items_by_nodeset.setdefault(item.node_ids, []).append(item)
        for group in self._items_by_nodeset.values():
            group.sort(key=lambda it: it.id)

        # semantic-parser trie, built once and shared read-only
        patterns = []
        for node in self.nodes.values():
            for pat in node.patterns:
                patterns.append((tuple(tokenize(normalize(pat))), node.id))
        self.tag_trie: PatternTrie[str] = PatternTrie.compile(patterns)

    def _check_acyclic(self) -> None:
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {n: WHITE for n in self.nodes}
        for start in self.nodes:
            if color[start] != WHITE:
                continue
            stack = [(start, iter(self._parents[start]))]
            color[start] = GRAY
            while stack:
                node, it = stack[-1]
                advanced = False
                for parent in it:
                    if color[parent] == GRAY:
                        raise CycleDetected(f"is_a cycle through {parent}")
                    if color[parent] == WHITE:
                        color[parent] = GRAY
                        stack.append((parent, iter(self._parents[parent])))
                        advanced = True
                        break
                if not advanced:
                    color[node] = BLACK
                    stack.pop()

    def parents_of(self, node_id: str) -> list[str]:
        return list(self._parents.get(node_id, ()))

    def ancestors_within(self, node_id: str, max_dist: int) -> dict[str, int]:
        """Shortest is_a distance to every ancestor reachable in <= max_dist hops."""
        dist = {node_id: 0}
        frontier = [node_id]
        for d in range(1, max_dist + 1):
            nxt = []
            for n in frontier:
                for p in self._parents.get(n, ()):
                    if p not in dist:
                        dist[p] = d
                        nxt.append(p)
            frontier = nxt
        return dist

    def items_for(self, node_set: frozenset[str]) -> list[KnowledgeItem]:
        return self._items_by_nodeset.get(node_set, [])


def parse_semantic_tags(q: str, graph: KnowledgeGraph) -> list[SemanticTag]:
    """Tag leftmost-longest occurrences of node wording patterns in q."""
    tokens = tokenize(normalize(q))
    matches = graph.tag_trie.find_matches(tokens)
    return [SemanticTag(m.payload, m.start, m.end) for m in matches]


def answer_by_graph(tags: list[SemanticTag], graph: KnowledgeGraph) -> KnowledgeItem | None:
    """Exact node-set item, else nearest generalized item within two is_a hops.

    Hop accounting is total across tags: a candidate node set replaces each
    tagged node by one of its ancestors, and the sum of ancestor distances
    must not exceed MAX_HOPS.  Candidates are explored breadth-first by that
    total; the smallest item id wins inside one level.  None means NoAnswer.
    """
    if not tags:
        raise EmptyTags("answer_by_graph requires at least one tag")
    base = sorted({t.node_id for t in tags})
    ancestor_maps = [graph.ancestors_within(n, MAX_HOPS) for n in base]

    by_cost: dict[int, set[frozenset[str]]] = {h: set() for h in range(MAX_HOPS + 1)}

    def assign(idx: int, cost: int, chosen: list[str]) -> None:
        if idx == len(base):
            by_cost[cost].add(frozenset(chosen))
            return
        for anc, d in ancestor_maps[idx].items():
            if cost + d <= MAX_HOPS:
                chosen.append(anc)
                assign(idx + 1, cost + d, chosen)
                chosen.pop()

    assign(0, 0, [])

    seen: set[frozenset[str]] = set()
    for hops in range(MAX_HOPS + 1):
        found: list[KnowledgeItem] = []
        for node_set in by_cost[hops]:
            if node_set in seen:
                continue
            seen.add(node_set)
            found.extend(graph.items_for(node_set))
        if found:
            return min(found, key=lambda it: it.id)
    return None


def load_graph(nodes_path: str | Path, edges_path: str | Path, items_path: str | Path) -> KnowledgeGraph:
    """Load JSONL node/edge/item files and validate the graph."""
    nodes = []
    for rec in _jsonl(nodes_path):
        nodes.append(GraphNode(rec["id"], rec["label"], rec["kind"], tuple(rec.get("patterns", ()))))
    edges = [GraphEdge(rec["src"], rec["dst"], rec["rel"]) for rec in _jsonl(edges_path)]
    items = [
        KnowledgeItem(rec["id"], frozenset(rec["node_ids"]), rec["answer"])
        for rec in _jsonl(items_path)
    ]
    return KnowledgeGraph(nodes, edges, items)


def save_graph(graph: KnowledgeGraph, nodes_path: str | Path, edges_path: str | Path, items_path: str | Path) -> None:
    _write_jsonl(nodes_path, (
        {"id": n.id, "label": n.label, "kind": n.kind, "patterns": list(n.patterns)}
        for n in graph.nodes.values()
    ))
    _write_jsonl(edges_path, ({"src": e.src, "dst": e.dst, "rel": e.rel} for e in graph.edges))
    _write_jsonl(items_path, (
        {"id": it.id, "node_ids": sorted(it.node_ids), "answer": it.answer}
        for it in graph.items.values()
    ))


def _jsonl(path: str | Path):
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        if line.strip():
            yield json.loads(line)


def _write_jsonl(path: str | Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
