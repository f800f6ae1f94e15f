"""Question graph construction: merge loop, weighted edges, MaxST, export.

The graph pipeline runs in four steps. ``reduce_nodes`` agglomerates the
generated questions down to a target count by repeatedly merging the most
similar surviving pair and keeping the more general question.
``build_weighted_graph`` then scores every remaining unordered pair,
producing a complete graph whose edge weights mix classifier confidence and
semantic similarity (w = lambda * eta + (1 - lambda) * xi).
``threshold_filter`` is a diagnostic only: simple weight thresholding leaves
cycles and dense blobs, which motivates ``max_spanning_tree`` (Kruskal on
negated weights) as the pruning step that guarantees a connected, acyclic
result.

JSON export is the canonical round-trippable form; DOT and GraphML are
view-only renderings of the same attributes.
"""

from __future__ import annotations

import json
import random
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .outline import LABEL_GENERAL, LABEL_OTHER, LABEL_SPECIFIC, SectionId
from .scoring import Backends, PairQuery, clamp_similarity, specificity_confidence

DIRECTION_A_TO_B = "a_to_b"
DIRECTION_B_TO_A = "b_to_a"
DIRECTION_UNDIRECTED = "undirected"
DIRECTIONS = (DIRECTION_A_TO_B, DIRECTION_B_TO_A, DIRECTION_UNDIRECTED)

WEIGHT_LAW_TOL = 1e-9

# attempts before a seeded path walk gives up; existence is checked first,
# so exhaustion indicates an adversarial topology rather than absence
PATH_SAMPLE_BUDGET = 10_000


@dataclass
class QuestionNode:
    """A question with its source context, usable as a graph node.

    ``embedding`` and ``section_id`` are in-memory working data (similarity
    queries, merge tie-breaks); they are never serialized and do not take
    part in equality.
    """

    node_id: str
    question: str
    context: str
    chunk_id: str
    absorbed: list[str] = field(default_factory=list)
    embedding: np.ndarray | None = field(default=None, repr=False, compare=False)
    section_id: SectionId | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "question": self.question,
            "context": self.context,
            "chunk_id": self.chunk_id,
            "absorbed": list(self.absorbed),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "QuestionNode":
        return cls(
            node_id=record["node_id"],
            question=record["question"],
            context=record["context"],
            chunk_id=record["chunk_id"],
            absorbed=list(record.get("absorbed", [])),
        )

    def copy(self) -> "QuestionNode":
        return QuestionNode(
            node_id=self.node_id,
            question=self.question,
            context=self.context,
            chunk_id=self.chunk_id,
            absorbed=list(self.absorbed),
            embedding=self.embedding,
            section_id=self.section_id,
        )


@dataclass(frozen=True)
class WeightedEdge:
    """Scored edge between two questions; ``a`` < ``b`` lexicographically.

    ``direction`` records the classifier's verdict: ``a_to_b`` means a is
    the more general question, ``undirected`` means no hierarchy relation
    dominated.
    """

    a: str
    b: str
    eta: float
    xi: float
    weight: float
    direction: str

    def validate(self, lam: float | None = None) -> "WeightedEdge":
        if self.a == self.b:
            raise ValidationError(f"self-loop edge on {self.a!r}")
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"unknown edge direction: {self.direction!r}")
        for name, value in (("eta", self.eta), ("xi", self.xi), ("weight", self.weight)):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"edge {name} out of [0, 1]: {value!r}")
        if lam is not None:
            expected = edge_weight(self.eta, self.xi, lam)
            if abs(expected - self.weight) > WEIGHT_LAW_TOL:
                raise ValidationError(
                    f"edge ({self.a}, {self.b}) weight {self.weight!r} != "
                    f"lambda mix {expected!r}"
                )
        return self

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "eta": self.eta,
            "xi": self.xi,
            "weight": self.weight,
            "direction": self.direction,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "WeightedEdge":
        return cls(
            a=record["a"],
            b=record["b"],
            eta=float(record["eta"]),
            xi=float(record["xi"]),
            weight=float(record["weight"]),
            direction=record["direction"],
        )


@dataclass(frozen=True)
class MergeEvent:
    """One merge-loop step: ``absorbed`` was folded into ``survivor``."""

    survivor: str
    absorbed: str
    similarity: float
    label: str

    def to_dict(self) -> dict:
        return {
            "survivor": self.survivor,
            "absorbed": self.absorbed,
            "similarity": self.similarity,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "MergeEvent":
        return cls(
            survivor=record["survivor"],
            absorbed=record["absorbed"],
            similarity=float(record["similarity"]),
            label=record["label"],
        )


@dataclass
class QuestionGraph:
    """Questions plus scored edges; complete after build, a tree after pruning."""

    nodes: list[QuestionNode]
    edges: list[WeightedEdge]
    lam: float
    merge_log: list[MergeEvent] = field(default_factory=list)

    def node_ids(self) -> list[str]:
        return [node.node_id for node in self.nodes]

    def node_by_id(self, node_id: str) -> QuestionNode:
        for node in self.nodes:
            if node.node_id == node_id:
                return node
        raise ValidationError(f"no node with id {node_id!r}")

    def total_weight(self) -> float:
        return float(sum(edge.weight for edge in self.edges))

    def adjacency(self) -> dict[str, list[str]]:
        neighbors: dict[str, list[str]] = {node.node_id: [] for node in self.nodes}
        for edge in self.edges:
            neighbors[edge.a].append(edge.b)
            neighbors[edge.b].append(edge.a)
        return {node_id: sorted(peers) for node_id, peers in neighbors.items()}

    def components(self) -> list[list[str]]:
        """Connected components as sorted node-id lists, largest first."""
        dsu = DisjointSet(self.node_ids())
        for edge in self.edges:
            dsu.union(edge.a, edge.b)
        groups: dict[str, list[str]] = {}
        for node_id in self.node_ids():
            groups.setdefault(dsu.find(node_id), []).append(node_id)
        return sorted(
            (sorted(group) for group in groups.values()),
            key=lambda group: (-len(group), group[0]),
        )

    def is_tree(self) -> bool:
        return (
            len(self.edges) == len(self.nodes) - 1 and len(self.components()) == 1
        )

    def assert_tree(self) -> None:
        n_nodes, n_edges = len(self.nodes), len(self.edges)
        if n_edges != n_nodes - 1:
            raise ValidationError(
                f"not a tree: {n_edges} edges for {n_nodes} nodes"
            )
        n_components = len(self.components())
        if n_components != 1:
            raise ValidationError(f"not a tree: {n_components} components")

    def validate(self) -> "QuestionGraph":
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda out of [0, 1]: {self.lam!r}")
        ids = self.node_ids()
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node_ids in graph")
        known = set(ids)
        seen_pairs: set[tuple[str, str]] = set()
        for edge in self.edges:
            edge.validate(self.lam)
            if edge.a not in known or edge.b not in known:
                raise ValidationError(
                    f"edge ({edge.a}, {edge.b}) references unknown nodes"
                )
            key = (edge.a, edge.b) if edge.a < edge.b else (edge.b, edge.a)
            if key in seen_pairs:
                raise ValidationError(f"duplicate edge for pair {key}")
            seen_pairs.add(key)
        absorbed_seen: set[str] = set()
        for node in self.nodes:
            overlap = absorbed_seen.intersection(node.absorbed)
            if overlap:
                raise ValidationError(
                    f"absorbed ids claimed by multiple nodes: {sorted(overlap)}"
                )
            absorbed_seen.update(node.absorbed)
        return self


class DisjointSet:
    """Union-find with path compression and union by rank."""

    def __init__(self, items: Iterable[str]):
        self._parent = {item: item for item in items}
        self._rank = {item: 0 for item in self._parent}

    def find(self, item: str) -> str:
        root = item
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[item] != root:
            self._parent[item], item = root, self._parent[item]
        return root

    def union(self, a: str, b: str) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self._rank[ra] < self._rank[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        if self._rank[ra] == self._rank[rb]:
            self._rank[ra] += 1
        return True


def compute_embeddings(nodes: Sequence[QuestionNode], embedder) -> None:
    """Fill missing node embeddings from "question context" text, in place.

    All missing texts go to the backend in one call, so a corpus-fitting
    embedder sees the whole node set as its corpus.
    """
    missing = [node for node in nodes if node.embedding is None]
    if not missing:
        return
    vectors = np.asarray(
        embedder.embed([f"{node.question} {node.context}" for node in missing]),
        dtype=float,
    )
    for node, vector in zip(missing, vectors):
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise ValidationError(f"zero embedding for node {node.node_id!r}")
        node.embedding = vector / norm
    dims = {node.embedding.shape for node in nodes if node.embedding is not None}
    if len(dims) > 1:
        raise ValidationError(f"inconsistent embedding dims: {sorted(dims)}")


def similarity_matrix(nodes: Sequence[QuestionNode]) -> np.ndarray:
    """Pairwise cosine of node embeddings, negatives clamped to 0."""
    for node in nodes:
        if node.embedding is None:
            raise ValidationError(f"node {node.node_id!r} has no embedding")
    stacked = np.stack([node.embedding for node in nodes])
    return np.clip(stacked @ stacked.T, 0.0, 1.0)


def _survivor_index(
    i: int, j: int, nodes: Sequence[QuestionNode], label: str
) -> int:
    if label == LABEL_GENERAL:
        return i
    if label == LABEL_SPECIFIC:
        return j
    # no hierarchy signal: prefer the shallower source section, then the
    # smaller node_id (i precedes j in id order by construction)
    depth_i = len(nodes[i].section_id.segments) if nodes[i].section_id else 0
    depth_j = len(nodes[j].section_id.segments) if nodes[j].section_id else 0
    return j if depth_j < depth_i else i


def reduce_nodes(
    nodes: Sequence[QuestionNode], target: int, backends: Backends
) -> tuple[list[QuestionNode], list[MergeEvent]]:
    """Merge the question set down to ``target`` nodes.

    Runs exactly len(nodes) - target merges. Each step picks the highest-
    similarity surviving pair (ties: lexicographically smaller node_id
    pair), asks the classifier which side is more general, and keeps that
    side. The loser's id, plus everything it had absorbed, moves to the
    survivor's absorbed list. Similarities always come from a node's own
    question and context, so the matrix is computed once.
    """
    total = len(nodes)
    if not 1 <= target <= total:
        raise ValidationError(
            f"target node count must be in [1, {total}], got {target}"
        )
    ids = [node.node_id for node in nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate node_ids")
    work = sorted((node.copy() for node in nodes), key=lambda n: n.node_id)
    if target == total:
        return work, []
    compute_embeddings(work, backends.embedder)
    sims = similarity_matrix(work)
    alive = np.ones(total, dtype=bool)
    log: list[MergeEvent] = []
    for _ in range(total - target):
        best: tuple[int, int] | None = None
        best_sim = -1.0
        for i in range(total):
            if not alive[i]:
                continue
            for j in range(i + 1, total):
                # strict > keeps the first (smallest id pair) on exact ties
                if alive[j] and sims[i, j] > best_sim:
                    best_sim = float(sims[i, j])
                    best = (i, j)
        assert best is not None
        i, j = best
        dist = backends.classifier.classify([
            PairQuery(
                q_a=work[i].question,
                c_a=work[i].context,
                q_b=work[j].question,
                c_b=work[j].context,
                id_a=work[i].node_id,
                id_b=work[j].node_id,
                section_a=work[i].section_id,
                section_b=work[j].section_id,
            )
        ])[0].validate(tol=1e-3)
        label = dist.argmax_label()
        keep = _survivor_index(i, j, work, label)
        drop = j if keep == i else i
        work[keep].absorbed.append(work[drop].node_id)
        work[keep].absorbed.extend(work[drop].absorbed)
        work[drop].absorbed = []
        alive[drop] = False
        log.append(
            MergeEvent(
                survivor=work[keep].node_id,
                absorbed=work[drop].node_id,
                similarity=best_sim,
                label=label,
            )
        )
    return [node for node, live in zip(work, alive) if live], log


def edge_weight(eta: float, xi: float, lam: float) -> float:
    """Convex mix of classifier confidence and semantic similarity."""
    for name, value in (("eta", eta), ("xi", xi), ("lambda", lam)):
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f"{name} out of [0, 1]: {value!r}")
    return lam * eta + (1.0 - lam) * xi


def build_weighted_graph(
    nodes: Sequence[QuestionNode],
    backends: Backends,
    lam: float,
    merge_log: Sequence[MergeEvent] = (),
) -> QuestionGraph:
    """Score every unordered node pair into a complete weighted graph."""
    if len(nodes) < 2:
        raise ValidationError(f"need at least 2 nodes, got {len(nodes)}")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda out of [0, 1]: {lam!r}")
    ordered = sorted((node.copy() for node in nodes), key=lambda n: n.node_id)
    compute_embeddings(ordered, backends.embedder)
    sims = similarity_matrix(ordered)
    pairs = [
        (i, j) for i in range(len(ordered)) for j in range(i + 1, len(ordered))
    ]
    queries = [
        PairQuery(
            q_a=ordered[i].question,
            c_a=ordered[i].context,
            q_b=ordered[j].question,
            c_b=ordered[j].context,
            id_a=ordered[i].node_id,
            id_b=ordered[j].node_id,
            section_a=ordered[i].section_id,
            section_b=ordered[j].section_id,
        )
        for i, j in pairs
    ]
    distributions = backends.classifier.classify(queries)
    if len(distributions) != len(pairs):
        raise ValidationError(
            f"classifier returned {len(distributions)} distributions for "
            f"{len(pairs)} pairs"
        )
    edges = []
    for (i, j), dist in zip(pairs, distributions):
        dist.validate(tol=1e-3)
        label = dist.argmax_label()
        if label == LABEL_GENERAL:
            direction = DIRECTION_A_TO_B
        elif label == LABEL_SPECIFIC:
            direction = DIRECTION_B_TO_A
        else:
            direction = DIRECTION_UNDIRECTED
        eta = specificity_confidence(dist)
        xi = clamp_similarity(float(sims[i, j]))
        edges.append(
            WeightedEdge(
                a=ordered[i].node_id,
                b=ordered[j].node_id,
                eta=eta,
                xi=xi,
                weight=edge_weight(eta, xi, lam),
                direction=direction,
            )
        )
    return QuestionGraph(
        nodes=ordered, edges=edges, lam=lam, merge_log=list(merge_log)
    ).validate()


@dataclass(frozen=True)
class ThresholdReport:
    """What plain weight thresholding leaves behind, for diagnostics."""

    tau: float
    n_nodes: int
    n_edges_total: int
    n_edges_kept: int
    n_components: int
    has_cycle: bool
    density: float
    component_sizes: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "n_nodes": self.n_nodes,
            "n_edges_total": self.n_edges_total,
            "n_edges_kept": self.n_edges_kept,
            "n_components": self.n_components,
            "has_cycle": self.has_cycle,
            "density": self.density,
            "component_sizes": list(self.component_sizes),
        }


def threshold_filter(graph: QuestionGraph, tau: float) -> ThresholdReport:
    """Keep edges with weight >= tau and report the resulting structure."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"tau out of [0, 1]: {tau!r}")
    kept = [edge for edge in graph.edges if edge.weight >= tau]
    dsu = DisjointSet(graph.node_ids())
    has_cycle = False
    for edge in kept:
        if not dsu.union(edge.a, edge.b):
            has_cycle = True
    sizes: dict[str, int] = {}
    for node_id in graph.node_ids():
        root = dsu.find(node_id)
        sizes[root] = sizes.get(root, 0) + 1
    n = len(graph.nodes)
    possible = n * (n - 1) // 2
    return ThresholdReport(
        tau=tau,
        n_nodes=n,
        n_edges_total=len(graph.edges),
        n_edges_kept=len(kept),
        n_components=len(sizes),
        has_cycle=has_cycle,
        density=len(kept) / possible if possible else 0.0,
        component_sizes=tuple(sorted(sizes.values(), reverse=True)),
    )


def max_spanning_tree(graph: QuestionGraph) -> QuestionGraph:
    """Prune to the maximum spanning tree.

    Negates the weights and runs Kruskal with union-find, which is the
    minimum-spanning-tree algorithm on the mirrored problem. Equal weights
    break ties toward the lexicographically smaller (a, b) pair, making the
    selected edge set deterministic.
    """
    components = graph.components()
    if len(components) > 1:
        preview = "; ".join(
            f"[{', '.join(group[:4])}{', ...' if len(group) > 4 else ''}]"
            for group in components
        )
        raise ValidationError(
            f"graph is disconnected ({len(components)} components): {preview}"
        )
    dsu = DisjointSet(graph.node_ids())
    chosen = []
    for edge in sorted(graph.edges, key=lambda e: (-e.weight, e.a, e.b)):
        if dsu.union(edge.a, edge.b):
            chosen.append(edge)
            if len(chosen) == len(graph.nodes) - 1:
                break
    chosen.sort(key=lambda e: (e.a, e.b))
    tree = QuestionGraph(
        nodes=[node.copy() for node in graph.nodes],
        edges=chosen,
        lam=graph.lam,
        merge_log=list(graph.merge_log),
    )
    tree.assert_tree()
    return tree


@dataclass(frozen=True)
class PathStep:
    """One stop on a sampled path.

    ``arrow`` renders the stored orientation of the edge arriving from the
    previous step: "->" when the previous question is the more general one,
    "<-" when this one is, "--" when neither. None on the first step.
    """

    node_id: str
    question: str
    arrow: str | None

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "question": self.question, "arrow": self.arrow}


def _tree_diameter_nodes(adjacency: dict[str, list[str]]) -> int:
    """Longest simple path in the tree, counted in nodes (double BFS)."""

    def farthest(start: str) -> tuple[str, int]:
        seen = {start: 0}
        queue = deque([start])
        far_node, far_dist = start, 0
        while queue:
            current = queue.popleft()
            for peer in adjacency[current]:
                if peer not in seen:
                    seen[peer] = seen[current] + 1
                    if seen[peer] > far_dist:
                        far_node, far_dist = peer, seen[peer]
                    queue.append(peer)
        return far_node, far_dist

    if not adjacency:
        return 0
    start = next(iter(sorted(adjacency)))
    end, _ = farthest(start)
    _, dist = farthest(end)
    return dist + 1


def sample_path(tree: QuestionGraph, k: int, seed: int) -> list[PathStep]:
    """Sample a simple path of ``k`` nodes from the pruned tree.

    Seeded leaf-to-node random walks, retried until one reaches length
    ``k``. Walks never revisit nodes, so every emitted path is simple.
    """
    tree.assert_tree()
    if k < 2:
        raise ValidationError(f"path length must be >= 2 nodes, got {k}")
    adjacency = tree.adjacency()
    diameter = _tree_diameter_nodes(adjacency)
    if k > diameter:
        raise ValidationError(
            f"no path of {k} nodes exists: tree diameter is {diameter} nodes"
        )
    directions = {
        (edge.a, edge.b): edge.direction for edge in tree.edges
    }
    leaves = sorted(nid for nid, peers in adjacency.items() if len(peers) <= 1)
    rng = random.Random(seed)
    for _ in range(PATH_SAMPLE_BUDGET):
        path = [rng.choice(leaves)]
        visited = {path[0]}
        while len(path) < k:
            options = [peer for peer in adjacency[path[-1]] if peer not in visited]
            if not options:
                break
            nxt = rng.choice(options)
            path.append(nxt)
            visited.add(nxt)
        if len(path) == k:
            return _annotate_path(tree, path, directions)
    raise ValidationError(
        f"path sampling budget exhausted after {PATH_SAMPLE_BUDGET} walks"
    )


def _annotate_path(
    tree: QuestionGraph,
    path: Sequence[str],
    directions: dict[tuple[str, str], str],
) -> list[PathStep]:
    by_id = {node.node_id: node for node in tree.nodes}
    steps = [PathStep(node_id=path[0], question=by_id[path[0]].question, arrow=None)]
    for prev, this in zip(path, path[1:]):
        if (prev, this) in directions:
            stored = directions[(prev, this)]
            arrow = {
                DIRECTION_A_TO_B: "->",
                DIRECTION_B_TO_A: "<-",
                DIRECTION_UNDIRECTED: "--",
            }[stored]
        else:
            stored = directions[(this, prev)]
            arrow = {
                DIRECTION_A_TO_B: "<-",
                DIRECTION_B_TO_A: "->",
                DIRECTION_UNDIRECTED: "--",
            }[stored]
        steps.append(PathStep(node_id=this, question=by_id[this].question, arrow=arrow))
    return steps


def format_path(steps: Sequence[PathStep]) -> str:
    parts = [steps[0].question]
    for step in steps[1:]:
        parts.append(step.arrow or "--")
        parts.append(step.question)
    return " ".join(parts)


def graph_to_dict(graph: QuestionGraph) -> dict:
    return {
        "lambda": graph.lam,
        "nodes": [node.to_dict() for node in sorted(graph.nodes, key=lambda n: n.node_id)],
        "edges": [
            edge.to_dict() for edge in sorted(graph.edges, key=lambda e: (e.a, e.b))
        ],
        "merge_log": [event.to_dict() for event in graph.merge_log],
    }


def graph_from_dict(payload: dict) -> QuestionGraph:
    try:
        graph = QuestionGraph(
            nodes=[QuestionNode.from_dict(r) for r in payload["nodes"]],
            edges=[WeightedEdge.from_dict(r) for r in payload["edges"]],
            lam=float(payload["lambda"]),
            merge_log=[MergeEvent.from_dict(r) for r in payload.get("merge_log", [])],
        )
    except (KeyError, TypeError) as err:
        raise ValidationError(f"malformed graph payload: {err}") from err
    return graph.validate()


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _to_dot(graph: QuestionGraph) -> str:
    lines = ["digraph dqm {"]
    for node in sorted(graph.nodes, key=lambda n: n.node_id):
        label = _dot_escape(node.question)
        lines.append(f'  "{node.node_id}" [label="{label}"];')
    for edge in sorted(graph.edges, key=lambda e: (e.a, e.b)):
        attrs = f'label="{edge.weight:.3f}", weight="{edge.weight:.6f}"'
        if edge.direction == DIRECTION_B_TO_A:
            lines.append(f'  "{edge.b}" -> "{edge.a}" [{attrs}];')
        elif edge.direction == DIRECTION_UNDIRECTED:
            lines.append(f'  "{edge.a}" -> "{edge.b}" [dir=none, {attrs}];')
        else:
            lines.append(f'  "{edge.a}" -> "{edge.b}" [{attrs}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_GRAPHML_NODE_KEYS = ("question", "context", "chunk_id", "absorbed")
_GRAPHML_EDGE_KEYS = ("eta", "xi", "weight", "direction")


def _to_graphml(graph: QuestionGraph) -> bytes:
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    keys: dict[str, str] = {}
    specs = [("graph", "lambda", "double")]
    specs += [
        ("node", name, "string") for name in _GRAPHML_NODE_KEYS
    ]
    specs += [
        ("edge", name, "string" if name == "direction" else "double")
        for name in _GRAPHML_EDGE_KEYS
    ]
    for i, (domain, name, kind) in enumerate(specs):
        key_id = f"d{i}"
        keys[f"{domain}:{name}"] = key_id
        ET.SubElement(
            root,
            "key",
            {"id": key_id, "for": domain, "attr.name": name, "attr.type": kind},
        )
    graph_el = ET.SubElement(root, "graph", {"id": "dqm", "edgedefault": "directed"})
    lam_el = ET.SubElement(graph_el, "data", {"key": keys["graph:lambda"]})
    lam_el.text = repr(graph.lam)
    for node in sorted(graph.nodes, key=lambda n: n.node_id):
        node_el = ET.SubElement(graph_el, "node", {"id": node.node_id})
        values = {
            "question": node.question,
            "context": node.context,
            "chunk_id": node.chunk_id,
            "absorbed": json.dumps(node.absorbed),
        }
        for name in _GRAPHML_NODE_KEYS:
            data = ET.SubElement(node_el, "data", {"key": keys[f"node:{name}"]})
            data.text = values[name]
    for edge in sorted(graph.edges, key=lambda e: (e.a, e.b)):
        source, target = edge.a, edge.b
        if edge.direction == DIRECTION_B_TO_A:
            source, target = edge.b, edge.a
        attrs = {"source": source, "target": target}
        if edge.direction == DIRECTION_UNDIRECTED:
            attrs["directed"] = "false"
        edge_el = ET.SubElement(graph_el, "edge", attrs)
        values = {
            "eta": repr(edge.eta),
            "xi": repr(edge.xi),
            "weight": repr(edge.weight),
            "direction": edge.direction,
        }
        for name in _GRAPHML_EDGE_KEYS:
            data = ET.SubElement(edge_el, "data", {"key": keys[f"edge:{name}"]})
            data.text = values[name]
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def export_graph(graph: QuestionGraph, fmt: str) -> bytes:
    """Serialize the graph; JSON round-trips, DOT and GraphML are view-only."""
    if fmt == "json":
        payload = json.dumps(graph_to_dict(graph), ensure_ascii=False, indent=2)
        return (payload + "\n").encode("utf-8")
    if fmt == "dot":
        return _to_dot(graph).encode("utf-8")
    if fmt == "graphml":
        return _to_graphml(graph)
    raise ValidationError(f"unknown export format: {fmt!r} (use dot, graphml, json)")


def import_graph(data: bytes | str) -> QuestionGraph:
    """Restore a graph from its canonical JSON export."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"graph JSON does not parse: {err}") from err
    return graph_from_dict(payload)
