from __future__ import annotations

import itertools
import json
import random
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqmap import (
    Backends,
    DIRECTION_A_TO_B,
    DIRECTION_B_TO_A,
    DIRECTION_UNDIRECTED,
    HierarchyOracleClassifier,
    QuestionGraph,
    QuestionNode,
    SectionId,
    TemplateQuestionGenerator,
    TfidfEmbedder,
    ValidationError,
    WeightedEdge,
    build_weighted_graph,
    edge_weight,
    export_graph,
    format_path,
    graph_from_dict,
    graph_to_dict,
    import_graph,
    max_spanning_tree,
    reduce_nodes,
    sample_path,
    threshold_filter,
)
from tests.conftest import make_nodes, offline_backends


def graph_from_weights(
    weights: dict[tuple[str, str], float],
    directions: dict[tuple[str, str], str] | None = None,
    lam: float = 0.5,
) -> QuestionGraph:
    """Build a graph with arbitrary weights; eta = xi = w satisfies the
    weight law for every lambda."""
    directions = directions or {}
    ids = sorted({n for pair in weights for n in pair})
    nodes = [
        QuestionNode(node_id=i, question=f"Q {i}?", context=f"ctx {i}", chunk_id=i)
        for i in ids
    ]
    edges = [
        WeightedEdge(
            a=a, b=b, eta=w, xi=w, weight=w,
            direction=directions.get((a, b), DIRECTION_UNDIRECTED),
        )
        for (a, b), w in sorted(weights.items())
    ]
    return QuestionGraph(nodes=nodes, edges=edges, lam=lam).validate()


def spanning_tree_weights_brute_force(graph: QuestionGraph) -> float:
    """Max spanning-tree weight by enumerating every (n-1)-edge subset."""
    ids = graph.node_ids()
    best = None
    for subset in itertools.combinations(graph.edges, len(ids) - 1):
        parent = {i: i for i in ids}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for edge in subset:
            ra, rb = find(edge.a), find(edge.b)
            if ra == rb:
                acyclic = False
                break
            parent[ra] = rb
        if acyclic:
            total = sum(e.weight for e in subset)
            if best is None or total > best:
                best = total
    assert best is not None
    return best


class TestReduceNodes:
    def test_merge_count_and_survivor_set(self):
        nodes = make_nodes(5, seed=3)
        alive, log = reduce_nodes(nodes, 3, offline_backends())
        assert len(alive) == 3
        assert len(log) == 2
        absorbed = [i for node in alive for i in node.absorbed]
        assert sorted(n.node_id for n in alive) + sorted(absorbed) == sorted(
            n.node_id for n in nodes
        ) + []
        assert len(set(absorbed)) == 2

    def test_general_question_survives(self):
        parent = QuestionNode(
            node_id="q_00000", question="What is indexing?",
            context="indexing overview", chunk_id="chk_00000",
            section_id=SectionId((1,)),
        )
        child = QuestionNode(
            node_id="q_00001", question="What is indexing?",
            context="indexing overview", chunk_id="chk_00001",
            section_id=SectionId((1, 1)),
        )
        alive, log = reduce_nodes([child, parent], 1, offline_backends())
        assert [n.node_id for n in alive] == ["q_00000"]
        assert alive[0].absorbed == ["q_00001"]
        assert log[0].label == "general"
        assert log[0].survivor == "q_00000"
        assert log[0].similarity == pytest.approx(1.0)

    def test_specific_label_keeps_second_node(self):
        specific = QuestionNode(
            node_id="q_00000", question="same text", context="same text",
            chunk_id="chk_00000", section_id=SectionId((1, 1)),
        )
        general = QuestionNode(
            node_id="q_00001", question="same text", context="same text",
            chunk_id="chk_00001", section_id=SectionId((1,)),
        )
        alive, log = reduce_nodes([specific, general], 1, offline_backends())
        assert [n.node_id for n in alive] == ["q_00001"]
        assert log[0].label == "specific"

    def test_identical_siblings_tie_break_to_smallest_id(self):
        nodes = [
            QuestionNode(
                node_id=f"q_{i:05d}", question="Same question?", context="same",
                chunk_id=f"chk_{i:05d}", section_id=SectionId((1, i + 1)),
            )
            for i in range(3)
        ]
        alive, log = reduce_nodes(nodes, 1, offline_backends())
        assert [n.node_id for n in alive] == ["q_00000"]
        assert alive[0].absorbed == ["q_00001", "q_00002"]
        assert [event.label for event in log] == ["other", "other"]

    def test_absorbed_ids_travel_with_survivor(self):
        # two chained specific merges: q_00002 ends up owning both losers
        nodes = [
            QuestionNode(
                node_id="q_00000", question="same", context="same",
                chunk_id="c0", section_id=SectionId((1, 2, 1)),
            ),
            QuestionNode(
                node_id="q_00001", question="same", context="same",
                chunk_id="c1", section_id=SectionId((1, 2)),
            ),
            QuestionNode(
                node_id="q_00002", question="same", context="same",
                chunk_id="c2", section_id=SectionId((1,)),
            ),
        ]
        alive, log = reduce_nodes(nodes, 1, offline_backends())
        assert [n.node_id for n in alive] == ["q_00002"]
        assert alive[0].absorbed == ["q_00001", "q_00000"]
        assert [(e.survivor, e.absorbed) for e in log] == [
            ("q_00001", "q_00000"),
            ("q_00002", "q_00001"),
        ]

    def test_target_equal_to_size_is_noop(self):
        nodes = make_nodes(4, seed=1)
        alive, log = reduce_nodes(nodes, 4, offline_backends())
        assert log == []
        assert [n.node_id for n in alive] == [n.node_id for n in nodes]

    def test_input_nodes_not_mutated(self):
        nodes = make_nodes(4, seed=1)
        reduce_nodes(nodes, 2, offline_backends())
        assert all(node.absorbed == [] for node in nodes)

    @pytest.mark.parametrize("target", [0, 5, -1])
    def test_target_out_of_range(self, target):
        with pytest.raises(ValidationError, match="target"):
            reduce_nodes(make_nodes(4, seed=0), target, offline_backends())

    def test_duplicate_node_ids_rejected(self):
        nodes = make_nodes(3, seed=0)
        nodes[2] = nodes[0].copy()
        with pytest.raises(ValidationError, match="duplicate"):
            reduce_nodes(nodes, 2, offline_backends())


class TestEdgeWeight:
    def test_worked_example(self):
        assert edge_weight(1.0, 0.5, 0.3) == pytest.approx(0.65, abs=1e-9)

    def test_lambda_zero_is_similarity_only(self):
        assert edge_weight(0.9, 0.4, 0.0) == 0.4

    def test_lambda_one_is_confidence_only(self):
        assert edge_weight(0.9, 0.4, 1.0) == 0.9

    @pytest.mark.parametrize(
        "eta, xi, lam", [(1.2, 0.5, 0.5), (0.5, -0.1, 0.5), (0.5, 0.5, 2.0)]
    )
    def test_out_of_range_rejected(self, eta, xi, lam):
        with pytest.raises(ValidationError):
            edge_weight(eta, xi, lam)

    @given(
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
    )
    def test_monotone_in_eta(self, eta_lo, eta_hi, xi, lam):
        lo, hi = sorted((eta_lo, eta_hi))
        assert edge_weight(lo, xi, lam) <= edge_weight(hi, xi, lam) + 1e-12


class TestBuildWeightedGraph:
    def test_complete_edge_count(self):
        nodes = make_nodes(6, sections=[(i + 1,) for i in range(6)], seed=2)
        graph = build_weighted_graph(nodes, offline_backends(), lam=0.3)
        assert len(graph.edges) == 15  # 6 * 5 / 2

    def test_edge_count_formula_examples(self):
        assert 300 * 299 // 2 == 44_850
        assert 5 * 4 // 2 == 10

    def test_weight_law_on_every_edge(self):
        nodes = make_nodes(5, sections=[(1,), (1, 1), (1, 2), (2,), (2, 1)], seed=4)
        graph = build_weighted_graph(nodes, offline_backends(), lam=0.3)
        for edge in graph.edges:
            assert edge.weight == pytest.approx(
                0.3 * edge.eta + 0.7 * edge.xi, abs=1e-9
            )

    def test_oracle_direction_and_eta(self):
        nodes = [
            QuestionNode(
                node_id="q_00000", question="What is retrieval?",
                context="retrieval basics", chunk_id="c0",
                section_id=SectionId((1,)),
            ),
            QuestionNode(
                node_id="q_00001", question="What is ranking?",
                context="ranking details", chunk_id="c1",
                section_id=SectionId((1, 1)),
            ),
            QuestionNode(
                node_id="q_00002", question="What is storage?",
                context="storage matters", chunk_id="c2",
                section_id=SectionId((2,)),
            ),
        ]
        graph = build_weighted_graph(nodes, offline_backends(), lam=0.3)
        by_pair = {(e.a, e.b): e for e in graph.edges}
        parent_child = by_pair[("q_00000", "q_00001")]
        assert parent_child.direction == DIRECTION_A_TO_B
        assert parent_child.eta == pytest.approx(0.99)
        unrelated = by_pair[("q_00000", "q_00002")]
        assert unrelated.direction == DIRECTION_UNDIRECTED
        assert unrelated.eta == pytest.approx(0.02)

    def test_child_listed_first_gets_reverse_direction(self):
        nodes = [
            QuestionNode(
                node_id="q_00000", question="What is ranking?",
                context="ranking details", chunk_id="c0",
                section_id=SectionId((1, 1)),
            ),
            QuestionNode(
                node_id="q_00001", question="What is retrieval?",
                context="retrieval basics", chunk_id="c1",
                section_id=SectionId((1,)),
            ),
        ]
        graph = build_weighted_graph(nodes, offline_backends(), lam=0.3)
        assert graph.edges[0].direction == DIRECTION_B_TO_A

    def test_nodes_sorted_by_id(self):
        nodes = list(reversed(make_nodes(4, sections=[(i + 1,) for i in range(4)],
                                          seed=0)))
        graph = build_weighted_graph(nodes, offline_backends(), lam=0.3)
        assert graph.node_ids() == sorted(graph.node_ids())

    def test_lambda_out_of_range(self):
        with pytest.raises(ValidationError, match="lambda"):
            build_weighted_graph(make_nodes(3, seed=0), offline_backends(), lam=1.5)

    def test_too_few_nodes(self):
        with pytest.raises(ValidationError, match="at least 2"):
            build_weighted_graph(make_nodes(1, seed=0), offline_backends(), lam=0.3)

    def test_classifier_count_mismatch_detected(self):
        class ShortClassifier:
            def classify(self, pairs):
                return HierarchyOracleClassifier().classify(pairs)[:-1]

        nodes = make_nodes(3, sections=[(1,), (1, 1), (2,)], seed=0)
        backends = Backends(
            embedder=TfidfEmbedder(), classifier=ShortClassifier(),
            generator=TemplateQuestionGenerator(), remote=None,
        )
        with pytest.raises(ValidationError, match="distributions"):
            build_weighted_graph(nodes, backends, lam=0.3)


class TestThresholdFilter:
    def diamond(self):
        return graph_from_weights({
            ("a", "b"): 0.9, ("a", "c"): 0.75, ("b", "c"): 0.8,
            ("a", "d"): 0.1, ("b", "d"): 0.2, ("c", "d"): 0.6,
        })

    def test_zero_tau_keeps_everything(self):
        report = threshold_filter(self.diamond(), 0.0)
        assert report.n_edges_kept == report.n_edges_total == 6
        assert report.n_components == 1
        assert report.has_cycle is True
        assert report.density == 1.0

    def test_tau_above_max_weight_isolates_all_nodes(self):
        report = threshold_filter(self.diamond(), 0.95)
        assert report.n_edges_kept == 0
        assert report.n_components == 4
        assert report.has_cycle is False
        assert report.component_sizes == (1, 1, 1, 1)
        assert report.density == 0.0

    def test_hand_computed_mid_threshold(self):
        report = threshold_filter(self.diamond(), 0.7)
        # keeps ab, ac, bc: one triangle plus isolated d
        assert report.n_edges_kept == 3
        assert report.has_cycle is True
        assert report.n_components == 2
        assert report.component_sizes == (3, 1)
        assert report.density == pytest.approx(0.5)

    def test_boundary_weight_is_kept(self):
        report = threshold_filter(self.diamond(), 0.6)
        assert report.n_edges_kept == 4  # 0.6 edge included: kept means w >= tau

    def test_tau_out_of_range(self):
        with pytest.raises(ValidationError, match="tau"):
            threshold_filter(self.diamond(), 1.2)


class TestMaxSpanningTree:
    def test_triangle_drops_weakest_edge(self):
        graph = graph_from_weights(
            {("a", "b"): 0.9, ("b", "c"): 0.8, ("a", "c"): 0.2}
        )
        tree = max_spanning_tree(graph)
        assert {(e.a, e.b) for e in tree.edges} == {("a", "b"), ("b", "c")}
        assert tree.total_weight() == pytest.approx(1.7)

    def test_existing_tree_is_unchanged(self):
        graph = graph_from_weights({("a", "b"): 0.4, ("b", "c"): 0.6})
        tree = max_spanning_tree(graph)
        assert {(e.a, e.b) for e in tree.edges} == {("a", "b"), ("b", "c")}

    def test_equal_weights_tie_break_is_lexicographic(self):
        weights = {
            (a, b): 0.5
            for a, b in itertools.combinations(["a", "b", "c", "d"], 2)
        }
        tree = max_spanning_tree(graph_from_weights(weights))
        assert {(e.a, e.b) for e in tree.edges} == {
            ("a", "b"), ("a", "c"), ("a", "d")
        }

    def test_matches_brute_force_on_random_graphs(self):
        rng = random.Random(99)
        for _ in range(5):
            ids = [f"n{i}" for i in range(6)]
            weights = {
                pair: round(rng.uniform(0.05, 0.95), 3)
                for pair in itertools.combinations(ids, 2)
            }
            graph = graph_from_weights(weights)
            tree = max_spanning_tree(graph)
            assert tree.is_tree()
            assert tree.total_weight() == pytest.approx(
                spanning_tree_weights_brute_force(graph), abs=1e-9
            )

    def test_disconnected_graph_rejected_with_components(self):
        graph = graph_from_weights({("a", "b"): 0.5, ("c", "d"): 0.5})
        with pytest.raises(ValidationError, match="2 components"):
            max_spanning_tree(graph)

    def test_single_node_graph_is_already_a_tree(self):
        node = QuestionNode(node_id="a", question="Q?", context="c", chunk_id="a")
        tree = max_spanning_tree(QuestionGraph(nodes=[node], edges=[], lam=0.3))
        assert tree.is_tree()
        assert tree.edges == []

    def test_weight_scaling_preserves_edge_choice(self):
        rng = random.Random(5)
        ids = [f"n{i}" for i in range(6)]
        weights = {
            pair: round(rng.uniform(0.1, 0.9), 3)
            for pair in itertools.combinations(ids, 2)
        }
        halved = {pair: w / 2 for pair, w in weights.items()}
        chosen = {(e.a, e.b) for e in max_spanning_tree(graph_from_weights(weights)).edges}
        chosen_halved = {
            (e.a, e.b) for e in max_spanning_tree(graph_from_weights(halved)).edges
        }
        assert chosen == chosen_halved

    def test_merge_log_carried_over(self):
        graph = graph_from_weights({("a", "b"): 0.5})
        from dqmap import MergeEvent

        graph.merge_log.append(
            MergeEvent(survivor="a", absorbed="z", similarity=1.0, label="other")
        )
        tree = max_spanning_tree(graph)
        assert tree.merge_log == graph.merge_log


def path_graph(directions=None):
    return graph_from_weights(
        {("a", "b"): 0.9, ("b", "c"): 0.8, ("c", "d"): 0.7},
        directions=directions,
    )


class TestSamplePath:
    def test_two_node_path(self):
        tree = max_spanning_tree(graph_from_weights({("a", "b"): 0.5}))
        steps = sample_path(tree, k=2, seed=0)
        assert len(steps) == 2
        assert steps[0].arrow is None
        assert steps[1].arrow == "--"

    def test_length_beyond_diameter_reports_diameter(self):
        tree = path_graph()
        with pytest.raises(ValidationError, match="diameter is 4"):
            sample_path(tree, k=5, seed=0)

    def test_star_paths_pass_through_center(self):
        star = graph_from_weights(
            {("hub", "l1"): 0.5, ("hub", "l2"): 0.5, ("hub", "l3"): 0.5}
        )
        for seed in range(10):
            steps = sample_path(star, k=3, seed=seed)
            assert steps[1].node_id == "hub"
            assert steps[0].node_id != steps[2].node_id

    def test_deterministic_for_seed(self):
        tree = path_graph()
        assert sample_path(tree, 3, seed=11) == sample_path(tree, 3, seed=11)

    def test_seeds_reach_different_paths(self):
        star = graph_from_weights(
            {("hub", f"l{i}"): 0.5 for i in range(6)}
        )
        paths = {
            tuple(s.node_id for s in sample_path(star, 3, seed=seed))
            for seed in range(20)
        }
        assert len(paths) > 1

    def test_arrows_follow_stored_direction(self):
        tree = path_graph(directions={
            ("a", "b"): DIRECTION_A_TO_B,
            ("b", "c"): DIRECTION_A_TO_B,
            ("c", "d"): DIRECTION_B_TO_A,
        })
        walked = None
        for seed in range(50):
            steps = sample_path(tree, 4, seed=seed)
            if steps[0].node_id == "a":
                walked = steps
                break
        assert walked is not None
        assert [s.arrow for s in walked] == [None, "->", "->", "<-"]
        rendering = format_path(walked)
        assert rendering == "Q a? -> Q b? -> Q c? <- Q d?"

    def test_reverse_traversal_flips_arrows(self):
        tree = path_graph(directions={
            ("a", "b"): DIRECTION_A_TO_B,
            ("b", "c"): DIRECTION_A_TO_B,
            ("c", "d"): DIRECTION_B_TO_A,
        })
        walked = None
        for seed in range(50):
            steps = sample_path(tree, 4, seed=seed)
            if steps[0].node_id == "d":
                walked = steps
                break
        assert walked is not None
        assert [s.arrow for s in walked] == [None, "->", "<-", "<-"]

    def test_k_below_two_rejected(self):
        with pytest.raises(ValidationError, match=">= 2"):
            sample_path(path_graph(), 1, seed=0)

    def test_non_tree_rejected(self):
        graph = graph_from_weights(
            {("a", "b"): 0.5, ("b", "c"): 0.5, ("a", "c"): 0.5}
        )
        with pytest.raises(ValidationError, match="not a tree"):
            sample_path(graph, 2, seed=0)


class TestSerialization:
    def build_sample(self) -> QuestionGraph:
        nodes = [
            QuestionNode(
                node_id="q_00000", question="What is a b-tree?",
                context="B-trees store sorted data.", chunk_id="chk_00000",
                absorbed=["q_00003"],
            ),
            QuestionNode(
                node_id="q_00001", question="How do pages split?",
                context="Pages split on overflow.", chunk_id="chk_00001",
            ),
            QuestionNode(
                node_id="q_00002", question="What is fan-out?",
                context="Fan-out bounds height.", chunk_id="chk_00002",
            ),
        ]
        edges = [
            WeightedEdge(a="q_00000", b="q_00001", eta=0.99, xi=0.5,
                         weight=0.3 * 0.99 + 0.7 * 0.5, direction=DIRECTION_A_TO_B),
            WeightedEdge(a="q_00000", b="q_00002", eta=0.02, xi=0.25,
                         weight=0.3 * 0.02 + 0.7 * 0.25,
                         direction=DIRECTION_UNDIRECTED),
        ]
        return QuestionGraph(nodes=nodes, edges=edges, lam=0.3).validate()

    def test_dict_round_trip(self):
        graph = self.build_sample()
        assert graph_from_dict(graph_to_dict(graph)) == graph

    def test_json_export_shape(self):
        data = export_graph(self.build_sample(), "json")
        payload = json.loads(data)
        assert set(payload) == {"lambda", "nodes", "edges", "merge_log"}
        assert payload["lambda"] == 0.3
        assert list(payload["nodes"][0]) == [
            "node_id", "question", "context", "chunk_id", "absorbed"
        ]
        assert list(payload["edges"][0]) == [
            "a", "b", "eta", "xi", "weight", "direction"
        ]
        assert data.endswith(b"\n")

    def test_json_round_trip_is_identity(self):
        graph = self.build_sample()
        assert import_graph(export_graph(graph, "json")) == graph

    def test_json_export_is_stable_bytes(self):
        graph = self.build_sample()
        assert export_graph(graph, "json") == export_graph(graph, "json")

    def test_dot_directed_and_undirected_edges(self):
        dot = export_graph(self.build_sample(), "dot").decode("utf-8")
        assert dot.startswith("digraph")
        assert '"q_00000" -> "q_00001"' in dot
        assert "dir=none" in dot
        assert "weight=" in dot

    def test_dot_reverses_b_to_a(self):
        graph = graph_from_weights(
            {("x", "y"): 0.5}, directions={("x", "y"): DIRECTION_B_TO_A}
        )
        dot = export_graph(graph, "dot").decode("utf-8")
        assert '"y" -> "x"' in dot

    def test_graphml_parses_and_counts(self):
        graph = self.build_sample()
        root = ET.fromstring(export_graph(graph, "graphml"))
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        nodes = root.findall(f".//{ns}node")
        edges = root.findall(f".//{ns}edge")
        assert len(nodes) == 3
        assert len(edges) == 2
        undirected = [e for e in edges if e.get("directed") == "false"]
        assert len(undirected) == 1

    def test_unknown_format_rejected(self):
        with pytest.raises(ValidationError, match="format"):
            export_graph(self.build_sample(), "gexf")

    def test_validate_rejects_duplicate_pair(self):
        graph = self.build_sample()
        graph.edges.append(graph.edges[0])
        with pytest.raises(ValidationError, match="duplicate edge"):
            graph.validate()

    def test_validate_rejects_weight_law_violation(self):
        edge = WeightedEdge(a="a", b="b", eta=1.0, xi=0.0, weight=0.9,
                            direction=DIRECTION_A_TO_B)
        nodes = [
            QuestionNode(node_id=i, question="q", context="c", chunk_id=i)
            for i in ("a", "b")
        ]
        with pytest.raises(ValidationError):
            QuestionGraph(nodes=nodes, edges=[edge], lam=0.3).validate()

    def test_validate_rejects_absorbed_claimed_twice(self):
        graph = self.build_sample()
        graph.nodes[1].absorbed.append("q_00003")
        with pytest.raises(ValidationError, match="absorbed"):
            graph.validate()
