"""
Unit tests for connector collapsing, statistics and validation
"""

import json
import unittest
from collections import Counter
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from src.annotation_io import GraphMLStore
from src.errors import StageError
from src.graph_model import BBox, Edge, EdgeClass, Node, NodeClass, PREPROCESSING_CLASSES, ProcessGraph, Stage
from src.graph_processor import CrossingMode, GraphProcessor
from src.toy_plans import ToyPlanFactory

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def box(x: float, y: float, size: float = 20.0) -> BBox:
    return BBox(x1=x, y1=y, x2=x + size, y2=y + size)


def brute_force_collapse(graph: ProcessGraph) -> dict:
    """Enumerate every physical-connector*-physical path; first chain by sorted ids wins"""
    classes = {n.id: n.cls for n in graph.nodes}
    adjacency = {n.id: {} for n in graph.nodes if n.cls != NodeClass.CROSSING}
    for edge in graph.edges:
        if edge.source in adjacency and edge.target in adjacency and edge.source != edge.target:
            adjacency[edge.source][edge.target] = edge.cls
            adjacency[edge.target][edge.source] = edge.cls

    result = {}
    chosen = {}
    for start in sorted(adjacency):
        if classes[start] in PREPROCESSING_CLASSES:
            continue
        stack = [(start, [start], [])]
        while stack:
            current, path, chain_classes = stack.pop()
            for nbr, edge_cls in adjacency[current].items():
                if nbr in path:
                    continue
                if classes[nbr] == NodeClass.CONNECTOR:
                    stack.append((nbr, path + [nbr], chain_classes + [edge_cls]))
                    continue
                key = tuple(sorted((start, nbr)))
                all_classes = chain_classes + [edge_cls]
                chain_ids = tuple(sorted(path[1:]))
                if not chain_ids:
                    result[key] = edge_cls
                    chosen[key] = ()
                    continue
                if chosen.get(key) == ():
                    continue
                if key not in chosen or chain_ids < chosen[key]:
                    counts = Counter(all_classes)
                    majority = EdgeClass.NON_SOLID if counts[EdgeClass.NON_SOLID] > counts[EdgeClass.SOLID] else EdgeClass.SOLID
                    result[key] = majority
                    chosen[key] = chain_ids
    return result


class TestCollapse(unittest.TestCase):
    """Connector chain contraction and crossing deletion"""

    def test_majority_class_ties_resolve_to_solid(self):
        self.assertEqual(GraphProcessor.majority_class([EdgeClass.SOLID, EdgeClass.NON_SOLID]), EdgeClass.SOLID)
        self.assertEqual(
            GraphProcessor.majority_class([EdgeClass.NON_SOLID, EdgeClass.NON_SOLID, EdgeClass.SOLID]),
            EdgeClass.NON_SOLID,
        )

    def test_bundled_toy_plan_matches_sidecar(self):
        raw = GraphMLStore.read_graphml(str(DATA_DIR / "toy_plan_raw.graphml"))
        sidecar = json.loads((DATA_DIR / "toy_plan_raw.json").read_text(encoding="utf-8"))
        self.assertEqual(len(raw.nodes), sidecar["raw"]["nodes"])
        self.assertEqual(len(raw.edges), sidecar["raw"]["edges"])

        collapsed = GraphProcessor.collapse(raw)
        self.assertEqual(collapsed.stage, Stage.COLLAPSED)
        self.assertEqual(GraphProcessor.validate(collapsed), [])
        self.assertFalse(any(n.cls in PREPROCESSING_CLASSES for n in collapsed.nodes))
        self.assertEqual(len(collapsed.nodes), sidecar["collapsed"]["nodes"])
        expected = {(a, b): EdgeClass(c) for a, b, c in sidecar["collapsed"]["edge_list"]}
        self.assertEqual({e.key: e.cls for e in collapsed.edges}, expected)

    def test_bundled_toy_plan_preprocessing_share(self):
        raw = GraphMLStore.read_graphml(str(DATA_DIR / "toy_plan_raw.graphml"))
        self.assertTrue(0.5 <= GraphProcessor.preprocessing_fraction(raw) <= 0.65)

    def test_bridge_mode_reconnects_straight_through_pipes(self):
        raw = GraphMLStore.read_graphml(str(DATA_DIR / "toy_plan_raw.graphml"))
        deleted = GraphProcessor.collapse(raw)
        bridged = GraphProcessor.collapse(raw, CrossingMode.BRIDGE)
        self.assertNotIn(("I1", "IO1"), deleted.edge_keys())
        self.assertIn(("I1", "IO1"), bridged.edge_keys())
        self.assertEqual(len(bridged.edges), len(deleted.edges) + 1)

    def test_graph_without_auxiliary_nodes_is_unchanged(self):
        graph = ProcessGraph(
            nodes=[Node(id="a", cls=NodeClass.PUMP, box=box(0, 0)), Node(id="b", cls=NodeClass.VALVE, box=box(50, 0))],
            edges=[Edge(source="a", target="b", cls=EdgeClass.NON_SOLID)],
            canvas=(100, 100),
        )
        collapsed = GraphProcessor.collapse(graph)
        self.assertEqual([n.id for n in collapsed.nodes], ["a", "b"])
        self.assertEqual({e.key: e.cls for e in collapsed.edges}, {("a", "b"): EdgeClass.NON_SOLID})

    def test_two_chains_between_same_pair_keep_one_edge(self):
        graph = ProcessGraph(
            nodes=[
                Node(id="p", cls=NodeClass.PUMP, box=box(0, 0)),
                Node(id="q", cls=NodeClass.TANK, box=box(200, 0)),
                Node(id="c1", cls=NodeClass.CONNECTOR, box=box(100, 0, 8)),
                Node(id="c2", cls=NodeClass.CONNECTOR, box=box(100, 100, 8)),
            ],
            edges=[
                Edge(source="p", target="c1"),
                Edge(source="c1", target="q"),
                Edge(source="p", target="c2", cls=EdgeClass.NON_SOLID),
                Edge(source="c2", target="q", cls=EdgeClass.NON_SOLID),
            ],
            canvas=(300, 200),
        )
        collapsed = GraphProcessor.collapse(graph)
        self.assertEqual(len(collapsed.edges), 1)
        self.assertEqual(collapsed.edges[0].cls, EdgeClass.SOLID)

    def test_dangling_connector_is_reported(self):
        graph = ProcessGraph(
            nodes=[
                Node(id="p", cls=NodeClass.PUMP, box=box(0, 0)),
                Node(id="c1", cls=NodeClass.CONNECTOR, box=box(100, 0, 8)),
            ],
            edges=[Edge(source="p", target="c1")],
            canvas=(200, 100),
        )
        collapsed, warnings = GraphProcessor.collapse_with_report(graph)
        self.assertEqual(collapsed.edges, [])
        self.assertTrue(any("dangling" in w for w in warnings))

    def test_collapsed_input_is_rejected(self):
        with self.assertRaises(StageError):
            GraphProcessor.collapse(ProcessGraph(stage=Stage.COLLAPSED))

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=2, max_value=10))
    @settings(max_examples=100, deadline=None)
    def test_collapse_agrees_with_chain_enumeration(self, seed, n_physical):
        raw = ToyPlanFactory.raw_plan(np.random.default_rng(seed), n_physical=n_physical)
        self.assertLessEqual(len(raw.nodes), 30)
        collapsed = GraphProcessor.collapse(raw)
        self.assertEqual({e.key: e.cls for e in collapsed.edges}, brute_force_collapse(raw))
        self.assertEqual(GraphProcessor.physical_ids(collapsed), GraphProcessor.physical_ids(raw))
        self.assertEqual(GraphProcessor.validate(collapsed), [])

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_toy_raw_plans_stay_in_connector_band(self, seed):
        raw = ToyPlanFactory.raw_plan(np.random.default_rng(seed))
        self.assertTrue(0.5 <= GraphProcessor.preprocessing_fraction(raw) <= 0.65)


class TestStatsAndValidation(unittest.TestCase):
    """Graph statistics and invariant checks"""

    def triangle(self, stage: Stage = Stage.COLLAPSED) -> ProcessGraph:
        return ProcessGraph(
            nodes=[Node(id=i, cls=NodeClass.VALVE, box=box(50 * k, 0)) for k, i in enumerate("abc")],
            edges=[Edge(source="a", target="b"), Edge(source="b", target="c"), Edge(source="a", target="c")],
            canvas=(200, 100),
            stage=stage,
        )

    def test_triangle_stats(self):
        stats = GraphProcessor.compute_stats(self.triangle())
        self.assertEqual(stats.degree_histogram, {2: 3})
        self.assertEqual(stats.node_count, 3)
        self.assertEqual(stats.edge_count, 3)
        self.assertAlmostEqual(stats.edge_density, 1.0)
        self.assertEqual(stats.class_counts, {"valve": 3})

    def test_well_formed_graph_has_no_violations(self):
        self.assertEqual(GraphProcessor.validate(self.triangle()), [])

    def test_violations_are_reported_as_data(self):
        graph = ProcessGraph(
            nodes=[
                Node(id="a", cls=NodeClass.VALVE, box=box(0, 0)),
                Node(id="a", cls=NodeClass.VALVE, box=box(50, 0)),
                Node(id="c", cls=NodeClass.CONNECTOR, box=box(100, 0, 8), confidence=1.5),
            ],
            edges=[
                Edge(source="a", target="a"),
                Edge(source="a", target="c"),
                Edge(source="c", target="a"),
                Edge(source="a", target="zz"),
            ],
            canvas=(200, 100),
            stage=Stage.COLLAPSED,
        )
        rules = {v.rule for v in GraphProcessor.validate(graph)}
        self.assertTrue({
            "duplicate-node-id", "self-loop", "parallel-edge",
            "referential-integrity", "stage-restriction", "confidence-range",
        } <= rules)

    def test_border_nodes_only_in_patches(self):
        graph = ProcessGraph(
            nodes=[Node(id="border:a--b", cls=NodeClass.BORDER, box=box(0, 0, 8))],
            canvas=(100, 100),
            stage=Stage.STITCHED,
        )
        self.assertEqual([v.rule for v in GraphProcessor.validate(graph)], ["stage-restriction"])
        self.assertEqual(GraphProcessor.validate(graph.model_copy(update={"stage": Stage.PATCH})), [])


if __name__ == "__main__":
    unittest.main()
