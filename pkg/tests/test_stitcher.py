"""
Unit tests for merging patch predictions into full-plan graphs
"""

import tempfile
import unittest
from typing import Optional

import numpy as np

from src.config import PatchSpec, StitchConfig
from src.errors import WindowIndexError
from src.geometry import Side
from src.graph_model import BBox, Edge, EdgeClass, Node, NodeClass, ProcessGraph, Stage
from src.graph_processor import GraphProcessor
from src.metrics import PlanEvaluator
from src.patcher import Patcher, WindowEntry, WindowIndex
from src.stitcher import Stitcher
from src.toy_plans import ToyPlanFactory


def patch_graph(nodes, edges) -> ProcessGraph:
    return ProcessGraph(nodes=nodes, edges=edges, canvas=(1500, 1500), stage=Stage.PATCH)


def two_window_index(canvas, stride) -> WindowIndex:
    return WindowIndex(
        plan_id="pair",
        canvas=canvas,
        patch_size=1500,
        stride=stride,
        windows=[WindowEntry(name="0_0", x0=0, y0=0), WindowEntry(name=f"{stride}_0", x0=stride, y0=0)],
    )


def border_pair(right_y: float, left_y: float, right_conf: float = 1.0, left_conf: float = 1.0,
                right_cls: EdgeClass = EdgeClass.NON_SOLID, left_cls: EdgeClass = EdgeClass.NON_SOLID,
                right_border: str = "border:a", left_border: str = "border:b"):
    """Two abutting windows, each holding one node and a half-edge to the shared line"""
    left = patch_graph(
        [
            Node(id="a", cls=NodeClass.PUMP, box=BBox(x1=100, y1=80, x2=140, y2=120)),
            Node(id=right_border, cls=NodeClass.BORDER, box=BBox.from_center(1496, right_y, 8, 8)),
        ],
        [Edge(source="a", target=right_border, cls=right_cls, confidence=right_conf)],
    )
    right = patch_graph(
        [
            Node(id="b", cls=NodeClass.TANK, box=BBox(x1=480, y1=80, x2=520, y2=120)),
            Node(id=left_border, cls=NodeClass.BORDER, box=BBox.from_center(4, left_y, 8, 8)),
        ],
        [Edge(source=left_border, target="b", cls=left_cls, confidence=left_conf)],
    )
    return {"0_0": left, "1500_0": right}


def pair_plan(bx: float, canvas=(3000, 3000)) -> ProcessGraph:
    """Pump at (100, 100) piped to a tank centred at (bx, 100)"""
    return ProcessGraph(
        nodes=[
            Node(id="a", cls=NodeClass.PUMP, box=BBox.from_center(100, 100, 40, 40)),
            Node(id="b", cls=NodeClass.TANK, box=BBox.from_center(bx, 100, 40, 40)),
        ],
        edges=[Edge(source="a", target="b", cls=EdgeClass.NON_SOLID)],
        canvas=canvas,
        stage=Stage.COLLAPSED,
    )


def round_trip(plan: ProcessGraph, patcher: Optional[Patcher] = None, stitcher: Optional[Stitcher] = None) -> ProcessGraph:
    patch_set = (patcher or Patcher()).patch_plan(plan, "plan")
    return (stitcher or Stitcher()).stitch({p.name: p.graph for p in patch_set.patches}, patch_set.index)


class TestRoundTrip(unittest.TestCase):
    """Patching ground truth and stitching it back"""

    def test_tiled_plans_survive_patch_and_stitch(self):
        patcher, stitcher = Patcher(), Stitcher()
        for index in range(4):
            plan = ToyPlanFactory.tiled_plan(np.random.default_rng([11, index]))
            patch_set = patcher.patch_plan(plan, f"tiled_{index}")
            predictions = {p.name: p.graph for p in patch_set.patches}
            stitched = stitcher.stitch(predictions, patch_set.index)

            self.assertEqual(stitched.stage, Stage.STITCHED)
            self.assertEqual(GraphProcessor.validate(stitched), [])
            self.assertEqual(len(stitched.nodes), len(plan.nodes))
            report = PlanEvaluator.evaluate_plan(stitched, plan)
            self.assertEqual(report.node_map, 1.0)
            self.assertGreaterEqual(report.edge_map, 0.99)

    def test_non_overlapping_windows_rely_on_border_welds(self):
        patcher = Patcher(PatchSpec(patch_size=1500, stride=1500))
        plan = ToyPlanFactory.tiled_plan(np.random.default_rng(5))
        patch_set = patcher.patch_plan(plan, "tiled")
        stitched = Stitcher().stitch({p.name: p.graph for p in patch_set.patches}, patch_set.index)
        report = PlanEvaluator.evaluate_plan(stitched, plan)
        self.assertEqual(report.node_map, 1.0)
        self.assertGreaterEqual(report.edge_map, 0.99)

    def test_nodes_on_window_lines_survive(self):
        for bx in (1499, 1500, 1501, 2000):
            with self.subTest(bx=bx):
                plan = pair_plan(bx)
                stitched = round_trip(plan)
                self.assertEqual(len(stitched.nodes), 2)
                self.assertEqual(len(stitched.edges), 1)
                report = PlanEvaluator.evaluate_plan(stitched, plan)
                self.assertEqual(report.node_map, 1.0)
                self.assertEqual(report.edge_map, 1.0)

    def test_random_long_edges_survive(self):
        for seed in range(10):
            with self.subTest(seed=seed):
                plan = ToyPlanFactory.long_edge_plan(np.random.default_rng([23, seed]))
                stitched = round_trip(plan)
                self.assertEqual(GraphProcessor.validate(stitched), [])
                self.assertEqual(len(stitched.nodes), len(plan.nodes))
                self.assertEqual(len(stitched.edges), len(plan.edges))
                report = PlanEvaluator.evaluate_plan(stitched, plan)
                self.assertEqual(report.node_map, 1.0)
                self.assertGreaterEqual(report.edge_map, 0.99)

    def test_long_edges_without_identity_welds(self):
        stitcher = Stitcher(StitchConfig(weld_by_id=False))
        plan = pair_plan(1600, canvas=(2250, 1500))
        stitched = round_trip(plan, stitcher=stitcher)
        self.assertEqual(len(stitched.edges), 1)
        self.assertEqual(PlanEvaluator.evaluate_plan(stitched, plan).edge_map, 1.0)


class TestFusion(unittest.TestCase):
    """NMS and weighted box fusion"""

    def test_overlapping_detections_fuse_by_confidence(self):
        index = two_window_index((2250, 1500), 750)
        left = patch_graph(
            [
                Node(id="a", cls=NodeClass.VALVE, box=BBox(x1=1000, y1=500, x2=1040, y2=540), confidence=0.9),
                Node(id="b", cls=NodeClass.VALVE, box=BBox(x1=1200, y1=500, x2=1240, y2=540), confidence=0.9),
            ],
            [Edge(source="a", target="b", confidence=0.8)],
        )
        right = patch_graph(
            [
                Node(id="a", cls=NodeClass.VALVE, box=BBox(x1=254, y1=500, x2=294, y2=540), confidence=0.6),
                Node(id="b", cls=NodeClass.VALVE, box=BBox(x1=450, y1=500, x2=490, y2=540), confidence=0.6),
            ],
            [Edge(source="a", target="b", confidence=0.7)],
        )
        stitched = Stitcher().stitch({"0_0": left, "750_0": right}, index)

        self.assertEqual(len(stitched.nodes), 2)
        self.assertEqual(len(stitched.edges), 1)
        fused = stitched.node_map()["0_0:a"]
        self.assertAlmostEqual(fused.box.x1, 1001.6)
        self.assertAlmostEqual(fused.box.x2, 1041.6)
        self.assertAlmostEqual(fused.confidence, 0.75)
        self.assertEqual(stitched.edges[0].confidence, 0.8)

    def test_nms_within_a_patch(self):
        stitcher = Stitcher()
        graph = patch_graph(
            [
                Node(id="hi", cls=NodeClass.PUMP, box=BBox(x1=500, y1=500, x2=540, y2=540), confidence=0.9),
                Node(id="lo", cls=NodeClass.PUMP, box=BBox(x1=500, y1=500, x2=540, y2=541), confidence=0.4),
            ],
            [],
        )
        fused, remap = stitcher.fuse_nodes([stitcher.to_global("0_0", 0, 0, 1500, graph)])
        self.assertEqual([n.id for n in fused], ["0_0:hi"])
        self.assertEqual(remap["0_0:lo"], "0_0:hi")

    def test_faint_copy_joins_its_host(self):
        stitcher = Stitcher()
        left = patch_graph(
            [Node(id="a", cls=NodeClass.PUMP, box=BBox(x1=1000, y1=500, x2=1040, y2=540), confidence=0.9)], []
        )
        right = patch_graph(
            [
                Node(id="a", cls=NodeClass.PUMP, box=BBox(x1=250, y1=500, x2=290, y2=540), confidence=0.0),
                Node(id="t", cls=NodeClass.TANK, box=BBox(x1=250, y1=500, x2=290, y2=540), confidence=0.0),
            ],
            [],
        )
        patches = [stitcher.to_global("0_0", 0, 0, 1500, left), stitcher.to_global("750_0", 750, 0, 1500, right)]
        fused, remap = stitcher.fuse_nodes(patches)

        self.assertEqual([n.id for n in fused], ["0_0:a"])
        self.assertEqual(fused[0].box, BBox(x1=1000, y1=500, x2=1040, y2=540))
        self.assertAlmostEqual(fused[0].confidence, 0.9)
        self.assertEqual(remap["750_0:a"], "0_0:a")
        self.assertNotIn("750_0:t", remap)

    def test_attenuation_near_closed_sides(self):
        stitcher = Stitcher(StitchConfig(margin=100))
        window = BBox(x1=0, y1=0, x2=1500, y2=1500)
        graph = patch_graph(
            [Node(id="n", cls=NodeClass.GENERAL, box=BBox(x1=1410, y1=700, x2=1450, y2=740), confidence=0.8)], []
        )
        self.assertAlmostEqual(stitcher.attenuate(graph, window).nodes[0].confidence, 0.4)
        self.assertAlmostEqual(stitcher.attenuate(graph, window, [Side.RIGHT]).nodes[0].confidence, 0.8)

    def test_open_sides(self):
        self.assertEqual(Stitcher.open_sides(0, 0, 1500, (3000, 3000)), {Side.LEFT, Side.TOP})
        self.assertEqual(Stitcher.open_sides(1500, 750, 1500, (3000, 2250)), {Side.RIGHT, Side.BOTTOM})


class TestBorderMatching(unittest.TestCase):
    """Welding half-edges across window boundaries"""

    def test_close_borders_are_welded(self):
        stitched = Stitcher().stitch(border_pair(100, 102), two_window_index((3000, 1500), 1500))
        self.assertEqual(len(stitched.edges), 1)
        edge = stitched.edges[0]
        self.assertEqual(edge.key, ("0_0:a", "1500_0:b"))
        self.assertEqual(edge.cls, EdgeClass.NON_SOLID)

    def test_distant_borders_are_not_welded(self):
        stitched = Stitcher().stitch(border_pair(100, 140), two_window_index((3000, 1500), 1500))
        self.assertEqual(stitched.edges, [])
        self.assertEqual(stitched.nodes, [])

    def test_higher_confidence_half_sets_the_class(self):
        predictions = border_pair(100, 100, right_conf=0.4, left_conf=0.9, left_cls=EdgeClass.SOLID)
        stitched = Stitcher().stitch(predictions, two_window_index((3000, 1500), 1500))
        self.assertEqual(stitched.edges[0].cls, EdgeClass.SOLID)
        self.assertAlmostEqual(stitched.edges[0].confidence, 0.65)

    def test_tied_conflicting_halves_default_to_solid(self):
        predictions = border_pair(100, 100, left_cls=EdgeClass.SOLID)
        stitched = Stitcher().stitch(predictions, two_window_index((3000, 1500), 1500))
        self.assertEqual(stitched.edges[0].cls, EdgeClass.SOLID)

    def test_borders_of_different_cut_edges_stay_apart(self):
        predictions = border_pair(100, 100, right_border="border:a--x", left_border="border:b--y")
        index = two_window_index((3000, 1500), 1500)
        self.assertEqual(Stitcher().stitch(predictions, index).edges, [])
        loose = Stitcher(StitchConfig(weld_by_id=False)).stitch(predictions, index)
        self.assertEqual(len(loose.edges), 1)

    def test_borders_of_the_same_cut_edge_weld_beyond_eps(self):
        predictions = border_pair(100, 300, right_border="border:a--b", left_border="border:a--b")
        stitched = Stitcher().stitch(predictions, two_window_index((3000, 1500), 1500))
        self.assertEqual([e.key for e in stitched.edges], [("0_0:a", "1500_0:b")])


class TestStitchInputs(unittest.TestCase):
    """Window index agreement and cleanup"""

    def test_unknown_window_rejected(self):
        predictions = border_pair(100, 100)
        predictions["9_9"] = patch_graph([], [])
        with self.assertRaises(WindowIndexError):
            Stitcher().stitch(predictions, two_window_index((3000, 1500), 1500))

    def test_missing_window_is_skipped_with_warning(self):
        predictions = border_pair(100, 100)
        del predictions["1500_0"]
        with self.assertLogs("src.stitcher", level="WARNING"):
            stitched = Stitcher().stitch(predictions, two_window_index((3000, 1500), 1500))
        self.assertEqual(stitched.nodes, [])

    def test_finalize_drops_low_confidence_and_self_loops(self):
        graph = ProcessGraph(
            nodes=[
                Node(id="a", cls=NodeClass.PUMP, box=BBox(x1=0, y1=0, x2=10, y2=10)),
                Node(id="b", cls=NodeClass.TANK, box=BBox(x1=50, y1=0, x2=60, y2=10)),
                Node(id="c", cls=NodeClass.VALVE, box=BBox(x1=90, y1=0, x2=99, y2=10), confidence=0.01),
            ],
            edges=[
                Edge(source="a", target="a"),
                Edge(source="b", target="a", confidence=0.3),
                Edge(source="a", target="b", confidence=0.6),
                Edge(source="b", target="c"),
            ],
            canvas=(100, 100),
            stage=Stage.STITCHED,
        )
        result = Stitcher().finalize(graph)
        self.assertEqual(sorted(result.node_map()), ["a", "b"])
        self.assertEqual(len(result.edges), 1)
        self.assertEqual(result.edges[0].confidence, 0.6)

    def test_read_predictions_from_directory(self):
        plan = ToyPlanFactory.tiled_plan(np.random.default_rng(8))
        patch_set = Patcher().patch_plan(plan, "tiled")
        with tempfile.TemporaryDirectory() as tmp:
            plan_dir = Patcher.write_patch_set(patch_set, tmp)
            predictions = Stitcher.read_predictions(str(plan_dir), patch_set.index)
        self.assertEqual(sorted(predictions), sorted(p.name for p in patch_set.patches))


if __name__ == "__main__":
    unittest.main()
