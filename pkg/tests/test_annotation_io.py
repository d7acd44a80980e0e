"""
Unit tests for GraphML annotations, manifests and fold files
"""

import json
import tempfile
import unittest
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st

from src.annotation_io import FoldPlanner, GraphMLStore, ManifestEntry, ManifestStore
from src.errors import FoldError, GraphMLParseError, GraphSchemaError, GraphValidationError, VocabularyError
from src.graph_model import BBox, Edge, EdgeClass, Node, NodeClass, ProcessGraph, Stage

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

GRAPHML_HEAD = """<?xml version='1.0' encoding='utf-8'?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <key id="d3" for="node" attr.name="cls" attr.type="string" />
  <key id="d4" for="node" attr.name="x1" attr.type="double" />
  <key id="d5" for="node" attr.name="y1" attr.type="double" />
  <key id="d6" for="node" attr.name="x2" attr.type="double" />
  <key id="d7" for="node" attr.name="y2" attr.type="double" />
  <graph edgedefault="undirected">
"""


class TestGraphML(unittest.TestCase):
    """Reading and writing annotations"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_text(self, name: str, body: str) -> str:
        path = self.dir / name
        path.write_text(body, encoding="utf-8")
        return str(path)

    def test_read_bundled_plan(self):
        graph = GraphMLStore.read_graphml(str(DATA_DIR / "toy_plan_raw.graphml"))
        self.assertEqual(graph.stage, Stage.RAW)
        self.assertEqual(graph.canvas, (1200, 900))
        self.assertEqual(graph.node_map()["T1"].box.as_tuple(), (100.0, 100.0, 156.0, 196.0))

    def test_round_trip_keeps_routes_templates_and_confidence(self):
        graph = ProcessGraph(
            nodes=[
                Node(id="a", cls=NodeClass.PUMP, box=BBox(x1=10, y1=10, x2=54, y2=54), confidence=0.75, template="pump_chord"),
                Node(id="b", cls=NodeClass.TANK, box=BBox(x1=200.5, y1=20, x2=256.5, y2=116)),
            ],
            edges=[Edge(
                source="a", target="b", cls=EdgeClass.NON_SOLID, confidence=0.3,
                route=[(54.0, 32.0), (130.0, 32.0), (130.0, 68.0), (200.5, 68.0)],
            )],
            canvas=(400, 300),
            stage=Stage.COLLAPSED,
        )
        path = str(self.dir / "plan.graphml")
        GraphMLStore.write_graphml(graph, path)
        self.assertEqual(GraphMLStore.read_graphml(path), graph)

    def test_malformed_xml_reports_line(self):
        path = self.write_text("bad.graphml", GRAPHML_HEAD + "    <node id='a'>\n  </graph>\n</graphml>\n")
        with self.assertRaises(GraphMLParseError) as ctx:
            GraphMLStore.read_graphml(path)
        self.assertIsNotNone(ctx.exception.line)

    def test_missing_box_attribute(self):
        body = GRAPHML_HEAD + """    <node id="a"><data key="d3">valve</data><data key="d4">1</data></node>
  </graph>
</graphml>
"""
        with self.assertRaises(GraphSchemaError):
            GraphMLStore.read_graphml(self.write_text("schema.graphml", body))

    def test_unknown_class(self):
        body = GRAPHML_HEAD + """    <node id="a">
      <data key="d3">reactor</data><data key="d4">0</data><data key="d5">0</data>
      <data key="d6">10</data><data key="d7">10</data>
    </node>
  </graph>
</graphml>
"""
        with self.assertRaises(VocabularyError):
            GraphMLStore.read_graphml(self.write_text("vocab.graphml", body))

    def test_write_refuses_invalid_graph(self):
        graph = ProcessGraph(
            nodes=[Node(id="a", cls=NodeClass.VALVE, box=BBox(x1=0, y1=0, x2=10, y2=10))],
            edges=[Edge(source="a", target="missing")],
            canvas=(100, 100),
        )
        with self.assertRaises(GraphValidationError) as ctx:
            GraphMLStore.write_graphml(graph, str(self.dir / "invalid.graphml"))
        self.assertEqual(ctx.exception.violations[0].rule, "referential-integrity")
        self.assertFalse((self.dir / "invalid.graphml").exists())


class TestManifest(unittest.TestCase):
    """Append-only corpus manifest"""

    def entry(self, number: int) -> ManifestEntry:
        return ManifestEntry(
            plan_id=f"seed_{number:05d}",
            image_path=f"seed_{number:05d}.png",
            annotation_path=f"seed_{number:05d}.graphml",
            seed_id="seed",
            wl_hash=f"{number:016x}",
            phash=f"{number * 7:016x}",
            attempt=number,
            accepted_at=ManifestStore.now(),
        )

    def test_append_and_load_skips_truncated_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            store = ManifestStore(str(Path(tmp) / "manifest.jsonl"))
            store.append(self.entry(0))
            store.append(self.entry(1))
            with open(store.path, "a", encoding="utf-8") as handle:
                handle.write('{"plan_id": "seed_00002", "image_pa')
            manifest = store.load()
        self.assertEqual([e.plan_id for e in manifest.entries], ["seed_00000", "seed_00001"])
        self.assertEqual(manifest.wl_hashes(), [f"{0:016x}", f"{1:016x}"])

    def test_timestamp_string_is_parsed(self):
        entry = ManifestEntry(**{**self.entry(3).model_dump(), "accepted_at": "2024-01-15T10:30:00Z"})
        self.assertEqual(entry.accepted_at.year, 2024)

    def test_missing_manifest_is_empty(self):
        self.assertEqual(ManifestStore("/nonexistent/manifest.jsonl").load().entries, [])


class TestFolds(unittest.TestCase):
    """Seeded K-fold assignment"""

    def test_default_protocol_gives_fifteen_runs(self):
        ids = [f"plan{i:02d}" for i in range(23)]
        splits = FoldPlanner.make_folds(ids, 5, [0, 1, 2])
        self.assertEqual(sum(len(s.folds) for s in splits), 15)

    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=8), st.integers(0, 1000))
    @settings(max_examples=100)
    def test_every_plan_is_tested_exactly_once(self, n, k, seed):
        ids = [f"p{i}" for i in range(n)]
        if k > n:
            with self.assertRaises(FoldError):
                FoldPlanner.make_folds(ids, k, [seed])
            return
        split = FoldPlanner.make_folds(ids, k, [seed])[0]
        tested = [pid for fold in split.folds for pid in fold.test]
        self.assertEqual(sorted(tested), sorted(ids))
        sizes = [len(fold.test) for fold in split.folds]
        self.assertLessEqual(max(sizes) - min(sizes), 1)
        for fold in split.folds:
            self.assertEqual(set(fold.train) | set(fold.test), set(ids))
            self.assertFalse(set(fold.train) & set(fold.test))

    def test_seed_determinism_and_file_round_trip(self):
        ids = [f"plan{i}" for i in range(10)]
        first = FoldPlanner.make_folds(ids, 5, [7])
        self.assertEqual(first, FoldPlanner.make_folds(list(reversed(ids)), 5, [7]))
        with tempfile.TemporaryDirectory() as tmp:
            paths = FoldPlanner.write_folds(first, tmp)
            self.assertTrue(paths[0].endswith("folds_seed7.json"))
            self.assertEqual(json.loads(Path(paths[0]).read_text())["schema_version"], 1)
            self.assertEqual(FoldPlanner.read_folds(paths[0]), first[0])

    def test_no_seeds(self):
        with self.assertRaises(FoldError):
            FoldPlanner.make_folds(["a", "b"], 2, [])


if __name__ == "__main__":
    unittest.main()
