"""
Annotation I/O Module
GraphML annotations, corpus manifests, and cross-validation fold files
"""

import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
from xml.etree.ElementTree import ParseError

import networkx as nx
import numpy as np
from dateutil import parser as date_parser
from pydantic import BaseModel, Field, field_validator

from .config import SCHEMA_VERSION
from .errors import (
    FoldError,
    GraphMLParseError,
    GraphSchemaError,
    GraphValidationError,
    VocabularyError,
)
from .graph_model import BBox, Edge, EdgeClass, Node, NodeClass, ProcessGraph, Stage
from .graph_processor import GraphProcessor

logger = logging.getLogger(__name__)

NODE_BOX_KEYS = ("x1", "y1", "x2", "y2")


class GraphMLStore:
    """
    Reads and writes process graphs in the pidforge GraphML dialect

    Node keys: cls, x1, y1, x2, y2, conf (+ optional template).
    Edge keys: cls, conf (+ optional route as "x,y;x,y").
    Graph keys: stage, width, height.
    """

    @staticmethod
    def read_graphml(path: str) -> ProcessGraph:
        """
        Load a GraphML annotation

        Args:
            path: File path

        Returns:
            ProcessGraph with stage from the graph attribute (default raw)
        """
        try:
            nx_graph = nx.read_graphml(path, node_type=str)
        except ParseError as exc:
            line = exc.position[0] if getattr(exc, "position", None) else None
            raise GraphMLParseError(f"{path}: malformed XML at line {line}: {exc}", line=line) from exc
        except nx.NetworkXError as exc:
            raise GraphSchemaError(f"{path}: not a GraphML graph: {exc}") from exc
        except OSError as exc:
            raise GraphMLParseError(f"{path}: unreadable: {exc}") from exc

        stage_raw = nx_graph.graph.get("stage", Stage.RAW.value)
        try:
            stage = Stage(stage_raw)
        except ValueError as exc:
            raise VocabularyError(f"{path}: unknown stage '{stage_raw}'") from exc
        canvas = (int(nx_graph.graph.get("width", 0)), int(nx_graph.graph.get("height", 0)))

        nodes = []
        for node_id, data in nx_graph.nodes(data=True):
            missing = [key for key in ("cls",) + NODE_BOX_KEYS if key not in data]
            if missing:
                raise GraphSchemaError(f"{path}: node {node_id} is missing {', '.join(missing)}")
            nodes.append(Node(
                id=node_id,
                cls=GraphMLStore._node_class(data["cls"], node_id, path),
                box=BBox(**{key: float(data[key]) for key in NODE_BOX_KEYS}),
                confidence=float(data.get("conf", 1.0)),
                template=data.get("template"),
            ))

        edges = []
        for source, target, data in nx_graph.edges(data=True):
            edge_id = f"{source}--{target}"
            if "cls" not in data:
                raise GraphSchemaError(f"{path}: edge {edge_id} is missing cls")
            try:
                edge_cls = EdgeClass(data["cls"])
            except ValueError as exc:
                raise VocabularyError(f"{path}: edge {edge_id} has unknown class '{data['cls']}'") from exc
            edges.append(Edge(
                source=source,
                target=target,
                cls=edge_cls,
                confidence=float(data.get("conf", 1.0)),
                route=GraphMLStore._parse_route(data.get("route")),
            ))

        logger.debug(f"Read {path}: {len(nodes)} nodes, {len(edges)} edges")
        return ProcessGraph(nodes=nodes, edges=edges, canvas=canvas, stage=stage)

    @staticmethod
    def _node_class(raw: str, node_id: str, path: str) -> NodeClass:
        try:
            return NodeClass(raw)
        except ValueError as exc:
            raise VocabularyError(f"{path}: node {node_id} has unknown class '{raw}'") from exc

    @staticmethod
    def _parse_route(raw: Optional[str]) -> Optional[List[Tuple[float, float]]]:
        if not raw:
            return None
        points = []
        for pair in raw.split(";"):
            x, y = pair.split(",")
            points.append((float(x), float(y)))
        return points

    @staticmethod
    def write_graphml(graph: ProcessGraph, path: str) -> None:
        """
        Save a graph; refuses graphs that fail validate()

        Args:
            graph: Graph to write
            path: Destination file
        """
        violations = GraphProcessor.validate(graph)
        if violations:
            raise GraphValidationError(
                f"refusing to write {path}: {len(violations)} violations", violations
            )

        nx_graph = nx.Graph(stage=graph.stage.value, width=int(graph.canvas[0]), height=int(graph.canvas[1]))
        for node in graph.nodes:
            attrs: Dict[str, Any] = {
                "cls": node.cls.value,
                "x1": float(node.box.x1),
                "y1": float(node.box.y1),
                "x2": float(node.box.x2),
                "y2": float(node.box.y2),
                "conf": float(node.confidence),
            }
            if node.template:
                attrs["template"] = node.template
            nx_graph.add_node(node.id, **attrs)
        for edge in graph.edges:
            attrs = {"cls": edge.cls.value, "conf": float(edge.confidence)}
            if edge.route:
                attrs["route"] = ";".join(f"{float(x)!r},{float(y)!r}" for x, y in edge.route)
            nx_graph.add_edge(edge.source, edge.target, **attrs)

        Path(path).parent.mkdir(parents=True, exist_ok=True)
        nx.write_graphml(nx_graph, path, encoding="utf-8")

    @staticmethod
    def read_directory(directory: str) -> List[Tuple[str, ProcessGraph]]:
        """Read every *.graphml file in a directory, sorted by name"""
        plans = []
        for file_path in sorted(Path(directory).glob("*.graphml")):
            plans.append((file_path.stem, GraphMLStore.read_graphml(str(file_path))))
        return plans


class ManifestEntry(BaseModel):
    plan_id: str
    image_path: str
    annotation_path: str
    seed_id: str
    wl_hash: str
    phash: str
    attempt: int
    accepted_at: datetime

    @field_validator("accepted_at", mode="before")
    @classmethod
    def _parse_timestamp(cls, value: Any) -> Any:
        if isinstance(value, str):
            return date_parser.isoparse(value)
        return value


class CorpusManifest(BaseModel):
    entries: List[ManifestEntry] = Field(default_factory=list)

    def wl_hashes(self) -> List[str]:
        return [entry.wl_hash for entry in self.entries]

    def phashes(self) -> List[str]:
        return [entry.phash for entry in self.entries]


class ManifestStore:
    """
    Line-delimited JSON manifest; single writer appends one entry per accepted plan
    """

    def __init__(self, path: str):
        self.path = Path(path)

    def append(self, entry: ManifestEntry) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(entry.model_dump_json() + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def load(self) -> CorpusManifest:
        """
        Read the manifest; a truncated last line (crash mid-write) is skipped

        Returns:
            CorpusManifest (empty when the file does not exist)
        """
        if not self.path.exists():
            return CorpusManifest()
        entries = []
        with open(self.path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(ManifestEntry(**json.loads(line)))
                except (ValueError, TypeError) as exc:
                    logger.warning(f"⚠️ Skipping unreadable manifest line {line_no}: {exc}")
        return CorpusManifest(entries=entries)

    @staticmethod
    def now() -> datetime:
        return datetime.now(timezone.utc)


class Fold(BaseModel):
    train: List[str]
    test: List[str]


class FoldSplit(BaseModel):
    schema_version: int = SCHEMA_VERSION
    k: int
    seed: int
    folds: List[Fold]


class FoldPlanner:
    """Seeded K-fold partitions of plan ids"""

    @staticmethod
    def make_folds(plan_ids: Sequence[str], k: int, seeds: Sequence[int]) -> List[FoldSplit]:
        """
        One K-fold partition per seed: seeded shuffle, then round-robin

        Args:
            plan_ids: Plan identifiers
            k: Fold count
            seeds: Seed integers, one split each

        Returns:
            List of FoldSplit, in seed order
        """
        ids = sorted(set(plan_ids))
        if k < 1 or k > len(ids):
            raise FoldError(f"cannot split {len(ids)} plans into {k} folds")
        if not seeds:
            raise FoldError("at least one seed is required")

        splits = []
        for seed in seeds:
            order = [ids[i] for i in np.random.default_rng(seed).permutation(len(ids))]
            tests = [order[i::k] for i in range(k)]
            folds = []
            for test in tests:
                held_out = set(test)
                folds.append(Fold(train=[pid for pid in order if pid not in held_out], test=test))
            splits.append(FoldSplit(k=k, seed=int(seed), folds=folds))
        return splits

    @staticmethod
    def write_folds(splits: Sequence[FoldSplit], out_dir: str) -> List[str]:
        """Write one JSON file per seed: folds_seed<seed>.json"""
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        paths = []
        for split in splits:
            path = Path(out_dir) / f"folds_seed{split.seed}.json"
            path.write_text(json.dumps(split.model_dump(), indent=2), encoding="utf-8")
            paths.append(str(path))
        logger.info(f"Wrote {len(paths)} fold files to {out_dir}")
        return paths

    @staticmethod
    def read_folds(path: str) -> FoldSplit:
        return FoldSplit(**json.loads(Path(path).read_text(encoding="utf-8")))
