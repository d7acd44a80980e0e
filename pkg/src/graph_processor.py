"""
Graph Processing Module
Connector collapsing, graph statistics, and invariant checks for process graphs
"""

import logging
import math
from collections import Counter
from enum import Enum
from itertools import combinations
from typing import Dict, Iterable, List, Tuple

import networkx as nx
import numpy as np

from .errors import StageError
from .graph_model import (
    Edge,
    EdgeClass,
    GraphStats,
    NodeClass,
    PREPROCESSING_CLASSES,
    ProcessGraph,
    Stage,
    Violation,
)

logger = logging.getLogger(__name__)

# minimum opposition (cosine) for two pipes to count as passing straight through a crossing
BRIDGE_COSINE = -0.7


class CrossingMode(str, Enum):
    DELETE = "delete"
    BRIDGE = "bridge"


class GraphProcessor:
    """
    Pre-processes raw annotations into physically meaningful graphs
    and reports their structure
    """

    @staticmethod
    def majority_class(classes: Iterable[EdgeClass]) -> EdgeClass:
        """
        Majority edge class along a chain; ties resolve to solid

        Args:
            classes: Edge classes along the chain

        Returns:
            Winning edge class
        """
        counts = Counter(EdgeClass(c) for c in classes)
        if counts[EdgeClass.NON_SOLID] > counts[EdgeClass.SOLID]:
            return EdgeClass.NON_SOLID
        return EdgeClass.SOLID

    @staticmethod
    def collapse(graph: ProcessGraph, crossing_mode: CrossingMode = CrossingMode.DELETE) -> ProcessGraph:
        """
        Contract connector chains and remove crossing nodes

        Args:
            graph: Raw-stage graph
            crossing_mode: delete (drop crossings with their edges) or bridge
                (reconnect straight-through pipes first)

        Returns:
            Collapsed-stage graph
        """
        collapsed, _ = GraphProcessor.collapse_with_report(graph, crossing_mode)
        return collapsed

    @staticmethod
    def collapse_with_report(
        graph: ProcessGraph,
        crossing_mode: CrossingMode = CrossingMode.DELETE
    ) -> Tuple[ProcessGraph, List[str]]:
        """
        Contract connector chains and remove crossing nodes, returning warnings

        Args:
            graph: Raw-stage graph
            crossing_mode: Crossing handling

        Returns:
            Tuple of (collapsed graph, warnings)
        """
        if graph.stage != Stage.RAW:
            raise StageError(f"collapse expects a raw graph, got stage '{graph.stage.value}'")

        warnings: List[str] = []
        nodes = graph.node_map()
        work = nx.Graph()
        for node in graph.nodes:
            work.add_node(node.id, cls=node.cls)
        for edge in graph.edges:
            if edge.source not in nodes or edge.target not in nodes:
                warnings.append(f"edge {edge.edge_id} references a missing node and was dropped")
                continue
            if edge.source == edge.target:
                continue
            work.add_edge(edge.source, edge.target, cls=edge.cls, confidence=edge.confidence)

        crossings = sorted(n.id for n in graph.nodes if n.cls == NodeClass.CROSSING)
        for crossing_id in crossings:
            if crossing_mode == CrossingMode.BRIDGE:
                GraphProcessor._bridge_crossing(work, crossing_id, nodes)
            work.remove_node(crossing_id)

        connectors = {n for n, data in work.nodes(data=True) if data["cls"] == NodeClass.CONNECTOR}
        for connector_id in sorted(connectors):
            if work.degree(connector_id) == 1:
                warnings.append(f"dangling connector {connector_id} dropped")

        # key -> (sorted connector ids of the chain, class, confidence)
        contracted: Dict[Tuple[str, str], Tuple[Tuple[str, ...], EdgeClass, float]] = {}
        components = sorted(
            (sorted(component) for component in nx.connected_components(work.subgraph(connectors))),
            key=lambda ids: ids[0]
        )
        for component in components:
            members = set(component)
            endpoints = sorted({
                nbr for c in component for nbr in work.neighbors(c) if nbr not in connectors
            })
            if not endpoints:
                warnings.append(
                    f"connector group {component[0]}..({len(component)} nodes) has no physical endpoint and was dropped"
                )
                continue
            if len(endpoints) == 1 and any(work.degree(c) > 1 for c in component):
                logger.debug(f"Connector loop at {endpoints[0]} would form a self-loop; dropped")

            for p, q in combinations(endpoints, 2):
                chain_graph = work.subgraph(members | {p, q})
                for path in nx.all_simple_paths(chain_graph, p, q):
                    if len(path) < 3:
                        continue
                    chain_ids = tuple(sorted(path[1:-1]))
                    chain_edges = [work.edges[a, b] for a, b in zip(path, path[1:])]
                    edge_cls = GraphProcessor.majority_class(e["cls"] for e in chain_edges)
                    confidence = min(e["confidence"] for e in chain_edges)
                    key = (p, q)
                    if key not in contracted or chain_ids < contracted[key][0]:
                        contracted[key] = (chain_ids, edge_cls, confidence)

        physical = [n for n in graph.nodes if n.cls not in PREPROCESSING_CLASSES]
        physical_ids = {n.id for n in physical}

        edges: List[Edge] = []
        seen = set()
        for u, v, data in work.edges(data=True):
            if u in physical_ids and v in physical_ids:
                edge = Edge(source=u, target=v, cls=data["cls"], confidence=data["confidence"])
                seen.add(edge.key)
                edges.append(edge)
        for (p, q), (_, edge_cls, confidence) in sorted(contracted.items()):
            if (p, q) in seen:
                continue
            edges.append(Edge(source=p, target=q, cls=edge_cls, confidence=confidence))

        for warning in warnings:
            logger.warning(f"⚠️ {warning}")
        removed = len(graph.nodes) - len(physical)
        logger.debug(f"Collapsed {removed} of {len(graph.nodes)} nodes into {len(edges)} edges")

        result = ProcessGraph(
            nodes=[n.model_copy(deep=True) for n in physical],
            edges=edges,
            canvas=graph.canvas,
            stage=Stage.COLLAPSED,
        )
        return result, warnings

    @staticmethod
    def _bridge_crossing(work: nx.Graph, crossing_id: str, nodes: Dict) -> None:
        """Reconnect the pipes passing straight through a crossing"""
        cx, cy = nodes[crossing_id].box.center
        directions = {}
        for nbr in sorted(work.neighbors(crossing_id)):
            nx_, ny_ = nodes[nbr].box.center
            vec = np.array([nx_ - cx, ny_ - cy], dtype=float)
            norm = np.linalg.norm(vec)
            if norm > 0:
                directions[nbr] = vec / norm

        candidates = sorted(
            (float(np.dot(directions[a], directions[b])), a, b)
            for a, b in combinations(sorted(directions), 2)
        )
        used = set()
        for cosine, a, b in candidates:
            if cosine > BRIDGE_COSINE:
                break
            if a in used or b in used or work.has_edge(a, b):
                continue
            edge_a = work.edges[crossing_id, a]
            edge_b = work.edges[crossing_id, b]
            work.add_edge(
                a, b,
                cls=GraphProcessor.majority_class([edge_a["cls"], edge_b["cls"]]),
                confidence=min(edge_a["confidence"], edge_b["confidence"]),
            )
            used.update((a, b))

    @staticmethod
    def compute_stats(graph: ProcessGraph) -> GraphStats:
        """
        Degree histogram, edge density and class counts

        Args:
            graph: Graph at any stage

        Returns:
            GraphStats
        """
        degrees = graph.degrees()
        histogram = Counter(degrees.values())
        node_count = len(graph.nodes)
        edge_count = len(graph.edges)
        return GraphStats(
            degree_histogram=dict(sorted(histogram.items())),
            edge_density=edge_count / node_count if node_count else 0.0,
            node_count=node_count,
            edge_count=edge_count,
            class_counts=dict(sorted(Counter(n.cls.value for n in graph.nodes).items())),
        )

    @staticmethod
    def validate(graph: ProcessGraph) -> List[Violation]:
        """
        Check every graph invariant

        Args:
            graph: Graph to check

        Returns:
            List of violations, empty when the graph is well formed
        """
        violations: List[Violation] = []
        seen_ids = set()

        for node in graph.nodes:
            if node.id in seen_ids:
                violations.append(Violation(subject=node.id, rule="duplicate-node-id"))
            seen_ids.add(node.id)
            if not node.box.is_valid():
                violations.append(Violation(
                    subject=node.id, rule="invalid-box", detail=str(node.box.as_tuple())
                ))
            if not (0.0 <= node.confidence <= 1.0) or math.isnan(node.confidence):
                violations.append(Violation(
                    subject=node.id, rule="confidence-range", detail=str(node.confidence)
                ))
            if node.cls in PREPROCESSING_CLASSES and graph.stage != Stage.RAW:
                violations.append(Violation(
                    subject=node.id, rule="stage-restriction",
                    detail=f"{node.cls.value} node in {graph.stage.value} graph"
                ))
            if node.cls == NodeClass.BORDER and graph.stage != Stage.PATCH:
                violations.append(Violation(
                    subject=node.id, rule="stage-restriction",
                    detail=f"border node in {graph.stage.value} graph"
                ))

        edge_keys = set()
        for edge in graph.edges:
            subject = edge.edge_id
            for endpoint in (edge.source, edge.target):
                if endpoint not in seen_ids:
                    violations.append(Violation(
                        subject=subject, rule="referential-integrity",
                        detail=f"unknown node id {endpoint}"
                    ))
            if edge.source == edge.target:
                violations.append(Violation(subject=subject, rule="self-loop"))
            if edge.key in edge_keys:
                violations.append(Violation(subject=subject, rule="parallel-edge"))
            edge_keys.add(edge.key)
            if not (0.0 <= edge.confidence <= 1.0) or math.isnan(edge.confidence):
                violations.append(Violation(
                    subject=subject, rule="confidence-range", detail=str(edge.confidence)
                ))

        return violations

    @staticmethod
    def preprocessing_fraction(graph: ProcessGraph) -> float:
        """Share of connector and crossing nodes in a raw graph"""
        if not graph.nodes:
            return 0.0
        auxiliary = sum(1 for n in graph.nodes if n.cls in PREPROCESSING_CLASSES)
        return auxiliary / len(graph.nodes)

    @staticmethod
    def physical_ids(graph: ProcessGraph) -> set:
        return {n.id for n in graph.nodes if n.cls not in PREPROCESSING_CLASSES}
