"""
Process Graph Data Model
Node/edge vocabulary, boxes, and the attributed process graph shared by every stage
"""

import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field


class NodeClass(str, Enum):
    VALVE = "valve"
    PUMP = "pump"
    INSTRUMENTATION = "instrumentation"
    GENERAL = "general"
    TANK = "tank"
    ARROW = "arrow"
    INLET_OUTLET = "inlet_outlet"
    # annotation-only, removed by collapsing
    CONNECTOR = "connector"
    CROSSING = "crossing"
    # patch pseudo-node
    BORDER = "border"


PHYSICAL_CLASSES: Tuple[NodeClass, ...] = (
    NodeClass.VALVE,
    NodeClass.PUMP,
    NodeClass.INSTRUMENTATION,
    NodeClass.GENERAL,
    NodeClass.TANK,
    NodeClass.ARROW,
    NodeClass.INLET_OUTLET,
)
PREPROCESSING_CLASSES = frozenset({NodeClass.CONNECTOR, NodeClass.CROSSING})


class EdgeClass(str, Enum):
    SOLID = "solid"
    NON_SOLID = "non_solid"


class Stage(str, Enum):
    RAW = "raw"
    COLLAPSED = "collapsed"
    PATCH = "patch"
    STITCHED = "stitched"


class BBox(BaseModel):
    """Axis-aligned box in pixels, origin top-left, half-open [x1,x2) x [y1,y2)"""

    model_config = ConfigDict(frozen=True)

    x1: float
    y1: float
    x2: float
    y2: float

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> "BBox":
        return cls(x1=cx - width / 2, y1=cy - height / 2, x2=cx + width / 2, y2=cy + height / 2)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(x1=self.x1 + dx, y1=self.y1 + dy, x2=self.x2 + dx, y2=self.y2 + dy)

    def is_valid(self) -> bool:
        coords = self.as_tuple()
        if not all(math.isfinite(c) for c in coords):
            return False
        return min(coords) >= 0 and self.x1 < self.x2 and self.y1 < self.y2


class Node(BaseModel):
    id: str
    cls: NodeClass
    box: BBox
    confidence: float = 1.0
    template: Optional[str] = None


class Edge(BaseModel):
    """Undirected typed connection; source/target order carries no meaning"""

    source: str
    target: str
    cls: EdgeClass = EdgeClass.SOLID
    confidence: float = 1.0
    route: Optional[List[Tuple[float, float]]] = None

    @property
    def key(self) -> Tuple[str, str]:
        return (self.source, self.target) if self.source <= self.target else (self.target, self.source)

    @property
    def edge_id(self) -> str:
        return "--".join(self.key)


class ProcessGraph(BaseModel):
    nodes: List[Node] = Field(default_factory=list)
    edges: List[Edge] = Field(default_factory=list)
    canvas: Tuple[int, int] = (0, 0)
    stage: Stage = Stage.RAW

    def node_map(self) -> Dict[str, Node]:
        return {node.id: node for node in self.nodes}

    def degrees(self) -> Dict[str, int]:
        """Degree per node id; edges with unknown endpoints are ignored"""
        degree = {node.id: 0 for node in self.nodes}
        for edge in self.edges:
            if edge.source in degree and edge.target in degree:
                degree[edge.source] += 1
                degree[edge.target] += 1
        return degree

    def edge_keys(self) -> Dict[Tuple[str, str], Edge]:
        return {edge.key: edge for edge in self.edges}

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for node in self.nodes:
            graph.add_node(node.id, cls=node.cls.value, node=node)
        for edge in self.edges:
            graph.add_edge(edge.source, edge.target, cls=edge.cls.value, edge=edge)
        return graph


class GraphStats(BaseModel):
    degree_histogram: Dict[int, int] = Field(default_factory=dict)
    edge_density: float = 0.0
    node_count: int = 0
    edge_count: int = 0
    class_counts: Dict[str, int] = Field(default_factory=dict)


class Violation(BaseModel):
    """One broken graph invariant; subject is the node or edge id"""

    subject: str
    rule: str
    detail: str = ""
