"""
Patching Module
Splits full plans into overlapping windows with border nodes on cut pipes
"""

import json
import logging
import re
from pathlib import Path
from typing import List, Optional, Tuple

from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from .annotation_io import GraphMLStore
from .config import PatchSpec, SCHEMA_VERSION
from .errors import StageError, WindowIndexError
from .geometry import BoxGeometry, Point, Side
from .graph_model import BBox, Edge, Node, NodeClass, ProcessGraph, Stage

logger = logging.getLogger(__name__)

WINDOW_INDEX_NAME = "windows.json"
BORDER_PREFIX = "border:"
_CUT_KEY = re.compile(rf"^({BORDER_PREFIX}.+?--.+?)(?:#\d+)?$")


def border_node_id(edge_id: str, number: int = 1) -> str:
    """border:<edge> for the first exit of a cut edge, border:<edge>#<n> for later ones"""
    base = f"{BORDER_PREFIX}{edge_id}"
    return base if number == 1 else f"{base}#{number}"


def cut_key(node_id: str) -> Optional[str]:
    """The cut edge a border node id names, or None for ids not minted by the patcher"""
    match = _CUT_KEY.match(node_id)
    return match.group(1) if match else None


class BorderRecord(BaseModel):
    node_id: str
    side: Side
    line: float
    coord: float
    edge_id: str


class Patch(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x0: int
    y0: int
    window: BBox
    graph: ProcessGraph
    borders: List[BorderRecord] = Field(default_factory=list)
    image: Optional[Image.Image] = None

    @property
    def name(self) -> str:
        return f"{self.x0}_{self.y0}"


class WindowEntry(BaseModel):
    name: str
    x0: int
    y0: int


class WindowIndex(BaseModel):
    schema_version: int = SCHEMA_VERSION
    plan_id: str
    canvas: Tuple[int, int]
    patch_size: int
    stride: int
    windows: List[WindowEntry] = Field(default_factory=list)

    def window_box(self, entry: WindowEntry) -> BBox:
        return BBox(x1=entry.x0, y1=entry.y0, x2=entry.x0 + self.patch_size, y2=entry.y0 + self.patch_size)


class PatchSet(BaseModel):
    plan_id: str
    patches: List[Patch]
    index: WindowIndex


def axis_origins(extent: int, patch_size: int, stride: int) -> List[int]:
    if extent <= patch_size:
        return [0]
    last = extent - patch_size
    origins = list(range(0, last + 1, stride))
    if origins[-1] != last:
        origins.append(last)
    return origins


class Patcher:
    """Sliding-window tiling of plan images and graphs"""

    def __init__(self, spec: Optional[PatchSpec] = None):
        self.spec = spec or PatchSpec()

    def plan_windows(self, canvas_w: int, canvas_h: int) -> List[Tuple[int, int]]:
        """
        Window origins covering the canvas, row-major

        Args:
            canvas_w: Canvas width
            canvas_h: Canvas height

        Returns:
            (x0, y0) origins ordered by y0 then x0; last origin per axis flush with the edge
        """
        xs = axis_origins(int(canvas_w), self.spec.patch_size, self.spec.stride)
        ys = axis_origins(int(canvas_h), self.spec.patch_size, self.spec.stride)
        return [(x0, y0) for y0 in ys for x0 in xs]

    def extract_patch(
        self,
        graph: ProcessGraph,
        origin: Tuple[int, int],
        image: Optional[Image.Image] = None
    ) -> Patch:
        """
        Cut one window out of a plan

        Args:
            graph: Collapsed-stage plan graph
            origin: Window origin (x0, y0)
            image: Optional plan raster

        Returns:
            Patch with window-local graph and border records
        """
        if graph.stage != Stage.COLLAPSED:
            raise StageError(f"patching expects a collapsed graph, got stage '{graph.stage.value}'")

        size = self.spec.patch_size
        x0, y0 = origin
        window = BBox(x1=x0, y1=y0, x2=x0 + size, y2=y0 + size)
        nodes = graph.node_map()

        kept = {}
        for node in graph.nodes:
            if not BoxGeometry.contains_point(window, *node.box.center):
                continue
            clipped = BoxGeometry.clip_box(node.box, window) or self._intersection(node.box, window)
            kept[node.id] = node.model_copy(update={"box": clipped.translate(-x0, -y0)})

        edges: List[Edge] = []
        borders: List[BorderRecord] = []
        border_nodes: List[Node] = []
        for edge in graph.edges:
            source_in, target_in = edge.source in kept, edge.target in kept
            if source_in and target_in:
                edges.append(edge.model_copy(update={"route": None}))
                continue
            if not (source_in or target_in):
                continue

            inside, outside = (edge.source, edge.target) if source_in else (edge.target, edge.source)
            path = self._edge_path(edge, nodes[inside].box, nodes[outside].box, inside == edge.source)
            exits = BoxGeometry.polyline_exits(path, window)
            if not exits:
                logger.debug(f"Edge {edge.edge_id} never leaves window {x0}_{y0}; dropped")
                continue

            # one border node per exit; re-entrant routes leave more than once
            for number, (exit_point, side) in enumerate(exits, start=1):
                border_id = border_node_id(edge.edge_id, number)
                border_box = self._border_box(exit_point[0] - x0, exit_point[1] - y0)
                line, coord = self._side_line(side, window, exit_point)
                border_nodes.append(Node(id=border_id, cls=NodeClass.BORDER, box=border_box, confidence=1.0))
                borders.append(BorderRecord(
                    node_id=border_id, side=side, line=line, coord=coord, edge_id=edge.edge_id
                ))
                edges.append(Edge(source=inside, target=border_id, cls=edge.cls, confidence=edge.confidence))

        patch_graph = ProcessGraph(
            nodes=list(kept.values()) + border_nodes,
            edges=edges,
            canvas=(size, size),
            stage=Stage.PATCH,
        )
        crop = image.crop((x0, y0, x0 + size, y0 + size)) if image is not None else None
        return Patch(x0=x0, y0=y0, window=window, graph=patch_graph, borders=borders, image=crop)

    @staticmethod
    def _intersection(box: BBox, window: BBox) -> BBox:
        return BBox(
            x1=max(box.x1, window.x1), y1=max(box.y1, window.y1),
            x2=min(box.x2, window.x2), y2=min(box.y2, window.y2),
        )

    @staticmethod
    def _edge_path(edge: Edge, inside_box: BBox, outside_box: BBox, inside_is_source: bool) -> List[Point]:
        """Edge geometry from the inside endpoint's center to the outside endpoint's center"""
        route = list(edge.route or [])
        if not inside_is_source:
            route.reverse()
        return [inside_box.center] + route + [outside_box.center]

    def _border_box(self, cx: float, cy: float) -> BBox:
        size = self.spec.border_box
        limit = self.spec.patch_size - size
        x1 = min(max(cx - size / 2, 0.0), limit)
        y1 = min(max(cy - size / 2, 0.0), limit)
        return BBox(x1=x1, y1=y1, x2=x1 + size, y2=y1 + size)

    @staticmethod
    def _side_line(side: Side, window: BBox, point: Point) -> Tuple[float, float]:
        """Global boundary line and the coordinate along it"""
        if side == Side.LEFT:
            return window.x1, point[1]
        if side == Side.RIGHT:
            return window.x2, point[1]
        if side == Side.TOP:
            return window.y1, point[0]
        return window.y2, point[0]

    def patch_plan(self, graph: ProcessGraph, plan_id: str, image: Optional[Image.Image] = None) -> PatchSet:
        """
        Tile a plan into all windows

        Args:
            graph: Collapsed-stage plan graph
            plan_id: Plan identifier recorded in the window index
            image: Optional plan raster

        Returns:
            PatchSet with one patch per window and the window index
        """
        width, height = graph.canvas
        origins = self.plan_windows(width, height)
        patches = [self.extract_patch(graph, origin, image) for origin in origins]
        index = WindowIndex(
            plan_id=plan_id,
            canvas=(int(width), int(height)),
            patch_size=self.spec.patch_size,
            stride=self.spec.stride,
            windows=[WindowEntry(name=p.name, x0=p.x0, y0=p.y0) for p in patches],
        )
        border_count = sum(len(p.borders) for p in patches)
        logger.info(f"Plan {plan_id}: {len(patches)} patches, {border_count} border nodes")
        return PatchSet(plan_id=plan_id, patches=patches, index=index)

    @staticmethod
    def write_patch_set(patch_set: PatchSet, out_dir: str) -> Path:
        """Write <out>/<plan>/<x0>_<y0>.png|.graphml and windows.json; returns the plan directory"""
        plan_dir = Path(out_dir) / patch_set.plan_id
        plan_dir.mkdir(parents=True, exist_ok=True)
        for patch in patch_set.patches:
            GraphMLStore.write_graphml(patch.graph, str(plan_dir / f"{patch.name}.graphml"))
            if patch.image is not None:
                patch.image.save(plan_dir / f"{patch.name}.png", format="PNG")
        index_path = plan_dir / WINDOW_INDEX_NAME
        index_path.write_text(json.dumps(patch_set.index.model_dump(), indent=2), encoding="utf-8")
        return plan_dir


def read_window_index(path: str) -> WindowIndex:
    try:
        return WindowIndex(**json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError) as exc:
        raise WindowIndexError(f"unreadable window index {path}: {exc}") from exc
