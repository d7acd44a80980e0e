"""
Stitching Module
Merges per-patch prediction graphs back into one full-plan graph
"""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

from pydantic import BaseModel

from .annotation_io import GraphMLStore
from .config import StitchConfig
from .errors import InvariantError, WindowIndexError
from .geometry import BoxGeometry, OPPOSITE_SIDE, Point, Side
from .graph_model import BBox, Edge, EdgeClass, Node, NodeClass, ProcessGraph, Stage
from .graph_processor import GraphProcessor
from .patcher import WindowIndex, cut_key

logger = logging.getLogger(__name__)

# sides whose neighbour across the line is the complementary side
FORWARD_SIDES = (Side.RIGHT, Side.BOTTOM)
LINE_TOLERANCE = 1e-6


class GlobalPatch(BaseModel):
    """A patch prediction translated to canvas coordinates with prefixed ids"""

    name: str
    prefix: str
    window: BBox
    graph: ProcessGraph


class HalfEdge(BaseModel):
    border_id: str
    patch: str
    side: Side
    line: float
    coord: float
    interior: str
    interior_center: Point
    cls: EdgeClass
    confidence: float
    cut: Optional[str] = None

    def axis_position(self) -> float:
        """Interior position along the axis normal to the border line"""
        return self.interior_center[0] if self.side in (Side.LEFT, Side.RIGHT) else self.interior_center[1]


class Stitcher:
    """
    Attenuation, NMS + WBF fusion, border matching and cleanup
    """

    def __init__(self, config: Optional[StitchConfig] = None):
        self.config = config or StitchConfig()

    @staticmethod
    def open_sides(x0: int, y0: int, patch_size: int, canvas: Tuple[int, int]) -> Set[Side]:
        """Window sides lying on (or beyond) the canvas edge"""
        sides = set()
        if x0 <= 0:
            sides.add(Side.LEFT)
        if y0 <= 0:
            sides.add(Side.TOP)
        if x0 + patch_size >= canvas[0]:
            sides.add(Side.RIGHT)
        if y0 + patch_size >= canvas[1]:
            sides.add(Side.BOTTOM)
        return sides

    def attenuate(self, graph: ProcessGraph, window: BBox, open_sides: Iterable[Side] = ()) -> ProcessGraph:
        """
        Scale non-border confidences by min(1, distance to window boundary / margin)

        Args:
            graph: Patch prediction graph, in the same frame as window
            window: Window box
            open_sides: Sides that never crop

        Returns:
            Attenuated copy
        """
        margin = self.config.margin
        result = graph.model_copy(deep=True)
        if margin <= 0:
            return result
        sides = list(open_sides)
        for node in result.nodes:
            if node.cls == NodeClass.BORDER:
                continue
            distance = BoxGeometry.boundary_distance(node.box, window, sides)
            node.confidence = node.confidence * min(1.0, distance / margin)
        return result

    @staticmethod
    def to_global(name: str, x0: int, y0: int, patch_size: int, graph: ProcessGraph) -> GlobalPatch:
        prefix = f"{x0}_{y0}:"
        nodes = [
            node.model_copy(update={"id": prefix + node.id, "box": node.box.translate(x0, y0)})
            for node in graph.nodes
        ]
        edges = [
            edge.model_copy(update={"source": prefix + edge.source, "target": prefix + edge.target, "route": None})
            for edge in graph.edges
        ]
        window = BBox(x1=x0, y1=y0, x2=x0 + patch_size, y2=y0 + patch_size)
        return GlobalPatch(
            name=name,
            prefix=prefix,
            window=window,
            graph=ProcessGraph(nodes=nodes, edges=edges, canvas=graph.canvas, stage=Stage.PATCH),
        )

    @staticmethod
    def _ranked(nodes: Iterable[Node]) -> List[Node]:
        return sorted(nodes, key=lambda n: (-n.confidence, n.id))

    def fuse_nodes(self, patches: List[GlobalPatch]) -> Tuple[List[Node], Dict[str, str]]:
        """
        Per-patch NMS, then weighted box fusion across patches, per class

        NMS only suppresses duplicates within one patch; copies of a symbol
        seen by several patches are merged by WBF. Faint copies (under the
        confidence floor, e.g. clipped at a window edge) never seed or shape
        a fused node but join the fused node that contains them, so the
        edges they carry survive.

        Args:
            patches: Global-frame patch predictions

        Returns:
            Tuple of (fused nodes, source id -> fused id); faint copies with
            no containing fused node are absent from the remap
        """
        cfg = self.config
        remap: Dict[str, str] = {}
        survivors: Dict[NodeClass, List[Node]] = defaultdict(list)
        faint: List[Node] = []

        for patch in patches:
            by_class: Dict[NodeClass, List[Node]] = defaultdict(list)
            for node in patch.graph.nodes:
                if node.cls == NodeClass.BORDER:
                    continue
                if node.confidence < cfg.conf_floor:
                    faint.append(node)
                    continue
                by_class[node.cls].append(node)
            for node_cls, nodes in by_class.items():
                kept: List[Node] = []
                for node in self._ranked(nodes):
                    suppressor = next(
                        (k for k in kept if BoxGeometry.iou(k.box, node.box) >= cfg.nms_iou), None
                    )
                    if suppressor is None:
                        kept.append(node)
                    else:
                        remap[node.id] = suppressor.id
                survivors[node_cls].extend(kept)

        fused: List[Node] = []
        for node_cls in sorted(survivors, key=lambda c: c.value):
            clusters: List[List[Node]] = []
            boxes: List[BBox] = []
            for node in self._ranked(survivors[node_cls]):
                best, best_overlap = None, -1.0
                for index, box in enumerate(boxes):
                    overlap = BoxGeometry.iou(box, node.box)
                    if overlap >= cfg.wbf_iou and overlap > best_overlap:
                        best, best_overlap = index, overlap
                if best is None:
                    clusters.append([node])
                    boxes.append(node.box)
                else:
                    clusters[best].append(node)
                    boxes[best] = self._weighted_box(clusters[best])

            for members, box in zip(clusters, boxes):
                leader = members[0]
                confidence = sum(m.confidence for m in members) / len(members)
                fused.append(Node(id=leader.id, cls=node_cls, box=box, confidence=confidence))
                for member in members:
                    remap[member.id] = leader.id

        # suppressed nodes follow their suppressor into its cluster
        for source, target in list(remap.items()):
            while remap.get(target, target) != target:
                target = remap[target]
            remap[source] = target

        hosts: Dict[NodeClass, List[Node]] = defaultdict(list)
        for node in fused:
            hosts[node.cls].append(node)
        for node in sorted(faint, key=lambda n: n.id):
            host = self._host(node, hosts[node.cls], cfg.wbf_iou)
            if host is not None:
                remap[node.id] = host.id

        logger.debug(f"Fused {len(remap)} patch nodes into {len(fused)} nodes")
        return fused, remap

    @staticmethod
    def _host(node: Node, candidates: List[Node], threshold: float) -> Optional[Node]:
        """Fused node covering the largest share (at least threshold) of a faint copy's box"""
        area = node.box.area
        if area <= 0:
            return None
        best, best_share = None, 0.0
        for candidate in candidates:
            share = BoxGeometry.intersection_area(node.box, candidate.box) / area
            if share >= threshold and share > best_share:
                best, best_share = candidate, share
        return best

    @staticmethod
    def _weighted_box(members: List[Node]) -> BBox:
        total = sum(m.confidence for m in members)
        if total <= 0:
            coords = [sum(m.box.as_tuple()[i] for m in members) / len(members) for i in range(4)]
        else:
            coords = [sum(m.confidence * m.box.as_tuple()[i] for m in members) / total for i in range(4)]
        return BBox(x1=coords[0], y1=coords[1], x2=coords[2], y2=coords[3])

    def half_edges(self, patches: List[GlobalPatch], remap: Mapping[str, str]) -> List[HalfEdge]:
        """Border half-edges whose interior endpoint survived fusion"""
        halves: List[HalfEdge] = []
        for patch in patches:
            nodes = patch.graph.node_map()
            for edge in patch.graph.edges:
                source, target = nodes.get(edge.source), nodes.get(edge.target)
                if source is None or target is None:
                    continue
                if (source.cls == NodeClass.BORDER) == (target.cls == NodeClass.BORDER):
                    continue
                border, interior = (source, target) if source.cls == NodeClass.BORDER else (target, source)
                if interior.id not in remap:
                    continue
                cx, cy = border.box.center
                side = BoxGeometry.nearest_side(cx, cy, patch.window)
                if side in (Side.LEFT, Side.RIGHT):
                    line = patch.window.x1 if side == Side.LEFT else patch.window.x2
                    coord = cy
                else:
                    line = patch.window.y1 if side == Side.TOP else patch.window.y2
                    coord = cx
                local_id = border.id[len(patch.prefix):] if border.id.startswith(patch.prefix) else border.id
                halves.append(HalfEdge(
                    border_id=border.id, patch=patch.name, side=side, line=line, coord=coord,
                    interior=interior.id, interior_center=interior.box.center,
                    cls=edge.cls, confidence=edge.confidence, cut=cut_key(local_id),
                ))
        return halves

    def match_borders(self, patches: List[GlobalPatch], remap: Mapping[str, str]) -> List[Edge]:
        """
        Weld half-edges of cut pipes back into edges between fused endpoints

        With weld_by_id, border nodes naming the same cut edge are welded
        first, and nodes naming different cut edges never pair. The
        remaining half-edges pair greedily by nearest distance
        along the boundary axis (within border_eps) on complementary sides.
        A shared line is preferred; otherwise the two lines must overlap,
        with each interior endpoint beyond the other half's line.

        Args:
            patches: Global-frame patch predictions
            remap: Source id -> fused id from fuse_nodes

        Returns:
            Welded edges between fused interior endpoints
        """
        halves = self.half_edges(patches, remap)
        used: Set[str] = set()
        welded: List[Edge] = []
        if self.config.weld_by_id:
            welded.extend(self._weld_by_cut(halves, remap, used))
        welded.extend(self._weld_by_geometry(halves, remap, used))

        dropped = sum(1 for half in halves if half.border_id not in used)
        if dropped:
            logger.debug(f"{dropped} unmatched border half-edges dropped")
        return welded

    def _weld_by_cut(self, halves: List[HalfEdge], remap: Mapping[str, str], used: Set[str]) -> List[Edge]:
        groups: Dict[str, List[HalfEdge]] = defaultdict(list)
        for half in halves:
            if half.cut is not None:
                groups[half.cut].append(half)

        welded: List[Edge] = []
        for cut in sorted(groups):
            # strongest half per fused endpoint
            ends: Dict[str, HalfEdge] = {}
            for half in sorted(groups[cut], key=lambda h: (-h.confidence, h.border_id)):
                ends.setdefault(remap[half.interior], half)
            if len(ends) < 2:
                continue
            a, b = sorted(ends.values(), key=lambda h: (-h.confidence, h.border_id))[:2]
            welded.append(self._weld(a, b, remap))
            used.update(half.border_id for half in groups[cut])
        return welded

    def _weld_by_geometry(self, halves: List[HalfEdge], remap: Mapping[str, str], used: Set[str]) -> List[Edge]:
        by_id = self.config.weld_by_id
        candidates = []
        for a in halves:
            if a.border_id in used or a.side not in FORWARD_SIDES:
                continue
            for b in halves:
                if b.border_id in used or b.side != OPPOSITE_SIDE[a.side] or b.patch == a.patch:
                    continue
                if remap[a.interior] == remap[b.interior]:
                    continue
                if by_id and a.cut is not None and b.cut is not None and a.cut != b.cut:
                    continue
                gap = a.line - b.line
                if gap < -LINE_TOLERANCE:
                    continue
                shared = gap <= LINE_TOLERANCE
                if not shared and not (a.axis_position() < b.line and b.axis_position() > a.line):
                    continue
                distance = abs(a.coord - b.coord)
                if distance <= self.config.border_eps:
                    candidates.append((not shared, distance, a.border_id, b.border_id, a, b))

        welded: List[Edge] = []
        for _, _, a_id, b_id, a, b in sorted(candidates, key=lambda c: c[:4]):
            if a_id in used or b_id in used:
                continue
            used.update((a_id, b_id))
            welded.append(self._weld(a, b, remap))
        return welded

    @staticmethod
    def _weld(a: HalfEdge, b: HalfEdge, remap: Mapping[str, str]) -> Edge:
        """Higher-confidence half sets the class; tied halves that disagree give solid"""
        if a.confidence > b.confidence:
            cls = a.cls
        elif b.confidence > a.confidence:
            cls = b.cls
        else:
            cls = a.cls if a.cls == b.cls else EdgeClass.SOLID
        return Edge(
            source=remap[a.interior],
            target=remap[b.interior],
            cls=cls,
            confidence=(a.confidence + b.confidence) / 2,
        )

    def finalize(self, graph: ProcessGraph) -> ProcessGraph:
        """
        Floor, self-loop removal, duplicate merge, isolated-node removal

        Args:
            graph: Fused graph

        Returns:
            Stitched-stage graph that passes validate()
        """
        floor = self.config.conf_floor
        nodes = {
            n.id: n for n in graph.nodes
            if n.confidence >= floor and n.cls != NodeClass.BORDER
        }

        merged: Dict[Tuple[str, str], Edge] = {}
        for edge in graph.edges:
            if edge.source == edge.target:
                continue
            if edge.source not in nodes or edge.target not in nodes:
                continue
            current = merged.get(edge.key)
            if current is None or edge.confidence > current.confidence:
                merged[edge.key] = edge.model_copy(update={"source": edge.key[0], "target": edge.key[1]})

        connected = {endpoint for key in merged for endpoint in key}
        result = ProcessGraph(
            nodes=[nodes[node_id] for node_id in sorted(nodes) if node_id in connected],
            edges=[merged[key] for key in sorted(merged)],
            canvas=graph.canvas,
            stage=Stage.STITCHED,
        )
        violations = GraphProcessor.validate(result)
        if violations:
            raise InvariantError(f"stitched graph violates {len(violations)} invariants: {violations[:3]}")
        return result

    def stitch(self, predictions: Mapping[str, ProcessGraph], index: WindowIndex) -> ProcessGraph:
        """
        Merge patch predictions into one full-plan graph

        Args:
            predictions: Window name -> patch-local prediction graph
            index: Window index written by the patcher

        Returns:
            Stitched-stage graph
        """
        windows = {entry.name: entry for entry in index.windows}
        unknown = sorted(set(predictions) - set(windows))
        if unknown:
            raise WindowIndexError(f"predictions for windows absent from the index: {', '.join(unknown)}")
        missing = [entry.name for entry in index.windows if entry.name not in predictions]
        if missing:
            logger.warning(f"⚠️ {len(missing)} windows have no prediction: {', '.join(missing[:5])}")

        patches: List[GlobalPatch] = []
        for entry in index.windows:
            if entry.name not in predictions:
                continue
            local_window = BBox(x1=0, y1=0, x2=index.patch_size, y2=index.patch_size)
            open_sides = self.open_sides(entry.x0, entry.y0, index.patch_size, index.canvas)
            attenuated = self.attenuate(predictions[entry.name], local_window, open_sides)
            patches.append(self.to_global(entry.name, entry.x0, entry.y0, index.patch_size, attenuated))

        fused, remap = self.fuse_nodes(patches)
        edges: List[Edge] = []
        for patch in patches:
            for edge in patch.graph.edges:
                if edge.source in remap and edge.target in remap:
                    edges.append(edge.model_copy(update={
                        "source": remap[edge.source], "target": remap[edge.target]
                    }))
        edges.extend(self.match_borders(patches, remap))

        stitched = self.finalize(ProcessGraph(nodes=fused, edges=edges, canvas=tuple(index.canvas), stage=Stage.STITCHED))
        logger.info(
            f"Stitched {len(patches)} patches of {index.plan_id}: "
            f"{len(stitched.nodes)} nodes, {len(stitched.edges)} edges"
        )
        return stitched

    @staticmethod
    def read_predictions(patch_dir: str, index: WindowIndex) -> Dict[str, ProcessGraph]:
        """Load <name>.graphml for every window present in a directory"""
        predictions = {}
        for entry in index.windows:
            path = Path(patch_dir) / f"{entry.name}.graphml"
            if path.exists():
                predictions[entry.name] = GraphMLStore.read_graphml(str(path))
        return predictions
