"""
Detector Simulator Module
Corrupts ground-truth graphs into prediction-like graphs with seeded noise
"""

import logging
import shutil
from pathlib import Path
from typing import List, Optional, Set

import numpy as np

from .annotation_io import GraphMLStore
from .config import NoiseConfig
from .graph_model import BBox, Edge, EdgeClass, Node, NodeClass, PHYSICAL_CLASSES, ProcessGraph
from .patcher import WINDOW_INDEX_NAME, read_window_index

logger = logging.getLogger(__name__)

MIN_BOX_SIZE = 1.0
FP_SIZE_RANGE = (16.0, 80.0)
SPURIOUS_PREFIX = "spurious:"


class DetectorSimulator:
    """
    Stand-in detector: drops, jitters, relabels and hallucinates nodes and edges
    """

    def __init__(self, config: Optional[NoiseConfig] = None):
        self.config = config or NoiseConfig()

    def _jitter(self, box: BBox, canvas, rng: np.random.Generator) -> BBox:
        width, height = canvas
        coords = np.array(box.as_tuple(), dtype=float) + rng.normal(0.0, self.config.box_sigma, 4)
        x1, x2 = sorted((coords[0], coords[2]))
        y1, y2 = sorted((coords[1], coords[3]))
        x1 = min(max(x1, 0.0), width - MIN_BOX_SIZE)
        y1 = min(max(y1, 0.0), height - MIN_BOX_SIZE)
        x2 = min(max(x2, x1 + MIN_BOX_SIZE), width)
        y2 = min(max(y2, y1 + MIN_BOX_SIZE), height)
        return BBox(x1=float(x1), y1=float(y1), x2=float(x2), y2=float(y2))

    @staticmethod
    def _spurious_id(index: int, taken: Set[str]) -> str:
        node_id = f"{SPURIOUS_PREFIX}{index}"
        suffix = 1
        while node_id in taken:
            node_id = f"{SPURIOUS_PREFIX}{index}.{suffix}"
            suffix += 1
        return node_id

    def _spurious(self, node_id: str, canvas, rng: np.random.Generator) -> Node:
        width, height = canvas
        node_cls = PHYSICAL_CLASSES[int(rng.integers(len(PHYSICAL_CLASSES)))]
        w, h = rng.uniform(*FP_SIZE_RANGE, 2)
        w, h = min(w, width), min(h, height)
        x1 = rng.uniform(0.0, width - w)
        y1 = rng.uniform(0.0, height - h)
        return Node(
            id=node_id,
            cls=node_cls,
            box=BBox(x1=float(x1), y1=float(y1), x2=float(x1 + w), y2=float(y1 + h)),
            confidence=float(rng.uniform(*self.config.fp_conf)),
        )

    def corrupt(self, gt: ProcessGraph, rng: Optional[np.random.Generator] = None) -> ProcessGraph:
        """
        Produce a prediction graph from ground truth

        Args:
            gt: Collapsed or patch-stage graph
            rng: Random generator; defaults to one seeded from the config

        Returns:
            Prediction graph at the same stage, with confidences
        """
        cfg = self.config
        rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
        canvas = gt.canvas

        nodes: List[Node] = []
        for node in gt.nodes:
            if rng.random() < cfg.p_drop:
                continue
            box = self._jitter(node.box, canvas, rng) if cfg.box_sigma > 0 else node.box
            node_cls = node.cls
            if node.cls != NodeClass.BORDER and rng.random() < cfg.p_cls:
                others = [c for c in PHYSICAL_CLASSES if c != node.cls]
                node_cls = others[int(rng.integers(len(others)))]
            nodes.append(node.model_copy(update={
                "box": box,
                "cls": node_cls,
                "confidence": float(rng.uniform(*cfg.tp_conf)),
            }))

        # spurious ids avoid every ground-truth id, dropped ones included
        taken = {n.id for n in gt.nodes}
        for index in range(int(rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0 else 0):
            node_id = self._spurious_id(index, taken)
            taken.add(node_id)
            nodes.append(self._spurious(node_id, canvas, rng))

        survivors = {n.id for n in nodes}
        edges: List[Edge] = []
        for edge in gt.edges:
            if edge.source not in survivors or edge.target not in survivors:
                continue
            if rng.random() < cfg.p_edrop:
                continue
            edge_cls = edge.cls
            if rng.random() < cfg.p_eflip:
                edge_cls = EdgeClass.NON_SOLID if edge.cls == EdgeClass.SOLID else EdgeClass.SOLID
            edges.append(Edge(
                source=edge.source,
                target=edge.target,
                cls=edge_cls,
                confidence=float(rng.uniform(*cfg.tp_conf)),
            ))

        return ProcessGraph(nodes=nodes, edges=edges, canvas=canvas, stage=gt.stage)

    def corrupt_patches(self, gt_patch_dir: str, out_dir: str) -> int:
        """
        Corrupt every patch listed in a window index; patch i uses rng [seed, i]

        Args:
            gt_patch_dir: Directory holding windows.json and <x0>_<y0>.graphml
            out_dir: Destination; receives predictions and a copy of windows.json

        Returns:
            Number of patches written
        """
        index = read_window_index(str(Path(gt_patch_dir) / WINDOW_INDEX_NAME))
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        written = 0
        for position, entry in enumerate(index.windows):
            source = Path(gt_patch_dir) / f"{entry.name}.graphml"
            if not source.exists():
                logger.warning(f"⚠️ Missing patch {source}; skipped")
                continue
            rng = np.random.default_rng([self.config.rng_seed, position])
            prediction = self.corrupt(GraphMLStore.read_graphml(str(source)), rng)
            GraphMLStore.write_graphml(prediction, str(out_path / f"{entry.name}.graphml"))
            written += 1
        shutil.copyfile(Path(gt_patch_dir) / WINDOW_INDEX_NAME, out_path / WINDOW_INDEX_NAME)
        logger.info(f"Simulated detections for {written} patches of {index.plan_id}")
        return written
