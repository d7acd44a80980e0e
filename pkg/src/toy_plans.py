"""
Toy Plan Factory
Deterministic sample plans for demos and tests, no real P&ID data needed
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .annotation_io import GraphMLStore
from .graph_model import BBox, Edge, EdgeClass, Node, NodeClass, PHYSICAL_CLASSES, ProcessGraph, Stage
from .symbols import NOMINAL_SIZES

logger = logging.getLogger(__name__)

RAW_CANVAS = (1200, 900)
RAW_CELL = 300
CONNECTOR_SIZE = 8.0
# connector + crossing share of a raw plan
AUX_FRACTION_MAX = 0.65

TILED_CANVAS = (3000, 3000)
TILED_SLOTS = (250, 500, 1000, 1250, 1750, 2000, 2500, 2750)
TILED_OCCUPANCY = 0.55
TILED_JITTER = 40.0
TILED_MAX_BOX = 60.0
TILED_EDGE_P = 0.6

LONG_SPACING = 250.0
LONG_MARGIN = 100.0
LONG_PLACEMENT_TRIES = 200
LONG_ROUTE_P = 0.5

SOLID_SHARE = 0.7
CHAIN_FLIP_P = 0.2

S, N = EdgeClass.SOLID, EdgeClass.NON_SOLID

# (seed id, canvas, nodes as (id, class, cx, cy), edges as (u, v, class))
SEED_LAYOUTS = [
    ("pump_loop", (900, 600), [
        ("n01", NodeClass.TANK, 150, 300),
        ("n02", NodeClass.PUMP, 330, 450),
        ("n03", NodeClass.VALVE, 500, 450),
        ("n04", NodeClass.INSTRUMENTATION, 500, 250),
        ("n05", NodeClass.GENERAL, 700, 300),
        ("n06", NodeClass.VALVE, 700, 480),
        ("n07", NodeClass.ARROW, 820, 140),
    ], [
        ("n01", "n02", S), ("n02", "n03", S), ("n03", "n05", S), ("n04", "n05", N),
        ("n03", "n04", N), ("n05", "n06", S), ("n05", "n07", S),
    ]),
    ("header", (1000, 700), [
        ("n01", NodeClass.INLET_OUTLET, 120, 350),
        ("n02", NodeClass.VALVE, 280, 350),
        ("n03", NodeClass.GENERAL, 450, 200),
        ("n04", NodeClass.GENERAL, 450, 500),
        ("n05", NodeClass.PUMP, 650, 200),
        ("n06", NodeClass.PUMP, 650, 500),
        ("n07", NodeClass.VALVE, 820, 350),
        ("n08", NodeClass.INSTRUMENTATION, 850, 150),
    ], [
        ("n01", "n02", S), ("n02", "n03", S), ("n02", "n04", S), ("n03", "n05", S),
        ("n04", "n06", S), ("n05", "n07", S), ("n06", "n07", S), ("n07", "n08", N),
        ("n03", "n04", N),
    ]),
    ("column", (800, 800), [
        ("n01", NodeClass.TANK, 400, 400),
        ("n02", NodeClass.VALVE, 200, 200),
        ("n03", NodeClass.VALVE, 600, 200),
        ("n04", NodeClass.INSTRUMENTATION, 200, 600),
        ("n05", NodeClass.PUMP, 600, 600),
        ("n06", NodeClass.ARROW, 400, 120),
        ("n07", NodeClass.INLET_OUTLET, 660, 720),
        ("n08", NodeClass.GENERAL, 150, 400),
    ], [
        ("n01", "n02", S), ("n01", "n03", S), ("n01", "n05", S), ("n04", "n01", N),
        ("n05", "n07", S), ("n02", "n06", S), ("n03", "n06", N), ("n08", "n02", S),
        ("n08", "n04", N),
    ]),
]


def _nominal_box(node_cls: NodeClass, cx: float, cy: float, cap: Optional[float] = None) -> BBox:
    w, h = NOMINAL_SIZES[node_cls]
    if cap is not None:
        w, h = min(w, cap), min(h, cap)
    return BBox.from_center(cx, cy, w, h)


class ToyPlanFactory:
    """Generates sample raw, seed and tiled plans"""

    @staticmethod
    def seed_plans() -> List[Tuple[str, ProcessGraph]]:
        """The three bundled collapsed seed plans"""
        seeds = []
        for seed_id, canvas, nodes, edges in SEED_LAYOUTS:
            seeds.append((seed_id, ProcessGraph(
                nodes=[Node(id=i, cls=c, box=_nominal_box(c, x, y)) for i, c, x, y in nodes],
                edges=[Edge(source=u, target=v, cls=cls) for u, v, cls in edges],
                canvas=canvas,
                stage=Stage.COLLAPSED,
            )))
        return seeds

    @staticmethod
    def raw_plan(rng: np.random.Generator, n_physical: int = 8) -> ProcessGraph:
        """
        Raw annotation with connector chains, junctions and at most one crossing

        Args:
            rng: Random generator
            n_physical: Physical node count, 2..12

        Returns:
            Raw-stage graph whose connector + crossing share lies in [0.5, 0.65]
        """
        cols, rows = RAW_CANVAS[0] // RAW_CELL, RAW_CANVAS[1] // RAW_CELL
        n = max(2, min(n_physical, cols * rows))
        cells = rng.permutation(cols * rows)[:n]

        physical: List[Node] = []
        for index, cell in enumerate(cells):
            cx = (cell % cols + 0.5) * RAW_CELL + rng.uniform(-60, 60)
            cy = (cell // cols + 0.5) * RAW_CELL + rng.uniform(-60, 60)
            node_cls = PHYSICAL_CLASSES[int(rng.integers(len(PHYSICAL_CLASSES)))]
            physical.append(Node(id=f"n{index + 1:02d}", cls=node_cls, box=_nominal_box(node_cls, cx, cy)))

        # pipes as (start node id, end node id); spanning tree plus extras
        pipes: List[Tuple[str, str]] = []
        order = rng.permutation(n)
        for k in range(1, n):
            parent = order[int(rng.integers(k))]
            pipes.append((physical[order[k]].id, physical[parent].id))
        joined = {tuple(sorted(p)) for p in pipes}
        for _ in range(int(rng.integers(0, n // 3 + 1))):
            a, b = (physical[i].id for i in rng.choice(n, 2, replace=False))
            if tuple(sorted((a, b))) not in joined:
                joined.add(tuple(sorted((a, b))))
                pipes.append((a, b))
        junctions = int(rng.integers(0, 3)) if n >= 3 else 0

        aux_total = int(rng.integers(n, math.floor(AUX_FRACTION_MAX * n / (1 - AUX_FRACTION_MAX)) + 1))
        crossings = 1 if len(pipes) >= 2 and rng.random() < 0.5 else 0
        connector_budget = aux_total - crossings

        # each junction pipe needs at least one connector of its own
        junctions = min(junctions, max(0, connector_budget - 1) // 2)
        chain_lengths = [0] * len(pipes)
        remaining = connector_budget - junctions
        for k in range(len(pipes)):
            if remaining <= 0:
                break
            chain_lengths[k] += 1
            remaining -= 1
        while remaining > 0:
            chain_lengths[int(rng.integers(len(pipes)))] += 1
            remaining -= 1

        centers = {node.id: node.box.center for node in physical}
        nodes: List[Node] = list(physical)
        edges: List[Edge] = []
        counter = {"c": 0}

        def new_connector(x: float, y: float) -> str:
            counter["c"] += 1
            node_id = f"c{counter['c']:02d}"
            nodes.append(Node(id=node_id, cls=NodeClass.CONNECTOR, box=BBox.from_center(x, y, CONNECTOR_SIZE, CONNECTOR_SIZE)))
            centers[node_id] = (x, y)
            return node_id

        def chain_class(base: EdgeClass) -> EdgeClass:
            if rng.random() < CHAIN_FLIP_P:
                return N if base == S else S
            return base

        chains: List[List[str]] = []
        bases: List[EdgeClass] = []
        for (a, b), length in zip(pipes, chain_lengths):
            (ax, ay), (bx, by) = centers[a], centers[b]
            chain = [a]
            for k in range(length):
                t = (k + 1) / (length + 1)
                chain.append(new_connector(ax + t * (bx - ax), ay + t * (by - ay)))
            chain.append(b)
            chains.append(chain)
            bases.append(S if rng.random() < SOLID_SHARE else N)

        if crossings:
            i, j = (int(k) for k in rng.choice(len(chains), 2, replace=False))
            a, b = chains[i][0], chains[i][-1]
            mx = (centers[a][0] + centers[b][0]) / 2
            my = (centers[a][1] + centers[b][1]) / 2
            nodes.append(Node(id="x01", cls=NodeClass.CROSSING, box=BBox.from_center(mx, my, CONNECTOR_SIZE, CONNECTOR_SIZE)))
            centers["x01"] = (mx, my)
            chains[i].insert(len(chains[i]) // 2, "x01")
            chains[j].insert(len(chains[j]) // 2, "x01")

        existing = set()
        for chain, base in zip(chains, bases):
            for u, v in zip(chain, chain[1:]):
                edge = Edge(source=u, target=v, cls=chain_class(base))
                if edge.key not in existing:
                    existing.add(edge.key)
                    edges.append(edge)

        # junction pipes branch off an existing connector to a physical node
        connector_ids = [node.id for node in nodes if node.cls == NodeClass.CONNECTOR]
        for _ in range(junctions):
            if not connector_ids:
                break
            start = connector_ids[int(rng.integers(len(connector_ids)))]
            end = physical[int(rng.integers(n))].id
            (sx, sy), (ex, ey) = centers[start], centers[end]
            middle = new_connector((sx + ex) / 2, (sy + ey) / 2)
            base = S if rng.random() < SOLID_SHARE else N
            for u, v in ((start, middle), (middle, end)):
                edge = Edge(source=u, target=v, cls=chain_class(base))
                if edge.key not in existing:
                    existing.add(edge.key)
                    edges.append(edge)

        return ProcessGraph(nodes=nodes, edges=edges, canvas=RAW_CANVAS, stage=Stage.RAW)

    @staticmethod
    def tiled_plan(rng: np.random.Generator) -> ProcessGraph:
        """
        3000 x 3000 collapsed plan on a slot lattice; every edge joins adjacent
        slots, so each edge lies wholly inside at least one 1500/750 window

        Args:
            rng: Random generator

        Returns:
            Collapsed-stage graph without isolated nodes
        """
        slots = len(TILED_SLOTS)
        occupied: Dict[Tuple[int, int], Node] = {}
        for row in range(slots):
            for col in range(slots):
                if rng.random() >= TILED_OCCUPANCY:
                    continue
                node_cls = PHYSICAL_CLASSES[int(rng.integers(len(PHYSICAL_CLASSES)))]
                cx = TILED_SLOTS[col] + rng.uniform(-TILED_JITTER, TILED_JITTER)
                cy = TILED_SLOTS[row] + rng.uniform(-TILED_JITTER, TILED_JITTER)
                occupied[(row, col)] = Node(
                    id=f"n{row}{col}", cls=node_cls, box=_nominal_box(node_cls, cx, cy, TILED_MAX_BOX)
                )

        edges: Dict[Tuple[str, str], Edge] = {}
        for (row, col), node in sorted(occupied.items()):
            for neighbour in ((row, col + 1), (row + 1, col)):
                if neighbour in occupied and rng.random() < TILED_EDGE_P:
                    edge = Edge(
                        source=node.id,
                        target=occupied[neighbour].id,
                        cls=S if rng.random() < SOLID_SHARE else N,
                    )
                    edges[edge.key] = edge

        degree = {node.id: 0 for node in occupied.values()}
        for u, v in edges:
            degree[u] += 1
            degree[v] += 1
        for (row, col), node in sorted(occupied.items()):
            if degree[node.id]:
                continue
            for neighbour in ((row, col - 1), (row, col + 1), (row - 1, col), (row + 1, col)):
                if neighbour in occupied:
                    edge = Edge(source=node.id, target=occupied[neighbour].id, cls=S)
                    edges[edge.key] = edge
                    degree[node.id] += 1
                    degree[occupied[neighbour].id] += 1
                    break

        nodes = [node for _, node in sorted(occupied.items()) if degree[node.id]]
        return ProcessGraph(
            nodes=nodes,
            edges=[edges[key] for key in sorted(edges)],
            canvas=TILED_CANVAS,
            stage=Stage.COLLAPSED,
        )

    @staticmethod
    def long_edge_plan(rng: np.random.Generator, node_count: int = 20) -> ProcessGraph:
        """
        3000 x 3000 collapsed plan with nodes anywhere and edges between random
        pairs; about half the edges take an L-shaped route

        Args:
            rng: Random generator
            node_count: Target node count; fewer when placement runs out of room

        Returns:
            Collapsed-stage graph without isolated nodes or overlapping boxes
        """
        width, height = TILED_CANVAS
        centers: List[Tuple[float, float]] = []
        for _ in range(node_count * LONG_PLACEMENT_TRIES):
            if len(centers) == node_count:
                break
            cx = float(rng.uniform(LONG_MARGIN, width - LONG_MARGIN))
            cy = float(rng.uniform(LONG_MARGIN, height - LONG_MARGIN))
            if all(math.hypot(cx - x, cy - y) >= LONG_SPACING for x, y in centers):
                centers.append((cx, cy))

        nodes: List[Node] = []
        for index, (cx, cy) in enumerate(centers):
            node_cls = PHYSICAL_CLASSES[int(rng.integers(len(PHYSICAL_CLASSES)))]
            nodes.append(Node(id=f"n{index:02d}", cls=node_cls, box=_nominal_box(node_cls, cx, cy, TILED_MAX_BOX)))

        n = len(nodes)
        pairs: List[Tuple[int, int]] = []
        order = rng.permutation(n)
        for k in range(1, n):
            pairs.append((int(order[k]), int(order[int(rng.integers(k))])))
        for _ in range(n // 2):
            a, b = (int(i) for i in rng.choice(n, 2, replace=False))
            pairs.append((a, b))

        edges: Dict[Tuple[str, str], Edge] = {}
        for a, b in pairs:
            (sx, sy), (tx, ty) = centers[a], centers[b]
            route = [(tx, sy)] if rng.random() < LONG_ROUTE_P else None
            edge = Edge(
                source=nodes[a].id,
                target=nodes[b].id,
                cls=S if rng.random() < SOLID_SHARE else N,
                route=route,
            )
            edges.setdefault(edge.key, edge)

        return ProcessGraph(
            nodes=nodes,
            edges=[edges[key] for key in sorted(edges)],
            canvas=TILED_CANVAS,
            stage=Stage.COLLAPSED,
        )

    @staticmethod
    def write_toy_data(out_dir: str, seed: int = 0, raw_count: int = 3, tiled_count: int = 3) -> Dict[str, List[str]]:
        """
        Write raw/, seeds/ and tiled/ sample corpora

        Returns:
            {subdirectory: written file paths}
        """
        written: Dict[str, List[str]] = {"raw": [], "seeds": [], "tiled": []}
        base = Path(out_dir)
        for index in range(raw_count):
            path = base / "raw" / f"raw_{index:03d}.graphml"
            GraphMLStore.write_graphml(ToyPlanFactory.raw_plan(np.random.default_rng([seed, index])), str(path))
            written["raw"].append(str(path))
        for seed_id, graph in ToyPlanFactory.seed_plans():
            path = base / "seeds" / f"{seed_id}.graphml"
            GraphMLStore.write_graphml(graph, str(path))
            written["seeds"].append(str(path))
        for index in range(tiled_count):
            path = base / "tiled" / f"tiled_{index:03d}.graphml"
            GraphMLStore.write_graphml(ToyPlanFactory.tiled_plan(np.random.default_rng([seed, 1000 + index])), str(path))
            written["tiled"].append(str(path))
        logger.info(f"Wrote {sum(len(v) for v in written.values())} toy plans to {out_dir}")
        return written
