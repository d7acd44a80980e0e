"""
Synthetic Generation Module
Topology-preserving plan generation: perturb, substitute, route, render, dedup
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw
from pydantic import BaseModel, ConfigDict, Field

from .annotation_io import GraphMLStore, ManifestEntry, ManifestStore
from .config import DedupConfig, GenConfig
from .dedup import DedupRegistry, RejectReason, phash
from .errors import GenerationError
from .geometry import BoxGeometry, Point
from .graph_model import BBox, Edge, EdgeClass, Node, PHYSICAL_CLASSES, ProcessGraph, Stage
from .routing import ManhattanRouter, RouteResult
from .symbols import SymbolLibrary

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
INK = 0
PROGRESS_EVERY = 500


class RenderedPlan(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    graph: ProcessGraph
    routes: Dict[Tuple[str, str], RouteResult] = Field(default_factory=dict)
    image: Optional[Image.Image] = None
    placement_fallbacks: int = 0

    @property
    def route_fallbacks(self) -> List[Tuple[str, str]]:
        return sorted(key for key, route in self.routes.items() if route.fallback)


class CorpusReport(BaseModel):
    """Counts for one generate_corpus run; accepted excludes plans already in a resumed manifest"""

    accepted: int = 0
    attempts: int = 0
    target: int = 0
    resumed: int = 0
    rejections: Dict[str, int] = Field(default_factory=lambda: {r.value: 0 for r in RejectReason})
    placement_fallbacks: int = 0
    route_fallbacks: int = 0
    manifest_path: Optional[str] = None

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0

    @property
    def total_accepted(self) -> int:
        return self.resumed + self.accepted

    def summary(self) -> str:
        tally = ", ".join(f"{k}={v}" for k, v in self.rejections.items())
        text = (
            f"accepted {self.accepted}/{self.target} in {self.attempts} attempts "
            f"({self.acceptance_rate:.1%}); rejected: {tally}"
        )
        if self.resumed:
            text += f"; manifest now holds {self.total_accepted} plans"
        return text


def dash_segments(points: Sequence[Point], on: float, off: float) -> List[Tuple[Point, Point]]:
    """
    Split a polyline into dash pieces; the on/off phase carries across vertices

    Args:
        points: Polyline vertices
        on: Dash length in px
        off: Gap length in px

    Returns:
        List of (start, end) dash pieces
    """
    pieces: List[Tuple[Point, Point]] = []
    period = on + off
    phase = 0.0
    for (ax, ay), (bx, by) in zip(points, points[1:]):
        length = float(np.hypot(bx - ax, by - ay))
        if length == 0:
            continue
        ux, uy = (bx - ax) / length, (by - ay) / length
        position = 0.0
        while position < length:
            if phase < on:
                span = min(on - phase, length - position)
                start = (ax + ux * position, ay + uy * position)
                end = (ax + ux * (position + span), ay + uy * (position + span))
                pieces.append((start, end))
            else:
                span = min(period - phase, length - position)
            position += span
            phase = (phase + span) % period
    return pieces


class SyntheticPlanGenerator:
    """
    Generates annotated synthetic plans from collapsed seed graphs
    """

    def __init__(
        self,
        config: Optional[GenConfig] = None,
        library: Optional[SymbolLibrary] = None,
        dedup_config: Optional[DedupConfig] = None
    ):
        self.config = config or GenConfig()
        self.library = library or SymbolLibrary.builtin()
        self.dedup_config = dedup_config or DedupConfig()

    def perturb_layout(self, seed: ProcessGraph, rng: np.random.Generator) -> Tuple[ProcessGraph, int]:
        """
        Displace every node by a uniform offset, keeping adjacency

        Args:
            seed: Collapsed seed graph
            rng: Random generator

        Returns:
            Tuple of (perturbed graph, number of nodes kept at their seed position)
        """
        graph = seed.model_copy(deep=True)
        delta = self.config.delta
        if delta == 0 or not graph.nodes:
            return graph, 0

        width, height = graph.canvas
        placed = [node.box for node in graph.nodes]
        fallbacks = 0
        for index, node in enumerate(graph.nodes):
            original = node.box
            clearance = max(0.0, min(original.x1, original.y1, width - original.x2, height - original.y2))
            margin = min(self.config.margin, clearance)
            moved = None
            for _ in range(self.config.max_retries):
                dx, dy = rng.uniform(-delta, delta, 2)
                candidate = original.translate(float(dx), float(dy))
                if not (candidate.x1 >= margin and candidate.y1 >= margin
                        and candidate.x2 <= width - margin and candidate.y2 <= height - margin):
                    continue
                if any(BoxGeometry.intersection_area(candidate, other) > 0
                       for j, other in enumerate(placed) if j != index):
                    continue
                moved = candidate
                break
            if moved is None:
                fallbacks += 1
                continue
            placed[index] = moved
            node.box = moved

        if fallbacks:
            logger.debug(f"{fallbacks} of {len(graph.nodes)} nodes kept their seed position")
        return graph, fallbacks

    def substitute_symbols(self, graph: ProcessGraph, rng: np.random.Generator) -> ProcessGraph:
        """
        Assign a random same-class template to every node and resize its box

        Args:
            graph: Placed graph
            rng: Random generator

        Returns:
            Graph with template ids and nominal-size boxes
        """
        result = graph.model_copy(deep=True)
        width, height = result.canvas
        for node in result.nodes:
            templates = self.library.for_class(node.cls)
            template = templates[int(rng.integers(len(templates)))]
            node.template = template.name
            w, h = template.nominal_size
            cx, cy = node.box.center
            x1 = min(max(cx - w / 2, 0.0), max(width - w, 0.0))
            y1 = min(max(cy - h / 2, 0.0), max(height - h, 0.0))
            node.box = BBox(x1=x1, y1=y1, x2=min(x1 + w, width), y2=min(y1 + h, height))
        return result

    def route_edges(self, graph: ProcessGraph) -> RenderedPlan:
        """
        Manhattan-route every edge and store the polyline on it

        Args:
            graph: Placed graph

        Returns:
            RenderedPlan without an image yet
        """
        width, height = graph.canvas
        router = ManhattanRouter(width, height, self.config.grid_cell, self.config.bend_penalty)
        routes = router.route_graph(graph)
        routed = graph.model_copy(deep=True)
        for edge in routed.edges:
            edge.route = list(routes[edge.key].points)
        return RenderedPlan(graph=routed, routes=routes)

    def render(self, plan: RenderedPlan) -> Image.Image:
        """
        Rasterize a routed plan: grey background, stroked pipes, black symbols

        Args:
            plan: Routed plan

        Returns:
            Grayscale Pillow image of canvas size
        """
        cfg = self.config
        width, height = plan.graph.canvas
        image = Image.new("L", (int(width), int(height)), color=cfg.background)
        draw = ImageDraw.Draw(image)

        for edge in plan.graph.edges:
            points = edge.route or self._straight(plan.graph, edge)
            if edge.cls == EdgeClass.SOLID:
                draw.line(points, fill=INK, width=cfg.stroke_width)
            else:
                for start, end in dash_segments(points, cfg.dash_on, cfg.dash_off):
                    draw.line([start, end], fill=INK, width=cfg.stroke_width)

        for node in plan.graph.nodes:
            if node.template:
                self.library.draw(draw, node.template, node.box, width=2, fill=INK)
            else:
                draw.rectangle(node.box.as_tuple(), outline=INK, width=2)
        return image

    @staticmethod
    def _straight(graph: ProcessGraph, edge: Edge) -> List[Point]:
        nodes = graph.node_map()
        return [nodes[edge.source].box.center, nodes[edge.target].box.center]

    def propose(self, seed: ProcessGraph, rng: np.random.Generator) -> Tuple[ProcessGraph, int]:
        perturbed, fallbacks = self.perturb_layout(seed, rng)
        return self.substitute_symbols(perturbed, rng), fallbacks

    def realize(self, graph: ProcessGraph, placement_fallbacks: int = 0) -> RenderedPlan:
        plan = self.route_edges(graph)
        plan.placement_fallbacks = placement_fallbacks
        plan.image = self.render(plan)
        return plan

    def generate_plan(self, seed: ProcessGraph, rng: np.random.Generator) -> RenderedPlan:
        """One full attempt without the dedup check"""
        graph, fallbacks = self.propose(seed, rng)
        return self.realize(graph, fallbacks)

    def generate_corpus(
        self,
        seeds: Sequence[Tuple[str, ProcessGraph]],
        target: int,
        attempts_cap: int,
        out_dir: str,
        registry: Optional[DedupRegistry] = None,
        jobs: int = 1
    ) -> CorpusReport:
        """
        Round-robin generation over seeds until target acceptances or the attempts cap

        Args:
            seeds: (seed id, collapsed graph) pairs
            target: Accepted plans wanted
            attempts_cap: Maximum attempts
            out_dir: Output directory for PNG, GraphML and manifest.jsonl
            registry: Dedup registry; rebuilt from an existing manifest when omitted
            jobs: Worker threads building candidates; acceptance stays serial

        Returns:
            CorpusReport
        """
        if not seeds:
            raise GenerationError("at least one seed graph is required", CorpusReport(target=target))
        for seed_id, seed in seeds:
            if seed.stage != Stage.COLLAPSED:
                raise GenerationError(
                    f"seed {seed_id} is at stage '{seed.stage.value}', expected collapsed",
                    CorpusReport(target=target)
                )

        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        store = ManifestStore(str(out_path / MANIFEST_NAME))
        manifest = store.load()
        if registry is None:
            registry = DedupRegistry.from_manifest(manifest, self.dedup_config)
        first_attempt = max((e.attempt for e in manifest.entries), default=-1) + 1

        report = CorpusReport(target=target, resumed=len(manifest.entries), manifest_path=str(store.path))
        logger.info(f"Generating {target} plans from {len(seeds)} seeds (cap {attempts_cap} attempts)")

        batch_size = max(1, jobs)
        attempt = 0
        next_progress = PROGRESS_EVERY
        with ThreadPoolExecutor(max_workers=batch_size) as pool:
            while report.accepted < target and attempt < attempts_cap:
                batch = list(range(attempt, min(attempt + batch_size, attempts_cap)))
                proposals = []
                for index in batch:
                    seed_id, seed = seeds[index % len(seeds)]
                    number = first_attempt + index
                    rng = np.random.default_rng([self.config.rng_seed, number])
                    graph, fallbacks = self.propose(seed, rng)
                    proposals.append((seed_id, number, graph, fallbacks, registry.hash_graph(graph)))

                futures = {
                    number: pool.submit(self.realize, graph, fallbacks)
                    for _, number, graph, fallbacks, digest in proposals
                    if not registry.is_structural_duplicate(digest)
                }

                for seed_id, number, graph, fallbacks, digest in proposals:
                    if report.accepted >= target:
                        break
                    attempt += 1
                    report.attempts += 1
                    report.placement_fallbacks += fallbacks
                    if number not in futures or registry.is_structural_duplicate(digest):
                        report.rejections[RejectReason.STRUCTURAL.value] += 1
                        continue
                    plan = futures[number].result()
                    decision = registry.try_accept_hashes(digest, phash(plan.image))
                    if not decision.accepted:
                        report.rejections[decision.reason.value] += 1
                        continue
                    report.route_fallbacks += len(plan.route_fallbacks)
                    self._write_plan(plan, seed_id, number, digest, decision.phash, out_path, store)
                    report.accepted += 1

                if report.attempts >= next_progress:
                    logger.info(f"Progress: {report.summary()}")
                    next_progress += PROGRESS_EVERY

        logger.info(f"✅ {report.summary()}")
        if report.accepted == 0 and target > 0:
            raise GenerationError(f"no plan accepted: {report.summary()}", report)
        return report

    @staticmethod
    def _write_plan(
        plan: RenderedPlan,
        seed_id: str,
        number: int,
        digest: str,
        phash_hex: str,
        out_path: Path,
        store: ManifestStore
    ) -> None:
        plan_id = f"{seed_id}_{number:05d}"
        image_name = f"{plan_id}.png"
        annotation_name = f"{plan_id}.graphml"
        plan.image.save(out_path / image_name, format="PNG")
        GraphMLStore.write_graphml(plan.graph, str(out_path / annotation_name))
        store.append(ManifestEntry(
            plan_id=plan_id,
            image_path=image_name,
            annotation_path=annotation_name,
            seed_id=seed_id,
            wl_hash=digest,
            phash=phash_hex,
            attempt=number,
            accepted_at=ManifestStore.now(),
        ))


class TemplateBaselineGenerator:
    """
    Random-layout baseline: symbols scattered without a seed, each joined
    to its nearest neighbours by straight-routed pipes
    """

    def __init__(self, generator: Optional[SyntheticPlanGenerator] = None, neighbours: int = 2):
        self.generator = generator or SyntheticPlanGenerator()
        self.neighbours = neighbours

    def random_graph(
        self,
        rng: np.random.Generator,
        canvas: Tuple[int, int] = (1000, 800),
        node_count: int = 10
    ) -> ProcessGraph:
        """
        Scatter node_count symbols without overlap and connect nearest neighbours

        Args:
            rng: Random generator
            canvas: (width, height)
            node_count: Symbols to place; fewer when the canvas fills up

        Returns:
            Collapsed-stage graph with templates assigned
        """
        width, height = canvas
        margin = self.generator.config.margin
        nodes: List[Node] = []
        for index in range(node_count):
            node_cls = PHYSICAL_CLASSES[int(rng.integers(len(PHYSICAL_CLASSES)))]
            templates = self.generator.library.for_class(node_cls)
            template = templates[int(rng.integers(len(templates)))]
            w, h = template.nominal_size
            for _ in range(self.generator.config.max_retries):
                x1 = float(rng.uniform(margin, max(margin, width - margin - w)))
                y1 = float(rng.uniform(margin, max(margin, height - margin - h)))
                box = BBox(x1=x1, y1=y1, x2=x1 + w, y2=y1 + h)
                # one routing cell of spacing between symbols
                padded = BBox(x1=x1 - 10, y1=y1 - 10, x2=x1 + w + 10, y2=y1 + h + 10)
                if all(BoxGeometry.intersection_area(padded, other.box) == 0 for other in nodes):
                    nodes.append(Node(id=f"n{index:02d}", cls=node_cls, box=box, template=template.name))
                    break

        edges: Dict[Tuple[str, str], Edge] = {}
        centers = np.array([n.box.center for n in nodes], dtype=float).reshape(-1, 2)
        for i, node in enumerate(nodes):
            distances = np.abs(centers - centers[i]).sum(axis=1)
            order = [j for j in np.argsort(distances, kind="stable") if j != i][:self.neighbours]
            for j in order:
                edge = Edge(source=node.id, target=nodes[j].id)
                edges.setdefault(edge.key, edge)
        return ProcessGraph(
            nodes=nodes,
            edges=[edges[key] for key in sorted(edges)],
            canvas=(int(width), int(height)),
            stage=Stage.COLLAPSED,
        )

    def write_corpus(self, out_dir: str, count: int, node_count: int = 10) -> List[str]:
        """Render count baseline plans to out_dir as PNG + GraphML pairs"""
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        plan_ids = []
        for index in range(count):
            rng = np.random.default_rng([self.generator.config.rng_seed, index])
            plan = self.generator.realize(self.random_graph(rng, node_count=node_count))
            plan_id = f"baseline_{index:05d}"
            plan.image.save(out_path / f"{plan_id}.png", format="PNG")
            GraphMLStore.write_graphml(plan.graph, str(out_path / f"{plan_id}.graphml"))
            plan_ids.append(plan_id)
        logger.info(f"Wrote {len(plan_ids)} baseline plans to {out_dir}")
        return plan_ids
