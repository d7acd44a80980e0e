"""
Deduplication Module
Structural (Weisfeiler-Lehman) and visual (perceptual hash) acceptance filter
"""

import hashlib
import logging
from collections import Counter
from enum import Enum
from typing import List, Optional

import networkx as nx
import numpy as np
from PIL import Image
from pydantic import BaseModel
from scipy.fftpack import dct

from .annotation_io import CorpusManifest
from .config import DedupConfig
from .errors import ImageTooSmallError
from .graph_model import ProcessGraph

logger = logging.getLogger(__name__)

PHASH_SIZE = 32
PHASH_BLOCK = 8


class WlHash(BaseModel):
    digest: str
    iterations: int


class PHash(BaseModel):
    value: int

    @property
    def hex(self) -> str:
        return f"{self.value:016x}"

    @classmethod
    def from_hex(cls, text: str) -> "PHash":
        return cls(value=int(text, 16))

    def distance(self, other: "PHash") -> int:
        return bin(self.value ^ other.value).count("1")


class RejectReason(str, Enum):
    STRUCTURAL = "structural"
    VISUAL = "visual"


class DedupDecision(BaseModel):
    accepted: bool
    reason: Optional[RejectReason] = None
    wl_hash: str
    phash: Optional[str] = None
    min_distance: Optional[int] = None


def node_label(node, layout_aware: bool, position_cell: int) -> str:
    if not layout_aware:
        return node.cls.value
    cx, cy = node.box.center
    return f"{node.cls.value}|{node.template or '-'}|{int(cx // position_cell)},{int(cy // position_cell)}"


def wl_hash(
    graph: ProcessGraph,
    iterations: int = 3,
    layout_aware: bool = False,
    position_cell: int = 250
) -> WlHash:
    """
    Weisfeiler-Lehman digest of a class- and edge-labelled graph

    Args:
        graph: Graph to hash; node ids never influence the result
        iterations: Refinement rounds
        layout_aware: Extend initial labels with template and position cell
        position_cell: Position quantization in px

    Returns:
        WlHash with a 16-hex-digit digest
    """
    labelled = nx.Graph()
    for node in graph.nodes:
        labelled.add_node(node.id, label=node_label(node, layout_aware, position_cell))
    for edge in graph.edges:
        labelled.add_edge(edge.source, edge.target, cls=edge.cls.value)

    refined = nx.weisfeiler_lehman_graph_hash(
        labelled, node_attr="label", edge_attr="cls", iterations=iterations, digest_size=8
    )
    initial = sorted(Counter(nx.get_node_attributes(labelled, "label").values()).items())
    folded = f"{refined}|{initial}|{labelled.number_of_nodes()}|{labelled.number_of_edges()}"
    digest = hashlib.blake2b(folded.encode("utf-8"), digest_size=8).hexdigest()
    return WlHash(digest=digest, iterations=iterations)


def phash(image: Image.Image) -> PHash:
    """
    64-bit DCT perceptual hash (63 significant bits)

    Args:
        image: Pillow image, at least 32x32

    Returns:
        PHash
    """
    if image.width < PHASH_SIZE or image.height < PHASH_SIZE:
        raise ImageTooSmallError(f"image {image.width}x{image.height} is smaller than {PHASH_SIZE}x{PHASH_SIZE}")

    small = image.convert("L").resize((PHASH_SIZE, PHASH_SIZE), Image.Resampling.BOX)
    pixels = np.asarray(small, dtype=np.float64)
    coeffs = dct(dct(pixels, axis=0, norm="ortho"), axis=1, norm="ortho")
    # rounding keeps float noise in DC-only images out of the bits
    block = np.round(coeffs[:PHASH_BLOCK, :PHASH_BLOCK].flatten()[1:], 6)
    bits = block > np.median(block)

    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return PHash(value=value)


class DedupRegistry:
    """
    Accepted structural and visual hashes; single writer
    """

    def __init__(self, config: Optional[DedupConfig] = None):
        self.config = config or DedupConfig()
        self.wl_hashes = set()
        self.phashes: List[PHash] = []

    @classmethod
    def from_manifest(cls, manifest: CorpusManifest, config: Optional[DedupConfig] = None) -> "DedupRegistry":
        """Rebuild a registry from an existing manifest to resume generation"""
        registry = cls(config)
        for entry in manifest.entries:
            registry.wl_hashes.add(entry.wl_hash)
            registry.phashes.append(PHash.from_hex(entry.phash))
        if manifest.entries:
            logger.info(f"Resumed dedup registry with {len(manifest.entries)} accepted plans")
        return registry

    def hash_graph(self, graph: ProcessGraph) -> str:
        return wl_hash(
            graph,
            iterations=self.config.wl_iterations,
            layout_aware=self.config.layout_aware,
            position_cell=self.config.position_cell,
        ).digest

    def is_structural_duplicate(self, digest: str) -> bool:
        return digest in self.wl_hashes

    def nearest_distance(self, candidate: PHash) -> Optional[int]:
        if not self.phashes:
            return None
        return min(candidate.distance(prior) for prior in self.phashes)

    def try_accept(self, graph: ProcessGraph, image: Image.Image) -> DedupDecision:
        """
        Accept a candidate unless it repeats a structure or looks like a prior image

        Args:
            graph: Candidate graph
            image: Candidate rendering

        Returns:
            DedupDecision; accepted candidates are recorded
        """
        digest = self.hash_graph(graph)
        if self.is_structural_duplicate(digest):
            return DedupDecision(accepted=False, reason=RejectReason.STRUCTURAL, wl_hash=digest)
        return self.try_accept_hashes(digest, phash(image))

    def try_accept_hashes(self, digest: str, candidate: PHash) -> DedupDecision:
        if self.is_structural_duplicate(digest):
            return DedupDecision(accepted=False, reason=RejectReason.STRUCTURAL, wl_hash=digest)

        distance = self.nearest_distance(candidate)
        if distance is not None and distance < self.config.phash_threshold:
            return DedupDecision(
                accepted=False, reason=RejectReason.VISUAL,
                wl_hash=digest, phash=candidate.hex, min_distance=distance
            )

        self.wl_hashes.add(digest)
        self.phashes.append(candidate)
        return DedupDecision(accepted=True, wl_hash=digest, phash=candidate.hex, min_distance=distance)
