"""
Corpus Statistics Module
Per-plan structure tables, pooled degree histograms and corpus comparison
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel

from .annotation_io import GraphMLStore
from .config import SCHEMA_VERSION
from .errors import PidForgeError
from .graph_model import ProcessGraph
from .graph_processor import GraphProcessor

logger = logging.getLogger(__name__)

PLAN_COLUMNS = ["schema_version", "plan_id", "stage", "nodes", "edges", "density", "degree_histogram"]


class CorpusSummary(BaseModel):
    count: int
    nodes_mean: Optional[float] = None
    nodes_std: Optional[float] = None
    edges_mean: Optional[float] = None
    edges_std: Optional[float] = None

    def row(self) -> Tuple[str, str, str]:
        """(count, nodes mean±std, edges mean±std); dashes for an empty corpus"""
        if self.count == 0:
            return (str(self.count), "–", "–")
        return (
            str(self.count),
            f"{self.nodes_mean:g}±{self.nodes_std:g}",
            f"{self.edges_mean:g}±{self.edges_std:g}",
        )


class CorpusStatistics:
    """
    Structural statistics over a directory of GraphML plans
    """

    @staticmethod
    def load_corpus(corpus_dir: str) -> List[Tuple[str, ProcessGraph]]:
        """
        Read every plan in a directory, skipping unreadable files

        Args:
            corpus_dir: Directory of *.graphml files

        Returns:
            (plan id, graph) pairs sorted by plan id
        """
        plans = []
        for path in sorted(Path(corpus_dir).glob("*.graphml")):
            try:
                plans.append((path.stem, GraphMLStore.read_graphml(str(path))))
            except PidForgeError as exc:
                logger.warning(f"⚠️ Skipping unreadable plan {path.name}: {exc}")
        return plans

    @staticmethod
    def plan_frame(plans: List[Tuple[str, ProcessGraph]]) -> pd.DataFrame:
        """One row per plan: node and edge counts, density, degree histogram"""
        rows = []
        for plan_id, graph in plans:
            stats = GraphProcessor.compute_stats(graph)
            rows.append({
                "schema_version": SCHEMA_VERSION,
                "plan_id": plan_id,
                "stage": graph.stage.value,
                "nodes": stats.node_count,
                "edges": stats.edge_count,
                "density": stats.edge_density,
                "degree_histogram": ";".join(f"{d}:{c}" for d, c in stats.degree_histogram.items()),
            })
        return pd.DataFrame(rows, columns=PLAN_COLUMNS)

    @staticmethod
    def pooled_degrees(plans: List[Tuple[str, ProcessGraph]]) -> pd.DataFrame:
        """
        Pooled degree histogram of a corpus

        Returns:
            DataFrame with degree, count and share columns, sorted by degree
        """
        degrees = [d for _, graph in plans for d in graph.degrees().values()]
        if not degrees:
            return pd.DataFrame(columns=["degree", "count", "share"])
        counts = pd.Series(degrees).value_counts().sort_index()
        frame = counts.rename_axis("degree").reset_index(name="count")
        frame["share"] = frame["count"] / frame["count"].sum()
        return frame

    @staticmethod
    def summarize(frame: pd.DataFrame) -> CorpusSummary:
        """Count plus population mean and std of node and edge counts"""
        if frame.empty:
            return CorpusSummary(count=0)
        return CorpusSummary(
            count=len(frame),
            nodes_mean=float(frame["nodes"].mean()),
            nodes_std=float(frame["nodes"].std(ddof=0)),
            edges_mean=float(frame["edges"].mean()),
            edges_std=float(frame["edges"].std(ddof=0)),
        )

    @staticmethod
    def compare_degrees(left: pd.DataFrame, right: pd.DataFrame) -> Tuple[pd.DataFrame, float]:
        """
        Side-by-side normalised degree histograms and their total variation distance

        Args:
            left: pooled_degrees() of the first corpus
            right: pooled_degrees() of the second corpus

        Returns:
            Tuple of (merged frame, distance in [0, 1])
        """
        merged = pd.merge(
            left[["degree", "share"]].rename(columns={"share": "share_left"}),
            right[["degree", "share"]].rename(columns={"share": "share_right"}),
            on="degree",
            how="outer",
        ).fillna(0.0).sort_values("degree").reset_index(drop=True)
        if merged.empty:
            return merged, 0.0
        distance = 0.5 * float((merged["share_left"] - merged["share_right"]).abs().sum())
        return merged, distance

    @staticmethod
    def write_report(corpus_dir: str, csv_path: str, compare_dir: Optional[str] = None) -> CorpusSummary:
        """
        Write <csv>, <stem>_degrees.csv and <stem>_summary.csv

        Args:
            corpus_dir: Corpus directory
            csv_path: Per-plan CSV destination
            compare_dir: Optional second corpus for the degree comparison

        Returns:
            CorpusSummary of corpus_dir
        """
        plans = CorpusStatistics.load_corpus(corpus_dir)
        frame = CorpusStatistics.plan_frame(plans)
        summary = CorpusStatistics.summarize(frame)

        out = Path(csv_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False)

        degrees = CorpusStatistics.pooled_degrees(plans)
        summary_row = {
            "schema_version": SCHEMA_VERSION,
            "count": summary.count,
            "nodes": summary.row()[1],
            "edges": summary.row()[2],
        }
        if compare_dir:
            other = CorpusStatistics.pooled_degrees(CorpusStatistics.load_corpus(compare_dir))
            degrees, distance = CorpusStatistics.compare_degrees(degrees, other)
            summary_row["degree_tvd"] = distance
            logger.info(f"Degree distribution distance to {compare_dir}: {distance:.4f}")
        degrees.to_csv(out.with_name(f"{out.stem}_degrees.csv"), index=False)
        pd.DataFrame([summary_row]).to_csv(out.with_name(f"{out.stem}_summary.csv"), index=False)

        logger.info(f"Corpus {corpus_dir}: {', '.join(summary.row())}")
        return summary
