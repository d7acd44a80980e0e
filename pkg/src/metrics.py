"""
Evaluation Module
Hungarian node matching, node mAP@IoU and edge mAP for full-plan graphs
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.optimize import linear_sum_assignment

from .annotation_io import GraphMLStore
from .config import MetricConfig, SCHEMA_VERSION
from .geometry import BoxGeometry
from .graph_model import EdgeClass, PHYSICAL_CLASSES, ProcessGraph, Stage

logger = logging.getLogger(__name__)

# cost assigned to dummy rows/columns when padding a rectangular instance
DUMMY_COST = 2.0


class MatchPair(BaseModel):
    pred_id: str
    gt_id: str
    giou: float


class MatchResult(BaseModel):
    pairs: List[MatchPair] = Field(default_factory=list)
    unmatched_pred: List[str] = Field(default_factory=list)
    unmatched_gt: List[str] = Field(default_factory=list)
    # total gIoU of the optimal assignment, before non-positive pairs are discarded
    assignment_giou: float = 0.0

    def mapping(self, min_giou: float) -> Dict[str, str]:
        return {p.pred_id: p.gt_id for p in self.pairs if p.giou >= min_giou}


class PRCurve(BaseModel):
    recall: List[float] = Field(default_factory=list)
    precision: List[float] = Field(default_factory=list)
    thresholds: List[float] = Field(default_factory=list)


class ClassResult(BaseModel):
    ap: float
    curve: PRCurve


class EvalReport(BaseModel):
    plan_id: Optional[str] = None
    node_map: float
    edge_map: float
    node_ap: Dict[str, float] = Field(default_factory=dict)
    edge_ap: Dict[str, float] = Field(default_factory=dict)
    pr_curves: Dict[str, PRCurve] = Field(default_factory=dict)
    matched: int = 0
    unmatched_pred: int = 0
    unmatched_gt: int = 0
    mean_giou: float = 0.0


class ReportSummary(BaseModel):
    count: int
    node_map_mean: float
    node_map_std: float
    edge_map_mean: float
    edge_map_std: float


def average_precision(
    scored: Sequence[Tuple[float, bool]],
    n_gt: int
) -> Tuple[float, PRCurve]:
    """
    All-point interpolated AP with a monotone precision envelope

    Args:
        scored: (confidence, is_tp) in ranking order
        n_gt: Number of ground-truth objects

    Returns:
        Tuple of (AP, PR curve)
    """
    if not scored or n_gt == 0:
        return 0.0, PRCurve()
    tp = np.array([1 if hit else 0 for _, hit in scored], dtype=np.int64)
    fp = 1 - tp
    ctp, cfp = np.cumsum(tp), np.cumsum(fp)
    recall = ctp / n_gt
    precision = ctp / (ctp + cfp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = float(np.dot(tp, envelope) / n_gt)
    curve = PRCurve(
        recall=recall.tolist(),
        precision=precision.tolist(),
        thresholds=[float(conf) for conf, _ in scored],
    )
    return min(ap, 1.0), curve


def _mean_present(results: Dict[str, ClassResult], pred_empty: bool) -> float:
    """Mean AP over classes present in the ground truth"""
    if not results:
        return 1.0 if pred_empty else 0.0
    return float(np.mean([r.ap for r in results.values()]))


class PlanEvaluator:
    """
    Scores predicted plan graphs against ground truth
    """

    @staticmethod
    def match_nodes(pred: ProcessGraph, gt: ProcessGraph) -> MatchResult:
        """
        Minimum-cost assignment on 1 - gIoU, padded square with dummy cost

        Args:
            pred: Predicted graph
            gt: Ground-truth graph

        Returns:
            MatchResult; pairs with gIoU <= 0 are reported as unmatched
        """
        pred_nodes = sorted(pred.nodes, key=lambda n: n.id)
        gt_nodes = sorted(gt.nodes, key=lambda n: n.id)
        if not pred_nodes or not gt_nodes:
            return MatchResult(
                unmatched_pred=[n.id for n in pred_nodes],
                unmatched_gt=[n.id for n in gt_nodes],
            )

        size = max(len(pred_nodes), len(gt_nodes))
        giou = np.zeros((len(pred_nodes), len(gt_nodes)))
        for i, p in enumerate(pred_nodes):
            for j, g in enumerate(gt_nodes):
                giou[i, j] = BoxGeometry.giou(p.box, g.box)
        cost = np.full((size, size), DUMMY_COST)
        cost[:len(pred_nodes), :len(gt_nodes)] = 1.0 - giou

        rows, cols = linear_sum_assignment(cost)
        pairs: List[MatchPair] = []
        matched_pred, matched_gt = set(), set()
        total = 0.0
        for i, j in zip(rows, cols):
            if i >= len(pred_nodes) or j >= len(gt_nodes):
                continue
            total += giou[i, j]
            if giou[i, j] <= 0:
                continue
            pairs.append(MatchPair(pred_id=pred_nodes[i].id, gt_id=gt_nodes[j].id, giou=float(giou[i, j])))
            matched_pred.add(pred_nodes[i].id)
            matched_gt.add(gt_nodes[j].id)

        return MatchResult(
            pairs=sorted(pairs, key=lambda p: (p.pred_id, p.gt_id)),
            unmatched_pred=[n.id for n in pred_nodes if n.id not in matched_pred],
            unmatched_gt=[n.id for n in gt_nodes if n.id not in matched_gt],
            assignment_giou=float(total),
        )

    @staticmethod
    def node_ap(pred: ProcessGraph, gt: ProcessGraph, iou_threshold: float = 0.5) -> Dict[str, ClassResult]:
        """
        Per-class detection AP with greedy confidence-ordered claiming

        Args:
            pred: Predicted graph
            gt: Ground-truth graph
            iou_threshold: IoU needed for a true positive

        Returns:
            {class: ClassResult} for classes present in gt
        """
        results: Dict[str, ClassResult] = {}
        for node_cls in PHYSICAL_CLASSES:
            gt_boxes = [n for n in gt.nodes if n.cls == node_cls]
            if not gt_boxes:
                continue
            preds = sorted((n for n in pred.nodes if n.cls == node_cls), key=lambda n: (-n.confidence, n.id))
            claimed = set()
            scored = []
            for p in preds:
                best, best_iou = None, iou_threshold
                for g in gt_boxes:
                    if g.id in claimed:
                        continue
                    overlap = BoxGeometry.iou(p.box, g.box)
                    if overlap >= best_iou and (best is None or overlap > best_iou):
                        best, best_iou = g, overlap
                if best is not None:
                    claimed.add(best.id)
                scored.append((p.confidence, best is not None))
            ap, curve = average_precision(scored, len(gt_boxes))
            results[node_cls.value] = ClassResult(ap=ap, curve=curve)
        return results

    @staticmethod
    def node_map(pred: ProcessGraph, gt: ProcessGraph, iou_threshold: float = 0.5) -> Tuple[float, Dict[str, float]]:
        """Node mAP over classes present in gt, with the per-class APs"""
        results = PlanEvaluator.node_ap(pred, gt, iou_threshold)
        return _mean_present(results, not pred.nodes), {k: r.ap for k, r in results.items()}

    @staticmethod
    def edge_ap(
        pred: ProcessGraph,
        gt: ProcessGraph,
        match: MatchResult,
        match_giou: float = 0.5
    ) -> Dict[str, ClassResult]:
        """
        Per-edge-class AP: TP iff both endpoints are correctly matched and
        joined in gt by an unclaimed edge of the same class

        Args:
            pred: Predicted graph
            gt: Ground-truth graph
            match: Node matching
            match_giou: gIoU needed for an endpoint to count as correctly matched

        Returns:
            {edge class: ClassResult} for classes present in gt
        """
        mapping = match.mapping(match_giou)
        results: Dict[str, ClassResult] = {}
        for edge_cls in EdgeClass:
            gt_keys = {e.key for e in gt.edges if e.cls == edge_cls}
            if not gt_keys:
                continue
            preds = sorted((e for e in pred.edges if e.cls == edge_cls), key=lambda e: (-e.confidence, e.edge_id))
            claimed = set()
            scored = []
            for edge in preds:
                u, v = mapping.get(edge.source), mapping.get(edge.target)
                hit = False
                if u is not None and v is not None:
                    key = (u, v) if u <= v else (v, u)
                    if key in gt_keys and key not in claimed:
                        claimed.add(key)
                        hit = True
                scored.append((edge.confidence, hit))
            ap, curve = average_precision(scored, len(gt_keys))
            results[edge_cls.value] = ClassResult(ap=ap, curve=curve)
        return results

    @staticmethod
    def edge_map(
        pred: ProcessGraph,
        gt: ProcessGraph,
        match: Optional[MatchResult] = None,
        match_giou: float = 0.5
    ) -> Tuple[float, Dict[str, float]]:
        """Edge mAP over edge classes present in gt, with the per-class APs"""
        match = match or PlanEvaluator.match_nodes(pred, gt)
        results = PlanEvaluator.edge_ap(pred, gt, match, match_giou)
        return _mean_present(results, not pred.edges), {k: r.ap for k, r in results.items()}

    @staticmethod
    def evaluate_plan(
        pred: ProcessGraph,
        gt: ProcessGraph,
        config: Optional[MetricConfig] = None,
        plan_id: Optional[str] = None
    ) -> EvalReport:
        """
        Full report for one plan

        Args:
            pred: Predicted graph
            gt: Ground-truth graph
            config: Metric thresholds
            plan_id: Optional identifier for the report

        Returns:
            EvalReport
        """
        cfg = config or MetricConfig()
        if tuple(pred.canvas) != tuple(gt.canvas):
            logger.warning(f"⚠️ Canvas mismatch for {plan_id or 'plan'}: pred {pred.canvas} vs gt {gt.canvas}")

        match = PlanEvaluator.match_nodes(pred, gt)
        node_results = PlanEvaluator.node_ap(pred, gt, cfg.iou_threshold)
        edge_results = PlanEvaluator.edge_ap(pred, gt, match, cfg.match_giou)

        curves = {f"node:{k}": r.curve for k, r in node_results.items()}
        curves.update({f"edge:{k}": r.curve for k, r in edge_results.items()})
        return EvalReport(
            plan_id=plan_id,
            node_map=_mean_present(node_results, not pred.nodes),
            edge_map=_mean_present(edge_results, not pred.edges),
            node_ap={k: r.ap for k, r in node_results.items()},
            edge_ap={k: r.ap for k, r in edge_results.items()},
            pr_curves=curves,
            matched=len(match.pairs),
            unmatched_pred=len(match.unmatched_pred),
            unmatched_gt=len(match.unmatched_gt),
            mean_giou=float(np.mean([p.giou for p in match.pairs])) if match.pairs else 0.0,
        )

    @staticmethod
    def evaluate_directories(
        pred_dir: str,
        gt_dir: str,
        config: Optional[MetricConfig] = None
    ) -> List[EvalReport]:
        """
        Evaluate every ground-truth plan against the same-named prediction

        Args:
            pred_dir: Directory of predicted <plan>.graphml files
            gt_dir: Directory of ground-truth <plan>.graphml files
            config: Metric thresholds

        Returns:
            Reports in plan id order; a missing prediction scores as an empty graph
        """
        reports = []
        for plan_id, gt in GraphMLStore.read_directory(gt_dir):
            pred_path = Path(pred_dir) / f"{plan_id}.graphml"
            if pred_path.exists():
                pred = GraphMLStore.read_graphml(str(pred_path))
            else:
                logger.warning(f"⚠️ No prediction for {plan_id}; scoring an empty graph")
                pred = ProcessGraph(canvas=gt.canvas, stage=Stage.STITCHED)
            reports.append(PlanEvaluator.evaluate_plan(pred, gt, config, plan_id=plan_id))
        logger.info(f"Evaluated {len(reports)} plans")
        return reports

    @staticmethod
    def write_report(reports: List[EvalReport], path: str, config: Optional[MetricConfig] = None) -> None:
        """JSON report: per-plan results plus the mean and std summary"""
        cfg = config or MetricConfig()
        payload = {
            "schema_version": SCHEMA_VERSION,
            "iou_threshold": cfg.iou_threshold,
            "match_giou": cfg.match_giou,
            "summary": summarize_reports(reports).model_dump(),
            "plans": [report.model_dump() for report in reports],
        }
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def summarize_reports(reports: Sequence[EvalReport]) -> ReportSummary:
    """
    Unweighted mean and population standard deviation of node and edge mAP

    Args:
        reports: Per-plan or per-run reports

    Returns:
        ReportSummary (zeros for an empty list)
    """
    if not reports:
        return ReportSummary(count=0, node_map_mean=0.0, node_map_std=0.0, edge_map_mean=0.0, edge_map_std=0.0)
    frame = pd.DataFrame([{"node_map": r.node_map, "edge_map": r.edge_map} for r in reports])
    return ReportSummary(
        count=len(frame),
        node_map_mean=float(frame["node_map"].mean()),
        node_map_std=float(frame["node_map"].std(ddof=0)),
        edge_map_mean=float(frame["edge_map"].mean()),
        edge_map_std=float(frame["edge_map"].std(ddof=0)),
    )
