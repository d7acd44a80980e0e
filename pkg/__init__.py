"""
pidforge Package
"""

__version__ = "1.0.0"
__author__ = "pidforge Team"

from .src.graph_processor import GraphProcessor
from .src.generator import SyntheticPlanGenerator
from .src.patcher import Patcher
from .src.stitcher import Stitcher
from .src.metrics import PlanEvaluator
from .src.detsim import DetectorSimulator
from .pidforge import PidForgePipeline

__all__ = [
    "GraphProcessor",
    "SyntheticPlanGenerator",
    "Patcher",
    "Stitcher",
    "PlanEvaluator",
    "DetectorSimulator",
    "PidForgePipeline"
]
