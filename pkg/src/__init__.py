"""
Initialize src as package
"""

__all__ = [
    "errors",
    "graph_model",
    "graph_processor",
    "geometry",
    "config",
    "annotation_io",
    "symbols",
    "routing",
    "dedup",
    "generator",
    "patcher",
    "stitcher",
    "metrics",
    "detsim",
    "corpus_stats",
    "toy_plans"
]
