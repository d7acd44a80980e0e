"""
Configuration Module
Pydantic models for every pipeline stage, loaded with flags > config file > defaults
"""

import os
import logging
from typing import Any, Dict, List, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, Field, model_validator

from .graph_model import EdgeClass, PHYSICAL_CLASSES

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "PIDFORGE_CONFIG"
SCHEMA_VERSION = 1


class GenConfig(BaseModel):
    """Synthetic generation settings"""

    delta: float = Field(60.0, ge=0, description="displacement radius in px")
    max_retries: int = Field(25, ge=0)
    grid_cell: int = Field(10, ge=1)
    margin: float = Field(100.0, ge=0)
    background: int = Field(230, ge=0, le=255)
    bend_penalty: float = Field(2.0, ge=0)
    stroke_width: int = Field(3, ge=1)
    dash_on: int = Field(12, ge=1)
    dash_off: int = Field(8, ge=1)
    rng_seed: int = 0


class DedupConfig(BaseModel):
    """Acceptance filter settings"""

    wl_iterations: int = Field(3, ge=0)
    phash_threshold: int = Field(10, ge=0, le=64)
    position_cell: int = Field(250, ge=1)
    layout_aware: bool = True


class PatchSpec(BaseModel):
    """Patch tiling settings"""

    patch_size: int = Field(1500, gt=0)
    stride: int = Field(750, gt=0)
    border_box: float = Field(8.0, gt=0)
    margin: float = Field(100.0, ge=0)

    @model_validator(mode="after")
    def _stride_within_patch(self) -> "PatchSpec":
        if self.stride > self.patch_size:
            raise ValueError(f"stride {self.stride} exceeds patch size {self.patch_size}")
        return self


class StitchConfig(BaseModel):
    """Patch merging settings"""

    margin: float = Field(100.0, ge=0)
    nms_iou: float = Field(0.9, gt=0, le=1)
    wbf_iou: float = Field(0.55, gt=0, le=1)
    border_eps: float = Field(20.0, ge=0)
    conf_floor: float = Field(0.05, gt=0, le=1)
    weld_by_id: bool = Field(True, description="weld border nodes that name the same cut edge")


class NoiseConfig(BaseModel):
    """Detector simulator corruption settings"""

    box_sigma: float = Field(0.0, ge=0)
    p_drop: float = Field(0.0, ge=0, le=1)
    fp_rate: float = Field(0.0, ge=0)
    p_cls: float = Field(0.0, ge=0, le=1)
    p_edrop: float = Field(0.0, ge=0, le=1)
    p_eflip: float = Field(0.0, ge=0, le=1)
    tp_conf: Tuple[float, float] = (0.6, 1.0)
    fp_conf: Tuple[float, float] = (0.05, 0.6)
    rng_seed: int = 0

    @classmethod
    def from_level(cls, level: float, rng_seed: int = 0) -> "NoiseConfig":
        """
        Build a config where every corruption knob scales with one noise level

        Args:
            level: Noise level in [0, 1]
            rng_seed: Random seed

        Returns:
            NoiseConfig
        """
        return cls(
            box_sigma=20.0 * level,
            p_drop=level,
            fp_rate=10.0 * level,
            p_cls=level,
            p_edrop=level,
            p_eflip=level,
            rng_seed=rng_seed,
        )


NOISE_PRESETS: Dict[str, float] = {"low": 0.1, "med": 0.2, "high": 0.3}


class MetricConfig(BaseModel):
    """Evaluation settings"""

    iou_threshold: float = Field(0.5, gt=0, le=1)
    match_giou: float = Field(0.5, ge=-1, le=1)


class FoldConfig(BaseModel):
    """Cross-validation protocol"""

    k: int = Field(5, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)


class RunConfig(BaseModel):
    """Everything a CLI run needs"""

    gen: GenConfig = Field(default_factory=GenConfig)
    dedup: DedupConfig = Field(default_factory=DedupConfig)
    patch: PatchSpec = Field(default_factory=PatchSpec)
    stitch: StitchConfig = Field(default_factory=StitchConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    metric: MetricConfig = Field(default_factory=MetricConfig)
    folds: FoldConfig = Field(default_factory=FoldConfig)
    jobs: int = Field(1, ge=1)
    verbosity: int = 0


LIST_FIELDS = ("seeds",)
SECTIONS = ("gen", "dedup", "patch", "stitch", "noise", "metric", "folds")


def _parse_value(field: str, raw: str) -> Any:
    """Config file values are strings; lists are comma separated"""
    if "," in raw or field in LIST_FIELDS:
        return [part.strip() for part in raw.split(",") if part.strip()]
    return raw


def load_run_config(
    config_file: Optional[str] = None,
    overrides: Optional[Dict[str, Dict[str, Any]]] = None
) -> RunConfig:
    """
    Build a RunConfig from defaults, a dotenv config file and flag overrides

    Args:
        config_file: Path to a dotenv file; falls back to $PIDFORGE_CONFIG
        overrides: {section: {field: value}} from command line flags; None values are ignored

    Returns:
        Validated RunConfig
    """
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    top_level: Dict[str, Any] = {}

    path = config_file or os.getenv(CONFIG_ENV_VAR)
    if path:
        values = dotenv_values(path)
        logger.info(f"Loaded {len(values)} settings from {path}")
        for key, raw in values.items():
            if raw is None:
                continue
            prefix, _, field = key.lower().partition("_")
            if prefix in sections and field:
                sections[prefix][field] = _parse_value(field, raw)
            elif key.lower() in ("jobs", "verbosity"):
                top_level[key.lower()] = raw
            else:
                logger.warning(f"⚠️ Ignoring unknown config key {key}")

    for section, fields in (overrides or {}).items():
        if section in sections:
            sections[section].update({k: v for k, v in fields.items() if v is not None})
        elif fields is not None:
            top_level[section] = fields

    return RunConfig(**{name: values for name, values in sections.items()}, **top_level)


def config_self_test(config: Optional[RunConfig] = None) -> List[str]:
    """
    Check that defaults encode the published constants

    Returns:
        List of failed checks (empty when all hold)
    """
    cfg = config or RunConfig()
    failures = []
    if cfg.patch.patch_size != 1500:
        failures.append(f"patch size {cfg.patch.patch_size} != 1500")
    if cfg.patch.stride != 750:
        failures.append(f"stride {cfg.patch.stride} != 750")
    if len(PHYSICAL_CLASSES) != 7:
        failures.append(f"{len(PHYSICAL_CLASSES)} node classes != 7")
    if len(EdgeClass) != 2:
        failures.append(f"{len(EdgeClass)} edge classes != 2")
    if cfg.folds.k != 5:
        failures.append(f"fold count {cfg.folds.k} != 5")
    if len(cfg.folds.seeds) != 3:
        failures.append(f"{len(cfg.folds.seeds)} fold seeds != 3")
    if cfg.folds.k * len(cfg.folds.seeds) != 15:
        failures.append("fold runs != 15")
    return failures
