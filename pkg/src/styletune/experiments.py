"""Desk-scale directional studies: how far fine-tuning drifts from the source structure."""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .checkpoint import Checkpoint
from .data import DatasetSpec, open_dataset
from .models import generator_from_checkpoint
from .train import RunConfig, finetune, pretrain, structure_gap

log = logging.getLogger(__name__)

# small channel schedule that keeps a 32x32 step near 0.15 s on one CPU core
DESK_ARCH = dict(resolution=32, w_dim=64, channel_max=64, channel_min=16, mapping_depth=4)

RECIPES: Dict[str, dict] = {
    "structure": dict(lambda_structure=1.0, structure_layers=3, freeze_mode="none"),
    "baseline": dict(lambda_structure=0.0, freeze_mode="none"),
    "freezesg": dict(lambda_structure=0.0, freeze_mode="freezesg", freeze_blocks=2),
}


def desk_source(steps: int = 3000, seed: int = 0, dataset_count: int = 2000, out: Optional[str] = None) -> Checkpoint:
    """Pretrain the source generator on the toy source domain."""
    cfg = RunConfig(mode="pretrain", steps=steps, seed=seed, dataset_count=dataset_count, out=out, **DESK_ARCH)
    return pretrain(cfg).checkpoint


@dataclass
class StudyResult:
    gaps: Dict[str, List[float]] = field(default_factory=dict)

    def median(self, recipe: str) -> float:
        return statistics.median(self.gaps[recipe])

    def reduction(self, recipe: str, reference: str = "baseline") -> float:
        """Relative drop of the median gap versus ``reference`` (0.3 means 30% lower)."""
        return 1.0 - self.median(recipe) / self.median(reference)


def directional_study(
    source: Checkpoint,
    recipes: Sequence[str] = ("structure", "baseline", "freezesg"),
    seeds: Sequence[int] = (0, 1, 2),
    steps: int = 2000,
    dataset_count: int = 2000,
    n_codes: int = 256,
) -> StudyResult:
    """Fine-tune ``source`` under each recipe and seed; record the source/target structure gap."""
    src_g = generator_from_checkpoint(source)
    res = source.config["generator"]["max_resolution"]
    data = open_dataset(DatasetSpec(kind="toy_target", count=dataset_count, seed=0, resolution=res))
    result = StudyResult()
    for name in recipes:
        gaps = []
        for seed in seeds:
            cfg = RunConfig(mode="finetune", steps=steps, seed=seed, dataset_count=dataset_count, **RECIPES[name])
            run = finetune(cfg, source_ckpt=source, data=data)
            gap = structure_gap(src_g, generator_from_checkpoint(run.checkpoint), n=n_codes)
            log.info("recipe=%s seed=%d gap=%.5f", name, seed, gap)
            gaps.append(gap)
        result.gaps[name] = gaps
    return result
