"""Layer swapping: source low-resolution blocks + target high-resolution blocks."""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import torch

from .checkpoint import Checkpoint, check_compatible
from .errors import IncompatibleCheckpoint, InvalidArgument
from .generator import BASE_RESOLUTION, block_of

MAPPING_SIDES = ("source", "target")


@dataclass(frozen=True)
class SwapPlan:
    """Blocks below ``boundary_resolution`` come from the source model.

    ``synthesis.input`` travels with the 4x4 block; ``mapping.*`` follows
    ``mapping_from``; non-generator entries (``disc.*``) always come from target.
    """

    boundary_resolution: int
    mapping_from: str = "target"

    def __post_init__(self):
        b = self.boundary_resolution
        if b < BASE_RESOLUTION or b & (b - 1):
            raise InvalidArgument(f"boundary must be a power of two >= {BASE_RESOLUTION}, got {b}")
        if self.mapping_from not in MAPPING_SIDES:
            raise InvalidArgument(f"mapping_from must be one of {MAPPING_SIDES}")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def side(self, name: str) -> str:
        if name.startswith("mapping."):
            return self.mapping_from
        if name == "synthesis.input":
            return "source" if BASE_RESOLUTION < self.boundary_resolution else "target"
        res = block_of(name)
        if res is not None:
            return "source" if res < self.boundary_resolution else "target"
        if name.startswith("synthesis."):
            raise InvalidArgument(f"cannot assign {name} to a side")
        return "target"


def partition(names, plan: SwapPlan) -> Dict[str, str]:
    return OrderedDict((n, plan.side(n)) for n in names)


def swap(source: Checkpoint, target: Checkpoint, plan: SwapPlan) -> Checkpoint:
    check_compatible(source, target)
    if source.config.get("generator") != target.config.get("generator"):
        raise IncompatibleCheckpoint("generator configs differ between source and target")
    max_res = target.config["generator"]["max_resolution"]
    if plan.boundary_resolution > 2 * max_res:
        raise InvalidArgument(f"boundary {plan.boundary_resolution} beyond 2 x max resolution {max_res}")
    sides = partition(target.tensors, plan)
    tensors = OrderedDict(
        (n, (source if sides[n] == "source" else target).tensors[n].clone()) for n in target.tensors
    )
    assert set(tensors) == set(target.tensors)
    metadata = {"swap": asdict(plan)}
    return Checkpoint(tensors, dict(target.config), metadata)


def diff(a: Checkpoint, b: Checkpoint) -> "OrderedDict[str, float]":
    """Per-tensor L2 distance, computed in float64."""
    check_compatible(a, b)
    return OrderedDict(
        (n, float(torch.linalg.vector_norm(a.tensors[n].double() - b.tensors[n].double())))
        for n in a.tensors
    )


def sweep_boundaries(max_resolution: int) -> Tuple[int, ...]:
    """Every boundary from all-target (4) to all-source (2 x max)."""
    out = []
    b = BASE_RESOLUTION
    while b <= 2 * max_resolution:
        out.append(b)
        b *= 2
    return tuple(out)
