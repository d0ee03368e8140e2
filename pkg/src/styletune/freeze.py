"""Parameter-freeze plans (FreezeSG, FreezeG, FreezeD) and their enforcement."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import torch

from .discriminator import disc_block_of
from .errors import ConfigError, InvalidArgument, TrainingError
from .generator import block_of

MODES = ("none", "freezeg", "freezesg", "freezed")



def _is_style_param(name: str) -> bool:
    part = name.split(".")[2]
    return part.startswith("affine") or part == "torgb_affine"


@dataclass(frozen=True)
class FreezePlan:
    mode: str = "none"
    k_blocks: int = 0
    d_blocks: int = 0
    frozen_names: Tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "k_blocks": self.k_blocks,
            "d_blocks": self.d_blocks,
            "frozen_names": list(self.frozen_names),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FreezePlan":
        return cls(d["mode"], int(d["k_blocks"]), int(d["d_blocks"]), tuple(d["frozen_names"]))

    def __contains__(self, name: str) -> bool:
        return name in self.frozen_names


def build_plan(mode: str, k_blocks: int, d_blocks: int, names: Iterable[str]) -> FreezePlan:
    """Resolve a freeze mode against a parameter table.

    ``names`` may mix generator names and ``disc.*`` names. ``k_blocks`` counts
    synthesis blocks from 4x4 upward; ``d_blocks`` counts discriminator blocks
    from the highest resolution downward and combines with any mode.
    """
    if mode not in MODES:
        raise InvalidArgument(f"unknown freeze mode {mode!r}; expected one of {MODES}")
    names = list(names)
    g_blocks = sorted({r for r in map(block_of, names) if r is not None})
    d_res = sorted({r for r in map(disc_block_of, names) if r is not None}, reverse=True)

    if mode in ("freezeg", "freezesg"):
        if not 1 <= k_blocks <= len(g_blocks):
            raise InvalidArgument(f"k_blocks={k_blocks} out of range 1..{len(g_blocks)}")
    elif k_blocks < 0 or k_blocks > len(g_blocks):
        raise InvalidArgument(f"k_blocks={k_blocks} out of range 0..{len(g_blocks)}")
    if not 0 <= d_blocks <= len(d_res):
        raise InvalidArgument(f"d_blocks={d_blocks} out of range 0..{len(d_res)}")

    frozen = set()
    if mode in ("freezeg", "freezesg"):
        frozen_res = set(g_blocks[:k_blocks])
        frozen.add("synthesis.input")
        for n in names:
            if block_of(n) in frozen_res:
                if mode == "freezeg" and _is_style_param(n):
                    continue
                frozen.add(n)
    frozen_d = set(d_res[:d_blocks])
    frozen.update(n for n in names if disc_block_of(n) in frozen_d)

    ordered = tuple(n for n in names if n in frozen)
    return FreezePlan(mode, k_blocks if mode in ("freezeg", "freezesg") else 0, d_blocks, ordered)


class FrozenGuard:
    """Snapshot of frozen tensors; :meth:`check` asserts they are bit-unchanged."""

    def __init__(self, params: Mapping[str, torch.Tensor], names: Sequence[str]):
        self._params = {n: params[n] for n in names}
        self._snapshot = {n: p.detach().clone() for n, p in self._params.items()}

    def changed(self) -> List[str]:
        return [n for n, p in self._params.items() if not torch.equal(p.detach(), self._snapshot[n])]

    def check(self):
        bad = self.changed()
        if bad:
            raise TrainingError(f"frozen parameters changed: {', '.join(bad)}")


def apply_plan(plan: FreezePlan, params: Mapping[str, torch.nn.Parameter], optimizer_factory):
    """Exclude frozen parameters from optimization.

    ``params`` is a named table covering the live model; only the names it
    contains are considered. Unknown names that look like they belong to this
    table (same top-level prefix) are a configuration error. Returns
    ``(optimizer, guard)``; the optimizer is built by ``optimizer_factory`` over
    the trainable parameters only, so frozen tensors never get moment buffers.
    """
    prefixes = {n.split(".")[0] for n in params}
    relevant = [n for n in plan.frozen_names if n.split(".")[0] in prefixes]
    missing = [n for n in relevant if n not in params]
    if missing:
        raise ConfigError(f"freeze plan names not found in model: {', '.join(missing)}")
    frozen = set(relevant)
    trainable = []
    for n, p in params.items():
        if n in frozen:
            p.requires_grad_(False)
        else:
            trainable.append(p)
    optimizer = optimizer_factory(trainable) if trainable else None
    return optimizer, FrozenGuard(params, relevant)


def moment_norms(optimizer, params: Mapping[str, torch.Tensor]) -> Dict[str, float]:
    """Sum of absolute Adam moments per named parameter (0 for parameters without state)."""
    out = {}
    for n, p in params.items():
        state = optimizer.state.get(p, {}) if optimizer is not None else {}
        total = 0.0
        for key in ("exp_avg", "exp_avg_sq"):
            if key in state:
                total += float(state[key].abs().sum())
        out[n] = total
    return out
