"""Conversions between live models and checkpoints."""

from __future__ import annotations

from collections import OrderedDict
from typing import Optional

import torch

from .checkpoint import Checkpoint, to_checkpoint
from .discriminator import Discriminator, DiscriminatorConfig
from .errors import IncompatibleCheckpoint
from .generator import Generator, GeneratorConfig


def build_models(gcfg: GeneratorConfig, dcfg: Optional[DiscriminatorConfig] = None, seed: int = 0):
    """Fresh generator (and discriminator) with seeded initialization."""
    torch.manual_seed(seed)
    g = Generator(gcfg)
    d = Discriminator(dcfg) if dcfg is not None else None
    return g, d


def snapshot(generator: Generator, discriminator: Optional[Discriminator] = None, metadata=None) -> Checkpoint:
    tables = OrderedDict(generator.parameter_table())
    config = {"generator": generator.cfg.to_dict()}
    if discriminator is not None:
        tables.update(discriminator.parameter_table())
        config["discriminator"] = discriminator.cfg.to_dict()
    return to_checkpoint(tables, config, metadata)


def _load_into(module, tensors, prefix: str):
    expected = OrderedDict((prefix + n, p) for n, p in module.named_parameters())
    have = [n for n in tensors if n.startswith(prefix)] if prefix else [n for n in tensors if not n.startswith("disc.")]
    missing = [n for n in expected if n not in tensors]
    extra = [n for n in have if n not in expected]
    if missing or extra:
        raise IncompatibleCheckpoint(f"parameter table mismatch; missing={missing[:5]} unexpected={extra[:5]}")
    with torch.no_grad():
        for n, p in expected.items():
            t = tensors[n]
            if tuple(t.shape) != tuple(p.shape):
                raise IncompatibleCheckpoint(f"{n}: shape {tuple(t.shape)} vs model {tuple(p.shape)}")
            p.copy_(t)


def generator_from_checkpoint(ckpt: Checkpoint) -> Generator:
    g = Generator(GeneratorConfig.from_dict(ckpt.config["generator"]))
    _load_into(g, ckpt.tensors, "")
    return g


def discriminator_from_checkpoint(ckpt: Checkpoint) -> Discriminator:
    if "discriminator" not in ckpt.config:
        raise IncompatibleCheckpoint("checkpoint holds no discriminator")
    d = Discriminator(DiscriminatorConfig.from_dict(ckpt.config["discriminator"]))
    _load_into(d, ckpt.tensors, "disc.")
    return d
