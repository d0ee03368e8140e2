"""Pretraining and fine-tuning loops, run directories, comparison grids."""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch

from . import checkpoint as ckpt_io
from .checkpoint import Checkpoint
from .data import DatasetSpec, ImageDataset, load_batch, open_dataset, save_png, structure_metric, to_uint8
from .discriminator import Discriminator, DiscriminatorConfig
from .errors import ConfigError, IncompatibleCheckpoint, IncompatibleConfig, InvalidArgument
from .freeze import FreezePlan, FrozenGuard, apply_plan, build_plan
from .generator import Generator, GeneratorConfig
from .models import build_models, discriminator_from_checkpoint, generator_from_checkpoint, snapshot
from .objectives import (
    LossReport,
    StructureLossConfig,
    d_accuracy,
    discriminator_loss,
    generator_adversarial_loss,
    generator_objective,
    r1_penalty,
    structure_loss,
)

log = logging.getLogger(__name__)

MODES = ("pretrain", "finetune")


@dataclass
class RunConfig:
    mode: str = "pretrain"
    steps: int = 2000
    batch: int = 16
    lr_g: float = 2e-3
    lr_d: float = 2e-3
    beta1: float = 0.0
    beta2: float = 0.99
    seed: int = 0
    # architecture (pretrain only; fine-tuning inherits the source checkpoint's)
    resolution: Optional[int] = None  # pretrain: 32; finetune: the source's
    w_dim: int = 128
    channel_max: int = 256
    channel_min: int = 32
    mapping_depth: int = 4
    mbstd: bool = True
    noise: bool = True
    # fine-tuning
    source: Optional[str] = None
    freeze_mode: str = "none"
    freeze_blocks: int = 2
    freeze_d_blocks: Optional[int] = None
    lambda_structure: float = 1.0
    structure_layers: int = 3
    # regularization / bookkeeping
    r1_gamma: float = 1.0
    r1_interval: int = 16
    snapshot_interval: int = 0
    flip: bool = True
    dataset_kind: Optional[str] = None
    dataset_path: Optional[str] = None
    dataset_count: int = 1000
    dataset_seed: int = 0
    out: Optional[str] = None
    deterministic: bool = True
    debug_freeze_check: bool = False

    def resolved(self) -> "RunConfig":
        """Copy with mode-dependent defaults filled in and invariants checked."""
        cfg = copy.copy(self)
        if cfg.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
        if cfg.steps <= 0:
            raise ConfigError("steps must be > 0")
        if cfg.batch < 1 or (cfg.mbstd and cfg.batch < 2):
            raise ConfigError("batch must be >= 2 with minibatch-stddev on")
        if cfg.dataset_kind is None:
            cfg.dataset_kind = "toy_source" if cfg.mode == "pretrain" else "toy_target"
        if cfg.freeze_d_blocks is None:
            cfg.freeze_d_blocks = 2 if cfg.freeze_mode == "freezed" else 0
        if cfg.mode == "pretrain":
            cfg.freeze_mode, cfg.freeze_d_blocks = "none", 0
            if cfg.resolution is None:
                cfg.resolution = 32
        elif cfg.source is None:
            raise ConfigError("finetune needs a source checkpoint")
        if cfg.r1_interval < 1:
            raise ConfigError("r1_interval must be >= 1")
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            max_resolution=self.resolution,
            w_dim=self.w_dim,
            channel_max=self.channel_max,
            channel_min=self.channel_min,
            mapping_depth=self.mapping_depth,
        )

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            max_resolution=self.resolution,
            channel_max=self.channel_max,
            channel_min=self.channel_min,
            mbstd=self.mbstd,
        )

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(
            kind=self.dataset_kind,
            count=self.dataset_count,
            seed=self.dataset_seed,
            resolution=self.resolution,
            path=self.dataset_path,
        )


@dataclass
class RunResult:
    checkpoint: Checkpoint
    log: List[dict]
    plan: FreezePlan
    out: Optional[Path] = None


def _adam(cfg: RunConfig, lr: float):
    return lambda params: torch.optim.Adam(params, lr=lr, betas=(cfg.beta1, cfg.beta2), eps=1e-8)


def _set_requires_grad(params, flag: bool):
    for p in params:
        p.requires_grad_(flag)


class RunWriter:
    """Run directory layout: config.json, log.jsonl, snapshots/step_N.ckpt, grids/."""

    def __init__(self, out: Optional[str]):
        self.root = Path(out) if out else None
        self._log = None
        if self.root:
            (self.root / "snapshots").mkdir(parents=True, exist_ok=True)
            (self.root / "grids").mkdir(exist_ok=True)
            self._log = open(self.root / "log.jsonl", "w")

    def write_json(self, name: str, obj):
        if self.root:
            (self.root / name).write_text(json.dumps(obj, indent=2))

    def log(self, record: dict):
        if self._log:
            self._log.write(json.dumps(record) + "\n")

    def snapshot(self, step: int, ckpt: Checkpoint):
        if self.root:
            ckpt_io.save(ckpt, self.root / "snapshots" / f"step_{step}.ckpt")

    def close(self):
        if self._log:
            self._log.close()


def _check_resolution(cfg: RunConfig, data: ImageDataset):
    r = data.images.shape[-1]
    if r != cfg.resolution:
        raise ConfigError(f"dataset resolution {r} does not match model resolution {cfg.resolution}")


def _train(
    cfg: RunConfig,
    generator: Generator,
    discriminator: Discriminator,
    data: ImageDataset,
    source: Optional[Generator] = None,
) -> RunResult:
    if len(data) == 0:
        raise ConfigError("empty dataset")
    _check_resolution(cfg, data)
    if cfg.deterministic:
        torch.use_deterministic_algorithms(True)
        torch.utils.deterministic.fill_uninitialized_memory = False
    writer = RunWriter(cfg.out)
    writer.write_json("config.json", cfg.to_dict())

    g_table = generator.parameter_table()
    d_table = discriminator.parameter_table()
    plan = build_plan(cfg.freeze_mode, cfg.freeze_blocks if cfg.freeze_mode in ("freezeg", "freezesg") else 0,
                      cfg.freeze_d_blocks, list(g_table) + list(d_table))
    writer.write_json("plan.json", plan.to_dict())
    g_opt, g_guard = apply_plan(plan, g_table, _adam(cfg, cfg.lr_g))
    d_opt, d_guard = apply_plan(plan, d_table, _adam(cfg, cfg.lr_d))
    d_trainable = [p for n, p in d_table.items() if n not in plan]

    scfg = StructureLossConfig(cfg.structure_layers, cfg.lambda_structure)
    if source is not None:
        if scfg.n > generator.cfg.num_blocks:
            raise ConfigError(f"structure_layers={scfg.n} exceeds {generator.cfg.num_blocks} style blocks")
        source.eval()
        _set_requires_grad(source.parameters(), False)
        source_guard = FrozenGuard(source.parameter_table(), list(source.parameter_table()))

    rng = np.random.default_rng(cfg.seed)
    zgen = torch.Generator().manual_seed(cfg.seed)
    dtype = generator.synthesis.input.dtype

    def noise_seed():
        s = int(rng.integers(2**31))
        return s if cfg.noise else None

    def sample_z():
        return torch.randn(cfg.batch, generator.cfg.z_dim, generator=zgen).to(dtype)

    writer.snapshot(0, snapshot(generator, discriminator, {"step": 0}))
    records = []
    t0 = time.time()
    for step in range(1, cfg.steps + 1):
        report = LossReport()

        # discriminator
        with torch.no_grad():
            fake = generator(sample_z(), noise_seed()).image
        real = load_batch(data, cfg.batch, rng, flip=cfg.flip).to(dtype)
        real_logits, fake_logits = discriminator(real), discriminator(fake)
        d_loss = discriminator_loss(real_logits, fake_logits)
        if d_opt is not None:
            d_opt.zero_grad(set_to_none=True)
            d_loss.backward()
            d_opt.step()
        report.d_loss = float(d_loss.detach())
        acc = d_accuracy(real_logits.detach(), fake_logits.detach())

        if step % cfg.r1_interval == 0 and cfg.r1_gamma > 0 and d_opt is not None:
            r1 = r1_penalty(real, discriminator, cfg.r1_gamma)
            d_opt.zero_grad(set_to_none=True)
            (r1 * cfg.r1_interval).backward()
            d_opt.step()
            report.r1_penalty = float(r1.detach())

        # generator
        _set_requires_grad(d_trainable, False)
        z, ns = sample_z(), noise_seed()
        trace = generator(z, ns)
        g_adv = generator_adversarial_loss(discriminator(trace.image))
        g_total = g_adv
        if source is not None:
            with torch.no_grad():
                src_trace = source(z, ns)
            if scfg.weight > 0:
                s_total, per_layer = structure_loss(src_trace, trace, scfg)
                g_total = generator_objective(g_adv, s_total, scfg)
            else:
                with torch.no_grad():
                    detached = type(trace)(trace.image.detach(), [t.detach() for t in trace.rgb_outputs])
                    s_total, per_layer = structure_loss(src_trace, detached, scfg)
            report.structure_loss = float(s_total.detach())
            report.structure_per_layer = [float(t.detach()) for t in per_layer]
        if g_opt is not None:
            g_opt.zero_grad(set_to_none=True)
            g_total.backward()
            g_opt.step()
        _set_requires_grad(d_trainable, True)
        report.g_adv_loss = float(g_adv.detach())

        record = {"step": step, **report.to_dict(), "d_accuracy": acc}
        records.append(record)
        writer.log(record)
        if cfg.debug_freeze_check:
            g_guard.check()
            d_guard.check()
        if cfg.snapshot_interval and step % cfg.snapshot_interval == 0 and step != cfg.steps:
            writer.snapshot(step, snapshot(generator, discriminator, {"step": step}))
        if step % 500 == 0:
            log.info("step %d  d=%.3f g=%.3f s=%.4f acc=%.2f (%.1fs)", step, report.d_loss,
                     report.g_adv_loss, report.structure_loss, acc, time.time() - t0)

    g_guard.check()
    d_guard.check()
    if source is not None:
        source_guard.check()
    final = snapshot(generator, discriminator, {"step": cfg.steps, "mode": cfg.mode})
    writer.snapshot(cfg.steps, final)
    writer.close()
    return RunResult(final, records, plan, writer.root)


def pretrain(cfg: RunConfig, data: Optional[ImageDataset] = None) -> RunResult:
    """Train a source generator/discriminator pair from scratch."""
    cfg = cfg.resolved()
    if cfg.mode != "pretrain":
        raise ConfigError("pretrain needs mode='pretrain'")
    data = data if data is not None else open_dataset(cfg.dataset_spec())
    g, d = build_models(cfg.generator_config(), cfg.discriminator_config(), seed=cfg.seed)
    return _train(cfg, g, d, data)


def finetune(cfg: RunConfig, source_ckpt: Optional[Checkpoint] = None, data: Optional[ImageDataset] = None) -> RunResult:
    """Fine-tune a copy of the source pair on target data.

    The source generator stays fixed and supplies the reference trace for the
    structure loss on the same ``z`` and noise as the trainee.
    """
    cfg = copy.copy(cfg)
    if source_ckpt is not None and cfg.source is None:
        cfg.source = "<in-memory>"
    cfg = cfg.resolved()
    if cfg.mode != "finetune":
        raise ConfigError("finetune needs mode='finetune'")
    if source_ckpt is None:
        source_ckpt = ckpt_io.load(cfg.source)
    gcfg = source_ckpt.config["generator"]
    if cfg.resolution is None:
        cfg.resolution = gcfg["max_resolution"]
    if gcfg["max_resolution"] != cfg.resolution:
        raise IncompatibleConfig(
            f"source checkpoint is {gcfg['max_resolution']}px, run config asks for {cfg.resolution}px"
        )
    # architecture is inherited; record it so the emitted config is self-consistent
    cfg.w_dim, cfg.channel_max, cfg.channel_min, cfg.mapping_depth = (
        gcfg["w_dim"], gcfg["channel_max"], gcfg["channel_min"], gcfg["mapping_depth"])
    cfg.mbstd = source_ckpt.config.get("discriminator", {}).get("mbstd", cfg.mbstd)
    data = data if data is not None else open_dataset(cfg.dataset_spec())
    target = generator_from_checkpoint(source_ckpt)
    source = generator_from_checkpoint(source_ckpt)
    disc = discriminator_from_checkpoint(source_ckpt)
    return _train(cfg, target, disc, data, source=source)


@torch.no_grad()
def generate_images(generator: Generator, seeds: Sequence[int], noise=None) -> torch.Tensor:
    zs = [torch.randn(1, generator.cfg.z_dim, generator=torch.Generator().manual_seed(int(s))) for s in seeds]
    z = torch.cat(zs).to(generator.synthesis.input)
    return generator(z, noise).image


def generate_grid(ckpts: Sequence[Checkpoint], seeds: Sequence[int], out_path=None) -> np.ndarray:
    """Rows are seeds, columns are checkpoints; the same ``z`` is used across a row."""
    if not ckpts or not seeds:
        raise InvalidArgument("need at least one checkpoint and one seed")
    gens = [generator_from_checkpoint(c) for c in ckpts]
    res = {(g.cfg.max_resolution, g.cfg.z_dim) for g in gens}
    if len(res) != 1:
        raise IncompatibleCheckpoint(f"checkpoints disagree on (resolution, z_dim): {sorted(res)}")
    cols = [to_uint8(generate_images(g, seeds)) for g in gens]  # each [S, R, R, 3]
    grid = np.concatenate([np.concatenate(list(c), axis=1) for c in zip(*cols)], axis=0)
    if out_path is not None:
        save_png(grid, out_path)
    return grid


@torch.no_grad()
def structure_gap(source: Generator, target: Generator, n: int = 256, seed: int = 12345) -> float:
    """Structure metric between source and target outputs on ``n`` shared z (noise off)."""
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(n, source.cfg.z_dim, generator=g)
    a = source(z.to(source.synthesis.input)).image
    b = target(z.to(target.synthesis.input)).image
    return structure_metric(a, b)
