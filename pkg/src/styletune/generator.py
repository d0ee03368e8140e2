"""Mapping network and input/output-skip synthesis network."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Union

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidArgument
from .nn import EqualLinear, ModConv, NoiseInjection, leaky_relu, upsample2x

BASE_RESOLUTION = 4
MAPPING_LR_MULTIPLIER = 0.01


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def resolution_ladder(max_resolution: int, base_resolution: int = BASE_RESOLUTION) -> List[int]:
    """Block resolutions from the base up to ``max_resolution`` inclusive."""
    out = []
    res = base_resolution
    while res <= max_resolution:
        out.append(res)
        res *= 2
    return out


def default_channels(res: int, channel_max: int = 256, channel_min: int = 32) -> int:
    """Halve from ``channel_max`` at 4x4 each octave, floored at ``channel_min``."""
    return max(channel_min, channel_max >> (int(math.log2(res)) - 2))


@dataclass
class GeneratorConfig:
    max_resolution: int = 32
    w_dim: int = 128
    channel_max: int = 256
    channel_min: int = 32
    mapping_depth: int = 4
    base_resolution: int = BASE_RESOLUTION
    channels: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        # JSON round-trips turn int keys into strings
        self.channels = {int(k): int(v) for k, v in self.channels.items()}
        self.validate()
        for res in self.ladder:
            self.channels.setdefault(res, default_channels(res, self.channel_max, self.channel_min))

    def validate(self):
        if self.base_resolution != BASE_RESOLUTION:
            raise InvalidArgument(f"base_resolution must be {BASE_RESOLUTION}")
        if not _is_pow2(self.max_resolution) or self.max_resolution < self.base_resolution:
            raise InvalidArgument(f"max_resolution must be a power of two >= 4, got {self.max_resolution}")
        if self.w_dim < 1 or self.mapping_depth < 1:
            raise InvalidArgument("w_dim and mapping_depth must be positive")

    @property
    def z_dim(self) -> int:
        return self.w_dim

    @property
    def ladder(self) -> List[int]:
        return resolution_ladder(self.max_resolution, self.base_resolution)

    @property
    def num_blocks(self) -> int:
        return len(self.ladder)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = {str(k): v for k, v in sorted(self.channels.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(**d)


@dataclass
class SynthesisTrace:
    """Final image plus the running skip sum after every style block.

    ``rgb_outputs[k]`` lives at resolution ``4 * 2**k``; the last entry is ``image``.
    """

    image: torch.Tensor
    rgb_outputs: List[torch.Tensor]


NoiseSpec = Union[None, int, torch.Generator]


class StyleBlock(nn.Module):
    def __init__(self, res: int, in_ch: int, out_ch: int, w_dim: int):
        super().__init__()
        self.res = res
        self.num_convs = 1 if res == BASE_RESOLUTION else 2
        chans = [in_ch] + [out_ch] * self.num_convs
        for j in range(self.num_convs):
            self.add_module(f"conv{j}", ModConv(chans[j], chans[j + 1], 3))
            self.add_module(f"affine{j}", EqualLinear(w_dim, chans[j], bias_init=1.0))
            self.add_module(f"noise{j}", NoiseInjection())
        self.torgb = ModConv(out_ch, 3, 1, demodulate=False)
        self.torgb_affine = EqualLinear(w_dim, out_ch, bias_init=1.0)

    def forward(self, x, w, noise_gen: Optional[torch.Generator]):
        if self.res != BASE_RESOLUTION:
            x = upsample2x(x)
        for j in range(self.num_convs):
            conv = getattr(self, f"conv{j}")
            x = conv(x, getattr(self, f"affine{j}")(w))
            noise = None
            if noise_gen is not None:
                noise = torch.randn(
                    x.shape[0], 1, x.shape[2], x.shape[3], generator=noise_gen, dtype=x.dtype
                ).to(x.device)
            x = leaky_relu(getattr(self, f"noise{j}")(x, noise))
        rgb = self.torgb(x, self.torgb_affine(w))
        return x, rgb


class MappingNetwork(nn.Module):
    def __init__(self, z_dim: int, w_dim: int, depth: int):
        super().__init__()
        self.depth = depth
        dims = [z_dim] + [w_dim] * depth
        for i in range(depth):
            self.add_module(f"l{i}", EqualLinear(dims[i], dims[i + 1], lr_multiplier=MAPPING_LR_MULTIPLIER))

    def forward(self, z):
        x = F.normalize(z, dim=-1)
        for i in range(self.depth):
            x = leaky_relu(getattr(self, f"l{i}")(x))
        return x


class Synthesis(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.ladder = cfg.ladder
        c4 = cfg.channels[BASE_RESOLUTION]
        self.input = nn.Parameter(torch.randn(1, c4, BASE_RESOLUTION, BASE_RESOLUTION))
        prev = c4
        for res in self.ladder:
            self.add_module(f"b{res}", StyleBlock(res, prev, cfg.channels[res], cfg.w_dim))
            prev = cfg.channels[res]

    def forward(self, w, noise: NoiseSpec = None) -> SynthesisTrace:
        gen = noise
        if isinstance(noise, int):
            gen = torch.Generator().manual_seed(noise)
        x = self.input.expand(w.shape[0], -1, -1, -1)
        rgb = None
        outputs = []
        for res in self.ladder:
            x, block_rgb = getattr(self, f"b{res}")(x, w, gen)
            rgb = block_rgb if rgb is None else upsample2x(rgb) + block_rgb
            outputs.append(rgb)
        return SynthesisTrace(image=rgb, rgb_outputs=outputs)


class Generator(nn.Module):
    """Style-based generator; ``generator(z)`` returns a :class:`SynthesisTrace`."""

    def __init__(self, cfg: Optional[GeneratorConfig] = None):
        super().__init__()
        self.cfg = cfg or GeneratorConfig()
        self.mapping = MappingNetwork(self.cfg.z_dim, self.cfg.w_dim, self.cfg.mapping_depth)
        self.synthesis = Synthesis(self.cfg)

    def map_latent(self, z: torch.Tensor) -> torch.Tensor:
        return self.mapping(z)

    def synthesize(self, w: torch.Tensor, noise: NoiseSpec = None) -> SynthesisTrace:
        """Run the synthesis ladder.

        ``noise`` is ``None`` (noise injection off), an integer seed, or a
        ``torch.Generator``; noise maps are drawn block by block in ladder order.
        """
        if w.dim() == 1:
            w = w.unsqueeze(0)
        if w.shape[-1] != self.cfg.w_dim:
            raise InvalidArgument(f"w has dim {w.shape[-1]}, generator expects {self.cfg.w_dim}")
        return self.synthesis(w, noise)

    def forward(self, z: torch.Tensor, noise: NoiseSpec = None) -> SynthesisTrace:
        return self.synthesize(self.map_latent(z), noise)

    def parameter_table(self) -> "OrderedDict[str, torch.Tensor]":
        return list_parameters(self)

    @torch.no_grad()
    def mean_style(self, n: int = 4096, seed: int = 0) -> torch.Tensor:
        g = torch.Generator().manual_seed(seed)
        z = torch.randn(n, self.cfg.z_dim, generator=g).to(self.synthesis.input)
        return self.map_latent(z).mean(dim=0)


def truncate(w: torch.Tensor, w_avg: torch.Tensor, psi: float = 1.0) -> torch.Tensor:
    return w_avg + psi * (w - w_avg)


def list_parameters(module: nn.Module, prefix: str = "") -> "OrderedDict[str, torch.Tensor]":
    """Ordered ``name -> parameter`` table in registration order."""
    return OrderedDict((prefix + name, p) for name, p in module.named_parameters())


def block_of(name: str) -> Optional[int]:
    """Resolution of the synthesis block owning ``name`` (``None`` outside blocks)."""
    parts = name.split(".")
    if len(parts) >= 2 and parts[0] == "synthesis" and parts[1].startswith("b"):
        return int(parts[1][1:])
    return None
