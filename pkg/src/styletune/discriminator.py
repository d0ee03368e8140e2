"""Residual downsampling discriminator."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import torch
from torch import nn

from .errors import InvalidArgument
from .generator import BASE_RESOLUTION, default_channels, resolution_ladder
from .nn import EqualConv, EqualLinear, downsample2x, leaky_relu, minibatch_stddev

PREFIX = "disc."


@dataclass
class DiscriminatorConfig:
    max_resolution: int = 32
    channel_max: int = 256
    channel_min: int = 32
    mbstd: bool = True
    channels: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.channels = {int(k): int(v) for k, v in self.channels.items()}
        if self.max_resolution < 2 * BASE_RESOLUTION or self.max_resolution & (self.max_resolution - 1):
            raise InvalidArgument("discriminator max_resolution must be a power of two >= 8")
        for res in resolution_ladder(self.max_resolution):
            self.channels.setdefault(res, default_channels(res, self.channel_max, self.channel_min))

    @property
    def block_resolutions(self) -> List[int]:
        """Downsampling blocks, highest resolution first (the 4x4 head is ``final``)."""
        return resolution_ladder(self.max_resolution)[:0:-1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = {str(k): v for k, v in sorted(self.channels.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DiscriminatorConfig":
        return cls(**d)


class DiscBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, from_rgb: bool):
        super().__init__()
        if from_rgb:
            self.fromrgb = EqualConv(3, in_ch, 1)
        self.conv0 = EqualConv(in_ch, in_ch, 3)
        self.conv1 = EqualConv(in_ch, out_ch, 3)
        self.skip = EqualConv(in_ch, out_ch, 1, bias=False)

    def forward(self, x):
        if hasattr(self, "fromrgb"):
            x = leaky_relu(self.fromrgb(x))
        y = leaky_relu(self.conv0(x))
        y = downsample2x(leaky_relu(self.conv1(y)))
        s = self.skip(downsample2x(x))
        return (y + s) / math.sqrt(2.0)


class FinalBlock(nn.Module):
    def __init__(self, ch: int, mbstd: bool):
        super().__init__()
        self.mbstd = mbstd
        self.conv = EqualConv(ch + (1 if mbstd else 0), ch, 3)
        self.fc = EqualLinear(ch * BASE_RESOLUTION * BASE_RESOLUTION, ch)
        self.out = EqualLinear(ch, 1)

    def forward(self, x):
        if self.mbstd:
            x = minibatch_stddev(x)
        x = leaky_relu(self.conv(x))
        x = leaky_relu(self.fc(x.flatten(1)))
        return self.out(x).squeeze(1)


class Discriminator(nn.Module):
    def __init__(self, cfg: Optional[DiscriminatorConfig] = None):
        super().__init__()
        self.cfg = cfg or DiscriminatorConfig()
        ch = self.cfg.channels
        for i, res in enumerate(self.cfg.block_resolutions):
            self.add_module(f"b{res}", DiscBlock(ch[res], ch[res // 2], from_rgb=(i == 0)))
        self.final = FinalBlock(ch[BASE_RESOLUTION], self.cfg.mbstd)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Raw (pre-sigmoid) logits, shape ``[B]``."""
        r = self.cfg.max_resolution
        if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != r or x.shape[3] != r:
            raise InvalidArgument(f"expected images [B,3,{r},{r}], got {tuple(x.shape)}")
        for res in self.cfg.block_resolutions:
            x = getattr(self, f"b{res}")(x)
        return self.final(x)

    discriminate = forward

    def parameter_table(self) -> "OrderedDict[str, torch.Tensor]":
        return OrderedDict((PREFIX + n, p) for n, p in self.named_parameters())


def disc_block_of(name: str) -> Optional[int]:
    parts = name.split(".")
    if len(parts) >= 2 and parts[0] == "disc" and parts[1].startswith("b"):
        return int(parts[1][1:])
    return None
