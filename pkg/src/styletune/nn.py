"""Differentiable building blocks shared by the generator and discriminator.

The functional forms (``modulated_conv``, ``upsample2x``, ``equalized_linear``,
``leaky_relu``) are pure; the ``nn.Module`` wrappers below only own parameters
and apply the equalized learning-rate scale at call time.
"""

from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidArgument

DEMOD_EPS = 1e-8
LRELU_SLOPE = 0.2
LRELU_GAIN = math.sqrt(2.0)


def modulated_conv(
    x: torch.Tensor,
    weight: torch.Tensor,
    bias: Optional[torch.Tensor],
    style: torch.Tensor,
    demodulate: bool = True,
    eps: float = DEMOD_EPS,
) -> torch.Tensor:
    """Style-modulated convolution with optional weight demodulation.

    ``style`` is either ``[in_ch]`` (shared by the batch) or ``[B, in_ch]``.
    Padding is ``k // 2`` so the spatial size is preserved.
    """
    if eps <= 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    batch, in_ch, height, width = x.shape
    out_ch, w_in, k, k2 = weight.shape
    if k != k2 or k % 2 != 1:
        raise InvalidArgument(f"kernel must be square and odd, got {k}x{k2}")
    if w_in != in_ch:
        raise InvalidArgument(f"input has {in_ch} channels, weight expects {w_in}")
    if style.dim() == 1:
        style = style.unsqueeze(0).expand(batch, -1)
    if style.shape != (batch, in_ch):
        raise InvalidArgument(
            f"style shape {tuple(style.shape)} does not match (batch={batch}, in_ch={in_ch})"
        )

    # Equivalent to convolving with per-sample weights ``weight * style`` (then
    # demodulated), but expressed as input scaling + one shared convolution +
    # per-(sample, filter) output scaling; faster than a grouped conv on CPU.
    out = F.conv2d(x * style[:, :, None, None], weight, padding=k // 2)
    if demodulate:
        sq = (weight.pow(2).sum(dim=(2, 3))[None] * style.pow(2)[:, None, :]).sum(dim=2)  # [B, out]
        out = out * torch.rsqrt(sq + eps)[:, :, None, None]
    if bias is not None:
        out = out + bias.view(1, -1, 1, 1)
    return out


def upsample2x(x: torch.Tensor) -> torch.Tensor:
    """Bilinear 2x upsampling (half-pixel centres, edge clamped)."""
    return F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


def downsample2x(x: torch.Tensor) -> torch.Tensor:
    return F.avg_pool2d(x, 2)


def equalized_linear(
    x: torch.Tensor, weight: torch.Tensor, bias: Optional[torch.Tensor], lr_multiplier: float = 1.0
) -> torch.Tensor:
    """``(weight @ x) * lr_multiplier / sqrt(fan_in) + bias``; ``weight`` is ``[out, in]``."""
    fan_in = weight.shape[1]
    if x.shape[-1] != fan_in:
        raise InvalidArgument(f"input dim {x.shape[-1]} does not match fan_in {fan_in}")
    if bias is not None and bias.shape[0] != weight.shape[0]:
        raise InvalidArgument("bias length does not match output dim")
    out = F.linear(x, weight) * (lr_multiplier / math.sqrt(fan_in))
    if bias is not None:
        out = out + bias
    return out


def leaky_relu(x: torch.Tensor) -> torch.Tensor:
    """Leaky rectifier with the variance-preserving gain sqrt(2)."""
    return F.leaky_relu(x, LRELU_SLOPE) * LRELU_GAIN


def minibatch_stddev(x: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Append one channel holding the batch-averaged feature std (group = whole batch)."""
    std = torch.sqrt(x.var(dim=0, unbiased=False) + eps).mean()
    feat = std.expand(x.shape[0], 1, x.shape[2], x.shape[3])
    return torch.cat([x, feat], dim=1)


class EqualLinear(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, bias_init: float = 0.0, lr_multiplier: float = 1.0):
        super().__init__()
        self.lr_multiplier = lr_multiplier
        self.weight = nn.Parameter(torch.randn(out_dim, in_dim) / lr_multiplier)
        self.bias = nn.Parameter(torch.full((out_dim,), float(bias_init)))

    def forward(self, x):
        return equalized_linear(x, self.weight, self.bias, self.lr_multiplier)


class EqualConv(nn.Module):
    """Plain (unmodulated) conv with equalized learning rate, used by the discriminator."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, bias: bool = True):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, kernel, kernel))
        self.bias = nn.Parameter(torch.zeros(out_ch)) if bias else None
        self.scale = 1.0 / math.sqrt(in_ch * kernel * kernel)

    def forward(self, x):
        return F.conv2d(x, self.weight * self.scale, self.bias, padding=self.weight.shape[-1] // 2)


class ModConv(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, demodulate: bool = True):
        super().__init__()
        self.demodulate = demodulate
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, kernel, kernel))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.scale = 1.0 / math.sqrt(in_ch * kernel * kernel)

    def forward(self, x, style):
        return modulated_conv(x, self.weight * self.scale, self.bias, style, self.demodulate)


class NoiseInjection(nn.Module):
    """Learned scalar times a single-channel unit Gaussian noise map."""

    def __init__(self):
        super().__init__()
        self.scale = nn.Parameter(torch.zeros(()))

    def forward(self, x, noise: Optional[torch.Tensor]):
        if noise is None:
            return x
        return x + self.scale * noise
