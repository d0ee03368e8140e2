"""Adversarial, structure and regularization losses."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, List, Tuple

import torch
import torch.nn.functional as F

from .errors import InvalidArgument
from .generator import SynthesisTrace


@dataclass
class StructureLossConfig:
    n: int = 3
    weight: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument(f"structure layers n must be >= 1, got {self.n}")
        if self.weight < 0:
            raise InvalidArgument(f"lambda_structure must be >= 0, got {self.weight}")


@dataclass
class LossReport:
    d_loss: float = 0.0
    g_adv_loss: float = 0.0
    structure_loss: float = 0.0
    r1_penalty: float = 0.0
    structure_per_layer: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def adversarial_losses(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Non-saturating logistic losses ``(d_loss, g_loss)``, batch-averaged."""
    d_loss = F.softplus(fake_logits).mean() + F.softplus(-real_logits).mean()
    g_loss = F.softplus(-fake_logits).mean()
    return d_loss, g_loss


def generator_adversarial_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    return F.softplus(-fake_logits).mean()


def discriminator_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    return F.softplus(fake_logits).mean() + F.softplus(-real_logits).mean()


def minimax_value(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    """``E[log D(x)] + E[log(1 - D(G(z)))]`` with ``D = sigmoid(logit)``; reporting only."""
    # log sigmoid(a) = -softplus(-a); log(1 - sigmoid(a)) = -softplus(a)
    return -F.softplus(-real_logits).mean() - F.softplus(fake_logits).mean()


def structure_loss(
    source: SynthesisTrace, target: SynthesisTrace, cfg: StructureLossConfig
) -> Tuple[torch.Tensor, List[torch.Tensor]]:
    """Sum over the first ``cfg.n`` skip outputs of their per-element MSE."""
    if len(source.rgb_outputs) != len(target.rgb_outputs):
        raise InvalidArgument(
            f"trace ladders differ: {len(source.rgb_outputs)} vs {len(target.rgb_outputs)} outputs"
        )
    if cfg.n > len(source.rgb_outputs):
        raise InvalidArgument(f"n={cfg.n} exceeds the {len(source.rgb_outputs)} available RGB outputs")
    per_layer = []
    for k in range(cfg.n):
        a, b = source.rgb_outputs[k], target.rgb_outputs[k]
        if a.shape != b.shape:
            raise InvalidArgument(f"RGB output {k} shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        per_layer.append((a - b).pow(2).mean())
    return torch.stack(per_layer).sum(), per_layer


def generator_objective(g_adv, structure_total, cfg: StructureLossConfig):
    return g_adv + cfg.weight * structure_total


def r1_penalty(
    real_images: torch.Tensor, discriminator: Callable[[torch.Tensor], torch.Tensor], gamma: float
) -> torch.Tensor:
    """``gamma/2 * E_batch[|grad_x D(x)|^2]``; differentiable w.r.t. the discriminator."""
    if gamma < 0:
        raise InvalidArgument(f"gamma must be >= 0, got {gamma}")
    x = real_images.detach().requires_grad_(True)
    logits = discriminator(x)
    if not logits.requires_grad:
        return torch.zeros((), dtype=x.dtype, device=x.device)
    (grad,) = torch.autograd.grad(logits.sum(), x, create_graph=True, allow_unused=True)
    if grad is None:
        return torch.zeros((), dtype=x.dtype, device=x.device)
    return 0.5 * gamma * grad.pow(2).flatten(1).sum(1).mean()


def d_accuracy(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> float:
    hits = (real_logits > 0).float().sum() + (fake_logits < 0).float().sum()
    return float(hits / (real_logits.numel() + fake_logits.numel()))
