"""Desk-scale style-based GAN fine-tuning laboratory."""

from .checkpoint import Checkpoint, load, save
from .discriminator import Discriminator, DiscriminatorConfig
from .edit import EditSpec, cross_apply, extrapolate
from .freeze import FreezePlan, apply_plan, build_plan
from .generator import Generator, GeneratorConfig, SynthesisTrace
from .objectives import StructureLossConfig, adversarial_losses, generator_objective, structure_loss
from .swap import SwapPlan, diff, swap

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "load", "save",
    "Discriminator", "DiscriminatorConfig",
    "EditSpec", "cross_apply", "extrapolate",
    "FreezePlan", "apply_plan", "build_plan",
    "Generator", "GeneratorConfig", "SynthesisTrace",
    "StructureLossConfig", "adversarial_losses", "generator_objective", "structure_loss",
    "SwapPlan", "diff", "swap",
]
