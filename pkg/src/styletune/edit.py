"""Linear latent extrapolation along an edit direction and cross-model application."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .errors import InvalidArgument
from .generator import Generator, SynthesisTrace, NoiseSpec


@dataclass
class EditSpec:
    w_s: torch.Tensor
    w: torch.Tensor
    alpha: float = 1.0

    def __post_init__(self):
        if self.w_s.shape != self.w.shape:
            raise InvalidArgument(f"w_s {tuple(self.w_s.shape)} and w {tuple(self.w.shape)} differ in shape")
        if not np.isfinite(self.alpha):
            raise InvalidArgument("alpha must be finite")


def extrapolate(spec: EditSpec) -> torch.Tensor:
    """``w_s + alpha * (w - w_s)``: 0 gives ``w_s``, 1 gives ``w``."""
    if spec.alpha == 0:
        return spec.w_s.clone()
    if spec.alpha == 1:
        return spec.w.clone()
    return spec.w_s + spec.alpha * (spec.w - spec.w_s)


@torch.no_grad()
def cross_apply(w_prime: torch.Tensor, target: Generator, noise: NoiseSpec = None) -> SynthesisTrace:
    if w_prime.shape[-1] != target.cfg.w_dim:
        raise InvalidArgument(f"w has dim {w_prime.shape[-1]}, target generator expects {target.cfg.w_dim}")
    return target.synthesize(w_prime.to(target.synthesis.input.dtype), noise)


def eye_darkness(images: torch.Tensor) -> torch.Tensor:
    """Toy attribute: darkness of the upper-middle band where the eyes sit."""
    r = images.shape[-1]
    band = images[:, :, int(0.3 * r) : int(0.55 * r), int(0.25 * r) : int(0.75 * r)]
    return -band.mean(dim=(1, 2, 3))


@torch.no_grad()
def attribute_direction(
    generator: Generator,
    score: Callable[[torch.Tensor], torch.Tensor] = eye_darkness,
    n: int = 512,
    seed: int = 0,
) -> torch.Tensor:
    """Mean ``w`` of the top-scoring half minus mean ``w`` of the bottom half."""
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(n, generator.cfg.z_dim, generator=g).to(generator.synthesis.input)
    w = generator.map_latent(z)
    s = score(generator.synthesize(w).image)
    order = torch.argsort(s)
    half = n // 2
    return w[order[half:]].mean(0) - w[order[:half]].mean(0)


def save_latent(w: torch.Tensor, path):
    """One JSON header line ``{"dim", "dtype"}`` followed by raw little-endian float32."""
    arr = np.ascontiguousarray(w.detach().cpu().numpy().reshape(-1), dtype="<f4")
    header = json.dumps({"dim": int(arr.size), "dtype": "float32"})
    Path(path).write_bytes(header.encode() + b"\n" + arr.tobytes())


def load_latent(path) -> torch.Tensor:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    meta = json.loads(head)
    if meta.get("dtype") != "float32":
        raise InvalidArgument(f"unsupported latent dtype {meta.get('dtype')!r}")
    arr = np.frombuffer(body, dtype="<f4")
    if arr.size != meta["dim"]:
        raise InvalidArgument(f"latent file holds {arr.size} values, header says {meta['dim']}")
    return torch.from_numpy(arr.copy())
