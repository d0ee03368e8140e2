import numpy as np
import pytest
import torch

from styletune.generator import GeneratorConfig


def central_diff(f, x: torch.Tensor, h: float = 1e-5) -> torch.Tensor:
    """Central finite differences of a scalar function ``f()`` w.r.t. tensor ``x`` (mutated in place, restored)."""
    grad = torch.zeros_like(x)
    flat, gflat = x.data.view(-1), grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        fp = float(f())
        flat[i] = orig - h
        fm = float(f())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def rel_err(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = max(float(torch.linalg.vector_norm(a)), float(torch.linalg.vector_norm(b)), 1e-12)
    return float(torch.linalg.vector_norm(a - b)) / denom


def check_grads(f, tensors, h=1e-5):
    """Largest relative error between autograd and central differences over ``tensors``."""
    for t in tensors:
        t.grad = None
    f().backward()
    worst = 0.0
    for t in tensors:
        analytic = t.grad.detach().clone()
        with torch.no_grad():
            numeric = central_diff(f, t, h)
        worst = max(worst, rel_err(analytic, numeric))
    return worst


@pytest.fixture
def tiny_cfg():
    """Two style blocks (4x4, 8x8) with a handful of channels."""
    return GeneratorConfig(max_resolution=8, w_dim=6, channel_max=6, channel_min=4, mapping_depth=2)


@pytest.fixture
def small_cfg():
    return GeneratorConfig(max_resolution=16, w_dim=16, channel_max=16, channel_min=8, mapping_depth=2)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
