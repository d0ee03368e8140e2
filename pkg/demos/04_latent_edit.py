"""Strengthen or reverse an edit by extrapolating between two latents."""

import torch

from styletune.edit import EditSpec, attribute_direction, cross_apply, extrapolate, eye_darkness
from styletune.generator import Generator, GeneratorConfig

torch.manual_seed(0)
G = Generator(GeneratorConfig(max_resolution=16, w_dim=32, channel_max=32, channel_min=16))

direction = attribute_direction(G, eye_darkness, n=256)
w_s = G.map_latent(torch.randn(1, 32)).detach()
w = w_s + direction

for alpha in (0.0, 0.5, 1.0, 2.0, -1.0):
    w_prime = extrapolate(EditSpec(w_s, w, alpha))
    score = eye_darkness(cross_apply(w_prime, G, noise=None).image).item()
    print(f"alpha {alpha:+.1f}: eye darkness {score:+.4f}")
