"""Blend two checkpoints by taking low-resolution blocks from one and the rest from the other."""

import torch

from styletune.generator import GeneratorConfig
from styletune.models import build_models, snapshot
from styletune.swap import SwapPlan, diff, partition, sweep_boundaries, swap

gcfg_kw = dict(max_resolution=32, w_dim=32, channel_max=64, channel_min=16)

G_a, _ = build_models(GeneratorConfig(**gcfg_kw), seed=0)
G_b, _ = build_models(GeneratorConfig(**gcfg_kw), seed=1)
with torch.no_grad():
    for p in G_b.parameters():
        p.add_(0.1 * torch.randn_like(p))
source, target = snapshot(G_a), snapshot(G_b)

plan = SwapPlan(boundary_resolution=16)
sides = partition(list(source.tensors), plan)
print("from source:", sum(v == "source" for v in sides.values()), "tensors")
print("from target:", sum(v == "target" for v in sides.values()), "tensors")

blended = swap(source, target, plan)
d = diff(blended, target)
print("tensors differing from target:", [n for n, v in d.items() if v > 0][:6], "...")

for boundary in sweep_boundaries(32):
    moved = sum(v > 0 for v in diff(swap(source, target, SwapPlan(boundary)), target).values())
    print(f"boundary {boundary:3d}: {moved} tensors taken from source")
