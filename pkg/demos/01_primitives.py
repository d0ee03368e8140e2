"""Modulated convolution, demodulation and the skip-architecture generator at a glance."""

import torch

from styletune.generator import Generator, GeneratorConfig, block_of
from styletune.nn import modulated_conv

torch.manual_seed(0)

# A demodulated conv keeps each output feature near unit scale whatever the style magnitude.
x = torch.randn(4, 8, 16, 16)
weight = torch.randn(12, 8, 3, 3)
for gain in (0.1, 1.0, 10.0):
    style = gain * torch.rand(4, 8)
    out = modulated_conv(x, weight, None, style)
    print(f"style gain {gain:5.1f}: output std {out.std():.3f}")

# Without demodulation the output scales with the style.
out = modulated_conv(x, weight, None, 10.0 * torch.rand(4, 8), demodulate=False)
print(f"no demodulation, gain 10: output std {out.std():.3f}")

# The generator exposes one RGB output per resolution; the final image is their upsampled sum.
G = Generator(GeneratorConfig(max_resolution=32, w_dim=32, channel_max=64, channel_min=16))
trace = G(torch.randn(2, 32), noise=None)
for rgb in trace.rgb_outputs:
    print("rgb output", tuple(rgb.shape))
print("image", tuple(trace.image.shape))

# Parameters are grouped by the block (resolution) that owns them.
for name, _ in list(G.parameter_table().items())[:12]:
    print(f"{name:40s} block={block_of(name)}")
