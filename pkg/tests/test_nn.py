import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from styletune.errors import InvalidArgument
from styletune.nn import equalized_linear, leaky_relu, minibatch_stddev, modulated_conv, upsample2x

from conftest import check_grads


def conv_oracle(x, weight, bias, style, demodulate, eps=1e-8):
    """Loop-nest reference: modulate, demodulate, same-padded correlation."""
    x, weight, style = (np.asarray(a, dtype=np.float64) for a in (x, weight, style))
    B, C, H, W = x.shape
    O, _, K, _ = weight.shape
    if style.ndim == 1:
        style = np.tile(style, (B, 1))
    p = K // 2
    out = np.zeros((B, O, H, W))
    for b in range(B):
        wmod = weight * style[b][None, :, None, None]
        if demodulate:
            for o in range(O):
                wmod[o] /= np.sqrt((wmod[o] ** 2).sum() + eps)
        for o in range(O):
            for i in range(H):
                for j in range(W):
                    acc = 0.0
                    for c in range(C):
                        for u in range(K):
                            for v in range(K):
                                ii, jj = i + u - p, j + v - p
                                if 0 <= ii < H and 0 <= jj < W:
                                    acc += wmod[o, c, u, v] * x[b, c, ii, jj]
                    out[b, o, i, j] = acc + (bias[o] if bias is not None else 0.0)
    return out


def upsample_oracle(x):
    """Scalar bilinear 2x, half-pixel centres, source coordinate clamped to the image."""
    x = np.asarray(x, dtype=np.float64)
    B, C, H, W = x.shape

    def taps(n_in, i):
        s = max((i + 0.5) / 2 - 0.5, 0.0)
        i0 = min(int(np.floor(s)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        return i0, i1, s - i0

    out = np.zeros((B, C, 2 * H, 2 * W))
    for i in range(2 * H):
        r0, r1, fr = taps(H, i)
        for j in range(2 * W):
            c0, c1, fc = taps(W, j)
            top = x[:, :, r0, c0] * (1 - fc) + x[:, :, r0, c1] * fc
            bot = x[:, :, r1, c0] * (1 - fc) + x[:, :, r1, c1] * fc
            out[:, :, i, j] = top * (1 - fr) + bot * fr
    return out


def test_modulated_conv_hand_example():
    x = torch.arange(25, dtype=torch.float64).reshape(1, 1, 5, 5)
    w = torch.ones(1, 1, 3, 3, dtype=torch.float64)
    out = modulated_conv(x, w, None, torch.tensor([2.0], dtype=torch.float64), demodulate=True, eps=1e-30)
    box = torch.nn.functional.conv2d(x, w, padding=1)
    torch.testing.assert_close(out, box / 3.0, rtol=1e-12, atol=1e-12)


def test_unit_style_without_demod_is_plain_conv():
    torch.manual_seed(1)
    x = torch.randn(2, 3, 5, 5, dtype=torch.float64)
    w = torch.randn(4, 3, 3, 3, dtype=torch.float64)
    b = torch.randn(4, dtype=torch.float64)
    out = modulated_conv(x, w, b, torch.ones(3, dtype=torch.float64), demodulate=False)
    torch.testing.assert_close(out, torch.nn.functional.conv2d(x, w, b, padding=1))


@pytest.mark.parametrize("demodulate", [True, False])
@pytest.mark.parametrize("kernel", [1, 3])
def test_modulated_conv_matches_loop_oracle(demodulate, kernel):
    torch.manual_seed(2)
    x = torch.randn(2, 2, 4, 4, dtype=torch.float64)
    w = torch.randn(3, 2, kernel, kernel, dtype=torch.float64)
    b = torch.randn(3, dtype=torch.float64)
    s = torch.randn(2, 2, dtype=torch.float64) + 1.5
    out = modulated_conv(x, w, b, s, demodulate=demodulate).numpy()
    ref = conv_oracle(x.numpy(), w.numpy(), b.numpy(), s.numpy(), demodulate)
    assert np.abs(out - ref).max() / np.abs(ref).max() <= 1e-6


def test_modulated_conv_rejects_bad_style():
    x = torch.randn(1, 3, 4, 4)
    with pytest.raises(InvalidArgument):
        modulated_conv(x, torch.randn(2, 3, 3, 3), None, torch.ones(2))
    with pytest.raises(InvalidArgument):
        modulated_conv(x, torch.randn(2, 3, 2, 2), None, torch.ones(3))
    with pytest.raises(InvalidArgument):
        modulated_conv(x, torch.randn(2, 3, 3, 3), None, torch.ones(3), eps=0.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.05, 20.0))
def test_demodulated_filters_have_unit_norm(seed, scale):
    # a one-hot input at the centre reads out each effective filter tap by tap
    g = torch.Generator().manual_seed(seed)
    w = torch.randn(3, 2, 3, 3, generator=g, dtype=torch.float64)
    s = (torch.rand(2, generator=g, dtype=torch.float64) + 0.1) * scale
    total = torch.zeros(3, dtype=torch.float64)
    for c in range(2):
        x = torch.zeros(1, 2, 3, 3, dtype=torch.float64)
        for u in range(3):
            for v in range(3):
                x.zero_()
                x[0, c, u, v] = 1.0
                total += modulated_conv(x, w, None, s)[0, :, 1, 1] ** 2
    # squared norm is S / (S + eps) with S the modulated filter energy
    energy = (w * s[None, :, None, None]).pow(2).sum(dim=(1, 2, 3))
    torch.testing.assert_close(total, energy / (energy + 1e-8), rtol=1e-9, atol=1e-12)


def test_upsample_constant_and_single_pixel():
    c = torch.full((1, 2, 3, 3), 0.7)
    torch.testing.assert_close(upsample2x(c), torch.full((1, 2, 6, 6), 0.7))
    out = upsample2x(torch.tensor([[[[5.0]]]]))
    assert out.shape == (1, 1, 2, 2) and torch.all(out == 5.0)


def test_upsample_matches_scalar_oracle():
    torch.manual_seed(3)
    x = torch.randn(2, 3, 4, 4, dtype=torch.float64)
    np.testing.assert_allclose(upsample2x(x).numpy(), upsample_oracle(x.numpy()), rtol=1e-12, atol=1e-12)


def test_equalized_linear_cases():
    w = torch.randn(3, 5, dtype=torch.float64)
    b = torch.randn(3, dtype=torch.float64)
    torch.testing.assert_close(equalized_linear(torch.zeros(5, dtype=torch.float64), w, b), b)
    x = torch.tensor([1.5, -2.0], dtype=torch.float64)
    eye = torch.eye(1, dtype=torch.float64)
    assert equalized_linear(x[:1], eye, torch.zeros(1, dtype=torch.float64)).item() == 1.5
    with pytest.raises(InvalidArgument):
        equalized_linear(torch.zeros(4), torch.zeros(3, 5), None)


def test_equalized_linear_matches_loop_oracle():
    torch.manual_seed(4)
    x = torch.randn(7, dtype=torch.float64)
    w = torch.randn(4, 7, dtype=torch.float64)
    b = torch.randn(4, dtype=torch.float64)
    lr = 0.01
    ref = [sum(w[o, i].item() * x[i].item() for i in range(7)) * lr / np.sqrt(7) + b[o].item() for o in range(4)]
    out = equalized_linear(x, w, b, lr).numpy()
    np.testing.assert_allclose(out, ref, rtol=1e-6)


def test_primitive_gradients_match_finite_differences():
    torch.manual_seed(5)
    d = dict(dtype=torch.float64)
    x = torch.randn(2, 3, 4, 4, **d, requires_grad=True)
    w = torch.randn(2, 3, 3, 3, **d, requires_grad=True)
    b = torch.randn(2, **d, requires_grad=True)
    s = (torch.rand(2, 3, **d) + 0.5).requires_grad_(True)
    proj = torch.randn(2, 2, 4, 4, **d)
    for demod in (True, False):
        err = check_grads(lambda: (modulated_conv(x, w, b, s, demod) * proj).sum(), [x, w, b, s])
        assert err < 1e-4

    v = torch.randn(5, **d, requires_grad=True)
    lw = torch.randn(3, 5, **d, requires_grad=True)
    lb = torch.randn(3, **d, requires_grad=True)
    lp = torch.randn(3, **d)
    assert check_grads(lambda: (leaky_relu(equalized_linear(v, lw, lb, 0.01)) * lp).sum(), [v, lw, lb]) < 1e-4

    u = torch.randn(1, 2, 3, 3, **d, requires_grad=True)
    up = torch.randn(1, 2, 6, 6, **d)
    assert check_grads(lambda: (upsample2x(u) * up).sum(), [u]) < 1e-4

    m = torch.randn(3, 2, 2, 2, **d, requires_grad=True)
    mp = torch.randn(3, 3, 2, 2, **d)
    assert check_grads(lambda: (minibatch_stddev(m) * mp).sum(), [m]) < 1e-4


def test_primitives_deterministic():
    torch.manual_seed(6)
    x, w, s = torch.randn(2, 3, 4, 4), torch.randn(2, 3, 3, 3), torch.rand(3) + 0.5
    assert torch.equal(modulated_conv(x, w, None, s), modulated_conv(x, w, None, s))
    assert torch.equal(upsample2x(x), upsample2x(x))
