import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from styletune.edit import EditSpec, attribute_direction, cross_apply, extrapolate, load_latent, save_latent
from styletune.errors import InvalidArgument
from styletune.generator import Generator


def codes(seed=0, dim=8):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(dim, generator=g), torch.randn(dim, generator=g)


def test_extrapolate_endpoints_exact():
    ws, w = codes()
    assert torch.equal(extrapolate(EditSpec(ws, w, 0.0)), ws)
    assert torch.equal(extrapolate(EditSpec(ws, w, 1.0)), w)


def test_alpha_two():
    ws, w = codes(1)
    torch.testing.assert_close(extrapolate(EditSpec(ws, w, 2.0)), 2 * w - ws)


def test_midpoint():
    ws, w = codes(2)
    torch.testing.assert_close(extrapolate(EditSpec(ws, w, 0.5)), (ws + w) / 2)


@settings(max_examples=40, deadline=None)
@given(a1=st.floats(-5, 5), a2=st.floats(-5, 5), seed=st.integers(0, 100))
def test_extrapolate_is_affine(a1, a2, seed):
    ws, w = (t.double() for t in codes(seed))
    lhs = extrapolate(EditSpec(ws, w, a1)) + extrapolate(EditSpec(ws, w, a2))
    rhs = extrapolate(EditSpec(ws, w, a1 + a2)) + ws
    torch.testing.assert_close(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_edit_spec_errors():
    ws, w = codes()
    with pytest.raises(InvalidArgument):
        EditSpec(ws, w[:4], 1.0)
    with pytest.raises(InvalidArgument):
        EditSpec(ws, w, float("nan"))


def test_cross_apply(small_cfg):
    torch.manual_seed(0)
    g = Generator(small_cfg)
    ws = g.map_latent(torch.randn(1, small_cfg.z_dim))[0]
    w = ws + torch.randn_like(ws)
    tr = cross_apply(extrapolate(EditSpec(ws, w, 0.0)), g)
    assert torch.equal(tr.image, g.synthesize(ws).image)
    with pytest.raises(InvalidArgument):
        cross_apply(torch.zeros(small_cfg.w_dim + 1), g)


def test_image_continuous_in_alpha(small_cfg):
    torch.manual_seed(1)
    g = Generator(small_cfg).double()
    ws = g.map_latent(torch.randn(1, small_cfg.z_dim, dtype=torch.float64))[0]
    w = ws + torch.randn_like(ws)
    img = lambda a: cross_apply(extrapolate(EditSpec(ws, w, a)), g).image
    h = 1e-3
    for alpha in (0.0, 1.0, 2.0):
        # local Lipschitz estimate from a coarser finite-difference probe
        lip = (img(alpha + 10 * h) - img(alpha - 10 * h)).abs().max().item() / (20 * h)
        step = (img(alpha + h) - img(alpha)).abs().max().item()
        assert step <= 2 * lip * h + 1e-9


def test_latent_file_round_trip(tmp_path):
    ws, _ = codes(3, dim=13)
    save_latent(ws, tmp_path / "w.lat")
    raw = (tmp_path / "w.lat").read_bytes()
    assert raw.split(b"\n", 1)[0] == b'{"dim": 13, "dtype": "float32"}'
    assert torch.equal(load_latent(tmp_path / "w.lat"), ws)
    (tmp_path / "bad.lat").write_bytes(raw[:-4])
    with pytest.raises(InvalidArgument):
        load_latent(tmp_path / "bad.lat")


def test_attribute_direction_shape(small_cfg):
    torch.manual_seed(2)
    g = Generator(small_cfg)
    d = attribute_direction(g, n=32, seed=0)
    assert d.shape == (small_cfg.w_dim,) and torch.isfinite(d).all()
    assert torch.equal(d, attribute_direction(g, n=32, seed=0))
