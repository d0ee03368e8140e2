import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from styletune.errors import InvalidArgument
from styletune.generator import SynthesisTrace
from styletune.objectives import (
    LossReport,
    StructureLossConfig,
    adversarial_losses,
    generator_objective,
    minimax_value,
    r1_penalty,
    structure_loss,
)


def make_trace(seed, shapes=(4, 8, 16), batch=2, offset=0.0):
    g = torch.Generator().manual_seed(seed)
    outs = [torch.randn(batch, 3, r, r, generator=g, dtype=torch.float64) + offset for r in shapes]
    return SynthesisTrace(outs[-1], outs)


def test_minimax_value_at_even_odds():
    v = minimax_value(torch.zeros(4), torch.zeros(4))
    assert v.item() == pytest.approx(2 * math.log(0.5), abs=1e-7)
    assert v.item() == pytest.approx(-1.3863, abs=1e-4)


def test_adversarial_limits():
    _, g = adversarial_losses(torch.zeros(1), torch.tensor([-1e4]))
    assert g.item() > 1e3
    d, _ = adversarial_losses(torch.tensor([1e4]), torch.tensor([-1e4]))
    assert d.item() == 0.0


def test_adversarial_losses_reference_values():
    real, fake = torch.tensor([0.3, -1.2]), torch.tensor([0.5, 2.0])
    d, g = adversarial_losses(real, fake)
    sp = lambda t: math.log1p(math.exp(t))
    assert d.item() == pytest.approx((sp(0.5) + sp(2.0)) / 2 + (sp(-0.3) + sp(1.2)) / 2, rel=1e-6)
    assert g.item() == pytest.approx((sp(-0.5) + sp(-2.0)) / 2, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(base=st.floats(-3, 3), delta=st.floats(0.01, 2))
def test_minimax_improves_when_fake_logits_drop(base, delta):
    real = torch.tensor([0.2, -0.4])
    hi = minimax_value(real, torch.tensor([base, base + 0.1]))
    lo = minimax_value(real, torch.tensor([base - delta, base + 0.1 - delta]))
    assert lo > hi
    _, g_hi = adversarial_losses(real, torch.tensor([base, base + 0.1]))
    _, g_lo = adversarial_losses(real, torch.tensor([base - delta, base + 0.1 - delta]))
    assert g_lo > g_hi


def test_structure_loss_zero_for_identical_traces():
    t = make_trace(0)
    total, per = structure_loss(t, make_trace(0), StructureLossConfig(3))
    assert total.item() == 0.0 and len(per) == 3


def test_structure_loss_constant_offset():
    a, b = make_trace(1), make_trace(1, offset=0.5)
    total, per = structure_loss(a, b, StructureLossConfig(3))
    assert total.item() == pytest.approx(0.75, abs=1e-6)
    assert [p.item() for p in per] == pytest.approx([0.25] * 3, abs=1e-9)


def test_structure_loss_n1_is_first_layer_only():
    a, b = make_trace(2), make_trace(3)
    total, per = structure_loss(a, b, StructureLossConfig(1))
    assert len(per) == 1
    assert total.item() == pytest.approx((a.rgb_outputs[0] - b.rgb_outputs[0]).pow(2).mean().item())


def test_structure_loss_errors():
    with pytest.raises(InvalidArgument):
        structure_loss(make_trace(0), make_trace(0, shapes=(4, 8)), StructureLossConfig(2))
    with pytest.raises(InvalidArgument):
        structure_loss(make_trace(0), make_trace(1), StructureLossConfig(4))
    with pytest.raises(InvalidArgument):
        StructureLossConfig(0)
    with pytest.raises(InvalidArgument):
        StructureLossConfig(2, -1.0)


@settings(max_examples=30, deadline=None)
@given(s1=st.integers(0, 1000), s2=st.integers(0, 1000), n=st.integers(1, 3))
def test_structure_loss_symmetric_nonnegative(s1, s2, n):
    a, b = make_trace(s1), make_trace(s2)
    cfg = StructureLossConfig(n)
    ab, _ = structure_loss(a, b, cfg)
    ba, _ = structure_loss(b, a, cfg)
    assert ab.item() == ba.item()
    assert ab.item() >= 0
    assert (ab.item() == 0) == (s1 == s2)


def test_structure_loss_zero_iff_first_n_equal():
    a = make_trace(4)
    b = SynthesisTrace(a.image, [a.rgb_outputs[0].clone(), a.rgb_outputs[1].clone(), a.rgb_outputs[2] + 1])
    assert structure_loss(a, b, StructureLossConfig(2))[0].item() == 0
    assert structure_loss(a, b, StructureLossConfig(3))[0].item() > 0


def test_generator_objective():
    assert generator_objective(0.7, 0.75, StructureLossConfig(3, 0.0)) == 0.7
    assert generator_objective(0.7, 0.75, StructureLossConfig(3, 1.0)) == pytest.approx(1.45)
    assert StructureLossConfig().weight == 1.0 and StructureLossConfig().n == 3


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0, 10), s=st.floats(0, 5), ds=st.floats(0, 5))
def test_generator_objective_monotone(lam, s, ds):
    cfg = StructureLossConfig(3, lam)
    assert generator_objective(0.3, s + ds, cfg) >= generator_objective(0.3, s, cfg)


def test_r1_cases():
    x = torch.randn(4, 3, 8, 8, dtype=torch.float64)
    assert r1_penalty(x, lambda t: t.sum(dim=(1, 2, 3)), 0.0).item() == 0.0
    assert r1_penalty(x, lambda t: torch.zeros(t.shape[0], dtype=t.dtype) + 3.0, 5.0).item() == 0.0
    assert r1_penalty(x, lambda t: t.sum(dim=(1, 2, 3)), 2.5).item() == pytest.approx(2.5 / 2 * 3 * 8 * 8)
    with pytest.raises(InvalidArgument):
        r1_penalty(x, lambda t: t.sum(dim=(1, 2, 3)), -1.0)


def test_loss_report_fields():
    r = LossReport(1.0, 2.0, 0.75, 0.1, [0.25, 0.25, 0.25])
    d = r.to_dict()
    assert list(d) == ["d_loss", "g_adv_loss", "structure_loss", "r1_penalty", "structure_per_layer"]
    assert d["structure_loss"] == pytest.approx(sum(d["structure_per_layer"]))
