#!/usr/bin/env python3

import numpy as np
import pytest
from numpy.testing import assert_allclose

from adgan import tensor as T
from adgan.attributes import encode_codes
from adgan.data import sample_batch
from adgan.errors import ConfigError
from adgan.objectives import (
    LossWeights,
    dis_loss,
    discriminator_objective,
    fm_loss,
    gan_loss_d,
    gan_loss_g,
    generator_objective,
    recon_loss,
    stage1_objective,
    stage2_objective,
    style_transfer,
)
from adgan.tensor import Tape, backward


@pytest.fixture
def batch(tiny_dataset):
    return sample_batch(tiny_dataset, 3, np.random.default_rng(0), workers=1)


# ── individual terms ─────────────────────────────────────────────────────
def test_gan_loss_d_values():
    assert_allclose(gan_loss_d(T.const([0.0]), T.const([0.0])).item(), 2.0 * np.log(2.0))
    assert gan_loss_d(T.const([40.0]), T.const([-40.0])).item() < 1e-15
    a = 1.7
    assert_allclose(gan_loss_d(T.const([a]), T.const([-a])).item(), 2.0 * np.logaddexp(0.0, -a))


def test_gan_loss_g_values():
    assert_allclose(gan_loss_g(T.const([0.0])).item(), np.log(0.5))
    assert_allclose(gan_loss_g(T.const([0.0]), non_saturating=True).item(), np.log(2.0))
    stable = gan_loss_g(T.const([20.0])).item()
    assert np.isfinite(stable) and stable <= -20.0


def test_recon_loss_values():
    x = T.const(np.random.default_rng(0).standard_normal((2, 3)))
    assert recon_loss(x, x).item() == 0.0
    assert_allclose(recon_loss(T.const([1.0, 2.0]), T.const([0.0, 0.0])).item(), 1.5)
    a, b = np.array([0.3, -1.0]), np.array([2.0, 0.5])
    assert recon_loss(T.const(a), T.const(b)).item() == recon_loss(T.const(-a), T.const(-b)).item()


def test_fm_loss_values():
    assert_allclose(fm_loss(T.const([1.0, 1.0]), T.const([0.0, 3.0])).item(), 1.5)
    a, b = T.const([0.2, 4.0]), T.const([-1.0, 2.5])
    assert fm_loss(a, b).item() == fm_loss(b, a).item()


def test_dis_loss_values():
    img = np.zeros((2, 3, 4, 4))
    z = np.zeros((2, 5))
    assert dis_loss(T.const(img), T.const(img), T.const(z), T.const(z)).item() == 0.0
    out = dis_loss(T.const(img), T.const(img + 0.2), T.const(z), T.const(z - 0.1), beta=1.0)
    assert_allclose(out.item(), 0.3)
    doubled = dis_loss(T.const(img), T.const(img + 0.2), T.const(z), T.const(z - 0.1), beta=2.0)
    assert_allclose(doubled.item() - out.item(), 0.1)


def test_negative_weight_is_a_config_error():
    with pytest.raises(ConfigError, match="weights.lambda2"):
        LossWeights(lambda2=-1.0)


# ── stage 1 ──────────────────────────────────────────────────────────────
def test_zero_weights_reduce_to_adversarial_term(batch, tiny_bundle):
    w = LossWeights(lambda1=0.0, lambda2=0.0)
    losses = stage1_objective(batch, tiny_bundle, w)
    assert set(losses.components) == {"gan_g"}
    assert losses.totals["loss_GE"].item() == losses.components["gan_g"]


def _param_grads(nets, build):
    params = nets.named_parameters()
    with Tape() as tape:
        loss = build()
    backward(loss, tape, params=list(params.values()))
    grads = {name: p.grad.copy() for name, p in params.items()}
    for p in params.values():
        p.grad = None
    return grads


def _bitwise_equal(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def test_zero_recon_weight_matches_loss_without_recon(batch, tiny_bundle):
    nets = tiny_bundle
    w = LossWeights(lambda1=0.0, lambda2=0.5)

    def weighted():
        return generator_objective(batch, nets, w, style_transfer(batch, nets)).totals["loss_GE"]

    def without_recon():
        x_hat = style_transfer(batch, nets)
        fake_logits, feat_fake = nets.D(x_hat)
        gan = gan_loss_g(T.gather(fake_logits, batch.t_t(nets.space)))
        _, feat_style = nets.D(T.const(batch.x_t))
        return T.add(gan, T.scale(fm_loss(feat_fake, T.detach(feat_style)), 0.5))

    zeroed = _param_grads(nets, weighted)
    assert _bitwise_equal(zeroed, _param_grads(nets, without_recon))
    with_recon = _param_grads(nets, lambda: generator_objective(
        batch, nets, LossWeights(lambda1=0.1, lambda2=0.5), style_transfer(batch, nets)).totals["loss_GE"])
    assert not _bitwise_equal(zeroed, with_recon)


def test_generator_objective_matches_straight_line_reference(batch, tiny_bundle):
    nets, space = tiny_bundle, tiny_bundle.space
    w = LossWeights(lambda1=0.1, lambda2=1.0)
    got = generator_objective(batch, nets, w, style_transfer(batch, nets)).totals["loss_GE"].item()

    x_i, x_t = T.const(batch.x_i), T.const(batch.x_t)
    x_hat = nets.G(x_i, nets.E(x_t))
    logits, feat_fake = nets.D(x_hat)
    f = logits.values[np.arange(len(batch)), batch.t_t(space)]
    gan = np.mean(np.log1p(-1.0 / (1.0 + np.exp(-f))))
    recon = np.mean(np.abs(batch.x_i - nets.G(x_i, nets.E(x_i)).values))
    fm = np.mean(np.abs(feat_fake.values - nets.D(x_t)[1].values))
    assert_allclose(got, gan + 0.1 * recon + fm, rtol=0, atol=1e-12)


def test_discriminator_loss_does_not_reach_generator(batch, tiny_bundle):
    g_params = list(tiny_bundle.G.params) + list(tiny_bundle.E.params)
    with Tape() as tape:
        loss_d = discriminator_objective(batch, tiny_bundle, style_transfer(batch, tiny_bundle))
    backward(loss_d, tape, params=g_params)
    assert all(not p.grad.any() for p in g_params)
    assert any(p.grad is not None and p.grad.any() for p in tiny_bundle.D.params)
    for p in list(tiny_bundle.D.params) + g_params:
        p.grad = None


# ── stage 2 ──────────────────────────────────────────────────────────────
def test_stage2_with_encoder_embeddings_equals_stage1(batch, tiny_bundle):
    nets = tiny_bundle
    w = LossWeights(lambda1=0.1, lambda2=1.0, lambda3=0.0)
    stage1 = generator_objective(batch, nets, w, style_transfer(batch, nets)).totals["loss_GE"].item()
    z_t, z_i = nets.E(T.const(batch.x_t)), nets.E(T.const(batch.x_i))
    stage2 = stage2_objective(batch, nets, w, np.random.default_rng(0), z_f=z_t, z_f_self=z_i)
    assert_allclose(stage2.totals["loss_F"].item(), stage1, rtol=0, atol=1e-12)


def test_zero_feature_weight_matches_stage2_loss_without_feature_matching(batch, tiny_bundle):
    nets, space = tiny_bundle, tiny_bundle.space
    w = LossWeights(lambda1=0.1, lambda2=0.0, lambda3=1.0, beta=1.0)
    code_t = T.const(encode_codes(batch.s_t, space, np.random.default_rng(0), zero_noise=True))
    code_i = T.const(encode_codes(batch.s_i, space, np.random.default_rng(0), zero_noise=True))

    def weighted():
        z_f, z_self = nets.F(code_t), nets.F(code_i)
        return stage2_objective(batch, nets, w, np.random.default_rng(0),
                                z_f=z_f, z_f_self=z_self).totals["loss_F"]

    def without_fm():
        z_f, z_self = nets.F(code_t), nets.F(code_i)
        x_i, x_t = T.const(batch.x_i), T.const(batch.x_t)
        x_hat_f = nets.G(x_i, z_f)
        fake_logits, _ = nets.D(x_hat_f)
        gan = gan_loss_g(T.gather(fake_logits, batch.t_t(space)))
        recon = recon_loss(x_i, nets.G(x_i, z_self))
        z_e = T.detach(nets.E(x_t))
        x_hat_e = T.detach(nets.G(x_i, z_e))
        dis = dis_loss(x_hat_e, x_hat_f, z_e, z_f, 1.0)
        return T.add(T.add(gan, T.scale(recon, 0.1)), dis)

    zeroed = _param_grads(nets, weighted)
    assert _bitwise_equal(zeroed, _param_grads(nets, without_fm))
    assert any(g.any() for name, g in zeroed.items() if name.startswith("F/"))


def test_stage2_zero_noise_is_repeatable(batch, tiny_bundle):
    w = LossWeights()
    a = stage2_objective(batch, tiny_bundle, w, np.random.default_rng(1), zero_noise=True).record()
    b = stage2_objective(batch, tiny_bundle, w, np.random.default_rng(2), zero_noise=True).record()
    assert a == b
    assert set(a) == {"loss_F", "gan_g", "recon", "fm", "dis"}


def test_embedding_term_converges_to_coordinatewise_median():
    rng = np.random.default_rng(3)
    z_e = rng.standard_normal((64, 4))
    zeros = T.const(np.zeros((64, 3, 2, 2)))
    free = T.Tensor(np.full(4, 3.0), requires_grad=True)
    step = 0.5
    for _ in range(1500):
        with Tape() as tape:
            z_f = T.add(T.const(np.zeros((64, 4))), free)
            loss = dis_loss(zeros, zeros, T.const(z_e), z_f, beta=1.0)
        backward(loss, tape)
        free.values -= step * np.sign(free.grad)
        step *= 0.99

    ordered = np.sort(z_e, axis=0)
    lo, hi = ordered[31], ordered[32]
    gap = np.maximum(0.0, np.maximum(lo - free.values, free.values - hi))
    assert np.all(gap < 1e-2)
