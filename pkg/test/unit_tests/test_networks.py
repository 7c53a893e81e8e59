#!/usr/bin/env python3

import numpy as np
import pytest

from adgan import tensor as T
from adgan.attributes import AttributeLabel, AttributeSpace, encode_code
from adgan.errors import ShapeError
from adgan.networks import ModelBundle, NetworkConfig, ParamSet, audit_report
from adgan.optim import kaiming_init


@pytest.fixture(scope="module")
def bundle32():
    cfg = NetworkConfig(resolution=32, base_channels=4, d_z=256, n_res_blocks=1)
    return ModelBundle(AttributeSpace(4, 2, 2), cfg, np.random.default_rng(0))


def _img(seed, r=32, n=None):
    shape = (3, r, r) if n is None else (n, 3, r, r)
    return T.const(np.random.default_rng(seed).uniform(-1.0, 1.0, shape))


def test_generator_shape_and_range(bundle32):
    out = bundle32.G(_img(0), T.const(np.random.default_rng(1).standard_normal(256)))
    assert out.shape == (3, 32, 32)
    assert np.all(np.abs(out.values) <= 1.0)


def test_generator_depends_on_z(bundle32):
    x = _img(2)
    rng = np.random.default_rng(3)
    a = bundle32.G(x, T.const(rng.standard_normal(256))).values
    b = bundle32.G(x, T.const(rng.standard_normal(256))).values
    assert not np.array_equal(a, b)


def test_generator_is_z_independent_when_adain_affines_are_zero():
    cfg = NetworkConfig(resolution=16, base_channels=2, d_z=4, n_res_blocks=1)
    nets = ModelBundle(AttributeSpace(2, 2, 1), cfg, np.random.default_rng(4))
    for name, p in nets.G.params.items():
        if "/adain_" in name and name.endswith("/w"):
            p.values[...] = 0.0
    x = _img(5, r=16)
    a = nets.G(x, T.const(np.ones(4))).values
    b = nets.G(x, T.const(-3.0 * np.ones(4))).values
    np.testing.assert_array_equal(a, b)


def test_generator_rejects_wrong_embedding(bundle32):
    with pytest.raises(ShapeError):
        bundle32.G(_img(6), T.const(np.zeros(255)))


def test_encoder_shape_determinism_and_distinctness(bundle32):
    x = _img(7)
    a, b = bundle32.E(x).values, bundle32.E(x).values
    assert a.shape == (256,)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, bundle32.E(_img(8)).values)


def test_disentangler_zero_noise(bundle32):
    space = bundle32.space
    rng = np.random.default_rng(9)
    lb = AttributeLabel(1, 0, 1)
    code = T.const(encode_code(lb, space, rng, zero_noise=True))
    assert code.shape == (17, 32, 32)
    a, b = bundle32.F(code).values, bundle32.F(code).values
    assert a.shape == (256,)
    np.testing.assert_array_equal(a, b)
    other = bundle32.F(T.const(encode_code(AttributeLabel(3, 1, 0), space, rng, zero_noise=True))).values
    assert not np.array_equal(a, other)


def test_discriminator_contract(bundle32):
    logits, feats = bundle32.D(_img(10, n=2))
    assert logits.shape == (2, 16)
    assert feats.shape == (2, *bundle32.D.feature_shape) == (2, 16, 2, 2)
    p = 1.0 / (1.0 + np.exp(-logits.values))
    assert np.all((p > 0) & (p < 1))


def test_batched_and_single_agree(bundle32):
    xs = _img(11, n=3)
    z = T.const(np.random.default_rng(12).standard_normal((3, 256)))
    batched = bundle32.G(xs, z).values
    single = bundle32.G(T.const(xs.values[1]), T.const(z.values[1])).values
    np.testing.assert_allclose(batched[1], single, atol=1e-12)


def test_parameters_are_unique_and_named(bundle32):
    params = bundle32.named_parameters()
    assert all(name.split("/")[0] in "GEFD" for name in params)
    assert len({id(p) for p in params.values()}) == len(params)


def test_single_model_serves_every_age_group(bundle32):
    # no tensor is sized by, or dedicated to, one age group
    for name, p in bundle32.named_parameters().items():
        assert "age" not in name
    assert bundle32.F.params["conv0/w"].shape[1] == bundle32.space.code_channels


def test_paramset_rejects_duplicates():
    ps = ParamSet("X")
    ps.register("w", kaiming_init((2,), 1, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        ps.register("w", kaiming_init((2,), 1, np.random.default_rng(0)))


def test_resolution_must_be_multiple_of_16():
    with pytest.raises(ShapeError):
        NetworkConfig(resolution=40)


def test_audit_report_totals(tiny_bundle):
    text = audit_report(tiny_bundle)
    total = sum(p.size for p in tiny_bundle.named_parameters().values())
    assert f"{total:,}" in text
    assert "G/down0/w" in text and "F/proj/b" in text
