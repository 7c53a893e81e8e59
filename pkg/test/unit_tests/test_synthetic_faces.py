#!/usr/bin/env python3

import numpy as np
import pytest

from adgan.attributes import AttributeLabel, AttributeSpace
from adgan.utils.synthetic_faces import (
    HUE_GAP,
    HUE_TABLE,
    SyntheticOracle,
    SyntheticSpec,
    decode_measurements,
    oracle_classify,
    synth_generate,
)

SPEC = SyntheticSpec(resolution=32, n_a=3, n_g=2, n_c=2)


def test_shape_and_range():
    img = synth_generate(AttributeLabel(2, 1, 1), SPEC, np.random.default_rng(0))
    assert img.shape == (3, 32, 32)
    assert img.dtype == np.float64
    assert img.min() >= -1.0 and img.max() <= 1.0


def test_oracle_recovers_every_label():
    for lb in SPEC.space.labels():
        for seed in range(100):
            img = synth_generate(lb, SPEC, np.random.default_rng(seed))
            assert oracle_classify(img, SPEC.space) == lb, (lb, seed)


@pytest.mark.slow
def test_oracle_recovers_largest_space_at_64px():
    spec = SyntheticSpec(resolution=64, n_a=5, n_g=2, n_c=6)
    oracle = SyntheticOracle(spec.space)
    for lb in spec.space.labels():
        for seed in range(5):
            assert oracle(synth_generate(lb, spec, np.random.default_rng(seed))) == lb


def test_different_seeds_render_differently_but_decode_alike():
    lb = AttributeLabel(1, 0, 1)
    first = synth_generate(lb, SPEC, np.random.default_rng(0))
    other = next(img for img in (synth_generate(lb, SPEC, np.random.default_rng(s)) for s in range(1, 20))
                 if not np.array_equal(img, first))
    assert oracle_classify(first, SPEC.space) == oracle_classify(other, SPEC.space) == lb


def test_uniform_noise_is_unclassifiable():
    noise = np.random.default_rng(5).uniform(-1.0, 1.0, (3, 32, 32))
    assert decode_measurements(noise) is None
    assert oracle_classify(noise, SPEC.space) is None


def test_flat_gray_is_unclassifiable():
    assert oracle_classify(np.zeros((3, 32, 32)), SPEC.space) is None


def test_small_hue_shift_keeps_race():
    shifted = SyntheticSpec(resolution=32, n_a=3, n_g=2, n_c=2, hue_shift=0.06)
    for lb in shifted.space.labels():
        img = synth_generate(lb, shifted, np.random.default_rng(1))
        assert oracle_classify(img, shifted.space).race == lb.race


def test_race_hues_are_separated_by_the_gap():
    gaps = np.diff(HUE_TABLE + (1.0,))
    np.testing.assert_allclose(gaps, HUE_GAP)
    # red and yellow for the two-race space
    assert HUE_TABLE[:2] == (0.0, 1.0 / 6.0)


def test_spec_limits():
    with pytest.raises(ValueError):
        SyntheticSpec(n_c=7)
    with pytest.raises(ValueError):
        SyntheticSpec(resolution=8)


def test_oracle_rejects_wrong_layout():
    with pytest.raises(ValueError):
        oracle_classify(np.zeros((32, 32, 3)), AttributeSpace(3, 2, 2))
