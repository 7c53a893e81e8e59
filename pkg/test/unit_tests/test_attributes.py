#!/usr/bin/env python3

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from adgan.attributes import (
    AttributeLabel,
    AttributeSpace,
    bin_age_morph,
    bin_age_utk,
    encode_code,
    flat_index,
    label_from_index,
    parse_attribute_overrides,
    resolve_attribute,
)
from adgan.errors import LabelError

SPACE = AttributeSpace(4, 2, 2, 32, 32)


def test_flat_index_examples():
    assert flat_index(AttributeLabel(0, 0, 0), SPACE) == 0
    assert flat_index(AttributeLabel(1, 0, 1), SPACE) == 5
    assert flat_index(AttributeLabel(3, 1, 1), SPACE) == SPACE.n - 1


def test_flat_index_is_a_bijection():
    seen = [flat_index(lb, SPACE) for lb in SPACE.labels()]
    assert seen == list(range(SPACE.n))
    for t in range(SPACE.n):
        assert flat_index(label_from_index(t, SPACE), SPACE) == t


def test_out_of_range_label_lists_valid_ranges():
    with pytest.raises(LabelError, match=r"gender=2 outside the trained space .*gender ∈ \[0, 2\)"):
        flat_index(AttributeLabel(0, 2, 0), SPACE)


def test_code_invariants_for_every_label():
    rng = np.random.default_rng(0)
    for lb in SPACE.labels():
        code = encode_code(lb, SPACE, rng)
        assert code.shape == (17, 32, 32)
        t = flat_index(lb, SPACE)
        onehot = code[: SPACE.n]
        assert np.all(onehot[t] == 1.0)
        assert not np.delete(onehot, t, axis=0).any()
        assert onehot.sum() == 32 * 32


def test_code_noise_differs_but_one_hot_does_not():
    rng = np.random.default_rng(1)
    lb = AttributeLabel(2, 1, 0)
    a, b = encode_code(lb, SPACE, rng), encode_code(lb, SPACE, rng)
    assert_array_equal(a[: SPACE.n], b[: SPACE.n])
    assert not np.array_equal(a[SPACE.n], b[SPACE.n])


def test_zero_noise_code_does_not_advance_rng():
    rng = np.random.default_rng(2)
    state = rng.bit_generator.state
    code = encode_code(AttributeLabel(0, 0, 1), SPACE, rng, zero_noise=True)
    assert not code[SPACE.n].any()
    assert rng.bit_generator.state == state


@pytest.mark.parametrize("age, group", [(16, 0), (30, 0), (40, 1), (41, 2), (50, 2), (77, 3)])
def test_morph_binning(age, group):
    assert bin_age_morph(age) == group


@pytest.mark.parametrize("age, group", [(3, 0), (5, 0), (6, 1), (30, 4), (71, 9), (116, 9), (200, 9)])
def test_utk_binning(age, group):
    assert bin_age_utk(age) == group


def test_negative_age_is_rejected():
    with pytest.raises(LabelError):
        bin_age_morph(-1)


def test_resolve_by_name_and_index():
    names = {"race": ["european", "african"], "gender": ["male", "female"]}
    assert resolve_attribute("race", "African", SPACE, names) == 1
    assert resolve_attribute("gender", "0", SPACE, names) == 0
    with pytest.raises(LabelError, match="known names: european, african"):
        resolve_attribute("race", "martian", SPACE, names)


def test_parse_overrides():
    names = {"race": ["european", "african"], "gender": ["male", "female"]}
    got = parse_attribute_overrides(["race=african", "gender=female", "age=3"], SPACE, names)
    assert got == {"race": 1, "gender": 1, "age": 3}
    with pytest.raises(LabelError):
        parse_attribute_overrides(["age=4"], SPACE, names)
    with pytest.raises(LabelError):
        parse_attribute_overrides(["race"], SPACE, names)
