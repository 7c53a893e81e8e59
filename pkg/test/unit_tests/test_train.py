#!/usr/bin/env python3

import numpy as np
import pytest

from adgan.checkpoint import checkpoint_load, decode_checkpoint, encode_checkpoint, tensors_equal
from adgan.config import SpaceConfig
from adgan.data import BatchSampler, SyntheticDataset, sample_batch
from adgan.errors import FrozenParameterError, NumericError
from adgan.objectives import LossWeights
from adgan.train import Trainer, _assert_no_grad, frozen, restore_bundle, train
from adgan.utils.synthetic_faces import SyntheticSpec


def _snapshot(param_set):
    return {k: v.values.copy() for k, v in param_set.items()}


def _same(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def test_stage1_step_leaves_disentangler_untouched(tiny_config, tiny_dataset):
    trainer = Trainer(tiny_config)
    before = {k: _snapshot(ps) for k, ps in trainer.bundle.param_sets().items()}
    rec = trainer.stage1_step(sample_batch(tiny_dataset, 2, trainer.rng, workers=1))
    after = {k: _snapshot(ps) for k, ps in trainer.bundle.param_sets().items()}
    assert _same(before["F"], after["F"])
    for net in "GED":
        assert not _same(before[net], after[net])
    assert {"loss_D", "loss_GE", "gan_g", "recon", "fm"} <= set(rec)
    assert all(p.requires_grad for p in trainer.bundle.F.params)


@pytest.mark.slow
def test_stage2_freezes_generator_encoder_discriminator(tiny_config, tiny_dataset):
    trainer = Trainer(tiny_config.replace(stage2_iters=100))
    trainer.run(tiny_dataset, progress=False, stop_at=tiny_config.stage1_iters)
    frozen_before = {net: _snapshot(trainer.bundle.param_sets()[net]) for net in "GED"}
    f_before = _snapshot(trainer.bundle.F.params)

    trainer.run(tiny_dataset, progress=False)

    assert trainer.stage2_done == 100
    for net in "GED":
        assert _same(frozen_before[net], _snapshot(trainer.bundle.param_sets()[net]))
    f_after = _snapshot(trainer.bundle.F.params)
    assert any(not np.array_equal(f_before[k], f_after[k]) for k in f_before)


@pytest.mark.slow
def test_stage2_distillation_loss_halves_on_a_twenty_image_set(tiny_config):
    # 1×2×2 labels, five faces each; only the adversarial and distillation terms
    spec = SyntheticSpec(16, 1, 2, 2, samples_per_label=5, seed=11)
    cfg = tiny_config.replace(
        space=SpaceConfig(1, 2, 2), labels={}, batch_size=10, zero_noise=True,
        weights=LossWeights(lambda1=0.0, lambda2=0.0), stage1_iters=0, stage2_iters=500,
    )
    dataset = SyntheticDataset(spec)
    assert len(dataset) == 20
    trainer = Trainer(cfg)
    with BatchSampler(dataset, workers=1) as sampler:
        records = [trainer.stage2_step(sampler.sample(10, trainer.rng)) for _ in range(500)]
    assert set(records[-1]) == {"loss_F", "gan_g", "dis"}
    dis = [r["dis"] for r in records]
    assert np.mean(dis[-25:]) < 0.5 * np.mean(dis[:5])


def test_same_seed_same_metrics(tiny_config, tiny_dataset):
    a = Trainer(tiny_config)
    a.run(tiny_dataset, progress=False)
    b = Trainer(tiny_config)
    b.run(tiny_dataset, progress=False)
    assert a.metrics.lines() == b.metrics.lines()
    assert len(a.metrics.lines()) > 0


def test_resume_is_bit_exact(tiny_config, tiny_dataset):
    straight = Trainer(tiny_config)
    full = straight.run(tiny_dataset, progress=False).checkpoint

    first = Trainer(tiny_config)
    half = first.run(tiny_dataset, progress=False, stop_at=2).checkpoint
    assert half.counters() == {"iteration": 2, "stage1_done": 2, "stage2_done": 0}

    resumed = Trainer.from_checkpoint(decode_checkpoint(encode_checkpoint(half)))
    end = resumed.run(tiny_dataset, progress=False).checkpoint

    assert tensors_equal(full.tensors, end.tensors)
    assert full.header["rng"] == end.header["rng"]
    assert straight.metrics.lines() == first.metrics.lines() + resumed.metrics.lines()


def test_zero_iterations_checkpoint_is_the_initialization(tiny_config, tiny_dataset):
    cfg = tiny_config.replace(stage1_iters=0, stage2_iters=0)
    trainer = Trainer(cfg)
    init = trainer.bundle.snapshot()
    ckpt = trainer.run(tiny_dataset, progress=False).checkpoint
    assert tensors_equal(init, ckpt.params())
    assert not any(v.any() for v in ckpt.optimizer_state().values())


def test_train_writes_checkpoints_and_metrics(tmp_path, tiny_config, tiny_dataset):
    cfg = tiny_config.replace(checkpoint_interval=2)
    result = train(cfg, tiny_dataset, output_dir=str(tmp_path), progress=False)
    ckpts = sorted(p.name for p in (tmp_path / "checkpoints").iterdir())
    assert ckpts == ["final.adgn", "iter_0000002.adgn", "iter_0000004.adgn"]
    lines = (tmp_path / "metrics.tsv").read_text().splitlines()
    assert lines == result.metrics.lines()
    assert lines[0].startswith("1\ts1/")

    restored = restore_bundle(checkpoint_load(str(tmp_path / "checkpoints" / "final.adgn")))
    assert tensors_equal(restored.snapshot(), result.checkpoint.params())


def test_resume_via_train_appends_metrics(tmp_path, tiny_config, tiny_dataset):
    out = str(tmp_path)
    train(tiny_config.replace(checkpoint_interval=2), tiny_dataset, output_dir=out,
          progress=False, stop_at=2)
    first = (tmp_path / "metrics.tsv").read_text()
    result = train(tiny_config, tiny_dataset, output_dir=out, progress=False,
                   resume=str(tmp_path / "checkpoints" / "iter_0000002.adgn"))
    assert result.checkpoint.counters()["iteration"] == 5
    assert (tmp_path / "metrics.tsv").read_text().startswith(first)


def test_frozen_restores_flags(tiny_bundle):
    ps = tiny_bundle.G.params
    with frozen(ps):
        assert ps.frozen
    assert all(p.requires_grad for p in ps)


def test_gradient_on_frozen_parameter_is_reported(tiny_bundle):
    p = next(iter(tiny_bundle.D.params))
    p.grad = np.ones_like(p.values)
    with pytest.raises(FrozenParameterError, match=p.name):
        _assert_no_grad([tiny_bundle.D.params])
    p.grad = None


def test_non_finite_loss_names_the_op(tiny_config, tiny_dataset):
    trainer = Trainer(tiny_config)
    batch = sample_batch(tiny_dataset, 2, trainer.rng, workers=1)
    batch.x_i[0, 0, 0, 0] = np.nan
    with pytest.raises(NumericError, match="loss_D is not finite at iteration 1; first non-finite tensor: op"):
        trainer.stage1_step(batch)
