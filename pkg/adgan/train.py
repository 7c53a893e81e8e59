#!/usr/bin/env python3

"""
adgan.train
-----------
Two-stage training.

Stage 1 learns G, E and D.  Each iteration makes one D update (ascending the
GAN term) and then one G,E update with D held fixed.  Stage 2 freezes G, E
and D and trains F alone by distillation.  The stages run once each, stage 2
starting exactly when stage 1's iteration budget is spent.

A single ``numpy.random.Generator`` drives parameter init, batch draws and
code noise; its state is stored in every checkpoint, so a resumed run is
bit-identical to an uninterrupted one.

Usage
-----
>>> from adgan.config import load_config
>>> from adgan.data import dataset_from_config
>>> cfg = load_config("config.yml")
>>> result = train(cfg, dataset_from_config(cfg)[0], output_dir="runs/desk")
"""
from __future__ import annotations

import contextlib
import logging
import posixpath
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional

import numpy as np
from tqdm import tqdm

from adgan import tensor as T
from adgan.checkpoint import Checkpoint, checkpoint_load, checkpoint_save
from adgan.config import TrainConfig, config_from_dict
from adgan.data import Batch, BatchSampler, Dataset, check_all_classes
from adgan.errors import CheckpointFormatError, FrozenParameterError, NumericError
from adgan.networks import ModelBundle, ParamSet, audit_report
from adgan.objectives import (
    discriminator_objective,
    generator_objective,
    stage2_objective,
    style_transfer,
)
from adgan.optim import RmspropState, rmsprop_step
from adgan.utils.log import MetricsLog

LOGGER = logging.getLogger(__name__)

CHECKPOINT_SUFFIX = ".adgn"


# ───────────────────────────────────────────────────────────────────────────
#  Helpers
# ───────────────────────────────────────────────────────────────────────────
@contextlib.contextmanager
def frozen(*param_sets: ParamSet) -> Iterator[None]:
    """Temporarily stop gradients into *param_sets*; restores the previous flags."""
    saved = [[p.requires_grad for p in ps] for ps in param_sets]
    for ps in param_sets:
        ps.freeze()
    try:
        yield
    finally:
        for ps, flags in zip(param_sets, saved):
            for p, flag in zip(ps, flags):
                p.requires_grad = flag


def _assert_no_grad(param_sets: Iterable[ParamSet]) -> None:
    for ps in param_sets:
        for name, p in ps.items():
            if p.grad is not None and np.any(p.grad != 0):
                raise FrozenParameterError(f"gradient reached frozen parameter {name}")


def _check_finite(name: str, loss: T.Tensor, tape: T.Tape, iteration: int) -> None:
    if np.all(np.isfinite(loss.values)):
        return
    rec = tape.first_nonfinite()
    where = "no recorded tensor"
    if rec is not None:
        inputs = ", ".join(t.name or f"#{t.node_id}{t.shape}" for t in rec.inputs)
        where = f"op '{rec.op}' (output #{rec.output.node_id}{rec.output.shape}; inputs {inputs})"
    raise NumericError(f"{name} is not finite at iteration {iteration}; first non-finite tensor: {where}")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    checkpoint_path: Optional[str]
    metrics: MetricsLog


# ───────────────────────────────────────────────────────────────────────────
#  Trainer
# ───────────────────────────────────────────────────────────────────────────
class Trainer:
    """
    Owns the networks, their RMSProp states and the run's random generator.

    Parameters
    ----------
    config :
        Validated :class:`~adgan.config.TrainConfig`.
    rng :
        Defaults to ``default_rng(config.seed)``; the bundle is initialized from
        it first.
    bundle / opt_states / counters :
        Supplied when resuming (see :meth:`from_checkpoint`).
    """

    def __init__(
        self,
        config: TrainConfig,
        rng: Optional[np.random.Generator] = None,
        bundle: Optional[ModelBundle] = None,
        opt_states: Optional[Dict[str, RmspropState]] = None,
        counters: Optional[Dict[str, int]] = None,
        metrics: Optional[MetricsLog] = None,
    ):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.bundle = bundle if bundle is not None else ModelBundle(
            config.attribute_space, config.network_config, self.rng
        )
        self.dtype = np.dtype(config.dtype)
        opt = config.optimizer
        self.opt_states = opt_states if opt_states is not None else OrderedDict(
            (name, RmspropState.for_param(p, config.learning_rate, opt.rho, opt.eps))
            for name, p in self.bundle.named_parameters().items()
        )
        counters = counters or {}
        self.iteration = int(counters.get("iteration", 0))
        self.stage1_done = int(counters.get("stage1_done", 0))
        self.stage2_done = int(counters.get("stage2_done", 0))
        self.metrics = metrics if metrics is not None else MetricsLog()

    # ── construction from a checkpoint ────────────────────────────────────
    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, metrics: Optional[MetricsLog] = None) -> "Trainer":
        config = config_from_dict(ckpt.header["config"])
        rng = np.random.default_rng()
        rng.bit_generator.state = ckpt.header["rng"]
        bundle = restore_bundle(ckpt, config)
        dtype = np.dtype(config.dtype)
        acc = ckpt.optimizer_state()
        opt = config.optimizer
        states = OrderedDict()
        for name, p in bundle.named_parameters().items():
            if name not in acc:
                raise CheckpointFormatError(f"checkpoint has no optimizer state for {name}")
            states[name] = RmspropState(acc[name].astype(dtype), opt.rho, opt.eps, config.learning_rate)
        return cls(config, rng=rng, bundle=bundle, opt_states=states,
                   counters=ckpt.counters(), metrics=metrics)

    # ── updates ───────────────────────────────────────────────────────────
    def _apply(self, param_set: ParamSet) -> None:
        for name, p in param_set.items():
            rmsprop_step(p, p.grad, self.opt_states[name])
            p.grad = None

    def _batch(self, sampler: BatchSampler) -> Batch:
        batch = sampler.sample(self.config.batch_size, self.rng)
        return batch if batch.x_i.dtype == self.dtype else batch.astype(self.dtype)

    def stage1_step(self, batch: Batch) -> Dict[str, float]:
        """One D update, then one G,E update against the updated D.  F is untouched."""
        b = self.bundle
        cfg = self.config
        it = self.iteration + 1
        with frozen(b.F.params):
            with T.Tape() as tape:
                x_hat = style_transfer(batch, b)

                with T.Tape() as d_tape:
                    loss_d = discriminator_objective(batch, b, x_hat)
                _check_finite("loss_D", loss_d, d_tape, it)
                T.backward(loss_d, d_tape, params=b.D.params)
                self._apply(b.D.params)

                with frozen(b.D.params):
                    ge = generator_objective(batch, b, cfg.weights, x_hat, cfg.non_saturating)
                    loss_ge = ge.totals["loss_GE"]
                    _check_finite("loss_GE", loss_ge, tape, it)
                    T.backward(loss_ge, tape, params=list(b.G.params) + list(b.E.params))
                    _assert_no_grad([b.D.params, b.F.params])
            self._apply(b.G.params)
            self._apply(b.E.params)

        record = {"loss_D": loss_d.item(), **ge.record()}
        self.iteration = it
        self.stage1_done += 1
        for name, value in record.items():
            self.metrics.record(it, f"s1/{name}", value)
        return record

    def stage2_step(self, batch: Batch) -> Dict[str, float]:
        """One F update; G, E and D stay bit-exact."""
        b = self.bundle
        cfg = self.config
        it = self.iteration + 1
        with frozen(b.G.params, b.E.params, b.D.params):
            with T.Tape() as tape:
                losses = stage2_objective(batch, b, cfg.weights, self.rng,
                                          non_saturating=cfg.non_saturating,
                                          zero_noise=cfg.zero_noise)
                loss_f = losses.totals["loss_F"]
            _check_finite("loss_F", loss_f, tape, it)
            T.backward(loss_f, tape, params=b.F.params)
            _assert_no_grad([b.G.params, b.E.params, b.D.params])
            self._apply(b.F.params)

        record = losses.record()
        self.iteration = it
        self.stage2_done += 1
        for name, value in record.items():
            self.metrics.record(it, f"s2/{name}", value)
        return record

    # ── checkpoints ───────────────────────────────────────────────────────
    @property
    def counters(self) -> Dict[str, int]:
        return {"iteration": self.iteration, "stage1_done": self.stage1_done,
                "stage2_done": self.stage2_done}

    def checkpoint(self) -> Checkpoint:
        tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
        params = self.bundle.named_parameters()
        for name, p in params.items():
            tensors[name] = p.values.copy()
        for name in params:
            tensors[f"opt/{name}"] = self.opt_states[name].acc.copy()
        header = {
            "config": self.config.to_dict(),
            "counters": self.counters,
            "rng": self.rng.bit_generator.state,
        }
        return Checkpoint(header=header, tensors=tensors)

    # ── loop ──────────────────────────────────────────────────────────────
    def run(
        self,
        dataset: Dataset,
        output_dir: Optional[str] = None,
        progress: bool = True,
        stop_at: Optional[int] = None,
    ) -> TrainResult:
        """
        Run the remaining iterations of both stages.  *stop_at* ends the run
        early once the global iteration counter reaches it (the final
        checkpoint still records where the run stopped).
        """
        cfg = self.config
        check_all_classes(dataset)
        LOGGER.debug("parameter audit\n%s", audit_report(self.bundle))

        remaining1 = max(0, cfg.stage1_iters - self.stage1_done)
        remaining2 = max(0, cfg.stage2_iters - self.stage2_done)
        if stop_at is not None:
            budget = max(0, stop_at - self.iteration)
            remaining1 = min(remaining1, budget)
            remaining2 = min(remaining2, budget - remaining1)
        LOGGER.info("🚀  training: %d stage-1 + %d stage-2 iterations left (batch %d, lr %g)",
                    remaining1, remaining2, cfg.batch_size, cfg.learning_rate)

        last_path: Optional[str] = None
        with BatchSampler(dataset, workers=cfg.dataset.workers) as sampler, \
                tqdm(total=remaining1 + remaining2, desc="Train", unit="it", disable=not progress) as bar:
            for _ in range(remaining1):
                rec = self.stage1_step(self._batch(sampler))
                bar.set_postfix(stage=1, loss_D=f"{rec['loss_D']:.3f}", loss_GE=f"{rec['loss_GE']:.3f}")
                bar.update(1)
                last_path = self._maybe_checkpoint(output_dir) or last_path
            if remaining1 and self.stage1_done >= cfg.stage1_iters:
                LOGGER.info("✅  stage 1 done at iteration %d", self.iteration)
            for _ in range(remaining2):
                rec = self.stage2_step(self._batch(sampler))
                bar.set_postfix(stage=2, loss_F=f"{rec['loss_F']:.3f}")
                bar.update(1)
                last_path = self._maybe_checkpoint(output_dir) or last_path
            if remaining2 and self.stage2_done >= cfg.stage2_iters:
                LOGGER.info("✅  stage 2 done at iteration %d", self.iteration)

        ckpt = self.checkpoint()
        if output_dir is not None:
            last_path = checkpoint_save(ckpt, posixpath.join(output_dir, "checkpoints", "final" + CHECKPOINT_SUFFIX))
        return TrainResult(ckpt, last_path, self.metrics)

    def _maybe_checkpoint(self, output_dir: Optional[str]) -> Optional[str]:
        interval = self.config.checkpoint_interval
        if output_dir is None or not interval or self.iteration % interval:
            return None
        name = f"iter_{self.iteration:07d}{CHECKPOINT_SUFFIX}"
        return checkpoint_save(self.checkpoint(), posixpath.join(output_dir, "checkpoints", name))


# ───────────────────────────────────────────────────────────────────────────
#  Module-level API
# ───────────────────────────────────────────────────────────────────────────
def restore_bundle(ckpt: Checkpoint, config: Optional[TrainConfig] = None) -> ModelBundle:
    """Rebuild the four networks from a checkpoint (values bit-exact)."""
    config = config or config_from_dict(ckpt.header["config"])
    bundle = ModelBundle(config.attribute_space, config.network_config, np.random.default_rng(0))
    stored = ckpt.params()
    params = bundle.named_parameters()
    missing: List[str] = [k for k in params if k not in stored]
    extra: List[str] = [k for k in stored if k not in params]
    if missing or extra:
        raise CheckpointFormatError(
            f"checkpoint does not match the configured networks (missing {missing[:3]}, unexpected {extra[:3]})"
        )
    dtype = np.dtype(config.dtype)
    for name, p in params.items():
        if stored[name].shape != p.shape:
            raise CheckpointFormatError(f"{name}: stored shape {stored[name].shape}, expected {p.shape}")
        p.values = stored[name].astype(dtype)
    return bundle


def stage1_step(batch: Batch, trainer: Trainer) -> Dict[str, float]:
    return trainer.stage1_step(batch)


def stage2_step(batch: Batch, trainer: Trainer) -> Dict[str, float]:
    return trainer.stage2_step(batch)


def train(
    config: TrainConfig,
    dataset: Dataset,
    output_dir: Optional[str] = None,
    resume: Optional[str] = None,
    progress: bool = True,
    stop_at: Optional[int] = None,
) -> TrainResult:
    """
    Run both stages.  With *output_dir*, the metrics log goes to
    ``<output_dir>/metrics.tsv`` and checkpoints to ``<output_dir>/checkpoints/``.
    """
    metrics_path = posixpath.join(output_dir, "metrics.tsv") if output_dir is not None else None
    metrics = MetricsLog(metrics_path, append=resume is not None)
    if resume is not None:
        trainer = Trainer.from_checkpoint(checkpoint_load(resume), metrics=metrics)
        if trainer.config.to_json() != config.to_json():
            LOGGER.warning("⚠️  resuming with the checkpoint's own config; the supplied one differs")
        LOGGER.info("↩️  resumed from %s at iteration %d", resume, trainer.iteration)
    else:
        trainer = Trainer(config, metrics=metrics)
    return trainer.run(dataset, output_dir=output_dir, progress=progress, stop_at=stop_at)
