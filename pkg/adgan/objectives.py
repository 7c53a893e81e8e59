#!/usr/bin/env python3

"""
adgan.objectives
----------------
Loss terms and the two composite objectives.

Stage 1 (G, E, D)::

    min_{G,E} max_D  GAN(D, E, G) + λ1·R(G, E) + λ2·FM(G, E)

Stage 2 (F only, G/E/D frozen)::

    min_F  GAN(D, F, G) + λ1·R(G, F) + λ2·FM(G, F) + λ3·DIS(E, F)

with ``DIS = mean|G(X_i, E(X_t)) − G(X_i, F(S_t))| + β·mean|E(X_t) − F(S_t)|``.

All L1 norms are means, not sums.  Log-sigmoid terms use ``softplus`` so no
logit can overflow them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional

import numpy as np

from adgan import tensor as T
from adgan.attributes import encode_codes
from adgan.errors import ConfigError
from adgan.tensor import Tensor

if TYPE_CHECKING:
    from adgan.data import Batch
    from adgan.networks import ModelBundle

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.1
    lambda2: float = 1.0
    lambda3: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "beta"):
            value = getattr(self, name)
            if not value >= 0:
                raise ConfigError(f"weights.{name}", f"must be ≥ 0, got {value}")


# ───────────────────────────────────────────────────────────────────────────
#  Individual terms
# ───────────────────────────────────────────────────────────────────────────
def gan_loss_d(real_logit: Tensor, fake_logit: Tensor) -> Tensor:
    """``−log σ(r) − log(1 − σ(f))``, averaged over the batch."""
    return T.add(T.mean(T.softplus(T.scale(real_logit, -1.0))), T.mean(T.softplus(fake_logit)))


def gan_loss_g(fake_logit: Tensor, non_saturating: bool = False) -> Tensor:
    """
    Saturating ``log(1 − σ(f))`` (range ``(−∞, 0]``) or, with
    *non_saturating*, ``−log σ(f)``.
    """
    if non_saturating:
        return T.mean(T.softplus(T.scale(fake_logit, -1.0)))
    return T.scale(T.mean(T.softplus(fake_logit)), -1.0)


def recon_loss(x: Tensor, x_hat: Tensor) -> Tensor:
    return T.l1_mean(x, x_hat)


def fm_loss(feat_fake: Tensor, feat_style: Tensor) -> Tensor:
    return T.l1_mean(feat_fake, feat_style)


def dis_loss(x_hat_e: Tensor, x_hat_f: Tensor, z_e: Tensor, z_f: Tensor, beta: float = 1.0) -> Tensor:
    image_term = T.l1_mean(x_hat_e, x_hat_f)
    if beta == 0:
        return image_term
    return T.add(image_term, T.scale(T.l1_mean(z_e, z_f), beta))


# ───────────────────────────────────────────────────────────────────────────
#  Composite objectives
# ───────────────────────────────────────────────────────────────────────────
@dataclass
class StageLosses:
    """The optimized totals plus every component, as float values."""

    totals: Dict[str, Tensor]
    components: Dict[str, float] = field(default_factory=dict)

    def record(self) -> Dict[str, float]:
        out = {k: float(v.item()) for k, v in self.totals.items()}
        out.update(self.components)
        return out


def _heads(logits: Tensor, index: np.ndarray) -> Tensor:
    return T.gather(logits, index)


def _weighted_sum(terms: Dict[str, Tensor], weights: Dict[str, float]) -> Tensor:
    total: Optional[Tensor] = None
    for name, term in terms.items():
        w = weights.get(name, 1.0)
        part = term if w == 1.0 else T.scale(term, w)
        total = part if total is None else T.add(total, part)
    return total


def style_transfer(batch: "Batch", nets: "ModelBundle") -> Tensor:
    """``X̂ = G(X_i, E(X_t))``."""
    return nets.G(T.const(batch.x_i), nets.E(T.const(batch.x_t)))


def discriminator_objective(batch: "Batch", nets: "ModelBundle", x_hat: Tensor) -> Tensor:
    """GAN loss seen from D: real head ``S_i`` on ``X_i``, fake head ``S_t`` on detached ``X̂``."""
    space = nets.space
    real_logits, _ = nets.D(T.const(batch.x_i))
    fake_logits, _ = nets.D(T.detach(x_hat))
    return gan_loss_d(_heads(real_logits, batch.t_i(space)), _heads(fake_logits, batch.t_t(space)))


def generator_objective(
    batch: "Batch",
    nets: "ModelBundle",
    weights: LossWeights,
    x_hat: Tensor,
    non_saturating: bool = False,
) -> StageLosses:
    """``loss_GE`` = GAN + λ1·recon + λ2·FM; zero-weight terms are not evaluated."""
    x_i, x_t = T.const(batch.x_i), T.const(batch.x_t)
    fake_logits, feat_fake = nets.D(x_hat)
    terms: Dict[str, Tensor] = {
        "gan_g": gan_loss_g(_heads(fake_logits, batch.t_t(nets.space)), non_saturating)
    }
    if weights.lambda1:
        terms["recon"] = recon_loss(x_i, nets.G(x_i, nets.E(x_i)))
    if weights.lambda2:
        _, feat_style = nets.D(x_t)
        terms["fm"] = fm_loss(feat_fake, T.detach(feat_style))
    loss_ge = _weighted_sum(terms, {"recon": weights.lambda1, "fm": weights.lambda2})
    return StageLosses({"loss_GE": loss_ge}, {k: v.item() for k, v in terms.items()})


def stage1_objective(
    batch: "Batch",
    nets: "ModelBundle",
    weights: LossWeights,
    non_saturating: bool = False,
) -> StageLosses:
    """
    ``loss_D`` (GAN term seen from D, generated image detached) and
    ``loss_GE`` (GAN + λ1·recon + λ2·FM, style path ``E(X_t)``), both against
    the current D.
    """
    x_hat = style_transfer(batch, nets)
    loss_d = discriminator_objective(batch, nets, x_hat)
    ge = generator_objective(batch, nets, weights, x_hat, non_saturating)
    return StageLosses({"loss_D": loss_d, **ge.totals}, ge.components)


def stage2_objective(
    batch: "Batch",
    nets: "ModelBundle",
    weights: LossWeights,
    rng: np.random.Generator,
    non_saturating: bool = False,
    zero_noise: bool = False,
    z_f: Optional[Tensor] = None,
    z_f_self: Optional[Tensor] = None,
) -> StageLosses:
    """
    ``loss_F``: stage-1 terms with ``F(S_t)`` in place of ``E(X_t)`` plus
    λ3·DIS.  ``G(X_i, E(X_t))`` and ``E(X_t)`` enter as constants.

    *z_f* / *z_f_self* replace ``F(code(S_t))`` / ``F(code(S_i))`` with a
    caller-supplied embedding (free-embedding experiments).
    """
    space = nets.space
    x_i, x_t = T.const(batch.x_i), T.const(batch.x_t)
    dtype = batch.x_i.dtype

    if z_f is None:
        z_f = nets.F(T.const(encode_codes(batch.s_t, space, rng, zero_noise, dtype)))
    x_hat_f = nets.G(x_i, z_f)

    fake_logits, feat_fake = nets.D(x_hat_f)
    terms: Dict[str, Tensor] = {
        "gan_g": gan_loss_g(_heads(fake_logits, batch.t_t(space)), non_saturating)
    }
    if weights.lambda1:
        if z_f_self is None:
            z_f_self = nets.F(T.const(encode_codes(batch.s_i, space, rng, zero_noise, dtype)))
        terms["recon"] = recon_loss(x_i, nets.G(x_i, z_f_self))
    if weights.lambda2:
        _, feat_style = nets.D(x_t)
        terms["fm"] = fm_loss(feat_fake, T.detach(feat_style))
    if weights.lambda3:
        z_e = T.detach(nets.E(x_t))
        x_hat_e = T.detach(nets.G(x_i, z_e))
        terms["dis"] = dis_loss(x_hat_e, x_hat_f, z_e, z_f, weights.beta)
    loss_f = _weighted_sum(
        terms, {"recon": weights.lambda1, "fm": weights.lambda2, "dis": weights.lambda3}
    )

    components = {k: v.item() for k, v in terms.items()}
    return StageLosses({"loss_F": loss_f}, components)
