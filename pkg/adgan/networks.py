#!/usr/bin/env python3

"""
adgan.networks
--------------
The four networks, built from :mod:`adgan.tensor` primitives.

G  generator         image + style embedding → image (style enters only via AdaIN)
E  attribute encoder style image → individual embedding ``E(X_t)``
F  disentangler      attribute code → common embedding ``F(S_t)``
D  discriminator     image → (one logit per attribute combination, features)

Every trainable tensor lives in exactly one :class:`ParamSet`, named
``"<net>/<layer>/<w|b>"``.  All forwards accept an unbatched sample
(``(C, H, W)``) or a batch (``(N, C, H, W)``).

Layout (``c`` = base channels, ``H`` = resolution)::

    G   down  3→c→2c→4c (k4 s2)   res ×R at 4c   up [AdaIN → ×2 → conv3] 4c→2c→c→c   conv3 → 3, tanh
    E   conv  3→c→2c→4c→4c (k4 s2)   global avg pool   affine → d_z
    F   conv  (n+1)→c→2c→4c→4c (k4 s2)   global avg pool   affine → d_z
    D   conv  3→c→2c→4c→4c (k4 s2) = features   conv1 → n   global avg pool
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from adgan import tensor as T
from adgan.attributes import AttributeSpace
from adgan.errors import ShapeError
from adgan.optim import kaiming_init
from adgan.tensor import Tensor

LOGGER = logging.getLogger(__name__)

NET_NAMES = ("G", "E", "F", "D")


@dataclass(frozen=True)
class NetworkConfig:
    resolution: int = 32
    base_channels: int = 64
    d_z: int = 256
    n_res_blocks: int = 2
    leaky_slope: float = 0.2
    adain_eps: float = 1e-5
    dtype: str = "float64"

    def __post_init__(self):
        if self.resolution < 16 or self.resolution % 16:
            raise ShapeError(f"resolution must be a multiple of 16 and ≥ 16, got {self.resolution}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


# ───────────────────────────────────────────────────────────────────────────
#  Parameter registry
# ───────────────────────────────────────────────────────────────────────────
class ParamSet:
    """Ordered ``name → Tensor`` map that refuses duplicate names."""

    def __init__(self, owner: str):
        self.owner = owner
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()

    def register(self, name: str, tensor: Tensor) -> Tensor:
        full = f"{self.owner}/{name}"
        if full in self._params:
            raise ValueError(f"parameter {full!r} registered twice")
        tensor.name = full
        tensor.requires_grad = True
        self._params[full] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        if not name.startswith(self.owner + "/"):
            name = f"{self.owner}/{name}"
        return self._params[name]

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> List[str]:
        return list(self._params)

    def count(self) -> int:
        return int(sum(p.size for p in self._params.values()))

    def freeze(self) -> None:
        for p in self._params.values():
            p.requires_grad = False
            p.grad = None

    def unfreeze(self) -> None:
        for p in self._params.values():
            p.requires_grad = True

    @property
    def frozen(self) -> bool:
        return all(not p.requires_grad for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: v.values.copy() for k, v in self._params.items()}


class _Net:
    """Shared construction helpers; subclasses define ``forward``."""

    owner = "?"

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params = ParamSet(self.owner)
        self._rng = rng

    def _conv(self, name: str, c_in: int, c_out: int, k: int) -> None:
        fan_in = c_in * k * k
        self.params.register(f"{name}/w", kaiming_init((c_out, c_in, k, k), fan_in, self._rng, self.cfg.np_dtype))
        self.params.register(f"{name}/b", Tensor(np.zeros(c_out, dtype=self.cfg.np_dtype)))

    def _affine(self, name: str, d_in: int, d_out: int, bias_init: float = 0.0) -> None:
        self.params.register(f"{name}/w", kaiming_init((d_out, d_in), d_in, self._rng, self.cfg.np_dtype))
        self.params.register(f"{name}/b", Tensor(np.full(d_out, bias_init, dtype=self.cfg.np_dtype)))

    def conv(self, x: Tensor, name: str, stride: int = 1, pad: int = 0) -> Tensor:
        p = self.params
        return T.conv2d(x, p[f"{name}/w"], stride=stride, pad=pad, bias=p[f"{name}/b"])

    def affine(self, x: Tensor, name: str) -> Tensor:
        p = self.params
        return T.affine(x, p[f"{name}/w"], p[f"{name}/b"])

    def act(self, x: Tensor) -> Tensor:
        return T.leaky_relu(x, self.cfg.leaky_slope)

    def _check_image(self, x: Tensor, channels: int) -> None:
        shape = x.shape[-3:]
        r = self.cfg.resolution
        if x.ndim not in (3, 4) or shape != (channels, r, r):
            raise ShapeError(f"{self.owner} expects ({channels}, {r}, {r}) inputs, got {x.shape}")

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


# ───────────────────────────────────────────────────────────────────────────
#  G
# ───────────────────────────────────────────────────────────────────────────
class Generator(_Net):
    owner = "G"

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        super().__init__(cfg, rng)
        c = cfg.base_channels
        self.down = [(3, c), (c, 2 * c), (2 * c, 4 * c)]
        self.up = [(4 * c, 2 * c), (2 * c, c), (c, c)]
        for i, (ci, co) in enumerate(self.down):
            self._conv(f"down{i}", ci, co, 4)
        for i in range(cfg.n_res_blocks):
            self._conv(f"res{i}/conv0", 4 * c, 4 * c, 3)
            self._conv(f"res{i}/conv1", 4 * c, 4 * c, 3)
        for i, (ci, co) in enumerate(self.up):
            # z^μ starts at 1 so a fresh site passes the normalized map through
            self._affine(f"up{i}/adain_mu", cfg.d_z, ci, bias_init=1.0)
            self._affine(f"up{i}/adain_b", cfg.d_z, ci)
            self._conv(f"up{i}/conv", ci, co, 3)
        self._conv("out", c, 3, 3)

    def site_params(self, z: Tensor, site: int) -> Tuple[Tensor, Tensor]:
        """``(z^μ, z^b)`` for upsampling site *site*."""
        return self.affine(z, f"up{site}/adain_mu"), self.affine(z, f"up{site}/adain_b")

    def forward(self, x: Tensor, z: Tensor) -> Tensor:
        self._check_image(x, 3)
        if z.shape[-1] != self.cfg.d_z or z.ndim != x.ndim - 2:
            raise ShapeError(f"G expects a d_z={self.cfg.d_z} embedding per image, got {z.shape}")
        h = x
        for i in range(len(self.down)):
            h = self.act(self.conv(h, f"down{i}", stride=2, pad=1))
        for i in range(self.cfg.n_res_blocks):
            r = self.act(self.conv(h, f"res{i}/conv0", pad=1))
            h = T.add(h, self.conv(r, f"res{i}/conv1", pad=1))
        for i in range(len(self.up)):
            z_mu, z_b = self.site_params(z, i)
            h = T.adain(h, z_mu, z_b, self.cfg.adain_eps)
            h = T.upsample_nearest2(h)
            h = self.act(self.conv(h, f"up{i}/conv", pad=1))
        return T.tanh(self.conv(h, "out", pad=1))


# ───────────────────────────────────────────────────────────────────────────
#  E and F share a trunk
# ───────────────────────────────────────────────────────────────────────────
class _EmbeddingNet(_Net):
    in_channels = 3

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, in_channels: Optional[int] = None):
        super().__init__(cfg, rng)
        if in_channels is not None:
            self.in_channels = in_channels
        c = cfg.base_channels
        self.trunk = [(self.in_channels, c), (c, 2 * c), (2 * c, 4 * c), (4 * c, 4 * c)]
        for i, (ci, co) in enumerate(self.trunk):
            self._conv(f"conv{i}", ci, co, 4)
        self._affine("proj", 4 * c, cfg.d_z)

    def forward(self, x: Tensor) -> Tensor:
        self._check_image(x, self.in_channels)
        h = x
        for i in range(len(self.trunk)):
            h = self.act(self.conv(h, f"conv{i}", stride=2, pad=1))
        return self.affine(T.global_avg_pool(h), "proj")


class Encoder(_EmbeddingNet):
    owner = "E"


class Disentangler(_EmbeddingNet):
    owner = "F"

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, space: AttributeSpace):
        self.space = space
        super().__init__(cfg, rng, in_channels=space.code_channels)


# ───────────────────────────────────────────────────────────────────────────
#  D
# ───────────────────────────────────────────────────────────────────────────
class Discriminator(_Net):
    owner = "D"

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, n_heads: int):
        super().__init__(cfg, rng)
        c = cfg.base_channels
        self.n_heads = n_heads
        self.trunk = [(3, c), (c, 2 * c), (2 * c, 4 * c), (4 * c, 4 * c)]
        for i, (ci, co) in enumerate(self.trunk):
            self._conv(f"conv{i}", ci, co, 4)
        self._conv("head", 4 * c, n_heads, 1)

    @property
    def feature_shape(self) -> Tuple[int, int, int]:
        r = self.cfg.resolution // 16
        return (4 * self.cfg.base_channels, r, r)

    def forward(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        """``(logits[n], features)``; features feed the matching loss."""
        self._check_image(x, 3)
        h = x
        for i in range(len(self.trunk)):
            h = self.act(self.conv(h, f"conv{i}", stride=2, pad=1))
        logits = T.global_avg_pool(self.conv(h, "head"))
        return logits, h


# ───────────────────────────────────────────────────────────────────────────
#  Bundle
# ───────────────────────────────────────────────────────────────────────────
class ModelBundle:
    """G, E, F and D for one attribute space; the unit that gets checkpointed."""

    def __init__(self, space: AttributeSpace, cfg: NetworkConfig, rng: np.random.Generator):
        self.space = space.with_resolution(cfg.resolution)
        self.cfg = cfg
        # construction order fixes which rng draws each tensor receives
        self.G = Generator(cfg, rng)
        self.E = Encoder(cfg, rng)
        self.F = Disentangler(cfg, rng, self.space)
        self.D = Discriminator(cfg, rng, self.space.n)

    def nets(self) -> Dict[str, _Net]:
        return {"G": self.G, "E": self.E, "F": self.F, "D": self.D}

    def param_sets(self) -> Dict[str, ParamSet]:
        return {k: v.params for k, v in self.nets().items()}

    def named_parameters(self) -> "OrderedDict[str, Tensor]":
        out: "OrderedDict[str, Tensor]" = OrderedDict()
        for ps in self.param_sets().values():
            for name, t in ps.items():
                if name in out:
                    raise ValueError(f"parameter {name!r} owned by two networks")
                out[name] = t
        return out

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: v.values.copy() for k, v in self.named_parameters().items()}


def generator_forward(x: Tensor, z: Tensor, g: Generator) -> Tensor:
    return g(x, z)


def encoder_forward(x_t: Tensor, e: Encoder) -> Tensor:
    return e(x_t)


def disentangler_forward(code: Tensor, f: Disentangler) -> Tensor:
    return f(code)


def discriminator_forward(x: Tensor, d: Discriminator) -> Tuple[Tensor, Tensor]:
    return d(x)


def audit_report(bundle: ModelBundle) -> str:
    """Plain-text listing of every parameter with its shape and count, per network."""
    lines = [f"{'name':<28} {'shape':<22} {'count':>10}"]
    total = 0
    for net, ps in bundle.param_sets().items():
        for name, t in ps.items():
            lines.append(f"{name:<28} {str(t.shape):<22} {t.size:>10,}")
        lines.append(f"{'  ' + net + ' total':<51} {ps.count():>10,}")
        total += ps.count()
    lines.append(f"{'all networks':<51} {total:>10,}")
    lines.append(f"deployable model (G + F): {bundle.G.params.count() + bundle.F.params.count():,} "
                 f"parameters for all {bundle.space.n_a} age groups")
    return "\n".join(lines)
