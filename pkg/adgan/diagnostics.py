#!/usr/bin/env python3

"""
adgan.diagnostics
-----------------
Finite-difference checks for every primitive, every loss term and a tiny
end-to-end network, shared by the ``gradcheck`` command and the test suite.

Each case is ``(closure, make_inputs)``: *make_inputs(rng)* draws a fresh
small random problem, so running a case over many seeds also varies the
values fed to it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from adgan import objectives as L
from adgan import tensor as T
from adgan.attributes import AttributeSpace
from adgan.networks import ModelBundle, NetworkConfig

LOGGER = logging.getLogger(__name__)

Case = Tuple[Callable[..., T.Tensor], Callable[[np.random.Generator], List[np.ndarray]]]


def _n(rng, *shape):
    return rng.standard_normal(shape)


# ───────────────────────────────────────────────────────────────────────────
#  Cases
# ───────────────────────────────────────────────────────────────────────────
PRIMITIVE_CASES: Dict[str, Case] = {
    "add": (T.add, lambda r: [_n(r, 3, 4), _n(r, 4)]),
    "sub": (T.sub, lambda r: [_n(r, 2, 3, 1), _n(r, 3, 5)]),
    "mul": (T.mul, lambda r: [_n(r, 2, 3, 4), _n(r, 1, 3, 1)]),
    "scale": (lambda x: T.scale(x, -1.7), lambda r: [_n(r, 5)]),
    "matmul": (T.matmul, lambda r: [_n(r, 3, 4), _n(r, 4, 2)]),
    "affine": (T.affine, lambda r: [_n(r, 2, 5), _n(r, 3, 5), _n(r, 3)]),
    "affine_unbatched": (T.affine, lambda r: [_n(r, 5), _n(r, 3, 5), _n(r, 3)]),
    "leaky_relu": (lambda x: T.leaky_relu(x, 0.2), lambda r: [_n(r, 3, 4, 4)]),
    "relu": (T.relu, lambda r: [_n(r, 3, 4)]),
    "sigmoid": (T.sigmoid, lambda r: [3.0 * _n(r, 6)]),
    "tanh": (T.tanh, lambda r: [_n(r, 2, 5)]),
    "log": (T.log, lambda r: [0.5 + r.random((4, 3))]),
    "softplus": (T.softplus, lambda r: [4.0 * _n(r, 7)]),
    "mean": (T.mean, lambda r: [_n(r, 3, 4)]),
    "sum": (T.sum_all, lambda r: [_n(r, 2, 2, 3)]),
    "l1_mean": (T.l1_mean, lambda r: [_n(r, 3, 4), _n(r, 3, 4)]),
    "reshape": (lambda x: T.reshape(x, (6, 2)), lambda r: [_n(r, 3, 4)]),
    "concat_channels": (lambda a, b: T.concat_channels([a, b]), lambda r: [_n(r, 2, 3, 3), _n(r, 1, 3, 3)]),
    "gather": (lambda x: T.gather(x, [2, 0, 1]), lambda r: [_n(r, 3, 4)]),
    "conv2d": (lambda x, w: T.conv2d(x, w, 1, 0), lambda r: [_n(r, 2, 8, 8), _n(r, 4, 2, 3, 3)]),
    "conv2d_stride2_pad1": (
        lambda x, w, b: T.conv2d(x, w, 2, 1, bias=b),
        lambda r: [_n(r, 2, 2, 6, 6), _n(r, 3, 2, 4, 4), _n(r, 3)],
    ),
    "upsample_nearest2": (T.upsample_nearest2, lambda r: [_n(r, 2, 3, 3)]),
    "avg_pool2": (T.avg_pool2, lambda r: [_n(r, 2, 4, 4)]),
    "global_avg_pool": (T.global_avg_pool, lambda r: [_n(r, 2, 3, 4, 4)]),
    "adain": (lambda f, m, b: T.adain(f, m, b, 1e-5), lambda r: [_n(r, 3, 4, 4), _n(r, 3), _n(r, 3)]),
    "adain_batched": (
        lambda f, m, b: T.adain(f, m, b, 1e-5),
        lambda r: [_n(r, 2, 3, 3, 3), _n(r, 2, 3), _n(r, 2, 3)],
    ),
}

LOSS_CASES: Dict[str, Case] = {
    "gan_loss_d": (L.gan_loss_d, lambda r: [2.0 * _n(r, 4), 2.0 * _n(r, 4)]),
    "gan_loss_g": (L.gan_loss_g, lambda r: [2.0 * _n(r, 4)]),
    "gan_loss_g_non_saturating": (
        lambda f: L.gan_loss_g(f, non_saturating=True), lambda r: [2.0 * _n(r, 4)]
    ),
    "recon_loss": (L.recon_loss, lambda r: [_n(r, 3, 4, 4), _n(r, 3, 4, 4)]),
    "fm_loss": (L.fm_loss, lambda r: [_n(r, 2, 4, 2, 2), _n(r, 2, 4, 2, 2)]),
    "dis_loss": (
        lambda xe, xf, ze, zf: L.dis_loss(xe, xf, ze, zf, 0.7),
        lambda r: [_n(r, 3, 4, 4), _n(r, 3, 4, 4), _n(r, 6), _n(r, 6)],
    ),
}


def _tiny_bundle(seed: int) -> ModelBundle:
    cfg = NetworkConfig(resolution=16, base_channels=2, d_z=4, n_res_blocks=1)
    return ModelBundle(AttributeSpace(2, 2, 1), cfg, np.random.default_rng(seed))


def network_cases(seed: int = 0) -> Dict[str, Case]:
    """End-to-end checks on 16×16 images with two-channel layers."""
    nets = _tiny_bundle(seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.uniform(-1.0, 1.0, (3, 16, 16))
    return {
        "generator_wrt_z": (lambda z: nets.G(T.const(x), z), lambda r: [_n(r, 4)]),
        "generator_wrt_image": (lambda img: nets.G(img, T.const(np.ones(4))), lambda r: [r.uniform(-1, 1, (3, 16, 16))]),
        "encoder": (nets.E, lambda r: [r.uniform(-1, 1, (3, 16, 16))]),
        "discriminator_logits": (lambda img: nets.D(img)[0], lambda r: [r.uniform(-1, 1, (3, 16, 16))]),
    }


# ───────────────────────────────────────────────────────────────────────────
#  Runner
# ───────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class GradcheckResult:
    name: str
    seed: int
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error < self.tolerance)


def check_case(name: str, case: Case, seed: int, tolerance: float, eps_fd: float = 1e-6) -> GradcheckResult:
    closure, make_inputs = case
    inputs = make_inputs(np.random.default_rng(seed))
    return GradcheckResult(name, seed, T.grad_check(closure, inputs, eps_fd, seed=seed), tolerance)


def run_gradcheck(
    seeds: Iterable[int] = range(20),
    tolerance: float = 1e-5,
    names: Optional[Sequence[str]] = None,
    network_tolerance: float = 1e-4,
    include_networks: bool = True,
    progress: bool = False,
) -> List[GradcheckResult]:
    """Every primitive and loss over *seeds*; the network cases once (seed 0)."""
    cases = {**PRIMITIVE_CASES, **LOSS_CASES}
    if names is not None:
        unknown = set(names) - set(cases) - set(network_cases(0))
        if unknown:
            raise KeyError(f"unknown gradcheck case(s): {', '.join(sorted(unknown))}")
    seeds = list(seeds)
    work = [(n, c, s, tolerance) for n, c in cases.items() if names is None or n in names for s in seeds]
    if include_networks:
        work += [(n, c, 0, network_tolerance) for n, c in network_cases(0).items()
                 if names is None or n in names]

    results = []
    for name, case, seed, tol in tqdm(work, desc="Gradcheck", unit="case", disable=not progress):
        res = check_case(name, case, seed, tol)
        if not res.passed:
            LOGGER.warning("❌  %s (seed %d): max relative error %.3e", name, seed, res.error)
        results.append(res)
    return results


def summarize(results: Sequence[GradcheckResult]) -> str:
    """One line per case: worst error over its seeds."""
    worst: Dict[str, GradcheckResult] = {}
    for r in results:
        if r.name not in worst or not (r.error <= worst[r.name].error):
            worst[r.name] = r
    lines = [f"{'case':<28} {'worst error':>12}  status"]
    for name, r in worst.items():
        lines.append(f"{name:<28} {r.error:>12.3e}  {'ok' if all(x.passed for x in results if x.name == name) else 'FAIL'}")
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results)} checks, {failed} failed")
    return "\n".join(lines)
