#!/usr/bin/env python3

"""
adgan.tensor
------------
Dense tensors with reverse-mode automatic differentiation.

Every primitive computes its forward value with numpy and, when a
:class:`Tape` is active and at least one input requires a gradient, appends a
:class:`TapeRecord` holding the closure that maps the output gradient to the
input gradients.  :func:`backward` replays the tape in reverse.

Usage
-----
>>> x = Tensor([3.0], requires_grad=True)
>>> with Tape() as tape:
...     loss = mean(mul(x, x))
>>> _ = backward(loss, tape)
>>> float(x.grad[0])
6.0

Images / feature maps are ``(C, H, W)`` or batched ``(N, C, H, W)``;
vectors are ``(d,)`` or ``(N, d)``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from adgan.errors import ShapeError

LOGGER = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]

_IDS = itertools.count(1)


# ───────────────────────────────────────────────────────────────────────────
#  Tensor
# ───────────────────────────────────────────────────────────────────────────
class Tensor:
    """
    n-dimensional float array with a gradient slot.

    Parameters
    ----------
    values :
        Anything ``numpy.asarray`` accepts.  Integer input is promoted to
        float64; float32 input stays float32.
    requires_grad :
        Leaves with ``requires_grad=True`` receive ``.grad`` after
        :func:`backward`.
    name :
        Optional label (parameters carry their registry name).
    """

    __slots__ = ("values", "grad", "node_id", "requires_grad", "name")

    def __init__(self, values: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.asarray(values)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.values: np.ndarray = np.ascontiguousarray(arr)
        self.grad: Optional[np.ndarray] = None
        self.node_id: int = next(_IDS)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # arithmetic sugar – all of it goes through the recorded primitives
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0))


def _wrap(x: Union[Tensor, ArrayLike]) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def const(values: ArrayLike) -> Tensor:
    """A tensor that never receives a gradient."""
    return Tensor(values, requires_grad=False)


def detach(x: Tensor) -> Tensor:
    """Same values, cut from the tape."""
    return x.detach()


# ───────────────────────────────────────────────────────────────────────────
#  Tape
# ───────────────────────────────────────────────────────────────────────────
@dataclass
class TapeRecord:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    # maps d(loss)/d(output) to one gradient (or None) per input
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

    @property
    def input_ids(self) -> Tuple[int, ...]:
        return tuple(t.node_id for t in self.inputs)

    @property
    def output_id(self) -> int:
        return self.output.node_id


@dataclass
class Tape:
    """
    Ordered list of primitive applications.  Used as a context manager; nested
    tapes are allowed and only the innermost one records.
    """

    records: List[TapeRecord] = field(default_factory=list)

    def __post_init__(self):
        self._produced: Dict[int, TapeRecord] = {}

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.remove(self)

    def append(self, record: TapeRecord) -> None:
        self.records.append(record)
        self._produced[record.output.node_id] = record

    def __contains__(self, tensor: Tensor) -> bool:
        return tensor.node_id in self._produced

    def __len__(self) -> int:
        return len(self.records)

    def first_nonfinite(self) -> Optional[TapeRecord]:
        """The earliest record whose output holds a NaN or an Inf."""
        for rec in self.records:
            if not np.all(np.isfinite(rec.output.values)):
                return rec
        return None


_TAPE_STACK: List[Tape] = []


def _active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _emit(op: str, inputs: Sequence[Tensor], values: np.ndarray, grad_fn) -> Tensor:
    out = Tensor(values)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.append(TapeRecord(op, tuple(inputs), out, grad_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum out the axes numpy broadcasting added or stretched."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ───────────────────────────────────────────────────────────────────────────
#  Backward
# ───────────────────────────────────────────────────────────────────────────
def backward(loss: Tensor, tape: Tape, params: Iterable[Tensor] = ()) -> Dict[int, np.ndarray]:
    """
    Populate ``.grad`` of every leaf reached from *loss*.

    Leaves listed in *params* that the loss does not depend on get an all-zero
    gradient (if they require one).  Returns ``{node_id: gradient}`` for all
    leaves that received a gradient.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss not in tape:
        raise ValueError("loss was not recorded on this tape")

    grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.values)}
    leaves: Dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g_out = grads.pop(rec.output.node_id, None)
        if g_out is None:
            continue
        for t, g_in in zip(rec.inputs, rec.backward(g_out)):
            if g_in is None or not t.requires_grad:
                continue
            if t.node_id in grads:
                grads[t.node_id] = grads[t.node_id] + g_in
            else:
                grads[t.node_id] = np.asarray(g_in, dtype=t.values.dtype)
            if t not in tape:
                leaves[t.node_id] = t

    out: Dict[int, np.ndarray] = {}
    for nid, t in leaves.items():
        t.grad = grads[nid].reshape(t.shape)
        out[nid] = t.grad
    for p in params:
        if p.requires_grad and p.node_id not in out:
            p.grad = np.zeros_like(p.values)
            out[p.node_id] = p.grad
    return out


# ───────────────────────────────────────────────────────────────────────────
#  Element-wise primitives
# ───────────────────────────────────────────────────────────────────────────
def add(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.shape, b.shape
    return _emit("add", (a, b), a.values + b.values,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.shape, b.shape
    return _emit("sub", (a, b), a.values - b.values,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    return _emit("mul", (a, b), av * bv,
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    return _emit("scale", (a,), a.values * c, lambda g: (g * c,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    xv = x.values
    gain = np.where(xv > 0, 1.0, slope).astype(xv.dtype)
    return _emit("leaky_relu", (x,), xv * gain, lambda g: (g * gain,))


def relu(x: Tensor) -> Tensor:
    xv = x.values
    on = (xv > 0).astype(xv.dtype)
    return _emit("relu", (x,), xv * on, lambda g: (g * on,))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.values)
    return _emit("sigmoid", (x,), y, lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.values)
    return _emit("tanh", (x,), y, lambda g: (g * (1.0 - y * y),))


def log(x: Tensor) -> Tensor:
    xv = x.values
    return _emit("log", (x,), np.log(xv), lambda g: (g / xv,))


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), evaluated without overflow."""
    xv = x.values
    return _emit("softplus", (x,), np.logaddexp(0.0, xv), lambda g: (g * _sigmoid(xv),))


# ───────────────────────────────────────────────────────────────────────────
#  Reductions, losses and shape plumbing
# ───────────────────────────────────────────────────────────────────────────
def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return _emit("mean", (x,), np.asarray(x.values.mean()),
                 lambda g: (np.full(shape, g / n, dtype=x.values.dtype),))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _emit("sum", (x,), np.asarray(x.values.sum()),
                 lambda g: (np.full(shape, g, dtype=x.values.dtype),))


def l1_mean(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference; the subgradient at a zero residual is 0."""
    if a.shape != b.shape:
        raise ShapeError(f"l1_mean shape mismatch: {a.shape} vs {b.shape}")
    d = a.values - b.values
    n = d.size
    sign = np.sign(d)
    return _emit("l1_mean", (a, b), np.asarray(np.abs(d).mean()),
                 lambda g: (g * sign / n, -g * sign / n))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    return _emit("reshape", (x,), x.values.reshape(tuple(shape)), lambda g: (g.reshape(old),))


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the channel axis (``-3``)."""
    sizes = [t.shape[-3] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.values for t in tensors], axis=-3)
    return _emit("concat_channels", tuple(tensors), out,
                 lambda g: tuple(np.split(g, cuts, axis=-3)))


def gather(x: Tensor, index: Sequence[int]) -> Tensor:
    """Pick ``x[i, index[i]]`` from an ``(N, K)`` tensor (head selection)."""
    idx = np.asarray(index, dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"gather needs (N, K) and N indices, got {x.shape} / {idx.shape}")
    rows = np.arange(x.shape[0])

    def _grad(g):
        gx = np.zeros_like(x.values)
        gx[rows, idx] = g
        return (gx,)

    return _emit("gather", (x,), x.values[rows, idx], _grad)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    return _emit("matmul", (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def affine(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped ``(out, in)``."""
    xv, wv = x.values, weight.values
    if xv.shape[-1] != wv.shape[1]:
        raise ShapeError(f"affine expects {wv.shape[1]} input features, got {xv.shape[-1]}")
    out = xv @ wv.T
    if bias is not None:
        out = out + bias.values

    def _grad(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = xv.reshape(-1, xv.shape[-1])
        grads = [(g @ wv), g2.T @ x2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _emit("affine", inputs, out, _grad)


# ───────────────────────────────────────────────────────────────────────────
#  Spatial primitives
# ───────────────────────────────────────────────────────────────────────────
def _batched(x: Tensor) -> Tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x.values[None], True
    if x.ndim == 4:
        return x.values, False
    raise ShapeError(f"expected (C,H,W) or (N,C,H,W), got {x.shape}")


def conv2d(
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    pad: int = 0,
    bias: Optional[Tensor] = None,
) -> Tensor:
    """
    2-D cross-correlation, im2col style.

    ``kernel`` is ``(C_out, C_in, k, k)``; output spatial size is
    ``floor((H + 2·pad − k) / stride) + 1``.
    """
    xv, squeeze = _batched(x)
    wv = kernel.values
    n, c, h, w = xv.shape
    c_out, c_in, k, k2 = wv.shape
    if c_in != c:
        raise ShapeError(f"conv2d kernel expects {c_in} input channels, input has {c}")
    if k != k2:
        raise ShapeError(f"conv2d kernel must be square, got {k}×{k2}")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be ≥ 1, got {stride}")
    if k > h + 2 * pad or k > w + 2 * pad:
        raise ShapeError(f"conv2d kernel {k} larger than padded input {h + 2 * pad}×{w + 2 * pad}")

    xp = np.pad(xv, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xv
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    wmat = wv.reshape(c_out, c * k * k)
    out = (cols @ wmat.T).reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.values[None, :, None, None]
    out = np.ascontiguousarray(out)
    if squeeze:
        out = out[0]

    def _grad(g):
        g4 = g[None] if squeeze else g
        g2 = g4.transpose(0, 2, 3, 1).reshape(n * ho * wo, c_out)
        grads: List[Optional[np.ndarray]] = []
        if x.requires_grad:
            dcols = (g2 @ wmat).reshape(n, ho, wo, c, k, k)
            dxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
            grads.append(dx[0] if squeeze else dx)
        else:
            grads.append(None)
        grads.append((g2.T @ cols).reshape(wv.shape) if kernel.requires_grad else None)
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return _emit("conv2d", inputs, out, _grad)


def upsample_nearest2(x: Tensor) -> Tensor:
    xv = x.values
    out = xv.repeat(2, axis=-2).repeat(2, axis=-1)

    def _grad(g):
        *lead, h2, w2 = g.shape
        return (g.reshape(*lead, h2 // 2, 2, w2 // 2, 2).sum(axis=(-3, -1)),)

    return _emit("upsample_nearest2", (x,), out, _grad)


def avg_pool2(x: Tensor) -> Tensor:
    xv = x.values
    *lead, h, w = xv.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial size, got {h}×{w}")
    out = xv.reshape(*lead, h // 2, 2, w // 2, 2).mean(axis=(-3, -1))
    return _emit("avg_pool2", (x,), out,
                 lambda g: (g.repeat(2, axis=-2).repeat(2, axis=-1) / 4.0,))


def global_avg_pool(x: Tensor) -> Tensor:
    """``(…, C, H, W)`` → ``(…, C)``."""
    xv = x.values
    h, w = xv.shape[-2:]
    out = xv.mean(axis=(-2, -1))
    return _emit("global_avg_pool", (x,), out,
                 lambda g: (np.broadcast_to(g[..., None, None] / (h * w), xv.shape).copy(),))


def adain(f: Tensor, z_mu: Tensor, z_b: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Adaptive instance normalization, per channel::

        out_c = z_mu[c] · (f_c − μ(f_c)) / (σ(f_c) + eps) + z_b[c]

    μ and σ are the population mean and standard deviation over H×W.
    ``f`` is ``(C,H,W)`` with ``z`` of shape ``(C,)`` or ``(N,C,H,W)`` with
    ``(N,C)``.
    """
    if eps < 0:
        raise ShapeError(f"adain eps must be ≥ 0, got {eps}")
    fv = f.values
    if z_mu.shape != fv.shape[:-2] or z_b.shape != fv.shape[:-2]:
        raise ShapeError(
            f"adain channel mismatch: features {fv.shape}, z_mu {z_mu.shape}, z_b {z_b.shape}"
        )
    hw = fv.shape[-1] * fv.shape[-2]
    mu = fv.mean(axis=(-2, -1), keepdims=True)
    d = fv - mu
    sigma = np.sqrt((d * d).mean(axis=(-2, -1), keepdims=True))
    s = sigma + eps
    xhat = d / s
    gain = z_mu.values[..., None, None]
    out = gain * xhat + z_b.values[..., None, None]

    def _grad(g):
        d_zb = g.sum(axis=(-2, -1))
        d_zmu = (g * xhat).sum(axis=(-2, -1))
        dxhat = g * gain
        ds = -(dxhat * d).sum(axis=(-2, -1), keepdims=True) / (s * s)
        with np.errstate(divide="ignore", invalid="ignore"):
            dsigma_dd = np.where(sigma > 0, d / (hw * sigma), 0.0)
        dd = dxhat / s + ds * dsigma_dd
        df = dd - dd.mean(axis=(-2, -1), keepdims=True)
        return df, d_zmu, d_zb

    return _emit("adain", (f, z_mu, z_b), out, _grad)


# ───────────────────────────────────────────────────────────────────────────
#  Finite-difference checker
# ───────────────────────────────────────────────────────────────────────────
def grad_check(
    op_closure: Callable[..., Tensor],
    inputs: Sequence[ArrayLike],
    eps_fd: float = 1e-6,
    seed: int = 0,
) -> float:
    """
    Largest relative error between analytic and central-difference gradients.

    Non-scalar outputs are contracted with a fixed random projection so every
    Jacobian entry contributes.  The error per coordinate is
    ``|a − n| / max(1, |a|, |n|)``; a NaN result points at a broken op.
    """
    arrays = [np.array(a, dtype=np.float64) for a in inputs]

    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = op_closure(*leaves)
        proj = None
        if out.size == 1:
            loss = sum_all(out)
        else:
            proj = np.random.default_rng(seed).standard_normal(out.shape)
            loss = sum_all(mul(out, const(proj)))
    backward(loss, tape, params=leaves)

    def _value(arrs: List[np.ndarray]) -> float:
        y = op_closure(*[Tensor(a) for a in arrs]).values
        return float(np.sum(y)) if proj is None else float(np.sum(y * proj))

    worst = 0.0
    for k, base in enumerate(arrays):
        analytic = leaves[k].grad.reshape(-1)
        flat = base.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps_fd
            f_plus = _value(arrays)
            flat[idx] = orig - eps_fd
            f_minus = _value(arrays)
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps_fd)
            a = float(analytic[idx])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if np.isnan(err):
                return float("nan")
            worst = max(worst, err)
    return worst


__all__ = [
    "Tensor", "Tape", "TapeRecord", "const", "detach", "backward", "grad_check",
    "add", "sub", "mul", "scale", "leaky_relu", "relu", "sigmoid", "tanh", "log",
    "softplus", "mean", "sum_all", "l1_mean", "reshape", "concat_channels", "gather",
    "matmul", "affine", "conv2d", "upsample_nearest2", "avg_pool2", "global_avg_pool",
    "adain",
]
