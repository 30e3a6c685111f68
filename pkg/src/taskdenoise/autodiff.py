"""Reverse-mode automatic differentiation over float32 numpy arrays.

The engine is deliberately small: a :class:`Tensor` is an immutable float32
array, a :class:`Tape` records every differentiable operation executed while
it is active, and :func:`backward` replays the records in reverse to produce
exact gradients. The operation set is exactly what the four network recipes
need (convolutions, transposed convolutions, max pooling, batch norm, the
standard activations, and the two losses).

Numeric policy: values are stored as float32; every reduction (convolution
dot products, means, loss sums, normalization statistics) accumulates in
float64 and rounds once on output. Gradients flow through the backward sweep
in float64 and are returned as float32.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidLabelError, InvalidShapeError

_F32 = np.float32
_F64 = np.float64

# When enabled (tests), every op output is checked for NaN/Inf.
_DEBUG_VALIDATE = False


def set_debug_validate(flag: bool) -> None:
    global _DEBUG_VALIDATE
    _DEBUG_VALIDATE = bool(flag)


class Tensor:
    """Float32 n-d array value. Treat as immutable once created."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=_F32, order="C")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("tensor holds non-finite values")
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def copy(self) -> "Tensor":
        t = _wrap(self.data.copy())
        t.requires_grad = self.requires_grad
        return t

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _wrap(arr: np.ndarray) -> Tensor:
    """Wrap an op result without re-validating (hot path)."""
    if _DEBUG_VALIDATE and not np.all(np.isfinite(arr)):
        raise InvalidInputError("operation produced non-finite values")
    t = Tensor.__new__(Tensor)
    t.data = np.asarray(arr, dtype=_F32, order="C")
    t.requires_grad = False
    return t


# ---------------------------------------------------------------------------
# Tape


@dataclass
class _Record:
    out: Tensor
    inputs: tuple
    backward_fn: Callable  # (g: float64 ndarray) -> tuple of per-input grads


class Tape:
    """Ordered record of differentiable operations.

    Records are appended in execution order, so operands always precede the
    operations that consume them; one reverse sweep therefore visits every
    node after all of its consumers.
    """

    def __init__(self):
        self.records: list[_Record] = []
        self._output_ids: set[int] = set()

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()

    def __len__(self) -> int:
        return len(self.records)


_TAPE_STACK: list[Tape] = []


def _record(out: Tensor, inputs: Sequence, backward_fn: Callable) -> None:
    if not _TAPE_STACK:
        return
    if not any(t.requires_grad for t in inputs if isinstance(t, Tensor)):
        return
    out.requires_grad = True
    tape = _TAPE_STACK[-1]
    tape.records.append(_Record(out, tuple(inputs), backward_fn))
    tape._output_ids.add(id(out))


def backward(loss: Tensor, tape: Tape) -> dict:
    """Reverse sweep: gradients of ``loss`` w.r.t. every reachable leaf.

    Returns a dict mapping leaf Tensors (parameters, watched inputs) to
    float32 gradient arrays. Deterministic: identical tapes produce
    bit-identical gradients.
    """
    if loss.shape != ():
        raise InvalidShapeError(f"loss must be a scalar, got shape {loss.shape}")
    if id(loss) not in tape._output_ids:
        raise InvalidInputError("loss was not produced on this tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=_F64)}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.out), None)
        if g is None:
            continue
        contributions = rec.backward_fn(g)
        for tensor, contrib in zip(rec.inputs, contributions):
            if contrib is None or not isinstance(tensor, Tensor):
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = contrib
                leaves[key] = tensor
    return {leaves[k]: g.astype(_F32) for k, g in grads.items() if k in leaves}


def _needs(t) -> bool:
    return isinstance(t, Tensor) and t.requires_grad


# ---------------------------------------------------------------------------
# im2col / col2im helpers (slice-based, no index arrays)


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    c = xp.shape[0]
    cols = np.empty((c, kh, kw, oh, ow), dtype=xp.dtype)
    for a in range(kh):
        ha = a + stride * (oh - 1) + 1
        for b in range(kw):
            wb = b + stride * (ow - 1) + 1
            cols[:, a, b] = xp[:, a:ha:stride, b:wb:stride]
    return cols


def _col2im(cols: np.ndarray, hp: int, wp: int, stride: int) -> np.ndarray:
    c, kh, kw, oh, ow = cols.shape
    out = np.zeros((c, hp, wp), dtype=cols.dtype)
    for a in range(kh):
        ha = a + stride * (oh - 1) + 1
        for b in range(kw):
            wb = b + stride * (ow - 1) + 1
            out[:, a:ha:stride, b:wb:stride] += cols[:, a, b]
    return out


def _pad_spatial(arr: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return arr
    return np.pad(arr, ((0, 0), (padding, padding), (padding, padding)))


# ---------------------------------------------------------------------------
# Convolution family


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of [C_in,H,W] with kernels [C_out,C_in,kh,kw]."""
    if x.data.ndim != 3 or kernels.data.ndim != 4:
        raise InvalidShapeError(f"conv2d expects 3-d input and 4-d kernels, got {x.shape} and {kernels.shape}")
    cin, h, w = x.shape
    cout, kcin, kh, kw = kernels.shape
    if kcin != cin:
        raise InvalidShapeError(f"kernel C_in {kcin} does not match input C_in {cin}")
    if bias.shape != (cout,):
        raise InvalidShapeError(f"bias shape {bias.shape} does not match C_out {cout}")
    if stride < 1:
        raise InvalidShapeError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise InvalidShapeError(f"padding must be >= 0, got {padding}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise InvalidShapeError(f"kernel {kh}x{kw} exceeds padded input {hp}x{wp}")
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1

    xp = _pad_spatial(x.data, padding)
    cols = _im2col(xp, kh, kw, stride, oh, ow).reshape(cin * kh * kw, oh * ow).astype(_F64)
    kmat = kernels.data.reshape(cout, cin * kh * kw).astype(_F64)
    out64 = kmat @ cols
    out64 += bias.data.astype(_F64)[:, None]
    out = _wrap(out64.reshape(cout, oh, ow))

    def backward_fn(g: np.ndarray):
        g2 = g.reshape(cout, oh * ow)
        dx = dk = db = None
        if _needs(x):
            dcols = kmat.T @ g2
            dxp = _col2im(dcols.reshape(cin, kh, kw, oh, ow), hp, wp, stride)
            dx = dxp[:, padding : padding + h, padding : padding + w] if padding else dxp
        if _needs(kernels):
            dk = (g2 @ cols.T).reshape(cout, cin, kh, kw)
        if _needs(bias):
            db = g.sum(axis=(1, 2))
        return dx, dk, db

    _record(out, (x, kernels, bias), backward_fn)
    return out


def transpose_conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution: the linear adjoint of conv2d with the same kernel.

    Input [C_in,H,W], kernels [C_in,C_out,kh,kw], output extent
    (H-1)*stride - 2*padding + kh.
    """
    if x.data.ndim != 3 or kernels.data.ndim != 4:
        raise InvalidShapeError(
            f"transpose_conv2d expects 3-d input and 4-d kernels, got {x.shape} and {kernels.shape}"
        )
    cin, h, w = x.shape
    kcin, cout, kh, kw = kernels.shape
    if kcin != cin:
        raise InvalidShapeError(f"kernel C_in {kcin} does not match input C_in {cin}")
    if bias.shape != (cout,):
        raise InvalidShapeError(f"bias shape {bias.shape} does not match C_out {cout}")
    if stride < 1:
        raise InvalidShapeError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise InvalidShapeError(f"padding must be >= 0, got {padding}")
    oh = (h - 1) * stride - 2 * padding + kh
    ow = (w - 1) * stride - 2 * padding + kw
    if oh < 1 or ow < 1:
        raise InvalidShapeError(f"output extent {oh}x{ow} is not positive")

    kmat = kernels.data.reshape(cin, cout * kh * kw).astype(_F64)
    x2 = x.data.reshape(cin, h * w).astype(_F64)
    cols64 = kmat.T @ x2
    full = _col2im(cols64.reshape(cout, kh, kw, h, w), oh + 2 * padding, ow + 2 * padding, stride)
    out64 = full[:, padding : padding + oh, padding : padding + ow] if padding else full
    out64 = out64 + bias.data.astype(_F64)[:, None, None]
    out = _wrap(out64)

    def backward_fn(g: np.ndarray):
        dx = dk = db = None
        if _needs(x) or _needs(kernels):
            gp = _pad_spatial(g, padding)
            gcols = _im2col(gp, kh, kw, stride, h, w).reshape(cout * kh * kw, h * w)
            if _needs(x):
                dx = (kmat @ gcols).reshape(cin, h, w)
            if _needs(kernels):
                dk = (x2 @ gcols.T).reshape(cin, cout, kh, kw)
        if _needs(bias):
            db = g.sum(axis=(1, 2))
        return dx, dk, db

    _record(out, (x, kernels, bias), backward_fn)
    return out


def maxpool2d(x: Tensor, window: int, stride: int) -> Tensor:
    """Max pooling; backward routes gradient to the lowest-linear-index maximum."""
    if x.data.ndim != 3:
        raise InvalidShapeError(f"maxpool2d expects 3-d input, got {x.shape}")
    c, h, w = x.shape
    if window < 1 or stride < 1:
        raise InvalidShapeError("window and stride must be >= 1")
    if window > h or window > w:
        raise InvalidShapeError(f"window {window} exceeds input extents {h}x{w}")
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    cols = _im2col(x.data, window, window, stride, oh, ow).reshape(c, window * window, oh, ow)
    # argmax returns the first maximum, i.e. the lowest linear index in the window
    arg = cols.argmax(axis=1)
    out = _wrap(np.take_along_axis(cols, arg[:, None], axis=1)[:, 0])

    def backward_fn(g: np.ndarray):
        if not _needs(x):
            return (None,)
        dx = np.zeros((c, h, w), dtype=_F64)
        for cell in range(window * window):
            a, b = divmod(cell, window)
            ha = a + stride * (oh - 1) + 1
            wb = b + stride * (ow - 1) + 1
            dx[:, a:ha:stride, b:wb:stride] += g * (arg == cell)
        return (dx,)

    _record(out, (x,), backward_fn)
    return out


# ---------------------------------------------------------------------------
# Batch normalization (batch dimension is always 1: statistics are spatial)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


@dataclass
class RunningStats:
    """Exponential running mean/variance for batchnorm eval mode."""

    mean: np.ndarray
    var: np.ndarray

    @staticmethod
    def create(channels: int) -> "RunningStats":
        return RunningStats(np.zeros(channels, dtype=_F32), np.ones(channels, dtype=_F32))


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats, train: bool) -> Tensor:
    """Per-channel normalization over spatial positions.

    Train mode normalizes with the batch statistics and updates ``stats``
    in place with momentum 0.9; eval mode normalizes with ``stats``.
    """
    if x.data.ndim != 3:
        raise InvalidShapeError(f"batchnorm2d expects 3-d input, got {x.shape}")
    c, h, w = x.shape
    if h * w == 0:
        raise InvalidShapeError("zero spatial size")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise InvalidShapeError(f"gamma/beta shape must be ({c},)")
    n = h * w
    xm = x.data.astype(_F64)
    if train:
        mu = xm.mean(axis=(1, 2))
        var = xm.var(axis=(1, 2))
        stats.mean = (BN_MOMENTUM * stats.mean.astype(_F64) + (1 - BN_MOMENTUM) * mu).astype(_F32)
        stats.var = (BN_MOMENTUM * stats.var.astype(_F64) + (1 - BN_MOMENTUM) * var).astype(_F32)
    else:
        mu = stats.mean.astype(_F64)
        var = stats.var.astype(_F64)
    ivar = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (xm - mu[:, None, None]) * ivar[:, None, None]
    out = _wrap(gamma.data.astype(_F64)[:, None, None] * xhat + beta.data.astype(_F64)[:, None, None])
    xhat32 = xhat.astype(_F32)

    def backward_fn(g: np.ndarray):
        dx = dgamma = dbeta = None
        xh = xhat32.astype(_F64)
        if _needs(gamma):
            dgamma = (g * xh).sum(axis=(1, 2))
        if _needs(beta):
            dbeta = g.sum(axis=(1, 2))
        if _needs(x):
            gscaled = g * gamma.data.astype(_F64)[:, None, None]
            if train:
                sum_g = gscaled.sum(axis=(1, 2), keepdims=True)
                sum_gx = (gscaled * xh).sum(axis=(1, 2), keepdims=True)
                dx = ivar[:, None, None] * (gscaled - sum_g / n - xh * sum_gx / n)
            else:
                dx = gscaled * ivar[:, None, None]
        return dx, dgamma, dbeta

    _record(out, (x, gamma, beta), backward_fn)
    return out


# ---------------------------------------------------------------------------
# Activations and elementwise ops


def relu(x: Tensor) -> Tensor:
    out = _wrap(np.maximum(x.data, 0))
    mask = x.data > 0

    def backward_fn(g: np.ndarray):
        return (g * mask,) if _needs(x) else (None,)

    _record(out, (x,), backward_fn)
    return out


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data.astype(_F64)
    s = np.where(xd >= 0, 1.0 / (1.0 + np.exp(-np.abs(xd))), np.exp(-np.abs(xd)) / (1.0 + np.exp(-np.abs(xd))))
    out = _wrap(s)
    s32 = out.data

    def backward_fn(g: np.ndarray):
        if not _needs(x):
            return (None,)
        sd = s32.astype(_F64)
        return (g * sd * (1.0 - sd),)

    _record(out, (x,), backward_fn)
    return out


def softmax_channels(x: Tensor) -> Tensor:
    """Softmax across the channel axis (axis 0) per remaining position."""
    xd = x.data.astype(_F64)
    z = xd - xd.max(axis=0, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=0, keepdims=True)
    out = _wrap(s)
    s32 = out.data

    def backward_fn(g: np.ndarray):
        if not _needs(x):
            return (None,)
        sd = s32.astype(_F64)
        dot = (g * sd).sum(axis=0, keepdims=True)
        return (sd * (g - dot),)

    _record(out, (x,), backward_fn)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise InvalidShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = _wrap(a.data + b.data)

    def backward_fn(g: np.ndarray):
        return (g if _needs(a) else None, g if _needs(b) else None)

    _record(out, (a, b), backward_fn)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise InvalidShapeError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    out = _wrap(a.data - b.data)

    def backward_fn(g: np.ndarray):
        return (g if _needs(a) else None, -g if _needs(b) else None)

    _record(out, (a, b), backward_fn)
    return out


def mul_const(x: Tensor, const) -> Tensor:
    """Multiply by a non-differentiated constant (scalar or array)."""
    c = np.asarray(const, dtype=_F64)
    out = _wrap(x.data.astype(_F64) * c)

    def backward_fn(g: np.ndarray):
        return (g * c,) if _needs(x) else (None,)

    _record(out, (x,), backward_fn)
    return out


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 3 or b.data.ndim != 3 or a.shape[1:] != b.shape[1:]:
        raise InvalidShapeError(f"concat_channels spatial mismatch: {a.shape} vs {b.shape}")
    out = _wrap(np.concatenate([a.data, b.data], axis=0))
    ca = a.shape[0]

    def backward_fn(g: np.ndarray):
        return (g[:ca] if _needs(a) else None, g[ca:] if _needs(b) else None)

    _record(out, (a, b), backward_fn)
    return out


def flatten(x: Tensor) -> Tensor:
    shape = x.shape
    out = _wrap(x.data.reshape(-1))

    def backward_fn(g: np.ndarray):
        return (g.reshape(shape),) if _needs(x) else (None,)

    _record(out, (x,), backward_fn)
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Fully connected layer: weight [O,F] @ x [F] + bias [O]."""
    if x.data.ndim != 1 or weight.data.ndim != 2:
        raise InvalidShapeError(f"linear expects 1-d input and 2-d weight, got {x.shape} and {weight.shape}")
    o, f = weight.shape
    if x.shape != (f,):
        raise InvalidShapeError(f"input shape {x.shape} does not match weight fan-in {f}")
    if bias.shape != (o,):
        raise InvalidShapeError(f"bias shape {bias.shape} does not match fan-out {o}")
    out = _wrap(weight.data.astype(_F64) @ x.data.astype(_F64) + bias.data.astype(_F64))

    def backward_fn(g: np.ndarray):
        dx = dw = db = None
        if _needs(x):
            dx = weight.data.astype(_F64).T @ g
        if _needs(weight):
            dw = np.outer(g, x.data.astype(_F64))
        if _needs(bias):
            db = g
        return dx, dw, db

    _record(out, (x, weight, bias), backward_fn)
    return out


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements as a scalar tensor (float64 accumulation)."""
    out = _wrap(np.asarray(x.data.sum(dtype=_F64)))
    shape = x.shape

    def backward_fn(g: np.ndarray):
        return (np.broadcast_to(g, shape).astype(_F64),) if _needs(x) else (None,)

    _record(out, (x,), backward_fn)
    return out


# ---------------------------------------------------------------------------
# Losses


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared element-wise difference."""
    if pred.shape != target.shape:
        raise InvalidShapeError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data.astype(_F64) - target.data.astype(_F64)
    n = diff.size
    out = _wrap(np.asarray((diff * diff).sum() / n))

    def backward_fn(g: np.ndarray):
        base = g * 2.0 * diff / n
        return (base if _needs(pred) else None, -base if _needs(target) else None)

    _record(out, (pred, target), backward_fn)
    return out


def cross_entropy_loss(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax probability of the true class.

    ``logits`` has the class axis first: [k] with an integer label for
    classification, or [k, m, n] with an [m, n] label map for segmentation.
    """
    lab = np.asarray(labels)
    if not np.issubdtype(lab.dtype, np.integer):
        raise InvalidLabelError(f"labels must be integers, got dtype {lab.dtype}")
    k = logits.shape[0]
    if lab.shape != logits.shape[1:]:
        raise InvalidShapeError(f"label shape {lab.shape} does not match logit positions {logits.shape[1:]}")
    if lab.size and (lab.min() < 0 or lab.max() >= k):
        raise InvalidLabelError(f"labels must lie in [0, {k}), got range [{lab.min()}, {lab.max()}]")
    zf = logits.data.astype(_F64).reshape(k, -1)
    labf = lab.reshape(-1)
    npos = labf.size
    z = zf - zf.max(axis=0, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=0, keepdims=True))
    logp = z - lse
    out = _wrap(np.asarray(-logp[labf, np.arange(npos)].sum() / npos))

    def backward_fn(g: np.ndarray):
        if not _needs(logits):
            return (None, None)
        p = np.exp(logp)
        p[labf, np.arange(npos)] -= 1.0
        return ((g / npos) * p.reshape(logits.shape), None)

    _record(out, (logits, lab), backward_fn)
    return out
