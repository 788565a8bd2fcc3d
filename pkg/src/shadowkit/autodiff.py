"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Design constraints, all deliberate:

* float64 only, no broadcasting beyond what each operator documents;
* every operator validates its input shapes and raises
  :class:`ShapeMismatchError` naming the operator, expected and actual dims;
* accumulation orders are fixed (convolutions: kernel-row-major; reductions:
  numpy's pairwise sums), so identical inputs reproduce identical bits;
* graphs are recorded implicitly: each op output keeps references to its
  parents plus a backward closure, and :func:`backward` replays the recording
  in reverse creation order, visiting each node exactly once.

Convolutions call the numba kernels in :mod:`shadowkit._kernels`; everything
else is plain numpy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

LOG_EPS = 1e-7  # clamp for log() in BCE, keeps saturated sigmoids finite

_DEFAULT_BUDGET = 1 << 30  # 1 GiB
_memory_budget: int | None = _DEFAULT_BUDGET

_ids = itertools.count()


class ShapeMismatchError(ValueError):
    """An operator received tensors whose dimensions violate its contract."""

    def __init__(self, op: str, expected, actual):
        self.op = op
        self.expected = expected
        self.actual = actual
        super().__init__(f"{op}: expected {expected}, got {actual}")


class MemoryBudgetError(RuntimeError):
    """Estimated allocation exceeds the configured memory budget."""

    def __init__(self, op: str, needed: int, budget: int):
        self.op = op
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"{op}: estimated allocation {needed} B exceeds the configured "
            f"memory budget of {budget} B"
        )


def set_memory_budget(limit: int | None) -> None:
    """Set the global allocation budget in bytes (None disables the check)."""
    global _memory_budget
    _memory_budget = limit


def get_memory_budget() -> int | None:
    return _memory_budget


def estimate_memory(shapes) -> int:
    """Bytes needed to hold float64 arrays of the given shapes: sum of 8 * prod(shape)."""
    total = 0
    for shape in shapes:
        n = 1
        for d in shape:
            n *= int(d)
        total += 8 * n
    return total


def _check_budget(op: str, shapes) -> None:
    if _memory_budget is None:
        return
    needed = estimate_memory(shapes)
    if needed > _memory_budget:
        raise MemoryBudgetError(op, needed, _memory_budget)


class Tensor:
    """A float64 array plus optional gradient and autodiff recording.

    Leaf tensors are created with :func:`tensor` or :func:`parameter`;
    operator outputs carry their parents and a backward closure. Data is
    treated as immutable once the tensor participates in a forward pass
    (optimizer steps mutate leaf parameters between passes).
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op", "_id")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, op="leaf"):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None
        self._op = op
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def detach(self) -> "Tensor":
        """A view of the same data with the graph cut off."""
        return Tensor(self.data, requires_grad=False, op="detach")

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op!r}, requires_grad={self.requires_grad})"


def tensor(data) -> Tensor:
    """Wrap array-like data as a non-differentiable leaf; rejects NaN/Inf."""
    t = Tensor(data)
    if not np.isfinite(t.data).all():
        raise ValueError("tensor: input contains NaN/Inf")
    return t


def parameter(data) -> Tensor:
    """Wrap array-like data as a trainable leaf; rejects NaN/Inf."""
    t = Tensor(data, requires_grad=True)
    if not np.isfinite(t.data).all():
        raise ValueError("parameter: input contains NaN/Inf")
    return t


def _accumulate(t: Tensor, g: np.ndarray, owned: bool = False) -> None:
    # `owned` marks freshly allocated, unaliased gradient arrays, which may
    # be adopted without the defensive copy
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g if owned else np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Populate .grad for every requires_grad tensor reachable from `loss`.

    Visits the recorded nodes exactly once, in reverse creation order (a
    valid reverse topological order by construction).
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    nodes = []
    seen = {id(loss)}
    stack = [loss]
    while stack:
        t = stack.pop()
        nodes.append(t)
        for p in t._parents:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append(p)
    nodes.sort(key=lambda t: t._id, reverse=True)
    loss.grad = np.ones_like(loss.data)
    for t in nodes:
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)


def zero_grad(params) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# convolution family
# ---------------------------------------------------------------------------


def _conv_out_hw(H, W, K, stride, pad):
    return (H + 2 * pad - K) // stride + 1, (W + 2 * pad - K) // stride + 1


def _pad2d(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _dilate2d(x, stride):
    if stride == 1:
        return x
    N, C, H, W = x.shape
    out = np.zeros((N, C, (H - 1) * stride + 1, (W - 1) * stride + 1))
    out[:, :, ::stride, ::stride] = x
    return out


def _run_conv(x, w_kkio, bias, stride):
    # x: (N, Ci, Hp, Wp) padded; w_kkio: (K, K, Ci, Co)
    N, _, Hp, Wp = x.shape
    K = w_kkio.shape[0]
    Co = w_kkio.shape[3]
    Ho = (Hp - K) // stride + 1
    Wo = (Wp - K) // stride + 1
    out = np.empty((N, Co, Ho, Wo))
    _kernels.conv_forward(
        np.ascontiguousarray(x), np.ascontiguousarray(w_kkio), bias, stride, out
    )
    return out


def _conv_input_grad(dout, w_oikk, stride, pad, H, W):
    # Adjoint of the gather in conv2d: dilate dout by the stride, run a full
    # correlation against the spatially flipped kernel (channel axes swapped)
    # to get the gradient of the padded input, then strip the padding. Padded
    # positions past the last window never entered the forward map and
    # contribute zeros.
    K = w_oikk.shape[2]
    d = _dilate2d(dout, stride)
    d = _pad2d(d, K - 1)
    wk = np.ascontiguousarray(w_oikk.transpose(2, 3, 0, 1)[::-1, ::-1])
    dxp = _run_conv(d, wk, np.zeros(w_oikk.shape[1]), 1)
    tail_h = (H + 2 * pad) - dxp.shape[2]
    tail_w = (W + 2 * pad) - dxp.shape[3]
    if tail_h or tail_w:
        dxp = np.pad(dxp, ((0, 0), (0, 0), (0, tail_h), (0, tail_w)))
    return dxp[:, :, pad : pad + H, pad : pad + W]


def _conv_weight_grad(xpad, dout, K, stride):
    N = xpad.shape[0]
    Cin = xpad.shape[1]
    Cout = dout.shape[1]
    dwp = np.zeros((N, K, K, Cin, Cout))
    _kernels.conv_weight_grad(
        np.ascontiguousarray(xpad), np.ascontiguousarray(dout), stride, dwp
    )
    # (N,K,K,Ci,Co) -> sum over samples -> (Co,Ci,K,K)
    return dwp.sum(axis=0).transpose(3, 2, 0, 1)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding.

    x: [N,Cin,H,W], w: [Cout,Cin,K,K] square kernel, b: [Cout].
    Output [N,Cout,Ho,Wo] with Ho = (H + 2*pad - K)//stride + 1.
    """
    if x.data.ndim != 4:
        raise ShapeMismatchError("conv2d", "input [N,Cin,H,W]", tuple(x.data.shape))
    if w.data.ndim != 4 or w.data.shape[2] != w.data.shape[3]:
        raise ShapeMismatchError("conv2d", "weight [Cout,Cin,K,K]", tuple(w.data.shape))
    N, Cin, H, W = x.data.shape
    Cout, wCin, K, _ = w.data.shape
    if wCin != Cin:
        raise ShapeMismatchError(
            "conv2d", f"weight Cin={Cin} to match input", tuple(w.data.shape)
        )
    if b.data.shape != (Cout,):
        raise ShapeMismatchError("conv2d", f"bias [{Cout}]", tuple(b.data.shape))
    if K < 1 or stride < 1 or pad < 0:
        raise ValueError(f"conv2d: K={K}, stride={stride}, pad={pad} out of range")
    if H + 2 * pad < K or W + 2 * pad < K:
        raise ShapeMismatchError(
            "conv2d", f"spatial dims >= K={K} after padding", (H + 2 * pad, W + 2 * pad)
        )
    Ho, Wo = _conv_out_hw(H, W, K, stride, pad)
    _check_budget(
        "conv2d",
        [
            (N, Cin, H, W),
            (N, Cin, H + 2 * pad, W + 2 * pad),
            (N, Cout, Ho, Wo),
            # grads held during backward
            (N, Cin, H, W),
            (N, Cout, Ho, Wo),
            (Cout, Cin, K, K),
        ],
    )
    xpad = _pad2d(x.data, pad)
    wk = w.data.transpose(2, 3, 1, 0)  # (K,K,Cin,Cout)
    out_data = _run_conv(xpad, wk, b.data, stride)
    rg = x.requires_grad or w.requires_grad or b.requires_grad

    def grad_fn(dout):
        if x.requires_grad:
            _accumulate(x, _conv_input_grad(dout, w.data, stride, pad, H, W), owned=True)
        if w.requires_grad:
            _accumulate(w, _conv_weight_grad(xpad, dout, K, stride), owned=True)
        if b.requires_grad:
            _accumulate(b, dout.sum(axis=(0, 2, 3)), owned=True)

    return Tensor(out_data, rg, (x, w, b), grad_fn, op="conv2d")


def conv_transpose2d(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of conv2d's forward map (a.k.a. deconvolution), no bias.

    x: [N,Cin,H,W], w: [Cin,Cout,K,K]. Output [N,Cout,Ho,Wo] with
    Ho = (H-1)*stride - 2*pad + K.
    """
    if x.data.ndim != 4:
        raise ShapeMismatchError("conv_transpose2d", "input [N,Cin,H,W]", tuple(x.data.shape))
    if w.data.ndim != 4 or w.data.shape[2] != w.data.shape[3]:
        raise ShapeMismatchError(
            "conv_transpose2d", "weight [Cin,Cout,K,K]", tuple(w.data.shape)
        )
    N, Cin, H, W = x.data.shape
    wCin, Cout, K, _ = w.data.shape
    if wCin != Cin:
        raise ShapeMismatchError(
            "conv_transpose2d", f"weight Cin={Cin} to match input", tuple(w.data.shape)
        )
    if K < 1 or stride < 1 or pad < 0:
        raise ValueError(f"conv_transpose2d: K={K}, stride={stride}, pad={pad} out of range")
    Ho = (H - 1) * stride - 2 * pad + K
    Wo = (W - 1) * stride - 2 * pad + K
    if Ho < 1 or Wo < 1:
        raise ShapeMismatchError("conv_transpose2d", "positive output dims", (Ho, Wo))
    _check_budget(
        "conv_transpose2d",
        [(N, Cin, H, W), (N, Cout, Ho, Wo), (N, Cin, H, W), (N, Cout, Ho, Wo), w.data.shape],
    )
    # scatter = correlate the dilated input with the flipped kernel
    out_data = _conv_input_grad(
        x.data, np.ascontiguousarray(w.data), stride, pad, Ho, Wo
    )
    rg = x.requires_grad or w.requires_grad

    def grad_fn(dout):
        if x.requires_grad:
            dpad = _pad2d(dout, pad)
            wk = w.data.transpose(2, 3, 1, 0)  # gather with (K,K,Cout,Cin)
            _accumulate(x, _run_conv(dpad, wk, np.zeros(Cin), stride), owned=True)
        if w.requires_grad:
            dpad = _pad2d(dout, pad)
            dwp = np.zeros((N, K, K, Cout, Cin))
            _kernels.conv_weight_grad(
                np.ascontiguousarray(dpad), np.ascontiguousarray(x.data), stride, dwp
            )
            _accumulate(w, dwp.sum(axis=0).transpose(3, 2, 0, 1).copy(), owned=True)

    return Tensor(out_data, rg, (x, w), grad_fn, op="conv_transpose2d")


# ---------------------------------------------------------------------------
# pooling / resampling
# ---------------------------------------------------------------------------


def maxpool2d(x: Tensor, k: int = 2, stride: int = 2) -> Tensor:
    """Non-overlapping max pooling; gradient routed to the first argmax per window."""
    if x.data.ndim != 4:
        raise ShapeMismatchError("maxpool2d", "input [N,C,H,W]", tuple(x.data.shape))
    if k != stride:
        raise ShapeMismatchError("maxpool2d", f"stride == k == {k}", f"stride={stride}")
    N, C, H, W = x.data.shape
    if H % k or W % k:
        raise ShapeMismatchError(
            "maxpool2d", f"H and W divisible by {k}", (H, W)
        )
    Ho, Wo = H // k, W // k
    if k == 2:
        out_data = np.empty((N, C, Ho, Wo))
        idx2 = np.empty((N, C, Ho, Wo), dtype=np.int64)
        _kernels.maxpool2x_forward(x.data, out_data, idx2)

        def grad_fn(dout):
            dx = np.zeros((N, C, H, W))
            _kernels.maxpool2x_backward(np.ascontiguousarray(dout), idx2, dx)
            _accumulate(x, dx, owned=True)

        return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="maxpool2d")

    win = x.data.reshape(N, C, Ho, k, Wo, k).transpose(0, 1, 2, 4, 3, 5).reshape(
        N, C, Ho, Wo, k * k
    )
    idx = win.argmax(axis=-1)  # first occurrence wins on ties (row-major window order)
    out_data = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def grad_fn(dout):
        dwin = np.zeros((N, C, Ho, Wo, k * k))
        np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
        dx = dwin.reshape(N, C, Ho, Wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(N, C, H, W)
        _accumulate(x, dx, owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="maxpool2d")


def upsample_nearest2x(x: Tensor) -> Tensor:
    """Replicate every pixel into a 2x2 block; gradient sums each block."""
    if x.data.ndim != 4:
        raise ShapeMismatchError("upsample_nearest2x", "input [N,C,H,W]", tuple(x.data.shape))
    N, C, H, W = x.data.shape
    out_data = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def grad_fn(dout):
        _accumulate(x, dout.reshape(N, C, H, 2, W, 2).sum(axis=(3, 5)), owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="upsample_nearest2x")


# ---------------------------------------------------------------------------
# elementwise / affine
# ---------------------------------------------------------------------------


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def grad_fn(dout):
        _accumulate(x, out_data * (1.0 - out_data) * dout, owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="sigmoid")


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    mask = x.data > 0
    out_data = np.where(mask, x.data, slope * x.data)

    def grad_fn(dout):
        _accumulate(x, np.where(mask, dout, slope * dout), owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="leaky_relu")


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: [N,F] @ [F,G] + [G]."""
    if x.data.ndim != 2:
        raise ShapeMismatchError("linear", "input [N,F]", tuple(x.data.shape))
    N, F = x.data.shape
    if w.data.ndim != 2 or w.data.shape[0] != F:
        raise ShapeMismatchError("linear", f"weight [{F},G]", tuple(w.data.shape))
    G = w.data.shape[1]
    if b.data.shape != (G,):
        raise ShapeMismatchError("linear", f"bias [{G}]", tuple(b.data.shape))
    out_data = x.data @ w.data + b.data
    rg = x.requires_grad or w.requires_grad or b.requires_grad

    def grad_fn(dout):
        if x.requires_grad:
            _accumulate(x, dout @ w.data.T, owned=True)
        if w.requires_grad:
            _accumulate(w, x.data.T @ dout, owned=True)
        if b.requires_grad:
            _accumulate(b, dout.sum(axis=0), owned=True)

    return Tensor(out_data, rg, (x, w, b), grad_fn, op="linear")


def flatten(x: Tensor) -> Tensor:
    """Collapse all but the leading batch dimension: [N,...] -> [N,F]."""
    if x.data.ndim < 2:
        raise ShapeMismatchError("flatten", "input [N,...]", tuple(x.data.shape))
    N = x.data.shape[0]
    shape = x.data.shape
    out_data = x.data.reshape(N, -1)

    def grad_fn(dout):
        _accumulate(x, dout.reshape(shape))

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="flatten")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError("add", tuple(a.data.shape), tuple(b.data.shape))
    out_data = a.data + b.data

    def grad_fn(dout):
        _accumulate(a, dout)
        _accumulate(b, dout)

    return Tensor(out_data, a.requires_grad or b.requires_grad, (a, b), grad_fn, op="add")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out_data = x.data * c

    def grad_fn(dout):
        _accumulate(x, c * dout, owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="scale")


def reduce_sum(x: Tensor) -> Tensor:
    out_data = x.data.sum()

    def grad_fn(dout):
        _accumulate(x, np.full(x.data.shape, float(dout)), owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="reduce_sum")


def reduce_mean(x: Tensor) -> Tensor:
    n = x.data.size
    out_data = x.data.mean()

    def grad_fn(dout):
        _accumulate(x, np.full(x.data.shape, float(dout) / n), owned=True)

    return Tensor(out_data, x.requires_grad, (x,), grad_fn, op="reduce_mean")


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def _as_target(op: str, target, shape) -> np.ndarray:
    if isinstance(target, Tensor):
        t = target.data
    else:
        t = np.asarray(target, dtype=np.float64)
        if t.ndim == 0:
            t = np.full(shape, float(t))
    if t.shape != shape:
        raise ShapeMismatchError(op, tuple(shape), tuple(t.shape))
    return t


def bce_loss(pred: Tensor, target) -> Tensor:
    """Mean binary cross-entropy; predictions clamped to [eps, 1-eps] before log.

    `target` is treated as a constant (array, Tensor data, or broadcastable
    scalar); gradients flow to `pred` only. Where the clamp binds, the
    gradient is evaluated at the clamped value, so it stays bounded by 1/eps
    instead of vanishing: a saturated prediction keeps receiving a corrective
    signal (a hard zero here deadlocks adversarial training).
    """
    t = _as_target("bce_loss", target, pred.data.shape)
    p = np.clip(pred.data, LOG_EPS, 1.0 - LOG_EPS)
    out_data = -(t * np.log(p) + (1.0 - t) * np.log1p(-p)).mean()
    n = pred.data.size

    def grad_fn(dout):
        g = (-(t / p) + (1.0 - t) / (1.0 - p)) / n
        _accumulate(pred, g * float(dout), owned=True)

    return Tensor(out_data, pred.requires_grad, (pred,), grad_fn, op="bce_loss")


def bce_with_logits(logits: Tensor, target) -> Tensor:
    """Mean binary cross-entropy straight from logits: softplus(z) - t*z form.

    Mathematically equal to bce_loss(sigmoid(z), t) but computed in logit
    space: the gradient is sigmoid(z) - t, exact and alive at any
    saturation level. Adversarial losses need this; the clamped
    probability-space path loses its gradient once the sigmoid saturates
    past the clamp.
    """
    t = _as_target("bce_with_logits", target, logits.data.shape)
    z = logits.data
    # softplus(-z) + (1 - t) * z, with softplus(x) = max(x,0) + log1p(exp(-|x|))
    out_data = (np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z))) + (1.0 - t) * z).mean()
    n = logits.data.size
    sz = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))

    def grad_fn(dout):
        _accumulate(logits, (sz - t) / n * float(dout), owned=True)

    return Tensor(out_data, logits.requires_grad, (logits,), grad_fn, op="bce_with_logits")


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error against a constant target."""
    t = _as_target("mse_loss", target, pred.data.shape)
    diff = pred.data - t
    out_data = (diff * diff).mean()
    n = pred.data.size

    def grad_fn(dout):
        _accumulate(pred, (2.0 / n) * diff * float(dout), owned=True)

    return Tensor(out_data, pred.requires_grad, (pred,), grad_fn, op="mse_loss")


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


@dataclass
class OptimizerState:
    """Per-parameter update state for SGD-with-momentum or Adam."""

    kind: str  # "sgd-momentum" | "adam"
    lr: float
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    buffers: dict = field(default_factory=dict)


def sgd_momentum(params, lr: float, momentum: float = 0.9) -> OptimizerState:
    return OptimizerState(
        kind="sgd-momentum",
        lr=lr,
        momentum=momentum,
        buffers={"velocity": [np.zeros_like(p.data) for p in params]},
    )


def adam(params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> OptimizerState:
    return OptimizerState(
        kind="adam",
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        buffers={
            "m": [np.zeros_like(p.data) for p in params],
            "v": [np.zeros_like(p.data) for p in params],
        },
    )


def step(params, state: OptimizerState) -> None:
    """Apply one in-place update to every parameter from its current gradient."""
    state.t += 1
    if state.kind == "sgd-momentum":
        vel = state.buffers["velocity"]
        for p, v in zip(params, vel):
            g = p.grad if p.grad is not None else 0.0
            v *= state.momentum
            v -= state.lr * g
            p.data += v
    elif state.kind == "adam":
        ms, vs = state.buffers["m"], state.buffers["v"]
        bc1 = 1.0 - state.beta1 ** state.t
        bc2 = 1.0 - state.beta2 ** state.t
        for p, m, v in zip(params, ms, vs):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    else:
        raise ValueError(f"step: unknown optimizer kind {state.kind!r}")
