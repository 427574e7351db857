"""Dense-tensor math with a reverse-mode tape, recurrent-cell primitives,
SGD/Adam optimizers, and a finite-difference gradient oracle.

Everything is 64-bit. Tapes are define-by-run: entering a ``Tape`` context
makes it the active tape, every op on grad-requiring tensors appends one
record, and ``backward`` replays the records in reverse exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericDomainError, UnreliableCheckError, UsageError


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr


class Tensor:
    """A dense float64 array with an accumulated-gradient buffer.

    ``grad`` always has the same shape as ``values`` and starts at zero.
    Tensors with ``requires_grad=False`` are constants: backward never
    touches their grad buffer.
    """

    __slots__ = ("values", "grad", "requires_grad", "_tape")

    def __init__(self, values, requires_grad: bool = False):
        self.values = _as_array(values)
        self.grad = np.zeros_like(self.values)
        self.requires_grad = requires_grad
        self._tape: "Tape | None" = None

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def item(self) -> float:
        if self.values.size != 1:
            raise UsageError("item() on non-scalar tensor of shape %r" % (self.shape,))
        return float(self.values.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; constants are wrapped on the fly
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
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class TapeRecord:
    op: str
    inputs: tuple
    output: Tensor
    # maps the output adjoint to one adjoint per input (None for constants)
    backward_fn: Callable[[np.ndarray], tuple]


class Tape:
    """Ordered record of operations; inputs of a record always precede it."""

    def __init__(self):
        self.records: list[TapeRecord] = []
        self.visits = 0

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.pop()
        return False

    def backward(self, root: Tensor):
        """Accumulate d(root)/d(leaf) into every grad-requiring leaf.

        Repeated calls keep accumulating into ``.grad``; intermediate
        adjoints live in a scratch map so stale grads never leak back in.
        """
        if root.values.size != 1:
            raise UsageError("backward root must be scalar, got shape %r" % (root.shape,))
        adjoint: dict[int, np.ndarray] = {id(root): np.ones_like(root.values)}
        produced = {id(rec.output) for rec in self.records}
        for rec in reversed(self.records):
            self.visits += 1
            out_adj = adjoint.get(id(rec.output))
            if out_adj is None:
                continue
            in_adjs = rec.backward_fn(out_adj)
            for t, g in zip(rec.inputs, in_adjs):
                if g is None or not t.requires_grad:
                    continue
                key = id(t)
                if key in adjoint:
                    adjoint[key] = adjoint[key] + g
                elif id(t) in produced:
                    adjoint[key] = g
                else:
                    # leaf: accumulate straight into the persistent buffer
                    t.grad += g
        if root.requires_grad:
            root.grad += adjoint[id(root)]


_ACTIVE: list[Tape] = []


def active_tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def backward(root: Tensor):
    """Run the backward pass from a scalar root through its tape."""
    if root._tape is None:
        if root.values.size != 1:
            raise UsageError("backward root must be scalar, got shape %r" % (root.shape,))
        # constant graph: nothing upstream, root gradient is still defined
        if root.requires_grad:
            root.grad += np.ones_like(root.values)
        return
    root._tape.backward(root)


def _emit(op: str, inputs: Sequence[Tensor], values: np.ndarray, backward_fn) -> Tensor:
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=track)
    if track:
        out._tape = tape
        tape.records.append(TapeRecord(op, tuple(inputs), out, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise and linear-algebra ops

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.values + b.values

    def bwd(g):
        return _unbroadcast(g, a.values.shape), _unbroadcast(g, b.values.shape)

    return _emit("add", (a, b), out, bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.values - b.values

    def bwd(g):
        return _unbroadcast(g, a.values.shape), _unbroadcast(-g, b.values.shape)

    return _emit("sub", (a, b), out, bwd)


def neg(a: Tensor) -> Tensor:
    return _emit("neg", (a,), -a.values, lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.values * b.values
    av, bv = a.values, b.values

    def bwd(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _emit("mul", (a, b), out, bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.values @ b.values
    av, bv = a.values, b.values

    def bwd(g):
        g = np.atleast_2d(g)
        ga = g @ bv.T if av.ndim == 2 else (g @ bv.T).reshape(av.shape)
        gb = av.T @ g if av.ndim == 2 else np.outer(av, g).reshape(bv.shape)
        return ga.reshape(av.shape), gb.reshape(bv.shape)

    return _emit("matmul", (a, b), out, bwd)


def transpose(a: Tensor) -> Tensor:
    return _emit("transpose", (a,), a.values.T.copy(), lambda g: (g.T,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)
    return _emit("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = np.where(a.values >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.values))),
                   np.exp(-np.abs(a.values)) / (1.0 + np.exp(-np.abs(a.values))))
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.values)
    return _emit("exp", (a,), out, lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    av = a.values
    return _emit("log", (a,), np.log(av), lambda g: (g / av,))


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0
    return _emit("relu", (a,), a.values * mask, lambda g: (g * mask,))


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; on ties the gradient goes to the first operand."""
    take_a = a.values >= b.values
    out = np.where(take_a, a.values, b.values)

    def bwd(g):
        return (_unbroadcast(g * take_a, a.values.shape),
                _unbroadcast(g * ~take_a, b.values.shape))

    return _emit("maximum", (a, b), out, bwd)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.values >= lo) & (a.values <= hi)
    return _emit("clip", (a,), np.clip(a.values, lo, hi), lambda g: (g * inside,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.values)

    def bwd(g):
        # subgradient 0 at the origin, where 1/(2*sqrt) blows up
        denom = np.where(out > 0, 2.0 * out, 1.0)
        return (np.where(out > 0, g / denom, 0.0),)

    return _emit("sqrt", (a,), out, bwd)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    out = a.values.reshape(shape)
    orig = a.values.shape
    return _emit("reshape", (a,), out.copy(), lambda g: (g.reshape(orig),))


def max_(a: Tensor, axis: int) -> Tensor:
    """Max-reduce along ``axis``; gradient flows to the first argmax."""
    out = a.values.max(axis=axis)
    idx = a.values.argmax(axis=axis)

    def bwd(g):
        full = np.zeros_like(a.values)
        np.put_along_axis(full, np.expand_dims(idx, axis),
                          np.expand_dims(g, axis), axis)
        return (full,)

    return _emit("max", (a,), out, bwd)


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    out = a.values.sum(axis=axis)
    shape = a.values.shape

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit("sum", (a,), out, bwd)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    n = a.values.size if axis is None else a.values.shape[axis]
    return sum_(a, axis) * (1.0 / n)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    out = np.concatenate([p.values for p in parts], axis=axis)
    sizes = [p.values.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        return tuple(np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
                     for i in range(len(parts)))

    return _emit("concat", tuple(parts), out, bwd)


def narrow(a: Tensor, axis: int, start: int, size: int) -> Tensor:
    index = [slice(None)] * a.values.ndim
    index[axis] = slice(start, start + size)
    index = tuple(index)
    out = a.values[index].copy()

    def bwd(g):
        full = np.zeros_like(a.values)
        full[index] = g
        return (full,)

    return _emit("narrow", (a,), out, bwd)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup with scatter-add gradient; ``ids`` is an int array."""
    ids = np.asarray(ids, dtype=np.int64)
    out = table.values[ids]

    def bwd(g):
        full = np.zeros_like(table.values)
        np.add.at(full, ids, g)
        return (full,)

    return _emit("embedding", (table,), out, bwd)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None = None,
            mask: np.ndarray | None = None, training: bool = True) -> Tensor:
    """Inverted dropout. Pass an explicit ``mask`` to replay a fixed draw."""
    if not training or p <= 0.0:
        return a
    if mask is None:
        if rng is None:
            raise UsageError("dropout in training mode needs an rng or a mask")
        mask = (rng.random(a.values.shape) >= p) / (1.0 - p)
    return mul(a, Tensor(mask))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``; rejects NaN/Inf input."""
    v = a.values
    if not np.all(np.isfinite(v)):
        raise NumericDomainError("softmax input contains NaN or Inf")
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _emit("softmax", (a,), out, bwd)


def log_sum_exp(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable log-sum-exp on plain arrays (no tape)."""
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(v - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def cross_entropy_logits(logits: Tensor, targets: np.ndarray,
                         mask: np.ndarray | None = None) -> Tensor:
    """Summed masked cross-entropy of row logits against integer targets.

    Returns sum_b mask_b * (logsumexp(logits_b) - logits_b[target_b]).
    """
    targets = np.asarray(targets, dtype=np.int64)
    v = logits.values
    rows = np.arange(v.shape[0])
    m = np.ones(v.shape[0]) if mask is None else np.asarray(mask, dtype=np.float64)
    shifted = v - v.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + v.max(axis=1)
    out = np.sum(m * (lse - v[rows, targets]))

    def bwd(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[rows, targets] -= 1.0
        return (g * p * m[:, None],)

    return _emit("cross_entropy", (logits,), np.asarray(out), bwd)


# ---------------------------------------------------------------------------
# recurrent cell

@dataclass
class LstmWeights:
    """Fused 4-gate weights; gate order along the last axis is i, f, g, o."""
    w_x: Tensor  # (input_dim, 4*hidden)
    w_h: Tensor  # (hidden, 4*hidden)
    b: Tensor    # (4*hidden,)

    @property
    def hidden_dim(self) -> int:
        return self.w_h.values.shape[0]

    def tensors(self):
        return [self.w_x, self.w_h, self.b]


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmWeights:
    bound = 1.0 / math.sqrt(hidden_dim)
    return LstmWeights(
        w_x=Tensor(rng.uniform(-bound, bound, (input_dim, 4 * hidden_dim)), requires_grad=True),
        w_h=Tensor(rng.uniform(-bound, bound, (hidden_dim, 4 * hidden_dim)), requires_grad=True),
        b=Tensor(np.zeros(4 * hidden_dim), requires_grad=True),
    )


def lstm_step(x: Tensor, h: Tensor, c: Tensor, weights: LstmWeights) -> tuple[Tensor, Tensor]:
    """One batched LSTM step: x (B,I), h and c (B,H) -> (h', c')."""
    hd = weights.hidden_dim
    if x.values.shape[-1] != weights.w_x.values.shape[0] or h.values.shape[-1] != hd:
        raise UsageError(
            "lstm_step dimension mismatch: x %r, h %r, w_x %r"
            % (x.shape, h.shape, weights.w_x.shape))
    gates = matmul(x, weights.w_x) + matmul(h, weights.w_h) + weights.b
    i = sigmoid(narrow(gates, 1, 0, hd))
    f = sigmoid(narrow(gates, 1, hd, hd))
    g = tanh(narrow(gates, 1, 2 * hd, hd))
    o = sigmoid(narrow(gates, 1, 3 * hd, hd))
    c_new = f * c + i * g
    h_new = o * tanh(c_new)
    return h_new, c_new


# ---------------------------------------------------------------------------
# optimizers

class SGD:
    """Plain gradient step, theta <- theta - lr * grad."""

    kind = "sgd"

    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self):
        for p in self.params:
            if p.grad.shape != p.values.shape:
                raise UsageError("gradient shape %r does not match parameter %r"
                                 % (p.grad.shape, p.values.shape))
            p.values -= self.lr * p.grad

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


class Adam:
    """Bias-corrected Adam with beta1=0.9, beta2=0.999, eps=1e-8."""

    kind = "adam"

    def __init__(self, params: Sequence[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad.shape != m.shape:
                raise UsageError("gradient shape %r does not match moment %r"
                                 % (p.grad.shape, m.shape))
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def clip_global_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale all grads so their joint L2 norm is at most ``max_norm``."""
    total = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for p in params:
            p.grad *= scale
    return total


# ---------------------------------------------------------------------------
# gradient oracle

def finite_diff_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
                      eps: float = 1e-5) -> float:
    """Compare autodiff grads of ``loss_fn`` to central differences.

    ``loss_fn`` must be a deterministic pure forward pass (fixed seeds,
    fixed noise). Returns the max relative error over all parameter
    entries, with denominator max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise UsageError("finite_diff_check needs eps > 0")
    probe1 = float(loss_fn().values.reshape(()))
    probe2 = float(loss_fn().values.reshape(()))
    if probe1 != probe2:
        raise UnreliableCheckError(
            "loss_fn is not deterministic (%r vs %r); fix seeds first" % (probe1, probe2))

    saved = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = [p.grad.copy() for p in params]
    for p, g in zip(params, saved):
        p.grad = g

    worst = 0.0
    for p, ga in zip(params, analytic):
        gflat = ga.reshape(-1)
        for j in range(p.values.size):
            idx = np.unravel_index(j, p.values.shape)
            orig = p.values[idx]
            p.values[idx] = orig + eps
            hi = float(loss_fn().values.reshape(()))
            p.values[idx] = orig - eps
            lo = float(loss_fn().values.reshape(()))
            p.values[idx] = orig
            numeric = (hi - lo) / (2.0 * eps)
            denom = max(abs(gflat[j]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst
