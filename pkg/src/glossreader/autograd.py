"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Covers exactly the operations the reading-comprehension model needs: matrix
products, row softmax with masking, layer normalization, inverted dropout,
masked mean pooling, cross entropy, plus the gathers/concats that wire a
transformer together. Everything is float64 and row-major; sequences are
stored position-major (length x features).

Gradients are recorded on an explicit :class:`Tape`. Ops only record when a
tape is active and some input requires grad, so forward passes outside a tape
(evaluation) build no graph. Tapes are independent; one tape per training run
is the intended usage and concurrent runs must not share tensors.
"""

from __future__ import annotations

import contextvars
import math
from typing import Callable, Iterable, Sequence

import numpy as np

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "glossreader_active_tape", default=None
)


class Tensor:
    """A float64 array plus optional gradient buffer.

    ``grad`` is populated by ``Tape.backward`` for every tensor with
    ``requires_grad`` that the loss depends on. Tensors are treated as
    immutable once created; training updates write through ``data`` in place
    only between tapes.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of executed ops, replayed in reverse for adjoints.

    Ops append their outputs in execution order, which is already a
    topological order of the graph; ``backward`` walks it reversed. A tape
    may be consumed by ``backward`` exactly once; call ``reset`` to reuse.
    """

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._consumed = False
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def record(self, node: Tensor) -> None:
        self._nodes.append(node)

    def reset(self) -> None:
        self._nodes.clear()
        self._consumed = False

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` on every requires-grad tensor reachable from ``loss``."""
        if loss.data.ndim != 0:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if self._consumed:
            raise RuntimeError("tape already consumed by backward; reset() to reuse")
        if not any(loss is n for n in self._nodes):
            raise ValueError("loss tensor was not recorded on this tape")
        self._consumed = True
        loss.grad = np.ones((), dtype=np.float64)
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def _make_output(data: np.ndarray, parents: Sequence[Tensor],
                 backward: Callable[[np.ndarray], None]) -> Tensor:
    """Wrap an op result, registering the adjoint when recording applies."""
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    tape = _ACTIVE_TAPE.get()
    if out.requires_grad and tape is not None:
        out._parents = tuple(parents)
        out._backward = backward
        tape.record(out)
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g)

    return _make_output(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _make_output(a.data * b.data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * c)

    return _make_output(a.data * c, (a,), backward)


def add_row(x: Tensor, bias: Tensor) -> Tensor:
    """Add a length-d bias vector to every row of an m x d matrix."""
    if x.data.ndim != 2 or bias.data.ndim != 1 or x.shape[1] != bias.shape[0]:
        raise ValueError(f"add_row shape mismatch: {x.shape} vs {bias.shape}")

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g)
        _accumulate(bias, g.sum(axis=0))

    return _make_output(x.data + bias.data[None, :], (x, bias), backward)


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0.0

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * keep)

    return _make_output(np.where(keep, x.data, 0.0), (x,), backward)


def transpose(x: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        _accumulate(x, g.T)

    return _make_output(np.ascontiguousarray(x.data.T), (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        _accumulate(x, np.full_like(x.data, float(g)))

    return _make_output(np.asarray(x.data.sum()), (x,), backward)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"dot needs equal-length vectors, got {a.shape} and {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accumulate(a, float(g) * b.data)
        _accumulate(b, float(g) * a.data)

    return _make_output(np.asarray(a.data @ b.data), (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with adjoints dA = G B^T, dB = A^T G."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make_output(a.data @ b.data, (a, b), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("concat of empty sequence")
    ndim = tensors[0].data.ndim
    if any(t.data.ndim != ndim for t in tensors):
        raise ValueError("concat operands must share rank")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * ndim
            sl[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(sl)])

    return _make_output(np.concatenate([t.data for t in tensors], axis=axis),
                        tuple(tensors), backward)


def stack_scalars(tensors: Sequence[Tensor]) -> Tensor:
    """Build a 1-d tensor out of scalar tensors (one per class logit)."""
    if any(t.data.ndim != 0 for t in tensors):
        raise ValueError("stack_scalars takes scalar tensors only")

    def backward(g: np.ndarray) -> None:
        for i, t in enumerate(tensors):
            _accumulate(t, np.asarray(g[i]))

    return _make_output(np.array([t.data for t in tensors], dtype=np.float64),
                        tuple(tensors), backward)


def gather_rows(x: Tensor, indices) -> Tensor:
    """Select rows by index; the adjoint scatter-adds (indices may repeat)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("gather_rows needs a 1-d index list")
    if x.data.ndim != 2:
        raise ValueError("gather_rows needs a 2-d source")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise IndexError(f"row index out of range for source with {x.shape[0]} rows")

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, idx, g)

    return _make_output(x.data[idx], (x,), backward)


# ---------------------------------------------------------------------------
# model-specific ops


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax with max-subtraction; masked-out entries are exactly 0.

    ``mask`` is a boolean array of ``x``'s shape; False positions get zero
    probability and contribute nothing to the normalizer. A fully masked row
    is an error: it would mean attending over an empty context.
    """
    if x.data.ndim != 2:
        raise ValueError(f"softmax_rows needs a 2-d input, got shape {x.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ValueError(f"softmax mask shape {mask.shape} != input {x.shape}")
        if not mask.any(axis=1).all():
            raise ValueError("softmax_rows: some row is fully masked")
        logits = np.where(mask, x.data, -np.inf)
    else:
        logits = x.data
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        # dX = (G - rowsum(G*S)) * S; masked entries have S == 0 so get 0.
        inner = (g * probs).sum(axis=1, keepdims=True)
        _accumulate(x, (g - inner) * probs)

    return _make_output(probs, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardization (population variance) followed by gamma*x + beta."""
    if x.data.ndim != 2:
        raise ValueError(f"layer_norm needs a 2-d input, got shape {x.shape}")
    d = x.shape[1]
    if d < 2:
        raise ValueError("layer_norm needs at least 2 features per row")
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError(f"layer_norm affine params must have shape ({d},)")
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    mean = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv_std

    def backward(g: np.ndarray) -> None:
        _accumulate(beta, g.sum(axis=0))
        _accumulate(gamma, (g * xhat).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data[None, :]
            # standard layer-norm adjoint wrt the pre-affine standardization
            term = gx - gx.mean(axis=1, keepdims=True) \
                - xhat * (gx * xhat).mean(axis=1, keepdims=True)
            _accumulate(x, term * inv_std)

    return _make_output(xhat * gamma.data[None, :] + beta.data[None, :],
                        (x, gamma, beta), backward)


def dropout(x: Tensor, p: float, training: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Evaluation mode is the identity. The mask comes from ``rng`` so a fixed
    seed reproduces it exactly.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        def backward_id(g: np.ndarray) -> None:
            _accumulate(x, g)

        return _make_output(x.data.copy(), (x,), backward_id)
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.shape) >= p
    factor = keep / (1.0 - p)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * factor)

    return _make_output(x.data * factor, (x,), backward)


def mean_pool_masked(x: Tensor, mask) -> Tensor:
    """Mean over the rows where ``mask`` is True; padding rows are excluded."""
    mask = np.asarray(mask, dtype=bool)
    if x.data.ndim != 2 or mask.shape != (x.shape[0],):
        raise ValueError(f"mean_pool_masked: mask shape {mask.shape} does not "
                         f"match {x.shape[0]} rows")
    count = int(mask.sum())
    if count == 0:
        raise ValueError("mean_pool_masked: mask selects no rows")

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[mask] += g[None, :] / count

    return _make_output(x.data[mask].mean(axis=0), (x,), backward)


def cross_entropy_softmax(logits: Tensor, gold: int) -> Tensor:
    """-log softmax(logits)[gold], stabilized via logsumexp."""
    if logits.data.ndim != 1:
        raise ValueError(f"cross_entropy_softmax needs a 1-d logit vector, "
                         f"got shape {logits.shape}")
    n = logits.shape[0]
    if not 0 <= gold < n:
        raise IndexError(f"gold label {gold} out of range for {n} classes")
    z = logits.data
    m = z.max()
    lse = m + math.log(np.exp(z - m).sum())
    probs = np.exp(z - lse)

    def backward(g: np.ndarray) -> None:
        d = probs.copy()
        d[gold] -= 1.0
        _accumulate(logits, float(g) * d)

    return _make_output(np.asarray(lse - z[gold]), (logits,), backward)


# ---------------------------------------------------------------------------
# convenience constructors


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=np.float64), requires_grad=requires_grad)


def randn(rng: np.random.Generator, shape, std: float = 1.0,
          requires_grad: bool = False) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=requires_grad)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None
