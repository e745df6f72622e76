"""Dense array arithmetic with reverse-mode automatic differentiation.

Values are numpy arrays wrapped in :class:`Tensor`. While a :class:`Tape` is
active (``with Tape() as tape:``), every operation whose inputs require
gradients is recorded; :func:`backward` then sweeps the tape in reverse and
returns gradients for named parameters. With no active tape the same
functions compute plain numpy results, which is the inference path.

Training runs at float32; gradient checking runs the identical code at
float64, where central finite differences are meaningful.
"""

from __future__ import annotations

import threading
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NonFiniteGradientError, ShapeError

__all__ = [
    "Tensor",
    "Tape",
    "parameter",
    "constant",
    "add",
    "mul",
    "scale",
    "matmul",
    "relu",
    "softmax",
    "rms_norm",
    "embedding_gather",
    "concat",
    "slice_axis",
    "reshape",
    "transpose",
    "sum_all",
    "dropout",
    "cross_entropy",
    "backward",
    "grad_check",
]

RMS_NORM_EPS = 1e-6
# Large finite bias used for additive attention masking: exp() of anything
# this far below the row max underflows to exactly 0.0 in both float32 and
# float64, so masked softmax weights are exactly zero.
MASK_BIAS = -1e9


class Tensor:
    """A dense float array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data: np.ndarray, requires_grad: bool = False, name: str | None = None):
        self.data = data
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


def parameter(data: np.ndarray, name: str) -> Tensor:
    return Tensor(np.ascontiguousarray(data), requires_grad=True, name=name)


def constant(data, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype))


class _Node:
    __slots__ = ("out", "parents", "grad_fn")

    def __init__(self, out: Tensor, parents: tuple[Tensor, ...], grad_fn: Callable):
        self.out = out
        self.parents = parents
        self.grad_fn = grad_fn


_LOCAL = threading.local()


def _tape_stack() -> list["Tape"]:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def _active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of operations; execution order is topological order."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self, "tapes must be exited in LIFO order"
        return False


def _record(out_data: np.ndarray, parents: tuple[Tensor, ...], grad_fn: Callable) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out = Tensor(out_data, requires_grad=True)
        tape.nodes.append(_Node(out, parents, grad_fn))
        return out
    return Tensor(out_data)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check(cond: bool, op: str, *shapes) -> None:
    if not cond:
        raise ShapeError(f"{op}: incompatible shapes {' and '.join(str(tuple(s)) for s in shapes)}")


# ---------------------------------------------------------------------------
# Primitive operations
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def grad_fn(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))

    return _record(out, (a, b), grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def grad_fn(g):
        return (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape))

    return _record(out, (a, b), grad_fn)


def scale(a: Tensor, factor: float) -> Tensor:
    f = a.data.dtype.type(factor)
    out = a.data * f

    def grad_fn(g):
        return (g * f,)

    return _record(out, (a,), grad_fn)


def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """Batched matrix product over the last two axes; leading axes broadcast."""
    bd = np.swapaxes(b.data, -1, -2) if transpose_b else b.data
    _check(a.data.ndim >= 2 and b.data.ndim >= 2, "matmul", a.shape, b.shape)
    _check(a.data.shape[-1] == bd.shape[-2], "matmul", a.shape, b.shape)
    out = np.matmul(a.data, bd)

    def grad_fn(g):
        if transpose_b:
            ga = np.matmul(g, b.data)
            gb = np.matmul(np.swapaxes(g, -1, -2), a.data)
        else:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _record(out, (a, b), grad_fn)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0)

    def grad_fn(g):
        return (g * (a.data > 0),)

    return _record(out, (a,), grad_fn)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return ((g - inner) * out,)

    return _record(out, (a,), grad_fn)


def rms_norm(a: Tensor, gain: Tensor, eps: float = RMS_NORM_EPS) -> Tensor:
    """Root-mean-square normalization over the last axis with a learned gain."""
    _check(gain.data.shape == a.data.shape[-1:], "rms_norm", a.shape, gain.shape)
    d = a.data.shape[-1]
    ms = np.mean(np.square(a.data), axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(ms + eps)
    normed = a.data * inv
    out = normed * gain.data

    def grad_fn(g):
        gg = g * gain.data
        # d/dx of x * (mean(x^2)+eps)^-1/2
        proj = (gg * a.data).sum(axis=-1, keepdims=True)
        ga = gg * inv - a.data * (inv ** 3) * (proj / d)
        ggain = (g * normed).reshape(-1, d).sum(axis=0)
        return (ga, ggain)

    return _record(out, (a, gain), grad_fn)


def embedding_gather(ids: np.ndarray, table: Tensor) -> Tensor:
    """Row lookup: result[..., :] = table[ids[...], :]."""
    ids = np.asarray(ids)
    _check(table.data.ndim == 2, "embedding_gather", table.shape)
    out = table.data[ids]

    def grad_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        return (gt,)

    return _record(out, (table,), grad_fn)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(parts), grad_fn)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    key = [slice(None)] * a.data.ndim
    key[axis] = slice(start, stop)
    key = tuple(key)
    out = a.data[key]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        ga[key] = g
        return (ga,)

    return _record(out, (a,), grad_fn)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out = a.data.reshape(shape)

    def grad_fn(g):
        return (g.reshape(a.data.shape),)

    return _record(out, (a,), grad_fn)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    out = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def grad_fn(g):
        return (np.transpose(g, inverse),)

    return _record(out, (a,), grad_fn)


def sum_all(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def grad_fn(g):
        return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype),)

    return _record(out, (a,), grad_fn)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0."""
    if rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(a.data.dtype) / a.data.dtype.type(1.0 - rate)
    out = a.data * keep

    def grad_fn(g):
        return (g * keep,)

    return _record(out, (a,), grad_fn)


def cross_entropy(logits: Tensor, labels: np.ndarray, ignore_id: int) -> Tensor:
    """Mean of -log softmax(logits)[i, labels[i]] over positions with labels != ignore_id."""
    _check(logits.data.ndim == 2, "cross_entropy", logits.shape)
    labels = np.asarray(labels)
    _check(labels.shape == logits.data.shape[:1], "cross_entropy", logits.shape, labels.shape)
    real = labels != ignore_id
    n_real = int(real.sum())
    if n_real == 0:
        raise ValueError("cross_entropy: every label equals ignore_id")

    z = logits.data
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    sum_e = e.sum(axis=-1, keepdims=True)
    logsumexp = np.log(sum_e[:, 0]) + zmax[:, 0]
    rows = np.arange(z.shape[0])
    safe_labels = np.where(real, labels, 0)
    nll = logsumexp - z[rows, safe_labels]
    loss = np.asarray((nll * real).sum() / n_real, dtype=z.dtype)

    def grad_fn(g):
        p = e / sum_e
        p[rows[real], labels[real]] -= 1.0
        p[~real] = 0.0
        return (p * (g / n_real),)

    return _record(loss, (logits,), grad_fn)


# ---------------------------------------------------------------------------
# Reverse sweep and verification
# ---------------------------------------------------------------------------

def backward(tape: Tape, loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Reverse-sweep the tape from a scalar loss.

    Returns one gradient array per named parameter; parameters the loss does
    not depend on get zeros.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    out = {}
    for name, p in params.items():
        g = grads.get(id(p))
        out[name] = np.zeros_like(p.data) if g is None else np.asarray(g)
    return out


def check_finite(name: str, grad: np.ndarray) -> None:
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")


def grad_check(
    fn: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, Tensor],
    epsilon: float = 1e-5,
    max_coords: int = 200,
    seed: int = 0,
) -> float:
    """Compare reverse-mode gradients against central finite differences.

    `fn` maps parameters to a scalar-loss Tensor and must be deterministic.
    Parameters are promoted to float64; per parameter array, up to
    `max_coords` coordinates are sampled and perturbed. Returns the maximum
    relative error |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    p64 = {name: parameter(p.data.astype(np.float64), name) for name, p in params.items()}
    with Tape() as tape:
        loss = fn(p64)
    analytic = backward(tape, loss, p64)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in p64.items():
        flat = p.data.reshape(-1)
        size = flat.shape[0]
        coords = np.arange(size) if size <= max_coords else rng.choice(size, size=max_coords, replace=False)
        aflat = analytic[name].reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            f_plus = float(fn(p64).data)
            flat[c] = orig - epsilon
            f_minus = float(fn(p64).data)
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = float(aflat[c])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
