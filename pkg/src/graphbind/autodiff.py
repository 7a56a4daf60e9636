"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Value` wraps an ndarray together with its gradient and a
closure that pushes incoming gradients to its parents. Operations build
a DAG; :func:`backward` topologically sorts it and runs the closures in
reverse. The op set is exactly what the affinity model needs — dense
algebra, a few activations, gather/scatter ops, a fused LSTM step
returning the final hidden state, and a graph-neighborhood sum whose
forward pass sorts summands so atom relabeling cannot change output
bits.

Also here: seeded RNG streams (Philox), Adam, and a central-difference
gradient checker.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonScalarLossError(ValueError):
    """backward() was called on a value with more than one element."""


# ---------------------------------------------------------------------------
# core node


class Value:
    """An array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=""):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate(self, grad):
        """Add ``grad`` into this node's gradient buffer."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Value({self.data.shape}, dtype={self.data.dtype}{tag})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))


def _wrap(x) -> Value:
    return x if isinstance(x, Value) else Value(np.asarray(x))


def backward(loss: Value) -> None:
    """Accumulate d(loss)/d(node) into every reachable node's ``grad``.

    ``loss`` must hold exactly one element. Gradients add into whatever
    is already in each ``grad`` buffer; callers reset buffers between
    steps.
    """
    if loss.data.size != 1:
        raise NonScalarLossError(f"loss has shape {loss.data.shape}, expected a scalar")

    order: list[Value] = []
    seen: set[int] = set()
    stack: list[tuple[Value, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))

    loss.accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(values) -> None:
    for v in values:
        v.grad = None


# ---------------------------------------------------------------------------
# elementwise / dense ops


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def matmul(a: Value, b: Value) -> Value:
    out_data = a.data @ b.data

    def push(grad):
        if a.requires_grad:
            a.accumulate(grad @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ grad)

    return Value(out_data, parents=(a, b), backward=push, name="matmul")


def add(a: Value, b: Value) -> Value:
    out_data = a.data + b.data

    def push(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad, b.data.shape))

    return Value(out_data, parents=(a, b), backward=push, name="add")


def mul(a: Value, b: Value) -> Value:
    out_data = a.data * b.data

    def push(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad * a.data, b.data.shape))

    return Value(out_data, parents=(a, b), backward=push, name="mul")


def relu(x: Value) -> Value:
    out_data = np.maximum(x.data, 0)

    def push(grad):
        if x.requires_grad:
            x.accumulate(grad * (x.data > 0))

    return Value(out_data, parents=(x,), backward=push, name="relu")


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(min(x,0)) / (1 + exp(-|x|)) never overflows on either tail.
    return np.exp(np.minimum(x, 0)) / (1.0 + np.exp(-np.abs(x)))


def sigmoid(x: Value) -> Value:
    s = _stable_sigmoid(x.data)

    def push(grad):
        if x.requires_grad:
            x.accumulate(grad * s * (1.0 - s))

    return Value(s, parents=(x,), backward=push, name="sigmoid")


def tanh(x: Value) -> Value:
    t = np.tanh(x.data)

    def push(grad):
        if x.requires_grad:
            x.accumulate(grad * (1.0 - t * t))

    return Value(t, parents=(x,), backward=push, name="tanh")


def concat(values: list[Value], axis: int = -1) -> Value:
    out_data = np.concatenate([v.data for v in values], axis=axis)
    sizes = [v.data.shape[axis] for v in values]
    splits = np.cumsum(sizes[:-1])

    def push(grad):
        for v, piece in zip(values, np.split(grad, splits, axis=axis)):
            if v.requires_grad:
                v.accumulate(piece)

    return Value(out_data, parents=tuple(values), backward=push, name="concat")


def stack_rows(values: list[Value]) -> Value:
    """Stack 1-D values of equal length into a matrix, one per row."""
    out_data = np.stack([v.data for v in values])

    def push(grad):
        for k, v in enumerate(values):
            if v.requires_grad:
                v.accumulate(grad[k])

    return Value(out_data, parents=tuple(values), backward=push, name="stack_rows")


def take_rows(x: Value, indices: np.ndarray) -> Value:
    """Gather rows: out[k] = x[indices[k]]. Rows may repeat."""
    idx = np.asarray(indices, dtype=np.int64)
    out_data = x.data[idx]

    def push(grad):
        if x.requires_grad:
            # Scatter-add as a matmul: rows of x picked several times
            # receive the sum of their copies' gradients.
            onehot = (idx[None, :] == np.arange(x.data.shape[0])[:, None]).astype(x.data.dtype)
            x.accumulate(onehot @ grad)

    return Value(out_data, parents=(x,), backward=push, name="take_rows")


def row_max_pool(x: Value) -> Value:
    """Column-wise max over the rows of a 2-D value -> 1-D vector.

    Ties route the gradient to the lowest row index.
    """
    winners = np.argmax(x.data, axis=0)
    out_data = x.data[winners, np.arange(x.data.shape[1])]

    def push(grad):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[winners, np.arange(x.data.shape[1])] = grad
            x.accumulate(dx)

    return Value(out_data, parents=(x,), backward=push, name="row_max_pool")


def embedding_lookup(table: Value, indices: np.ndarray) -> Value:
    """out[..., :] = table[indices[...], :] for an integer index array."""
    idx = np.asarray(indices, dtype=np.int64)
    out_data = table.data[idx]

    def push(grad):
        if table.requires_grad:
            flat_idx = idx.reshape(-1)
            flat_grad = grad.reshape(-1, table.data.shape[1])
            onehot = (flat_idx[None, :] == np.arange(table.data.shape[0])[:, None]).astype(
                table.data.dtype
            )
            table.accumulate(onehot @ flat_grad)

    return Value(out_data, parents=(table,), backward=push, name="embedding")


def dropout(x: Value, rate: float, rng: "Rng", training: bool = True) -> Value:
    """Inverted dropout: zero with probability ``rate``, scale survivors.

    Identity (returning ``x`` itself) when not training or rate is 0.
    Draws one mask from ``rng`` per call, so call order matters for
    reproducibility.
    """
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = (rng.generator.random(x.data.shape) >= rate).astype(x.data.dtype)
    scale = x.data.dtype.type(1.0 / (1.0 - rate))
    out_data = x.data * keep * scale

    def push(grad):
        if x.requires_grad:
            x.accumulate(grad * keep * scale)

    return Value(out_data, parents=(x,), backward=push, name="dropout")


def mse(pred: Value, target: np.ndarray) -> Value:
    """Mean squared error against a constant target array."""
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.shape != pred.data.shape:
        raise ValueError(f"shape mismatch: pred {pred.data.shape} vs target {target.shape}")
    diff = pred.data - target
    out_data = np.asarray((diff * diff).mean())

    def push(grad):
        if pred.requires_grad:
            pred.accumulate(grad * diff * float(2.0 / diff.size))

    return Value(out_data, parents=(pred,), backward=push, name="mse")


# ---------------------------------------------------------------------------
# graph aggregation


@dataclass
class AggregationStructure:
    """Gather-form of a sparse symmetric matrix, padded to max row count.

    ``idx[i, m]`` is the column of the m-th nonzero in row i, ``coef``
    its value; ``valid`` marks real entries (padding gathers row 0 with
    coefficient 0 and is overwritten with exact +0 in the forward pass).
    """

    matrix: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "AggregationStructure":
        n = matrix.shape[0]
        rows = [np.flatnonzero(matrix[i]) for i in range(n)]
        width = max((len(r) for r in rows), default=0) or 1
        idx = np.zeros((n, width), dtype=np.int64)
        coef = np.zeros((n, width), dtype=matrix.dtype)
        valid = np.zeros((n, width), dtype=bool)
        for i, cols in enumerate(rows):
            idx[i, : len(cols)] = cols
            coef[i, : len(cols)] = matrix[i, cols]
            valid[i, : len(cols)] = True
        return cls(matrix=matrix, idx=idx, coef=coef, valid=valid)


def neighbor_sum(x: Value, structure: AggregationStructure) -> Value:
    """Multiply a fixed symmetric matrix into ``x``, rows = weighted sums.

    Equivalent to ``structure.matrix @ x.data`` up to rounding, but the
    summands of every output component are sorted by value before
    reduction, so any relabeling of rows that permutes the matrix
    consistently yields bit-identical output. The backward pass is a
    plain matmul with the (symmetric) matrix.
    """
    gathered = x.data[structure.idx] * structure.coef[:, :, None]
    gathered[~structure.valid] = 0.0  # exact +0 so padding cannot flip sign bits
    gathered.sort(axis=1)
    out_data = gathered.sum(axis=1)

    def push(grad):
        if x.requires_grad:
            x.accumulate(structure.matrix.T @ grad)

    return Value(out_data, parents=(x,), backward=push, name="neighbor_sum")


# ---------------------------------------------------------------------------
# fused LSTM


def lstm_last(x: Value, wx: Value, wh: Value, b: Value, reverse: bool = False) -> Value:
    """Run an LSTM over ``x`` (batch, time, features), return last hidden.

    Gate layout along the last weight axis is [input, forget, output,
    cell] so the sigmoid covers one contiguous slice and tanh the rest.
    ``reverse=True`` consumes the sequence back-to-front (the second
    direction of a bidirectional encoder). The whole unroll is one graph
    node with a hand-written backward-through-time pass; activation and
    state caches are (time, batch, ...) and peak at roughly
    8 * batch * time * hidden elements.
    """
    batch, steps, _ = x.data.shape
    hidden = wh.data.shape[0]
    if wx.data.shape[1] != 4 * hidden or b.data.shape[0] != 4 * hidden:
        raise ValueError("LSTM weight shapes disagree on hidden size")

    x_seq = x.data[:, ::-1, :] if reverse else x.data
    x_flat = np.ascontiguousarray(x_seq).reshape(batch * steps, -1)

    # Input contributions for all timesteps in one multiply; the array
    # is then overwritten in place with activated gate values.
    gates = (x_flat @ wx.data + b.data).reshape(batch, steps, 4 * hidden)
    gates = np.ascontiguousarray(gates.transpose(1, 0, 2))  # (T, B, 4H)

    h_all = np.zeros((steps + 1, batch, hidden), dtype=x.data.dtype)
    c_all = np.zeros((steps + 1, batch, hidden), dtype=x.data.dtype)
    tanh_c = np.empty((steps, batch, hidden), dtype=x.data.dtype)

    for t in range(steps):
        z = gates[t]
        z += h_all[t] @ wh.data
        z[:, : 3 * hidden] = _stable_sigmoid(z[:, : 3 * hidden])
        z[:, 3 * hidden :] = np.tanh(z[:, 3 * hidden :])
        i, f, o = (
            z[:, :hidden],
            z[:, hidden : 2 * hidden],
            z[:, 2 * hidden : 3 * hidden],
        )
        g = z[:, 3 * hidden :]
        c_all[t + 1] = f * c_all[t] + i * g
        tanh_c[t] = np.tanh(c_all[t + 1])
        h_all[t + 1] = o * tanh_c[t]

    out_data = h_all[steps].copy()

    def push(grad):
        dh = grad.astype(x.data.dtype, copy=True)
        dc = np.zeros_like(dh)
        dwh = np.zeros_like(wh.data)
        for t in range(steps - 1, -1, -1):
            z = gates[t]
            i, f, o = (
                z[:, :hidden],
                z[:, hidden : 2 * hidden],
                z[:, 2 * hidden : 3 * hidden],
            )
            g = z[:, 3 * hidden :]
            do = dh * tanh_c[t]
            dc = dc + dh * o * (1.0 - tanh_c[t] * tanh_c[t])
            di = dc * g
            df = dc * c_all[t]
            dg = dc * i
            dc = dc * f
            # Overwrite the cached activations with pre-activation grads.
            z[:, :hidden] = di * i * (1.0 - i)
            z[:, hidden : 2 * hidden] = df * f * (1.0 - f)
            z[:, 2 * hidden : 3 * hidden] = do * o * (1.0 - o)
            z[:, 3 * hidden :] = dg * (1.0 - g * g)
            dwh += h_all[t].T @ z
            dh = z @ wh.data.T
        dz_flat = gates.transpose(1, 0, 2).reshape(batch * steps, 4 * hidden)
        if wx.requires_grad:
            wx.accumulate(x_flat.T @ dz_flat)
        if wh.requires_grad:
            wh.accumulate(dwh)
        if b.requires_grad:
            b.accumulate(dz_flat.sum(axis=0))
        if x.requires_grad:
            dx = (dz_flat @ wx.data.T).reshape(batch, steps, -1)
            x.accumulate(dx[:, ::-1, :] if reverse else dx)

    return Value(out_data, parents=(x, wx, wh, b), backward=push, name="lstm_last")


# ---------------------------------------------------------------------------
# RNG streams


class Rng:
    """A named Philox stream: (seed, stream) fully determine the draws."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.generator = np.random.Generator(np.random.Philox(key=[self.seed, self.stream]))

    def uniform(self, low, high, shape, dtype=np.float32):
        return self.generator.uniform(low, high, size=shape).astype(dtype)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update with bias correction."""
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * (grad * grad)
    m_hat = state.m / float(1.0 - beta1**state.t)
    v_hat = state.v / float(1.0 - beta2**state.t)
    param -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)


class Adam:
    """Adam over a named parameter dict; lazily creates per-tensor state."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.state: dict[str, AdamState] = {}

    def step(self, params: dict[str, Value]) -> None:
        for name, p in params.items():
            if p.grad is None:
                continue
            st = self.state.get(name)
            if st is None:
                st = self.state[name] = AdamState(
                    m=np.zeros_like(p.data), v=np.zeros_like(p.data)
                )
            adam_step(p.data, p.grad, st, self.lr, self.beta1, self.beta2, self.eps)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict[str, float] = field(default_factory=dict)


def finite_difference_check(
    fn,
    params: dict[str, Value],
    eps: float = 1e-5,
    max_coords: int = 200,
    seed: int = 0,
) -> GradCheckResult:
    """Compare analytic gradients of ``fn()`` with central differences.

    ``fn`` must rebuild a scalar loss from the live ``params`` on every
    call. At most ``max_coords`` coordinates per tensor are probed,
    sampled with a seeded RNG. Relative error for a coordinate is
    |a - n| / max(|a|, |n|, 1e-4): the floor turns near-zero-gradient
    coordinates into an absolute comparison at the 1e-4 scale, below
    which central differences are dominated by cancellation noise
    (~machine epsilon times the loss magnitude over eps). Callers are
    responsible for keeping probed inputs away from non-differentiable
    points such as the relu kink at exactly 0, where a one-sided secant
    is the wrong reference.
    """
    zero_grads(params.values())
    loss = fn()
    backward(loss)
    analytic = {name: np.array(p.grad, copy=True) for name, p in params.items()}

    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    per_tensor: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        size = flat.size
        coords = np.arange(size) if size <= max_coords else np.sort(
            rng.choice(size, size=max_coords, replace=False)
        )
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = float(fn().data)
            flat[c] = orig - eps
            down = float(fn().data)
            flat[c] = orig
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[c])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-4)
            worst = max(worst, err)
        per_tensor[name] = worst
    return GradCheckResult(max_rel_error=max(per_tensor.values(), default=0.0), per_tensor=per_tensor)
