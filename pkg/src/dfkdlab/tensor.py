"""Dense float64 tensors with tape-based reverse-mode differentiation.

Just enough engine for feed-forward classifiers and the distillation
losses: matmul, elementwise arithmetic, relu, reductions, (log-)softmax
with a -inf mask sentinel, KL divergence, L1, Huber, and batch pairwise
row distances. Everything is float64; there is no broadcasting beyond
NumPy's rules, and gradients of broadcast operands are summed back to
the operand's shape.

Recording model: ops append nodes to the innermost active `Tape` whenever
any input has ``requires_grad``. With no tape open (teacher scoring,
accuracy evaluation) nothing is recorded. A tape can run backward exactly
once; a second call raises `TapeReusedError`.
"""

from __future__ import annotations

import numbers
import threading

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Operand shapes are incompatible with the operation."""


class DegenerateDistributionError(ValueError):
    """Softmax over a fully-masked (all -inf) row."""


class InfiniteDivergenceError(ValueError):
    """KL divergence with q = 0 somewhere p > 0."""


class TapeReusedError(RuntimeError):
    """Backward was invoked twice on the same tape."""


_LOCAL = threading.local()


def _tape_stack():
    stack = getattr(_LOCAL, "tapes", None)
    if stack is None:
        stack = _LOCAL.tapes = []
    return stack


def active_tape():
    """The innermost open tape, or None."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense float64 array with an optional gradient.

    `grad` stays None until the tensor takes part in a backward pass.
    Leaf tensors created with ``requires_grad=True`` are the trainable
    parameters; op outputs track gradients automatically while a tape
    is open.
    """

    __slots__ = ("data", "grad", "requires_grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A copy that is off every tape and never accumulates gradient."""
        return Tensor(self.data.copy())

    def max(self, axis=None):
        """Non-differentiable max; returns a float or a NumPy array."""
        out = self.data.max(axis=axis)
        return float(out) if axis is None else out

    def argmax(self, axis=None):
        """Non-differentiable argmax; returns an int or a NumPy array."""
        out = self.data.argmax(axis=axis)
        return int(out) if axis is None else out

    def sum(self, axis=None) -> "Tensor":
        return tsum(self, axis=axis)

    def mean(self, axis=None) -> "Tensor":
        return tmean(self, axis=axis)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _coerce(other))


def _coerce(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if isinstance(value, (numbers.Number, np.ndarray)):
        return Tensor(value)
    raise TypeError(f"cannot use {type(value).__name__} as a tensor operand")


class _Node:
    __slots__ = ("output", "backward_fn")

    def __init__(self, output, backward_fn):
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of primitive ops for a single backward pass.

    Use as a context manager around the forward computation. Recording
    order is execution order, so the reversed node list is a valid
    reverse topological order and every node is visited exactly once.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._leaves: list[Tensor] = []
        self._leaf_ids: set[int] = set()
        self._used = False

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self
        return False

    def _record(self, out: Tensor, parents, backward_fn):
        out._tape = self
        for p in parents:
            if p.requires_grad and p._tape is not self and id(p) not in self._leaf_ids:
                self._leaf_ids.add(id(p))
                self._leaves.append(p)
        self._nodes.append(_Node(out, backward_fn))

    def backward(self, loss: Tensor):
        """Populate gradients of everything `loss` depends on.

        Leaf tensors recorded on this tape get zero-filled grads first,
        so a leaf that does not influence the loss ends with exactly
        zero gradient.
        """
        if self._used:
            raise TapeReusedError("tape already ran backward; build a new tape")
        if loss.data.shape != ():
            raise ShapeError(
                f"backward needs a scalar loss, got shape {loss.data.shape}")
        if loss._tape is not self:
            raise ValueError("loss was not recorded on this tape")
        self._used = True
        for leaf in self._leaves:
            leaf.grad = np.zeros_like(leaf.data)
        loss.grad = np.ones(())
        for node in reversed(self._nodes):
            if node.output.grad is not None:
                node.backward_fn(node.output.grad)


def backward(loss: Tensor):
    """Run backward on the tape that recorded `loss`."""
    if loss._tape is None:
        raise ValueError("loss is not attached to a tape "
                         "(was it computed inside `with Tape():`?)")
    loss._tape.backward(loss)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    g = _unbroadcast(np.asarray(g, dtype=np.float64), t.data.shape)
    t.grad = g.copy() if t.grad is None else t.grad + g


def _make(out_data, parents, backward_fn) -> Tensor:
    tape = active_tape()
    track = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=track)
    if track:
        tape._record(out, parents, backward_fn)
    return out


# --- elementwise arithmetic -------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g):
        _accum(a, g)
        _accum(b, g)
    return _make(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g):
        _accum(a, g)
        _accum(b, -g)
    return _make(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)
    return _make(a.data * b.data, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g):
        _accum(a, g / b.data)
        _accum(b, -g * a.data / (b.data * b.data))
    return _make(a.data / b.data, (a, b), bwd)


def power(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    out_data = a.data ** exponent

    def bwd(g):
        _accum(a, g * exponent * a.data ** (exponent - 1.0))
    return _make(out_data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    x = np.ascontiguousarray(a.data)

    def bwd(g):
        _accum(a, kernels.relu_bwd(x, np.ascontiguousarray(g)))
    return _make(kernels.relu_fwd(x), (a,), bwd)


def mask_fill(a: Tensor, keep: np.ndarray, fill_value: float) -> Tensor:
    """Replace entries where `keep` is falsy by `fill_value` (e.g. -inf).

    `keep` is a constant; gradient flows only through kept entries.
    """
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != a.data.shape:
        raise ShapeError(f"mask shape {keep.shape} != tensor shape {a.data.shape}")

    def bwd(g):
        _accum(a, np.where(keep, g, 0.0))
    return _make(np.where(keep, a.data, fill_value), (a,), bwd)


def clamp_min(a: Tensor, floor: float) -> Tensor:
    def bwd(g):
        _accum(a, np.where(a.data >= floor, g, 0.0))
    return _make(np.maximum(a.data, floor), (a,), bwd)


# --- matmul and reductions --------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"inner extents differ: {a.data.shape} @ {b.data.shape}")

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)
    return _make(a.data @ b.data, (a, b), bwd)


def tsum(a: Tensor, axis=None) -> Tensor:
    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape))
    return _make(a.data.sum(axis=axis), (a,), bwd)


def tmean(a: Tensor, axis=None) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / count, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g / count, axis),
                                      a.data.shape))
    return _make(a.data.mean(axis=axis), (a,), bwd)


# --- softmax family ----------------------------------------------------------

def _check_logits(z: np.ndarray):
    if np.isnan(z).any() or np.isposinf(z).any():
        raise ValueError("logits must be finite or the -inf mask sentinel")
    if np.isneginf(z).all(axis=-1).any():
        raise DegenerateDistributionError("softmax over a fully-masked row")


def softmax(a: Tensor, temperature: float = 1.0) -> Tensor:
    """Row softmax of `a / temperature`; -inf entries map to exactly 0.

    Accepts a vector or a matrix (softmax per row). Stabilized by
    max-subtraction, so |z| up to a few hundred is safe.
    """
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = a.data / temperature
    _check_logits(z)
    vector = z.ndim == 1
    p = kernels.softmax_rows(np.ascontiguousarray(np.atleast_2d(z)))
    if vector:
        p = p[0]

    def bwd(g):
        g2 = np.ascontiguousarray(np.atleast_2d(g))
        p2 = np.atleast_2d(p)
        gz = kernels.softmax_bwd_rows(p2, g2) / temperature
        _accum(a, gz[0] if vector else gz)
    return _make(p, (a,), bwd)


def log_softmax(a: Tensor, temperature: float = 1.0) -> Tensor:
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = a.data / temperature
    _check_logits(z)
    vector = z.ndim == 1
    z2 = np.ascontiguousarray(np.atleast_2d(z))
    out = z2 - kernels.logsumexp_rows(z2)[:, None]
    p = np.exp(out)

    def bwd(g):
        g2 = np.atleast_2d(g)
        gz = (g2 - p * g2.sum(axis=1, keepdims=True)) / temperature
        _accum(a, gz[0] if vector else gz)
    return _make(out[0] if vector else out, (a,), bwd)


def nll(logp: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer `labels` under row log-probs."""
    labels = np.asarray(labels)
    if logp.data.ndim != 2 or labels.shape != (logp.data.shape[0],):
        raise ShapeError("nll expects (N, n) log-probs and (N,) labels")
    n = logp.data.shape[0]
    rows = np.arange(n)
    out = -logp.data[rows, labels].mean()

    def bwd(g):
        gl = np.zeros_like(logp.data)
        gl[rows, labels] = -float(g) / n
        _accum(logp, gl)
    return _make(out, (logp,), bwd)


# --- divergence and distance losses ------------------------------------------

def kl_divergence(p: Tensor, q: Tensor) -> Tensor:
    """KL(p || q) = sum p*ln(p/q), with 0*ln(0/q) = 0.

    For matrices, returns the per-row divergence vector. Raises
    `InfiniteDivergenceError` when q = 0 somewhere p > 0.
    """
    if p.data.shape != q.data.shape:
        raise ShapeError(f"shape mismatch: {p.data.shape} vs {q.data.shape}")
    pd, qd = p.data, q.data
    if (pd < 0).any() or (qd < 0).any():
        raise ValueError("distributions must be non-negative")
    sums_p = pd.sum(axis=-1)
    sums_q = qd.sum(axis=-1)
    if not (np.allclose(sums_p, 1.0, atol=1e-8) and
            np.allclose(sums_q, 1.0, atol=1e-8)):
        raise ValueError("inputs must sum to 1 along the last axis")
    support = pd > 0.0
    if (support & (qd == 0.0)).any():
        raise InfiniteDivergenceError("q = 0 on the support of p")

    ratio_log = np.zeros_like(pd)
    ratio_log[support] = np.log(pd[support] / qd[support])
    terms = pd * ratio_log
    out = terms.sum(axis=-1)

    def bwd(g):
        g = np.expand_dims(g, -1) if pd.ndim == 2 else g
        _accum(p, g * np.where(support, ratio_log + 1.0, 0.0))
        gq = np.zeros_like(qd)
        np.divide(pd, qd, out=gq, where=support)
        _accum(q, -g * gq)
    return _make(out, (p, q), bwd)


def l1_distance(a: Tensor, b: Tensor) -> Tensor:
    """Sum of absolute elementwise differences; subgradient 0 at ties."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    diff = np.ascontiguousarray(a.data - b.data)

    def bwd(g):
        s = kernels.sign(diff)
        _accum(a, g * s)
        _accum(b, -g * s)
    return _make(kernels.abs_sum(diff), (a, b), bwd)


def huber(a: Tensor, b: Tensor, delta: float) -> Tensor:
    """Elementwise Huber loss between `a` and `b`."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    diff = np.ascontiguousarray(a.data - b.data)

    def bwd(g):
        hg = kernels.huber_grad(diff, delta)
        _accum(a, g * hg)
        _accum(b, -g * hg)
    return _make(kernels.huber_each(diff, delta), (a, b), bwd)


def mean_pairwise_distance(a: Tensor) -> Tensor:
    """Per-row mean L2 distance to the other rows of a (N, k) matrix."""
    if a.data.ndim != 2:
        raise ShapeError("mean_pairwise_distance expects a 2-D batch")
    if a.data.shape[0] < 2:
        raise ShapeError("needs a batch of at least 2 rows")
    x = np.ascontiguousarray(a.data)

    def bwd(g):
        _accum(a, kernels.pairwise_mean_dist_bwd(x, np.ascontiguousarray(g)))
    return _make(kernels.pairwise_mean_dist(x), (a,), bwd)
