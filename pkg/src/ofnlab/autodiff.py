"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

Every primitive the actor/critic networks need lives here: affine maps,
activations, the unit-ball feature projection and its exact Jacobian,
dropout, reductions, and the handful of pointwise ops used by the squashed
Gaussian policy. A Tensor is either a constant (no tape) or a node recorded
on a single Tape; the backward pass walks the tape once, in reverse order.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, ContractViolation

_LOG2 = math.log(2.0)

# Row norms at or below this are treated as degenerate and replaced by the
# guard value itself, so the projection never divides by zero.
UNIT_BALL_EPS = 1e-8


class Tensor:
    """Immutable view of a float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape=None, node=None):
        if type(data) is np.ndarray and data.dtype == np.float64:
            self.data = data
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = "const" if self.tape is None else f"node {self.node}"
        return f"Tensor(shape={self.data.shape}, {tag})"

    # Operator sugar; python scalars are wrapped as constants.
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

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return neg(self)


class _Node:
    __slots__ = ("inputs", "backward")

    def __init__(self, inputs, backward):
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of primitive applications.

    Nodes are appended in execution order, so reversal yields a valid
    topological backward order. Leaves are named parameters; `gradients`
    returns one gradient per leaf (zeros for leaves the root never touched).
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.leaves: dict[str, int] = {}
        self._leaf_shapes: dict[str, tuple] = {}
        self._leaf_tensors: dict[str, Tensor] = {}

    def leaf(self, name: str, array) -> Tensor:
        """Register a named parameter leaf and return its tracked tensor.

        Re-registering an existing name returns the original node, so a
        parameter used by several loss terms accumulates one gradient.
        """
        cached = self._leaf_tensors.get(name)
        if cached is not None:
            if cached.data.shape != np.shape(array):
                raise ContractViolation(f"leaf {name!r} re-registered with new shape")
            return cached
        node = self._record(np.asarray(array, dtype=np.float64), (), None)
        self.leaves[name] = node.node
        self._leaf_shapes[name] = node.data.shape
        self._leaf_tensors[name] = node
        return node

    def _record(self, out_data, input_nodes, backward_fn) -> Tensor:
        self.nodes.append(_Node(input_nodes, backward_fn))
        return Tensor(out_data, self, len(self.nodes) - 1)

    def gradients(self, root: Tensor) -> dict[str, np.ndarray]:
        """Gradient of a scalar root with respect to every leaf on this tape."""
        return backward(self, root)


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _tape_of(*tensors):
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise ContractViolation("operands live on different tapes")
            tape = t.tape
    return tape


def _apply(out_data, operands, backward_fn) -> Tensor:
    tape = _tape_of(*operands)
    if tape is None:
        return Tensor(out_data)
    return tape._record(out_data, tuple(t.node for t in operands), backward_fn)


def _reduce_to(grad, shape):
    """Sum a gradient down to a broadcast operand's shape."""
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum(), dtype=np.float64).reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    if a.data.shape == b.data.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    raise ContractViolation(
        f"{op}: shapes {a.data.shape} and {b.data.shape} are not compatible"
    )


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return _reduce_to(g, ash), _reduce_to(g, bsh)

    return _apply(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return _reduce_to(g, ash), _reduce_to(-g, bsh)

    return _apply(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data

    def bwd(g):
        return _reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)

    return _apply(ad * bd, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def bwd(g):
        return _reduce_to(g / bd, ad.shape), _reduce_to(-g * out / bd, bd.shape)

    return _apply(out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    return _apply(-a.data, (a,), lambda g: (-g,))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _apply(ad * ad, (a,), lambda g: (2.0 * ad * g,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _apply(out, (a,), lambda g: (0.5 * g / out,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _apply(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _apply(np.log(ad), (a,), lambda g: (g / ad,))


# ---------------------------------------------------------------------------
# network primitives


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map out[b, j] = sum_i x[b, i] * weight[i, j] + bias[j]."""
    xd, wd, bd = x.data, weight.data, bias.data
    if xd.ndim != 2 or wd.ndim != 2 or xd.shape[1] != wd.shape[0]:
        raise ContractViolation(
            f"linear: input {xd.shape} does not conform with weight {wd.shape}"
        )
    if bd.shape != (wd.shape[1],):
        raise ContractViolation(
            f"linear: bias {bd.shape} does not match output width {wd.shape[1]}"
        )
    # Skip gradient matmuls for operands that are constants on this call.
    need_x = x.node is not None
    need_w = weight.node is not None
    need_b = bias.node is not None

    def bwd(g):
        return (g @ wd.T if need_x else None,
                xd.T @ g if need_w else None,
                g.sum(axis=0) if need_b else None)

    return _apply(xd @ wd + bd, (x, weight, bias), bwd)


def relu(a: Tensor) -> Tensor:
    ad = a.data
    out = np.maximum(ad, 0.0)

    # Subgradient at exactly 0 is 0.
    def bwd(g):
        return (g * (ad > 0.0),)

    return _apply(out, (a,), bwd)


def elu(a: Tensor) -> Tensor:
    """ELU with alpha = 1: x for x >= 0, exp(x) - 1 otherwise."""
    ad = a.data
    neg_part = np.expm1(np.minimum(ad, 0.0))
    pos = ad >= 0.0
    out = np.where(pos, ad, neg_part)

    def bwd(g):
        return (g * np.where(pos, 1.0, neg_part + 1.0),)

    return _apply(out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _apply(out, (a,), lambda g: (g * (1.0 - out * out),))


def log1m_tanh_sq(a: Tensor) -> Tensor:
    """log(1 - tanh(x)^2), evaluated in a form that never underflows to log(0).

    Identity: log(1 - tanh(x)^2) = 2 * (log 2 - x - softplus(-2x)).
    """
    ad = a.data
    out = 2.0 * (_LOG2 - ad - np.logaddexp(0.0, -2.0 * ad))
    return _apply(out, (a,), lambda g: (-2.0 * np.tanh(ad) * g,))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    ad = a.data
    inside = (ad > lo) & (ad < hi)
    return _apply(np.clip(ad, lo, hi), (a,), lambda g: (g * inside,))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties route the gradient to the first argument."""
    if a.data.shape != b.data.shape:
        raise ContractViolation("minimum: shapes must match")
    take_a = a.data <= b.data

    def bwd(g):
        return g * take_a, g * ~take_a

    return _apply(np.minimum(a.data, b.data), (a, b), bwd)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two batches along the feature axis."""
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[0] != bd.shape[0]:
        raise ContractViolation(
            f"concat_cols: batches {ad.shape} and {bd.shape} do not align"
        )
    na = ad.shape[1]

    def bwd(g):
        return g[:, :na], g[:, na:]

    return _apply(np.concatenate((ad, bd), axis=1), (a, b), bwd)


def unit_ball_project(x: Tensor) -> Tensor:
    """Project each row onto the unit sphere: f(x) = x / ||x||_2.

    Rows with norm <= UNIT_BALL_EPS are divided by the guard value instead,
    so an all-zero row maps to zero rather than NaN. For healthy rows the
    Jacobian is exactly v -> v/||x|| - x (x.v)/||x||^3, which is tangent to
    the sphere (J x = 0) and scale-invariant.
    """
    xd = x.data
    norms = np.sqrt((xd * xd).sum(axis=-1, keepdims=True))
    safe = np.maximum(norms, UNIT_BALL_EPS)
    out = xd / safe
    healthy = norms > UNIT_BALL_EPS

    def bwd(g):
        inner = (g * xd).sum(axis=-1, keepdims=True)
        return (g / safe - xd * (inner * healthy / safe**3),)

    return _apply(out, (x,), bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Zero each element with probability `rate`; scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    scale = 1.0 / (1.0 - rate)
    mask = (rng.random(x.data.shape) >= rate) * scale
    return _apply(x.data * mask, (x,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# reductions


def sum_all(a: Tensor) -> Tensor:
    shape = a.data.shape
    return _apply(np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, g),))


def mean_all(a: Tensor) -> Tensor:
    shape = a.data.shape
    n = a.data.size
    return _apply(np.asarray(a.data.mean()), (a,), lambda g: (np.full(shape, g / n),))


def sum_rows(a: Tensor) -> Tensor:
    """Sum along the feature axis, keeping a [B x 1] column."""
    shape = a.data.shape
    if a.data.ndim != 2:
        raise ContractViolation("sum_rows expects a 2-D batch")

    def bwd(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _apply(a.data.sum(axis=1, keepdims=True), (a,), bwd)


# ---------------------------------------------------------------------------
# backward pass and the finite-difference oracle


def backward(tape: Tape, root: Tensor) -> dict[str, np.ndarray]:
    """Populate gradients of a scalar root for every leaf on the tape.

    Visits each node exactly once, in reverse recording order; repeated use
    of a node accumulates its gradient contributions.
    """
    if root.tape is not tape or root.node is None:
        raise ContractViolation("backward root was not produced on this tape")
    if root.data.size != 1:
        raise ContractViolation(f"backward root must be scalar, got shape {root.data.shape}")

    grads: list = [None] * len(tape.nodes)
    grads[root.node] = np.ones_like(root.data)
    for nid in range(root.node, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        node = tape.nodes[nid]
        if node.backward is None:
            continue
        for input_id, gi in zip(node.inputs, node.backward(g)):
            if input_id is None or gi is None:
                continue
            if grads[input_id] is None:
                grads[input_id] = gi
            else:
                grads[input_id] = grads[input_id] + gi

    out = {}
    for name, nid in tape.leaves.items():
        g = grads[nid]
        out[name] = np.zeros(tape._leaf_shapes[name]) if g is None else np.asarray(g)
    return out


def finite_difference_gradient(f, params: dict[str, np.ndarray], h: float = 1e-5):
    """Central-difference gradient of a scalar function of named arrays.

    `f` takes a dict of parameter arrays and returns a float; it must be
    deterministic (fix any rng before each call). Used as the independent
    oracle for the reverse-mode implementation.
    """
    grads = {}
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        grad = np.zeros_like(value)
        flat = value.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            work = {k: (v.copy() if k == name else v) for k, v in params.items()}
            wflat = work[name].ravel()
            wflat[i] = orig + h
            up = f(work)
            wflat[i] = orig - h
            down = f(work)
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = grad
    return grads
