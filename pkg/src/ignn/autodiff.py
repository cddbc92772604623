"""A small reverse-mode differentiation tape over dense float64 matrices.

Only the primitives the models need are provided. Every node stores its
forward value and a closure mapping the output gradient to input
gradients; :meth:`Tape.backward` walks the nodes in reverse append order.

    tape = Tape()
    w = tape.param("w", np.ones((3, 2)))
    loss = total(matmul(tape.constant(x), w))
    grads = tape.backward(loss)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError
from .graph import NormalizedAdjacency

__all__ = [
    "Var",
    "Tape",
    "AdamState",
    "matmul",
    "spmm_const",
    "add",
    "sub",
    "scale",
    "scale_rows",
    "relu",
    "sigmoid",
    "concat_cols",
    "dropout",
    "softmax_cross_entropy",
    "total",
    "sq_norm",
    "adam_step",
    "glorot_init",
    "gradcheck",
]


class Var:
    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: "Tape", index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.value.shape})"


@dataclass
class _Node:
    op: str
    inputs: tuple
    backward: Callable | None
    requires_grad: bool
    name: str | None = None


class Tape:
    def __init__(self, check_finite: bool = False):
        self.nodes: list[_Node] = []
        self.values: list[np.ndarray] = []
        self.params: dict[str, int] = {}
        self.check_finite = check_finite

    def _push(self, op, value, inputs=(), backward=None, requires_grad=None, name=None) -> Var:
        if requires_grad is None:
            requires_grad = any(self.nodes[i.index].requires_grad for i in inputs)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite output from {op}")
        self.nodes.append(_Node(op, tuple(i.index for i in inputs), backward, requires_grad, name))
        self.values.append(value)
        return Var(self, len(self.nodes) - 1, value)

    def param(self, name: str, value) -> Var:
        if name in self.params:
            raise ValueError(f"parameter {name!r} registered twice")
        value = np.asarray(value, dtype=np.float64)
        v = self._push("param", value, requires_grad=True, name=name)
        self.params[name] = v.index
        return v

    def constant(self, value) -> Var:
        return self._push("const", np.asarray(value, dtype=np.float64), requires_grad=False)

    def backward(self, loss: Var) -> dict[str, np.ndarray]:
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if loss.value.size != 1:
            raise DimensionError(f"loss must be scalar, got shape {loss.value.shape}")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.index] = np.ones_like(loss.value)
        for idx in range(loss.index, -1, -1):
            g = grads[idx]
            node = self.nodes[idx]
            if g is None or node.backward is None:
                continue
            in_grads = node.backward(g)
            for src, gi in zip(node.inputs, in_grads):
                if gi is None or not self.nodes[src].requires_grad:
                    continue
                grads[src] = gi if grads[src] is None else grads[src] + gi
        out = {}
        for name, idx in self.params.items():
            g = grads[idx]
            out[name] = np.zeros_like(self.values[idx]) if g is None else g
        return out


def _tape(*vs: Var) -> Tape:
    return vs[0].tape


def matmul(a: Var, b: Var) -> Var:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _tape(a)._push("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def spmm_const(s, x: Var) -> Var:
    """Constant sparse matrix times a differentiable dense matrix."""
    m = s._matrix if isinstance(s, NormalizedAdjacency) else sp.csr_matrix(s)
    if m.shape[1] != x.shape[0]:
        raise DimensionError(f"spmm {m.shape} @ {x.shape}")
    if isinstance(s, NormalizedAdjacency):
        mt = m  # symmetric
    else:
        mt = m.T.tocsr()
        mt.sort_indices()
    return _tape(x)._push("spmm_const", np.asarray(m @ x.value), (x,), lambda g: (np.asarray(mt @ g),))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if len(shape) == 2 and shape[0] == 1:
        return g.sum(axis=0, keepdims=True)
    raise DimensionError(f"cannot reduce gradient {g.shape} to {shape}")


def add(a: Var, b: Var) -> Var:
    """Elementwise sum; ``b`` may be a ``1 × F`` row broadcast over rows."""
    if a.shape != b.shape and not (b.shape[0] == 1 and b.shape[1] == a.shape[1]):
        raise DimensionError(f"add {a.shape} + {b.shape}")
    bs = b.shape
    return _tape(a)._push("add", a.value + b.value, (a, b), lambda g: (g, _unbroadcast(g, bs)))


def sub(a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise DimensionError(f"sub {a.shape} - {b.shape}")
    return _tape(a)._push("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return _tape(a)._push("scale", a.value * c, (a,), lambda g: (g * c,))


def scale_rows(x: Var, gate: Var) -> Var:
    """Multiply row ``v`` of ``x`` by the scalar ``gate[v, 0]``."""
    if gate.shape != (x.shape[0], 1):
        raise DimensionError(f"row gate must be {(x.shape[0], 1)}, got {gate.shape}")
    xv, gv = x.value, gate.value
    return _tape(x)._push(
        "scale_rows",
        xv * gv,
        (x, gate),
        lambda g: (g * gv, np.sum(g * xv, axis=1, keepdims=True)),
    )


def relu(x: Var) -> Var:
    mask = x.value > 0  # relu'(0) = 0
    # np.maximum propagates NaN, so a diverged input is not silently zeroed
    return _tape(x)._push("relu", np.maximum(x.value, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Var) -> Var:
    v = x.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return _tape(x)._push("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def concat_cols(xs) -> Var:
    xs = list(xs)
    rows = {x.shape[0] for x in xs}
    if len(rows) != 1:
        raise DimensionError(f"concat with differing row counts {sorted(rows)}")
    bounds = np.cumsum([0] + [x.shape[1] for x in xs])
    count = len(xs)  # capture no Var: a Var -> tape -> closure cycle defers freeing to the gc

    def back(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(count))

    return _tape(*xs)._push("concat_cols", np.concatenate([x.value for x in xs], axis=1), tuple(xs), back)


def dropout(x: Var, p: float, training: bool, rng=None) -> Var:
    """Inverted dropout; identity outside training or when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return _tape(x)._push("dropout", x.value * keep, (x,), lambda g: (g * keep,))


def softmax_cross_entropy(logits: Var, labels, mask=None) -> Var:
    """Mean cross-entropy over the rows selected by ``mask`` (all rows when None)."""
    z = logits.value
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (z.shape[0],):
        raise DimensionError(f"{labels.shape[0]} labels for {z.shape[0]} rows")
    idx = np.arange(z.shape[0]) if mask is None else np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if len(idx) == 0:
        raise ValueError("empty loss mask")
    zs = z[idx]
    shifted = zs - zs.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - logsum[:, None]
    tgt = labels[idx]
    loss = -np.mean(logp[np.arange(len(idx)), tgt])
    probs = np.exp(logp)

    def back(g):
        d = np.zeros_like(z)
        local = probs.copy()
        local[np.arange(len(idx)), tgt] -= 1.0
        d[idx] = local / len(idx)
        return (d * g.item(),)

    return _tape(logits)._push("softmax_cross_entropy", np.array([[loss]]), (logits,), back)


def total(x: Var) -> Var:
    shape = x.shape
    return _tape(x)._push("total", np.array([[x.value.sum()]]), (x,), lambda g: (np.full(shape, g.item()),))


def sq_norm(x: Var) -> Var:
    v = x.value
    return _tape(x)._push("sq_norm", np.array([[np.sum(v * v)]]), (x,), lambda g: (2.0 * v * g.item(),))


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> dict:
    """One bias-corrected Adam update; returns new parameter arrays."""
    state.step += 1
    t = state.step
    out = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        out[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


def glorot_init(rows: int, cols: int, seed=None) -> np.ndarray:
    if rows <= 0 or cols <= 0:
        raise ValueError("dimensions must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def gradcheck(loss_fn, params: Mapping[str, np.ndarray], step: float = 1e-5) -> dict[str, float]:
    """Compare tape gradients with central differences.

    ``loss_fn(tape, vars)`` builds the loss from registered parameter Vars.
    Returns the norm-wise relative error ``‖g − ĝ‖ / max(‖g‖, ‖ĝ‖)`` per parameter.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def run(ps, grad=False):
        tape = Tape()
        vs = {k: tape.param(k, v) for k, v in ps.items()}
        loss = loss_fn(tape, vs)
        return (loss.value.item(), tape.backward(loss)) if grad else loss.value.item()

    _, analytic = run(params, grad=True)
    errors = {}
    for name, p in params.items():
        numeric = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            orig = p[i]
            p[i] = orig + step
            hi = run(params)
            p[i] = orig - step
            lo = run(params)
            p[i] = orig
            numeric[i] = (hi - lo) / (2 * step)
        denom = max(np.linalg.norm(analytic[name]), np.linalg.norm(numeric))
        errors[name] = 0.0 if denom == 0 else float(np.linalg.norm(analytic[name] - numeric) / denom)
    return errors
