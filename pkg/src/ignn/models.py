"""Node-classification models built on the differentiation tape.

Every model exposes ``init_params(seed)``, ``forward(tape, params, a, x, ...)``
and ``lipschitz(params)``. ``forward`` returns a :class:`ForwardResult` with
the class logits, the per-layer (or per-hop) hidden states used by the
smoothness diagnostics, and the representation fed to the classifier head.

Setting ``linear=True`` on a config replaces every ReLU with the identity;
the weight-construction equivalences are stated for that form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import DimensionError
from .graph import HopCache, NormalizedAdjacency, hop_features, laplacian, spmm
from .spectral import lipschitz_cignn, lipschitz_gcn, spectral_norm

__all__ = [
    "GcnConfig",
    "RIgnnConfig",
    "AIgnnConfig",
    "CIgnnConfig",
    "JkConfig",
    "ForwardResult",
    "Gcn",
    "RIgnn",
    "AIgnn",
    "CIgnn",
    "JkNet",
    "build_model",
    "forward_gcn",
    "forward_r_ignn",
    "forward_a_ignn",
    "forward_c_ignn",
    "ReductionSpec",
    "build_reduction_weights",
    "stack_relation",
    "cignn_params_from",
    "polynomial_filter_reference",
    "adjacency_coefficients",
    "appnp_reference",
    "gprgnn_reference",
    "sign_reference",
    "mixhop_reference",
    "pooling_reference",
    "residual_expansion",
    "reduction_outputs",
]


# --------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class GcnConfig:
    """``layer_dims = [D, h1, ..., C]``; one graph convolution per consecutive pair."""

    layer_dims: tuple
    dropout_p: float = 0.5
    linear: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2:
            raise ValueError("GCN needs at least one layer")

    @classmethod
    def uniform(cls, in_dim, hidden, num_classes, layers, **kw):
        return cls((in_dim,) + (hidden,) * (layers - 1) + (num_classes,), **kw)

    @property
    def K(self) -> int:
        return len(self.layer_dims) - 1


@dataclass(frozen=True)
class RIgnnConfig:
    in_dim: int
    hidden: int
    num_classes: int
    K: int
    dropout_p: float = 0.5
    linear: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("r-IGNN needs K >= 1")


@dataclass(frozen=True)
class AIgnnConfig:
    in_dim: int
    hidden: int
    num_classes: int
    K: int
    dropout_p: float = 0.5
    linear: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("a-IGNN needs K >= 1")


@dataclass(frozen=True)
class CIgnnConfig:
    """Concatenative variant.

    ``separate`` gives every hop its own transformation (off: one shared
    matrix). ``relation`` adds the learnable map over the concatenated hops
    (off: the concatenation goes straight to the classifier).
    """

    in_dim: int
    hidden: int
    num_classes: int
    K: int
    out_width: int | None = None
    dropout_p: float = 0.5
    fast_mode: bool = True
    linear: bool = False
    separate: bool = True
    relation: bool = True

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.out_width is None:
            object.__setattr__(self, "out_width", self.hidden)


@dataclass(frozen=True)
class JkConfig:
    """Cascaded GCN layers whose outputs are concatenated and mixed (JKNet style)."""

    in_dim: int
    hidden: int
    num_classes: int
    K: int
    dropout_p: float = 0.5
    linear: bool = False


@dataclass
class ForwardResult:
    logits: ad.Var
    layers: list = field(default_factory=list)
    representation: ad.Var | None = None


def _act(cfg, x: ad.Var) -> ad.Var:
    return x if cfg.linear else ad.relu(x)


def _prop_first(a, h: ad.Var, w: ad.Var) -> ad.Var:
    # Â(HW) and (ÂH)W agree; propagate the narrower side
    if w.shape[1] <= w.shape[0]:
        return ad.spmm_const(a, ad.matmul(h, w))
    return ad.matmul(ad.spmm_const(a, h), w)


class _Model:
    cfg = None

    def prepare(self, a: NormalizedAdjacency, x: np.ndarray):
        """Data-dependent preprocessing done once before training."""
        return None

    def register(self, tape: ad.Tape, params) -> dict:
        return {k: tape.param(k, v) for k, v in params.items()}

    def logits(self, a, x, params, training=False, rng=None, cache=None) -> np.ndarray:
        tape = ad.Tape()
        return self.forward(tape, self.register(tape, params), a, x, training, rng, cache).logits.value


class Gcn(_Model):
    def __init__(self, cfg: GcnConfig):
        self.cfg = cfg

    def init_params(self, seed=None) -> dict:
        rng = np.random.default_rng(seed)
        dims = self.cfg.layer_dims
        return {f"W{k + 1}": ad.glorot_init(dims[k], dims[k + 1], rng) for k in range(self.cfg.K)}

    def forward(self, tape, p, a, x, training=False, rng=None, cache=None) -> ForwardResult:
        h = tape.constant(x)
        layers = [h]
        for k in range(1, self.cfg.K + 1):
            h = ad.dropout(h, self.cfg.dropout_p, training, rng)
            h = _prop_first(a, h, p[f"W{k}"])
            if k < self.cfg.K:
                h = _act(self.cfg, h)
            layers.append(h)
        return ForwardResult(h, layers, layers[-2])

    def lipschitz(self, params) -> float:
        return lipschitz_gcn([params[f"W{k}"] for k in range(1, self.cfg.K + 1)])


class RIgnn(_Model):
    def __init__(self, cfg: RIgnnConfig):
        self.cfg = cfg

    def init_params(self, seed=None) -> dict:
        rng = np.random.default_rng(seed)
        c = self.cfg
        p = {"W0": ad.glorot_init(c.in_dim, c.hidden, rng)}
        for k in range(1, c.K + 1):
            p[f"W{k}"] = ad.glorot_init(c.hidden, c.hidden, rng)
        p["out"] = ad.glorot_init(c.hidden, c.num_classes, rng)
        return p

    def forward(self, tape, p, a, x, training=False, rng=None, cache=None) -> ForwardResult:
        c = self.cfg
        h = ad.dropout(tape.constant(x), c.dropout_p, training, rng)
        h = _act(c, ad.matmul(h, p["W0"]))
        layers = [h]
        for k in range(1, c.K + 1):
            h = ad.add(_act(c, _prop_first(a, h, p[f"W{k}"])), h)
            layers.append(h)
        out = ad.matmul(ad.dropout(h, c.dropout_p, training, rng), p["out"])
        return ForwardResult(out, layers, h)

    def lipschitz(self, params) -> float:
        # cascade of (I + W^(k)) blocks between input map and head
        eye = np.eye(self.cfg.hidden)
        chain = [params["W0"]] + [eye + params[f"W{k}"] for k in range(1, self.cfg.K + 1)] + [params["out"]]
        return lipschitz_gcn(chain)


class AIgnn(_Model):
    def __init__(self, cfg: AIgnnConfig):
        self.cfg = cfg

    def init_params(self, seed=None) -> dict:
        rng = np.random.default_rng(seed)
        c = self.cfg
        p = {"W0": ad.glorot_init(c.in_dim, c.hidden, rng)}
        for k in range(1, c.K + 1):
            p[f"gate{k}"] = ad.glorot_init(2 * c.hidden, 1, rng)
            p[f"gate_bias{k}"] = np.zeros((1, 1))
        p["out"] = ad.glorot_init(c.hidden, c.num_classes, rng)
        return p

    def gates(self, a, x, params):
        """Per-layer gate values ``α^(k)`` (N × 1 each) in evaluation mode."""
        tape = ad.Tape()
        res = self._run(tape, self.register(tape, params), a, x, False, None, keep_gates=True)
        return [g.value for g in res[1]]

    def _run(self, tape, p, a, x, training, rng, keep_gates=False):
        c = self.cfg
        h = ad.dropout(tape.constant(x), c.dropout_p, training, rng)
        h = _act(c, ad.matmul(h, p["W0"]))
        layers, gates = [h], []
        for k in range(1, c.K + 1):
            m = ad.spmm_const(a, h)
            score = ad.add(ad.matmul(ad.concat_cols([m, h]), p[f"gate{k}"]), p[f"gate_bias{k}"])
            alpha = ad.sigmoid(score)
            h = ad.add(h, ad.scale_rows(ad.sub(m, h), alpha))
            layers.append(h)
            gates.append(alpha)
        out = ad.matmul(ad.dropout(h, c.dropout_p, training, rng), p["out"])
        return ForwardResult(out, layers, h), gates

    def forward(self, tape, p, a, x, training=False, rng=None, cache=None) -> ForwardResult:
        return self._run(tape, p, a, x, training, rng)[0]

    def lipschitz(self, params) -> float:
        # convex gated propagation is non-expansive; only the dense maps count
        return lipschitz_gcn([params["W0"], params["out"]])


class CIgnn(_Model):
    def __init__(self, cfg: CIgnnConfig):
        self.cfg = cfg

    def init_params(self, seed=None) -> dict:
        rng = np.random.default_rng(seed)
        c = self.cfg
        p = {}
        if c.separate:
            for i in range(c.K + 1):
                p[f"hop{i}"] = ad.glorot_init(c.in_dim, c.hidden, rng)
        else:
            p["hop"] = ad.glorot_init(c.in_dim, c.hidden, rng)
        width = (c.K + 1) * c.hidden
        if c.relation:
            p["rel"] = ad.glorot_init(width, c.out_width, rng)
            width = c.out_width
        p["out"] = ad.glorot_init(width, c.num_classes, rng)
        return p

    def prepare(self, a, x):
        return hop_features(a, x, self.cfg.K) if self.cfg.fast_mode else None

    def hop_weight(self, params, i):
        return params[f"hop{i}"] if self.cfg.separate else params["hop"]

    def forward(self, tape, p, a, x, training=False, rng=None, cache=None) -> ForwardResult:
        c = self.cfg
        if c.fast_mode:
            if cache is None:
                cache = self.prepare(a, x)
            if cache.K != c.K:
                raise DimensionError(f"hop cache has K={cache.K}, model expects {c.K}")
            hop_inputs = (tape.constant(h) for h in cache.hops)
        else:
            hop_inputs = self._propagate(tape, a, x)
        hops = []
        for i, m in enumerate(hop_inputs):
            m = ad.dropout(m, c.dropout_p, training, rng)
            hops.append(_act(c, ad.matmul(m, self.hop_weight(p, i))))
        z = ad.concat_cols(hops) if len(hops) > 1 else hops[0]
        if c.relation:
            z = _act(c, ad.matmul(ad.dropout(z, c.dropout_p, training, rng), p["rel"]))
        out = ad.matmul(ad.dropout(z, c.dropout_p, training, rng), p["out"])
        return ForwardResult(out, hops, z)

    def _propagate(self, tape, a, x):
        # Â^i X recomputed inside the forward pass: cost grows with the edge count
        m = tape.constant(x)
        yield m
        for _ in range(self.cfg.K):
            m = ad.spmm_const(a, m)
            yield m

    def relation_blocks(self, params) -> list:
        c = self.cfg
        if not c.relation:
            eye = np.eye((c.K + 1) * c.hidden)
            return [eye[i * c.hidden : (i + 1) * c.hidden] for i in range(c.K + 1)]
        w = params["rel"]
        return [w[i * c.hidden : (i + 1) * c.hidden] for i in range(c.K + 1)]

    def lipschitz(self, params) -> float:
        blocks = self.relation_blocks(params)
        return lipschitz_cignn([(self.hop_weight(params, i), blocks[i]) for i in range(self.cfg.K + 1)])


class JkNet(_Model):
    def __init__(self, cfg: JkConfig):
        self.cfg = cfg

    def init_params(self, seed=None) -> dict:
        rng = np.random.default_rng(seed)
        c = self.cfg
        p = {"W1": ad.glorot_init(c.in_dim, c.hidden, rng)}
        for k in range(2, c.K + 1):
            p[f"W{k}"] = ad.glorot_init(c.hidden, c.hidden, rng)
        p["rel"] = ad.glorot_init(c.K * c.hidden, c.hidden, rng)
        p["out"] = ad.glorot_init(c.hidden, c.num_classes, rng)
        return p

    def forward(self, tape, p, a, x, training=False, rng=None, cache=None) -> ForwardResult:
        c = self.cfg
        h = tape.constant(x)
        layers = [h]
        for k in range(1, c.K + 1):
            h = ad.dropout(h, c.dropout_p, training, rng)
            h = _act(c, _prop_first(a, h, p[f"W{k}"]))
            layers.append(h)
        z = ad.concat_cols(layers[1:]) if c.K > 1 else layers[1]
        z = _act(c, ad.matmul(ad.dropout(z, c.dropout_p, training, rng), p["rel"]))
        out = ad.matmul(ad.dropout(z, c.dropout_p, training, rng), p["out"])
        return ForwardResult(out, layers, z)

    def lipschitz(self, params) -> float:
        c = self.cfg
        w = params["rel"]
        total = None
        prod = None
        for k in range(1, c.K + 1):
            prod = params["W1"] if k == 1 else prod @ params[f"W{k}"]
            term = prod @ w[(k - 1) * c.hidden : k * c.hidden]
            total = term if total is None else total + term
        return spectral_norm(total)


MODEL_KINDS = {
    "gcn": Gcn,
    "r-ignn": RIgnn,
    "a-ignn": AIgnn,
    "c-ignn": CIgnn,
    "jknet": JkNet,
}
_CONFIG_TO_MODEL = {GcnConfig: Gcn, RIgnnConfig: RIgnn, AIgnnConfig: AIgnn, CIgnnConfig: CIgnn, JkConfig: JkNet}


def build_model(cfg):
    try:
        return _CONFIG_TO_MODEL[type(cfg)](cfg)
    except KeyError:
        raise TypeError(f"no model for config type {type(cfg).__name__}") from None


def forward_gcn(cfg: GcnConfig, a, x, params, training=False, rng=None) -> np.ndarray:
    return Gcn(cfg).logits(a, x, params, training, rng)


def forward_r_ignn(cfg: RIgnnConfig, a, x, params, training=False, rng=None) -> np.ndarray:
    return RIgnn(cfg).logits(a, x, params, training, rng)


def forward_a_ignn(cfg: AIgnnConfig, a, x, params, training=False, rng=None) -> np.ndarray:
    return AIgnn(cfg).logits(a, x, params, training, rng)


def forward_c_ignn(cfg: CIgnnConfig, a, x, params, training=False, rng=None, cache=None) -> np.ndarray:
    return CIgnn(cfg).logits(a, x, params, training, rng, cache)


# --------------------------------------------------------------------------
# polynomial filters and weight constructions


def adjacency_coefficients(theta: Sequence[float]) -> np.ndarray:
    """Coefficients ``c_i`` with ``Σ_k θ_k L̂^k = Σ_i c_i Â^i``.

    ``c_i = Σ_{k≥i} θ_k (−1)^i C(k, i)``, from expanding ``(I − Â)^k``.
    """
    K = len(theta) - 1
    return np.array(
        [sum(theta[k] * (-1) ** i * math.comb(k, i) for k in range(i, K + 1)) for i in range(K + 1)],
        dtype=np.float64,
    )


def polynomial_filter_reference(a: NormalizedAdjacency, x: np.ndarray, theta: Sequence[float]) -> np.ndarray:
    """``(Σ_k θ_k L̂^k) X`` by repeated Laplacian application."""
    if len(theta) == 0:
        raise ValueError("need at least one coefficient")
    lap = laplacian(a)
    term = np.asarray(x, dtype=np.float64)
    out = theta[0] * term
    for t in theta[1:]:
        term = spmm(lap, term)
        out = out + t * term
    return out


@dataclass(frozen=True)
class ReductionSpec:
    """A named propagation scheme realized by a c-IGNN weight assignment.

    ``kind`` is one of sign, appnp, mixhop, gprgnn, meanpool, sumpool, poly.
    ``alpha`` is the APPNP restart probability; ``coefficients`` holds the
    GPRGNN γ, MixHop mixing weights, or polynomial θ (length K+1).
    """

    kind: str
    K: int
    alpha: float | None = None
    coefficients: tuple | None = None

    KINDS = ("sign", "appnp", "mixhop", "gprgnn", "meanpool", "sumpool", "poly")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown reduction kind {self.kind!r}")
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.kind == "appnp" and (self.alpha is None or not 0.0 < self.alpha <= 1.0):
            raise ValueError(f"APPNP alpha must lie in (0, 1], got {self.alpha}")
        if self.kind in ("gprgnn", "mixhop", "poly"):
            if self.coefficients is None or len(self.coefficients) != self.K + 1:
                raise ValueError(f"{self.kind} needs K+1 = {self.K + 1} coefficients")
            object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @property
    def linear(self) -> bool:
        """Whether the equivalence holds only with activations removed."""
        return self.kind in ("appnp", "gprgnn", "poly")

    def relation_scalars(self) -> list:
        K = self.K
        if self.kind == "appnp":
            al = self.alpha
            return [al * (1 - al) ** i for i in range(K)] + [(1 - al) ** K]
        if self.kind in ("gprgnn", "mixhop"):
            return list(self.coefficients)
        if self.kind == "meanpool":
            return [1.0 / (K + 1)] * (K + 1)
        if self.kind == "sumpool":
            return [1.0] * (K + 1)
        if self.kind == "poly":
            return adjacency_coefficients(self.coefficients).tolist()
        raise ValueError("SIGN uses an identity relation, not per-hop scalars")


def build_reduction_weights(spec: ReductionSpec, base_weight=None, hop_weights=None, in_dim=None):
    """Explicit ``(W^(i), W_i)`` assignment realizing ``spec`` in c-IGNN.

    ``base_weight`` is the shared ``W_θ`` (APPNP, GPRGNN, poly; identity when
    omitted). ``hop_weights`` gives per-hop transformations for SIGN, MixHop
    and pooling (identity when omitted, which needs ``in_dim``).
    Returns ``(hop_list, relation_block_list)``.
    """
    K = spec.K
    if spec.kind in ("appnp", "gprgnn", "poly"):
        if base_weight is None:
            if in_dim is None:
                raise ValueError("in_dim required when base_weight is omitted")
            base_weight = np.eye(in_dim)
        hops = [np.asarray(base_weight, dtype=np.float64)] * (K + 1)
    else:
        if hop_weights is None:
            if in_dim is None:
                raise ValueError("in_dim required when hop_weights are omitted")
            hop_weights = [np.eye(in_dim)] * (K + 1)
        if len(hop_weights) != K + 1:
            raise ValueError(f"need {K + 1} hop weights, got {len(hop_weights)}")
        hops = [np.asarray(w, dtype=np.float64) for w in hop_weights]
        widths = {w.shape[1] for w in hops}
        if len(widths) != 1:
            raise DimensionError("hop weights must share an output width")
    width = hops[0].shape[1]
    if spec.kind == "sign":
        eye = np.eye((K + 1) * width)
        blocks = [eye[i * width : (i + 1) * width] for i in range(K + 1)]
    else:
        blocks = [s * np.eye(width) for s in spec.relation_scalars()]
    return hops, blocks


def stack_relation(blocks) -> np.ndarray:
    return np.vstack(blocks)


def cignn_params_from(hops, blocks) -> dict:
    """Parameter dict for a separate-weights, relation-on c-IGNN (head = identity)."""
    rel = stack_relation(blocks)
    p = {f"hop{i}": w for i, w in enumerate(hops)}
    p["rel"] = rel
    p["out"] = np.eye(rel.shape[1])
    return p


def appnp_reference(a, x, w_theta, alpha, K) -> np.ndarray:
    h0 = np.asarray(x) @ w_theta
    h = h0
    for _ in range(K):
        h = (1 - alpha) * spmm(a, h) + alpha * h0
    return h


def gprgnn_reference(a, x, w_theta, gammas) -> np.ndarray:
    h = np.asarray(x) @ w_theta
    out = gammas[0] * h
    for g in gammas[1:]:
        h = spmm(a, h)
        out = out + g * h
    return out


def _relu(v):
    return np.maximum(v, 0.0)


def sign_reference(a, x, hop_weights) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    parts = []
    for i, w in enumerate(hop_weights):
        if i:
            m = spmm(a, m)
        parts.append(_relu(m @ w))
    return np.concatenate(parts, axis=1)


def mixhop_reference(a, x, coefficients, hop_weights=None) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    acc = np.zeros_like(m if hop_weights is None else m @ hop_weights[0])
    for i, c in enumerate(coefficients):
        if i:
            m = spmm(a, m)
        z = m if hop_weights is None else m @ hop_weights[i]
        acc = acc + c * _relu(z)
    return _relu(acc)


def pooling_reference(a, x, hop_weights, mode="mean") -> np.ndarray:
    K = len(hop_weights) - 1
    c = 1.0 / (K + 1) if mode == "mean" else 1.0
    return mixhop_reference(a, x, [c] * (K + 1), hop_weights)


def residual_expansion(a, h0, weights) -> np.ndarray:
    """``Σ_m Â^m H0 Σ_{|J|=m} Π_{j∈J} W^(j)`` for the linear residual recursion.

    Subset products are accumulated by elementary-symmetric recursion over
    ordered subsets of ``{1..k}``.
    """
    k = len(weights)
    f = h0.shape[1]
    # e[m] = sum over increasing index tuples of size m of the ordered product
    e = [np.eye(f)] + [np.zeros((f, f)) for _ in range(k)]
    for w in weights:
        for m in range(k, 0, -1):
            e[m] = e[m] + e[m - 1] @ w
    out = np.zeros_like(h0, dtype=np.float64)
    power = np.asarray(h0, dtype=np.float64)
    for m in range(k + 1):
        if m:
            power = spmm(a, power)
        out = out + power @ e[m]
    return out


def reduction_outputs(spec: ReductionSpec, a: NormalizedAdjacency, x: np.ndarray, weights) -> tuple:
    """``(c-IGNN output, reference output)`` for one reduction instance.

    ``weights`` is ``W_θ`` for the shared-weight schemes and the list of
    per-hop matrices otherwise. Shared-weight schemes run linearized; the
    rest keep ReLU, since ``relu(relu(z)) = relu(z)`` makes the extra
    activations harmless.
    """
    x = np.asarray(x, dtype=np.float64)
    shared = spec.kind in ("appnp", "gprgnn", "poly")
    if shared:
        hops, blocks = build_reduction_weights(spec, base_weight=weights)
    else:
        hops, blocks = build_reduction_weights(spec, hop_weights=weights)
    params = cignn_params_from(hops, blocks)
    width = hops[0].shape[1]
    out_width = params["rel"].shape[1]
    cfg = CIgnnConfig(x.shape[1], width, out_width, spec.K, out_width, 0.0, True, linear=shared)
    got = CIgnn(cfg).logits(a, x, params)
    if spec.kind == "appnp":
        ref = appnp_reference(a, x, weights, spec.alpha, spec.K)
    elif spec.kind == "gprgnn":
        ref = gprgnn_reference(a, x, weights, spec.coefficients)
    elif spec.kind == "poly":
        ref = polynomial_filter_reference(a, x @ weights, spec.coefficients)
    elif spec.kind == "sign":
        ref = sign_reference(a, x, weights)
    elif spec.kind == "mixhop":
        ref = mixhop_reference(a, x, spec.coefficients, weights)
    else:
        ref = pooling_reference(a, x, weights, "mean" if spec.kind == "meanpool" else "sum")
    return got, ref
