"""Smoothness and Lipschitz diagnostics.

The information-less subspace of ``Â`` is spanned by one vector per
connected component, proportional to ``sqrt(d̂)`` on that component. The
distance of a representation ``H`` to it is ``‖H − E Eᵀ H‖_F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DimensionError
from .graph import NormalizedAdjacency, spmm

__all__ = [
    "SubspaceBasis",
    "SmoothnessReport",
    "subspace_basis",
    "distance_to_subspace",
    "second_largest_eigenvalue",
    "spectral_norm",
    "lipschitz_gcn",
    "lipschitz_cignn",
    "empirical_lipschitz",
    "verify_smoothing_bound",
    "hop_sum_norm_bound",
    "summed_hop_bound",
    "min_depth_kstar",
    "DENSE_EIGEN_LIMIT",
]

DENSE_EIGEN_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal basis with disjointly supported columns.

    ``weights[v]`` is the entry of node ``v`` in the column of its own
    component; every other entry of that row of ``E`` is zero.
    """

    weights: np.ndarray
    components: np.ndarray
    num_components: int

    @property
    def num_nodes(self) -> int:
        return len(self.weights)

    @property
    def component_of_column(self) -> np.ndarray:
        return np.arange(self.num_components)

    @property
    def basis(self) -> np.ndarray:
        e = np.zeros((self.num_nodes, self.num_components))
        e[np.arange(self.num_nodes), self.components] = self.weights
        return e

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """``Eᵀ X`` without forming ``E``."""
        out = np.zeros((self.num_components, x.shape[1]))
        np.add.at(out, self.components, self.weights[:, None] * x)
        return out

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.weights[:, None] * self.coefficients(x)[self.components]


@dataclass
class SmoothnessReport:
    per_layer_distance: list
    lipschitz_estimate: float
    lam: float
    initial_distance: float = field(default=0.0)


def subspace_basis(a: NormalizedAdjacency, components: np.ndarray) -> SubspaceBasis:
    components = np.asarray(components, dtype=np.int64)
    if components.shape != (a.num_nodes,):
        raise DimensionError("one component id per node required")
    num = int(components.max()) + 1 if len(components) else 0
    w = np.sqrt(a.self_loop_degrees)
    norms = np.sqrt(np.bincount(components, weights=w * w, minlength=num))
    return SubspaceBasis(w / norms[components], components, num)


def distance_to_subspace(x: np.ndarray, e: SubspaceBasis) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != e.num_nodes:
        raise DimensionError(f"{x.shape[0]} rows but the basis has {e.num_nodes} nodes")
    return float(np.linalg.norm(x - e.project(x)))


def second_largest_eigenvalue(
    a: NormalizedAdjacency,
    e: SubspaceBasis,
    tol: float = 1e-9,
    max_iters: int = 10_000,
    seed: int = 0,
) -> float:
    """Largest |eigenvalue| of ``Â`` on the orthogonal complement of span(E)."""
    n, m = a.num_nodes, e.num_components
    if n == m:
        return 0.0
    if n <= DENSE_EIGEN_LIMIT:
        dense = a.to_dense()
        basis = e.basis
        deflated = dense - basis @ basis.T
        vals = np.linalg.eigvalsh((deflated + deflated.T) / 2)
        return float(np.max(np.abs(vals)))
    # power iteration on P Â P, re-projecting each step to suppress drift into span(E)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 1))
    v -= e.project(v)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        w = spmm(a, v)
        w -= e.project(w)
        # two steps give |λ|² and avoid sign oscillation for negative eigenvalues
        w2 = spmm(a, w)
        w2 -= e.project(w2)
        new = math.sqrt(float(np.vdot(v, w2)))
        nrm = np.linalg.norm(w2)
        if nrm == 0.0:
            return 0.0
        v = w2 / nrm
        if abs(new - est) <= tol * max(new, 1e-300):
            return new
        est = new
    raise ConvergenceError("power iteration for λ did not converge", est)


def spectral_norm(
    w: np.ndarray, tol: float = 1e-13, max_iters: int = 20_000, seed: int = 0
) -> float:
    """Largest singular value by power iteration on ``WᵀW``."""
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if w.size == 0:
        raise DimensionError("spectral norm of an empty matrix")
    gram = w.T @ w
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        u = gram @ v
        new = float(v @ u)  # Rayleigh quotient
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            return 0.0
        v = u / nrm
        if abs(new - est) <= tol * new:
            return math.sqrt(new)
        est = new
    raise ConvergenceError("spectral norm power iteration did not converge", math.sqrt(est))


def _chain(weights: Sequence[np.ndarray]) -> np.ndarray:
    if not weights:
        raise DimensionError("empty weight chain")
    out = np.atleast_2d(np.asarray(weights[0], dtype=np.float64))
    for w in weights[1:]:
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        if out.shape[1] != w.shape[0]:
            raise DimensionError(f"cannot chain {out.shape} with {w.shape}")
        out = out @ w
    return out


def lipschitz_gcn(weights: Sequence[np.ndarray]) -> float:
    """``‖W1 W2 ⋯ Wk‖₂`` for a cascade of graph-convolution layers."""
    return spectral_norm(_chain(weights))


def _hop_sum(per_hop_weights, scale=None) -> np.ndarray:
    total = None
    for i, (w_hop, w_rel) in enumerate(per_hop_weights):
        term = _chain([w_hop, w_rel])
        if scale is not None:
            term = term * scale**i
        if total is None:
            total = term
        elif total.shape != term.shape:
            raise DimensionError(f"hop {i} product has shape {term.shape}, expected {total.shape}")
        else:
            total = total + term
    if total is None:
        raise DimensionError("no hops given")
    return total


def lipschitz_cignn(per_hop_weights) -> float:
    """``‖Σ_i W^(i) W_i‖₂`` over ``(W^(i), W_i)`` pairs."""
    return spectral_norm(_hop_sum(per_hop_weights))


def hop_sum_norm_bound(per_hop_weights, lam: float, dist: float) -> float:
    """``‖Σ_i λ^i W^(i) W_i‖₂ · 𝓓`` (the summed-hop bound as published)."""
    return spectral_norm(_hop_sum(per_hop_weights, scale=lam)) * dist


def summed_hop_bound(per_hop_weights, lam: float, dist: float) -> float:
    """``Σ_i λ^i ‖W^(i) W_i‖₂ · 𝓓``; holds for every weight choice.

    The published form can be violated when hop terms cancel inside the
    norm; this one only uses the triangle inequality.
    """
    return sum(lam**i * spectral_norm(_chain(p)) for i, p in enumerate(per_hop_weights)) * dist


def empirical_lipschitz(f, x: np.ndarray, num_pairs: int = 32, scale: float = 1e-3, seed: int = 0) -> float:
    """Heuristic lower estimate: max of ``‖f(x+δ)−f(x)‖_F / ‖δ‖_F`` over random δ."""
    rng = np.random.default_rng(seed)
    fx = f(x)
    best = 0.0
    for _ in range(num_pairs):
        delta = rng.standard_normal(x.shape) * scale
        best = max(best, float(np.linalg.norm(f(x + delta) - fx) / np.linalg.norm(delta)))
    return best


def verify_smoothing_bound(a, e, x, weights, k, final_relu=True, lam=None):
    """Evaluate both sides of ``d_M(H^(k)) ≤ L̂_G λ^k 𝓓`` for the linearized GCN.

    Intermediate activations are dropped; only the last layer keeps ReLU when
    ``final_relu`` is set. Returns ``(lhs, rhs, holds)``.
    """
    if len(weights) != k:
        raise DimensionError(f"need {k} weight matrices, got {len(weights)}")
    if lam is None:
        lam = second_largest_eigenvalue(a, e)
    h = np.asarray(x, dtype=np.float64)
    for w in weights:
        if h.shape[1] != np.shape(w)[0]:
            raise DimensionError(f"cannot apply {np.shape(w)} to width {h.shape[1]}")
        h = spmm(a, h) @ w
    if final_relu:
        h = np.maximum(h, 0.0)
    lhs = distance_to_subspace(h, e)
    lip = lipschitz_gcn(weights) if k > 0 else 1.0
    rhs = lip * lam**k * distance_to_subspace(x, e)
    return lhs, rhs, lhs <= rhs + 1e-8


def min_depth_kstar(lip: float, dist: float, eps: float, lam: float) -> int:
    """Smallest depth whose smoothness bound ``lip · λ^k · dist`` falls to eps."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if lip <= 0 or dist <= 0 or eps <= 0:
        raise ValueError("lip, dist and eps must be positive")
    k = math.ceil(math.log(eps / (lip * dist)) / math.log(lam))
    return max(0, k)
