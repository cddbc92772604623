"""Sparse graph structures and propagation.

Graphs are undirected and unweighted, stored in compressed-row form with
sorted column indices. Self-loops never come from input edges; they are
added by :func:`sym_normalize` (the ``A + I`` renormalization) or appear in
:func:`adjacency_power` results when requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _scipy_components

from .errors import DimensionError, EdgeRangeError

__all__ = [
    "CsrGraph",
    "NormalizedAdjacency",
    "HopCache",
    "build_from_edges",
    "sym_normalize",
    "laplacian",
    "adjacency_power",
    "connected_components",
    "spmm",
    "hop_features",
]


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Immutable undirected graph in CSR layout (no stored values)."""

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _frozen(self.row_offsets, np.int64))
        object.__setattr__(self, "col_indices", _frozen(self.col_indices, np.int64))
        if self.row_offsets.shape != (self.num_nodes + 1,):
            raise DimensionError("row_offsets must have length num_nodes + 1")
        if self.row_offsets[-1] != len(self.col_indices):
            raise DimensionError("row_offsets[-1] must equal the number of stored arcs")

    @property
    def num_arcs(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    @property
    def has_self_loops(self) -> bool:
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        return bool(np.any(rows == self.col_indices))

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u] : self.row_offsets[u + 1]]

    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column index of every stored arc, in storage order."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)
        return rows, self.col_indices

    def edges(self) -> list[tuple[int, int]]:
        """Each undirected edge once as ``(u, v)`` with ``u <= v``."""
        rows, cols = self.arcs()
        keep = rows <= cols
        return list(zip(rows[keep].tolist(), cols[keep].tolist()))

    @property
    def num_edges(self) -> int:
        rows, cols = self.arcs()
        return int(np.count_nonzero(rows <= cols))

    def to_scipy(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(self.num_arcs, dtype=dtype)
        return sp.csr_matrix(
            (data, self.col_indices.copy(), self.row_offsets.copy()),
            shape=(self.num_nodes, self.num_nodes),
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def __eq__(self, other):
        if not isinstance(other, CsrGraph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        )

    def __hash__(self):
        return hash((self.num_nodes, self.row_offsets.tobytes(), self.col_indices.tobytes()))

    @classmethod
    def from_scipy(cls, m: sp.spmatrix) -> "CsrGraph":
        m = sp.csr_matrix(m)
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.indptr, m.indices)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """``D̂^{-1/2} (A + I) D̂^{-1/2}`` in CSR layout, diagonal always stored."""

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    self_loop_degrees: np.ndarray
    _matrix: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name, dtype in (
            ("row_offsets", np.int64),
            ("col_indices", np.int64),
            ("values", np.float64),
            ("self_loop_degrees", np.float64),
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        m = sp.csr_matrix(
            (self.values.copy(), self.col_indices.copy(), self.row_offsets.copy()),
            shape=(self.num_nodes, self.num_nodes),
        )
        object.__setattr__(self, "_matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_nodes, self.num_nodes)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        return self._matrix.copy()

    def to_dense(self) -> np.ndarray:
        return self._matrix.toarray()


@dataclass(frozen=True)
class HopCache:
    """Precomputed propagated features; ``hops[i]`` is ``Â^i X``."""

    hops: tuple

    @property
    def K(self) -> int:
        return len(self.hops) - 1


def build_from_edges(num_nodes: int, edges: Iterable[Sequence[int]]) -> CsrGraph:
    """Symmetric, deduplicated, loop-free graph from an edge list."""
    pairs = [tuple(e) for e in edges]
    for e in pairs:
        if len(e) != 2 or not (0 <= e[0] < num_nodes and 0 <= e[1] < num_nodes):
            raise EdgeRangeError(e, num_nodes)
    if pairs:
        arr = np.asarray(pairs, dtype=np.int64)
        arr = arr[arr[:, 0] != arr[:, 1]]
        rows = np.concatenate([arr[:, 0], arr[:, 1]])
        cols = np.concatenate([arr[:, 1], arr[:, 0]])
    else:
        rows = cols = np.empty(0, dtype=np.int64)
    # lexsort by (row, col) then drop duplicates
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    if len(rows):
        keep = np.ones(len(rows), dtype=bool)
        keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        rows, cols = rows[keep], cols[keep]
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    return CsrGraph(num_nodes, np.cumsum(offsets), cols)


def sym_normalize(g: CsrGraph) -> NormalizedAdjacency:
    a = g.to_scipy().tolil()
    a.setdiag(1.0)
    a = sp.csr_matrix(a)
    a.sort_indices()
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows = np.repeat(np.arange(g.num_nodes), np.diff(a.indptr))
    values = inv_sqrt[rows] * inv_sqrt[a.indices]
    return NormalizedAdjacency(g.num_nodes, a.indptr, a.indices, values, deg)


def laplacian(a: NormalizedAdjacency) -> sp.csr_matrix:
    lap = sp.identity(a.num_nodes, format="csr") - a.to_scipy()
    lap = sp.csr_matrix(lap)
    lap.sort_indices()
    return lap


def adjacency_power(g: CsrGraph, k: int, include_self_loops: bool = False) -> CsrGraph:
    """Boolean k-th power of the adjacency: arcs ``u -> v`` with a walk of exactly k steps."""
    if k < 0:
        raise ValueError("k must be non-negative")
    n = g.num_nodes
    reach = sp.identity(n, format="csr", dtype=np.int64)
    a = g.to_scipy(dtype=np.int64)
    for _ in range(k):
        reach = reach @ a
        reach.data[:] = 1  # keep entries 0/1 so counts cannot overflow
        reach.eliminate_zeros()
    reach = sp.csr_matrix(reach)
    if not include_self_loops:
        reach = reach.tolil()
        reach.setdiag(0)
        reach = sp.csr_matrix(reach)
    return CsrGraph.from_scipy(reach)


def connected_components(g: CsrGraph) -> np.ndarray:
    """Dense component ids, numbered by first appearance in node order."""
    _, labels = _scipy_components(g.to_scipy(), directed=False)
    # relabel so ids follow the order of each component's lowest node
    _, first = np.unique(labels, return_index=True)
    remap = np.empty_like(first)
    remap[np.argsort(first)] = np.arange(len(first))
    return remap[labels].astype(np.int64)


def spmm(a, x: np.ndarray) -> np.ndarray:
    """Sparse × dense product. Each row sums its entries in ascending column order."""
    m = a._matrix if isinstance(a, NormalizedAdjacency) else sp.csr_matrix(a)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or m.shape[1] != x.shape[0]:
        raise DimensionError(f"cannot multiply {m.shape} sparse by {x.shape} dense")
    if not m.has_sorted_indices:
        m = m.sorted_indices()
    return np.asarray(m @ x)


def hop_features(a: NormalizedAdjacency, x: np.ndarray, K: int) -> HopCache:
    if K < 0:
        raise ValueError("K must be non-negative")
    x = np.array(x, dtype=np.float64, copy=True)
    hops = [x]
    for _ in range(K):
        hops.append(spmm(a, hops[-1]))
    for h in hops:
        h.setflags(write=False)
    return HopCache(tuple(hops))
