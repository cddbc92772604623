"""Label-structure statistics: edge/node homophily, per-hop curves, NCD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .graph import CsrGraph, adjacency_power

__all__ = [
    "LabelVector",
    "NcdMatrix",
    "edge_homophily",
    "node_homophily",
    "per_hop_homophily",
    "ncd",
    "ncd_shift_variance",
]


@dataclass(frozen=True, eq=False)
class LabelVector:
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if len(labels) and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    @classmethod
    def from_array(cls, labels) -> "LabelVector":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels, int(labels.max()) + 1 if len(labels) else 0)

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, LabelVector):
            return NotImplemented
        return self.num_classes == other.num_classes and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class NcdMatrix:
    rows: np.ndarray
    hop: int
    has_neighbors: np.ndarray


def _labels(y) -> np.ndarray:
    return y.labels if isinstance(y, LabelVector) else np.asarray(y, dtype=np.int64)


def _check(g: CsrGraph, labels: np.ndarray):
    if len(labels) != g.num_nodes:
        raise DimensionError(f"{len(labels)} labels for {g.num_nodes} nodes")


def edge_homophily(g: CsrGraph, y) -> float:
    """Fraction of undirected edges (each counted once) joining equal labels."""
    labels = _labels(y)
    _check(g, labels)
    rows, cols = g.arcs()
    once = rows <= cols
    if not np.any(once):
        raise ValueError("edge homophily is undefined on an empty edge set")
    return float(np.mean(labels[rows[once]] == labels[cols[once]]))


def node_homophily(g: CsrGraph, y) -> float:
    """Mean same-label neighbor fraction; isolated nodes count as 0."""
    labels = _labels(y)
    _check(g, labels)
    rows, cols = g.arcs()
    same = np.bincount(rows, weights=(labels[rows] == labels[cols]).astype(float), minlength=g.num_nodes).astype(float)
    deg = g.degrees.astype(float)
    frac = np.divide(same, deg, out=np.zeros_like(same), where=deg > 0)
    return float(frac.mean()) if g.num_nodes else 0.0


def per_hop_homophily(g: CsrGraph, y, K: int, include_self_loops: bool = False, kind: str = "edge") -> list:
    """Homophily of ``A^i`` for ``i = 1..K``; ``None`` marks hops without edges."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if kind not in ("edge", "node"):
        raise ValueError(f"unknown homophily kind {kind!r}")
    out = []
    for i in range(1, K + 1):
        gi = adjacency_power(g, i, include_self_loops)
        if gi.num_arcs == 0:
            out.append(None)
        elif kind == "edge":
            out.append(edge_homophily(gi, y))
        else:
            out.append(node_homophily(gi, y))
    return out


def ncd(g: CsrGraph, y, hop: int, include_self_loops: bool = False) -> NcdMatrix:
    """Per-node class histogram of hop-``hop`` neighbors, normalized to sum 1."""
    if hop < 1:
        raise ValueError("hop must be at least 1")
    labels = _labels(y)
    _check(g, labels)
    num_classes = y.num_classes if isinstance(y, LabelVector) else int(labels.max()) + 1
    gk = adjacency_power(g, hop, include_self_loops)
    rows, cols = gk.arcs()
    counts = np.zeros((g.num_nodes, num_classes))
    np.add.at(counts, (rows, labels[cols]), 1.0)
    total = counts.sum(axis=1, keepdims=True)
    has = total[:, 0] > 0
    out = np.divide(counts, total, out=np.zeros_like(counts), where=total > 0)
    return NcdMatrix(out, hop, has)


def ncd_shift_variance(ncd_a, ncd_b) -> float:
    """``‖a − b‖² × 100`` between two NCD rows."""
    a = np.asarray(ncd_a, dtype=np.float64)
    b = np.asarray(ncd_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"NCD rows differ in length: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2) * 100.0)
