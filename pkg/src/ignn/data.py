"""Dataset directories, synthetic block-model graphs, and the rooted toy trees.

A dataset directory holds::

    edges.tsv      u<TAB>v per line, 0-based, each undirected edge once
    features.csv   N rows of D comma-separated decimals
    labels.csv     N rows, one integer each
    splits.json    optional {name: {"train": [...], "val": [...], "test": [...]}}
    meta.json      {"name": ..., "num_classes": ...}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError
from .homophily import LabelVector
from .training import SplitSpec

log = logging.getLogger(__name__)

__all__ = [
    "DatasetBundle",
    "SynthConfig",
    "Fig2Toy",
    "load_dataset",
    "save_dataset",
    "generate_sbm",
    "build_fig2_toy",
]


def _canonical_edges(edges, num_nodes=None) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    e = np.unique(e, axis=0)
    if num_nodes is not None and len(e) and (e.min() < 0 or e.max() >= num_nodes):
        raise DatasetError(f"edge endpoint outside [0, {num_nodes})")
    return e


@dataclass(eq=False)
class DatasetBundle:
    """Features, labels and undirected edges of one graph.

    ``edges`` is stored canonically: one row ``(u, v)`` with ``u < v`` per
    edge, sorted, no self-loops.
    """

    features: np.ndarray
    labels: LabelVector
    edges: np.ndarray
    splits: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if not isinstance(self.labels, LabelVector):
            self.labels = LabelVector.from_array(self.labels)
        n = self.num_nodes
        if len(self.labels) != n:
            raise DatasetError(f"{len(self.labels)} labels for {n} feature rows")
        self.edges = _canonical_edges(self.edges, n)
        self.meta = {"name": "unnamed", "provenance": "", **self.meta}
        self.meta["num_classes"] = self.labels.num_classes

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_classes(self) -> int:
        return self.labels.num_classes

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, DatasetBundle):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and self.labels == other.labels
            and np.array_equal(self.edges, other.edges)
            and self.splits.keys() == other.splits.keys()
            and all(self.splits[k] == other.splits[k] for k in self.splits)
            and self.meta == other.meta
        )


# --------------------------------------------------------------------------
# file IO


def _read_lines(path: Path) -> list:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError("missing file", path=path) from None
    except UnicodeDecodeError as err:
        raise DatasetError(f"not UTF-8: {err}", path=path) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    for no, line in enumerate(_read_lines(path), start=1):
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise DatasetError("malformed decimal row", path=path, line=no) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetError(f"expected {width} columns, found {len(row)}", path=path, line=no)
        rows.append(row)
    if not rows:
        raise DatasetError("no feature rows", path=path)
    return np.array(rows, dtype=np.float64)


def _parse_labels(path: Path, num_nodes: int) -> np.ndarray:
    lines = _read_lines(path)
    out = np.empty(len(lines), dtype=np.int64)
    for no, line in enumerate(lines, start=1):
        tok = line.strip()
        try:
            out[no - 1] = int(tok)
        except ValueError:
            raise DatasetError(f"non-integer label {tok!r}", path=path, line=no) from None
        if no > num_nodes:
            raise DatasetError(f"label row for node {no - 1} but only {num_nodes} nodes", path=path, line=no)
        if out[no - 1] < 0:
            raise DatasetError("negative label", path=path, line=no)
    if len(out) != num_nodes:
        raise DatasetError(f"{len(out)} labels for {num_nodes} nodes", path=path)
    return out


def _parse_edges(path: Path, num_nodes: int) -> np.ndarray:
    pairs = []
    for no, line in enumerate(_read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetError("expected two tab-separated node ids", path=path, line=no)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetError("non-integer node id", path=path, line=no) from None
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise DatasetError(f"node id outside [0, {num_nodes})", path=path, line=no)
        if u == v:
            raise DatasetError("self-loop", path=path, line=no)
        pairs.append((u, v))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _parse_splits(path: Path, num_nodes: int) -> dict:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise DatasetError(f"invalid JSON: {err.msg}", path=path, line=err.lineno) from None
    if not isinstance(raw, dict):
        raise DatasetError("expected an object of named splits", path=path)
    out = {}
    for name, parts in raw.items():
        if not isinstance(parts, dict) or set(parts) != {"train", "val", "test"}:
            raise DatasetError(f"split {name!r} needs exactly train/val/test", path=path)
        try:
            idx = [np.asarray(parts[k], dtype=np.int64) for k in ("train", "val", "test")]
        except (TypeError, ValueError):
            raise DatasetError(f"split {name!r} has non-integer indices", path=path) from None
        joined = np.concatenate(idx)
        if len(joined) and (joined.min() < 0 or joined.max() >= num_nodes):
            raise DatasetError(f"split {name!r} references a node outside [0, {num_nodes})", path=path)
        if len(np.unique(joined)) != len(joined):
            raise DatasetError(f"split {name!r} has overlapping or repeated indices", path=path)
        out[name] = SplitSpec(*idx)
    return out


def load_dataset(path) -> DatasetBundle:
    root = Path(path)
    if not root.is_dir():
        raise DatasetError("not a dataset directory", path=root)
    meta_path = root / "meta.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError("missing file", path=meta_path) from None
    except json.JSONDecodeError as err:
        raise DatasetError(f"invalid JSON: {err.msg}", path=meta_path, line=err.lineno) from None
    if not isinstance(meta, dict) or "num_classes" not in meta:
        raise DatasetError("meta.json must be an object with num_classes", path=meta_path)

    x = _parse_features(root / "features.csv")
    n = x.shape[0]
    y = _parse_labels(root / "labels.csv", n)
    num_classes = int(meta["num_classes"])
    bad = np.flatnonzero(y >= num_classes)
    if len(bad):
        raise DatasetError(f"label {y[bad[0]]} >= num_classes {num_classes}", path=root / "labels.csv", line=int(bad[0]) + 1)
    edges = _parse_edges(root / "edges.tsv", n)
    splits_path = root / "splits.json"
    splits = _parse_splits(splits_path, n) if splits_path.exists() else {}
    return DatasetBundle(x, LabelVector(y, num_classes), edges, splits, meta)


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def save_dataset(bundle: DatasetBundle, path) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    # repr is the shortest string that parses back to the same double
    _write(root / "features.csv", "".join(",".join(repr(float(v)) for v in row) + "\n" for row in bundle.features))
    _write(root / "labels.csv", "".join(f"{int(v)}\n" for v in bundle.labels.labels))
    _write(root / "edges.tsv", "".join(f"{u}\t{v}\n" for u, v in bundle.edges.tolist()))
    if bundle.splits:
        doc = {
            name: {"train": s.train_idx.tolist(), "val": s.val_idx.tolist(), "test": s.test_idx.tolist()}
            for name, s in bundle.splits.items()
        }
        _write(root / "splits.json", json.dumps(doc, sort_keys=True) + "\n")
    _write(root / "meta.json", json.dumps(bundle.meta, sort_keys=True, indent=2) + "\n")
    return root


# --------------------------------------------------------------------------
# synthetic block model


@dataclass(frozen=True)
class SynthConfig:
    num_nodes: int = 2000
    num_classes: int = 4
    avg_degree: float = 10.0
    homophily: float = 0.5
    feature_dim: int = 16
    feature_noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_nodes < 2 or self.num_classes < 1 or self.num_classes > self.num_nodes:
            raise ConfigError("need num_nodes >= 2 and 1 <= num_classes <= num_nodes")
        if not 0.0 <= self.homophily <= 1.0:
            raise ConfigError(f"homophily must lie in [0, 1], got {self.homophily}")
        if not 0.0 < self.avg_degree < self.num_nodes:
            raise ConfigError("avg_degree must lie in (0, num_nodes)")
        if self.feature_dim < self.num_classes:
            raise ConfigError("feature_dim must be >= num_classes for orthogonal class means")
        if self.feature_noise < 0:
            raise ConfigError("feature_noise must be non-negative")

    def class_sizes(self) -> np.ndarray:
        base, extra = divmod(self.num_nodes, self.num_classes)
        return np.array([base + (c < extra) for c in range(self.num_classes)])

    def edge_probabilities(self) -> tuple:
        """``(p_in, p_out)`` giving expected homophily and degree on target."""
        sizes = self.class_sizes().astype(float)
        total_pairs = self.num_nodes * (self.num_nodes - 1) / 2
        intra = float(np.sum(sizes * (sizes - 1) / 2))
        inter = total_pairs - intra
        expected_edges = self.num_nodes * self.avg_degree / 2
        if inter == 0:
            # one class: every edge is intra-class whatever the target
            return expected_edges / intra, 0.0
        p_in = self.homophily * expected_edges / intra if intra else 0.0
        p_out = (1 - self.homophily) * expected_edges / inter
        if p_in > 1 or p_out > 1 or (intra == 0 and self.homophily > 0):
            raise ConfigError(
                f"homophily {self.homophily} with average degree {self.avg_degree} is infeasible "
                f"(p_in={p_in:.3g}, p_out={p_out:.3g})"
            )
        return p_in, p_out


def _sample_block(rng, nodes_a, nodes_b, p, same):
    if same:
        iu, ju = np.triu_indices(len(nodes_a), 1)
        pairs = len(iu)
    else:
        pairs = len(nodes_a) * len(nodes_b)
    if pairs == 0 or p == 0:
        return np.zeros((0, 2), dtype=np.int64)
    count = rng.binomial(pairs, p)
    pick = rng.choice(pairs, size=count, replace=False)
    if same:
        return np.stack([nodes_a[iu[pick]], nodes_a[ju[pick]]], axis=1)
    return np.stack([nodes_a[pick // len(nodes_b)], nodes_b[pick % len(nodes_b)]], axis=1)


def generate_sbm(cfg: SynthConfig) -> DatasetBundle:
    """Balanced block model with homophily and mean degree met in expectation."""
    p_in, p_out = cfg.edge_probabilities()
    rng = np.random.default_rng(cfg.seed)
    sizes = cfg.class_sizes()
    labels = rng.permutation(np.repeat(np.arange(cfg.num_classes), sizes))
    members = [np.flatnonzero(labels == c) for c in range(cfg.num_classes)]
    blocks = []
    for c in range(cfg.num_classes):
        for d in range(c, cfg.num_classes):
            blocks.append(_sample_block(rng, members[c], members[d], p_in if c == d else p_out, c == d))
    edges = np.concatenate(blocks) if blocks else np.zeros((0, 2), dtype=np.int64)

    means = np.eye(cfg.num_classes, cfg.feature_dim)
    x = means[labels] + cfg.feature_noise * rng.standard_normal((cfg.num_nodes, cfg.feature_dim))
    meta = {"name": f"sbm-h{cfg.homophily:g}-s{cfg.seed}", "provenance": f"generate_sbm {cfg}"}
    return DatasetBundle(x, LabelVector(labels, cfg.num_classes), edges, {}, meta)


# --------------------------------------------------------------------------
# toy trees for the sparsification example


@dataclass(frozen=True)
class Fig2Toy:
    g1: DatasetBundle
    g1_sparse: DatasetBundle
    g2: DatasetBundle
    g2_sparse: DatasetBundle
    root: int = 0
    removed: tuple = ()


# node layout shared by all four graphs
_ROOT, _A, _B, _C = 0, 1, 2, 3
_C_CHILDREN = (4, 5, 6)
_SHARED = tuple(range(7, 14))  # attached to a and b alternately
_SPARSIFIED = (_C, 7, 8)

# labels 0/1/2 = classes I/II/III; nodes 7 and 8 are the sparsified hop-2 nodes
_G1_LABELS = [0, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1]
_G2_LABELS = [0, 0, 1, 2, 2, 2, 2, 1, 2, 0, 1, 1, 2, 2]


def _toy_edges():
    edges = [(_ROOT, _A), (_ROOT, _B), (_ROOT, _C)]
    edges += [(_C, v) for v in _C_CHILDREN]
    parents = (_A, _B)
    edges += [(parents[i % 2], v) for i, v in enumerate(_SHARED)]
    return edges


def _toy_bundle(labels, name, sparse):
    edges = _toy_edges()
    if sparse:
        edges = [(u, v) for u, v in edges if u not in _SPARSIFIED and v not in _SPARSIFIED]
    n = len(labels)
    x = np.ones((n, 1))
    return DatasetBundle(x, LabelVector(labels, 3), edges, {}, {"name": name, "provenance": "build_fig2_toy"})


def build_fig2_toy() -> Fig2Toy:
    """Two rooted 2-hop trees and their copies with the same three nodes removed.

    Removing hop-1 node 3 also cuts its three children off from the root;
    nodes keep their ids and simply become isolated.
    """
    return Fig2Toy(
        _toy_bundle(_G1_LABELS, "G1", False),
        _toy_bundle(_G1_LABELS, "G1-sparse", True),
        _toy_bundle(_G2_LABELS, "G2", False),
        _toy_bundle(_G2_LABELS, "G2-sparse", True),
        _ROOT,
        _SPARSIFIED,
    )
