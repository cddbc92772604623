"""Transductive training with early stopping, hop sweeps, and the principle ablation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ConvergenceError, DivergenceError
from .graph import build_from_edges, connected_components, sym_normalize
from .models import AIgnnConfig, CIgnnConfig, GcnConfig, JkConfig, RIgnnConfig, build_model
from .spectral import distance_to_subspace, subspace_basis

log = logging.getLogger(__name__)

__all__ = [
    "SplitSpec",
    "TrainConfig",
    "EpochRecord",
    "RunResult",
    "ModelFamily",
    "make_random_splits",
    "train",
    "hop_sweep",
    "ablation_grid",
    "ABLATION_VARIANTS",
    "ablation_variant",
]


@dataclass(frozen=True)
class SplitSpec:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        for name in ("train_idx", "val_idx", "test_idx"):
            arr = np.array(sorted(getattr(self, name)), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, SplitSpec):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in ("train_idx", "val_idx", "test_idx")
        )

    def validate(self, num_nodes: int):
        parts = [set(self.train_idx.tolist()), set(self.val_idx.tolist()), set(self.test_idx.tolist())]
        if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
            raise ValueError("split index sets overlap")
        if parts[0] | parts[1] | parts[2] != set(range(num_nodes)):
            raise ValueError("split does not cover every node")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.patience > self.max_epochs:
            raise ConfigError("patience cannot exceed max_epochs")
        if self.max_epochs < 1 or self.patience < 0:
            raise ConfigError("max_epochs must be >= 1 and patience >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float
    test_acc: float
    distances: list | None = None
    lipschitz: float | None = None


@dataclass
class RunResult:
    best_val_acc: float
    test_acc_at_best_val: float
    best_epoch: int
    epoch_log: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best_val_acc": self.best_val_acc,
            "test_acc_at_best_val": self.test_acc_at_best_val,
            "best_epoch": self.best_epoch,
            "epochs_run": len(self.epoch_log),
        }


def _proportion_sizes(n):
    n_train = round(0.48 * n)
    n_val = round(0.32 * n)
    return n_train, n_val, n - n_train - n_val


def make_random_splits(num_nodes: int, seed: int = 0, num_splits: int = 10, labels=None) -> list:
    """Random 48/32/20 splits; stratified per class when labels are given."""
    if num_nodes < 5:
        raise ValueError("need at least 5 nodes to split")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(num_splits):
        if labels is None:
            perm = rng.permutation(num_nodes)
        else:
            # interleave per-class permutations so any prefix is near-stratified
            labels = np.asarray(labels)
            keys = np.empty(num_nodes)
            for c in np.unique(labels):
                idx = np.flatnonzero(labels == c)
                ranks = rng.permutation(len(idx))
                keys[idx] = (ranks + rng.random()) / len(idx)
            perm = np.lexsort((rng.random(num_nodes), keys))
        n_train, n_val, _ = _proportion_sizes(num_nodes)
        out.append(SplitSpec(perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :], seed))
    return out


def _accuracy(logits, labels, idx) -> float:
    if len(idx) == 0:
        return 0.0
    return float(np.mean(np.argmax(logits[idx], axis=1) == labels[idx]))


def _features(bundle):
    return np.asarray(bundle.features, dtype=np.float64)


def _labels(bundle):
    return bundle.labels.labels if hasattr(bundle.labels, "labels") else np.asarray(bundle.labels)


def _diagnose(model, params, a, x, basis, cache, epoch):
    # separate eval-mode pass: consumes no dropout randomness, so training is unchanged
    tape = ad.Tape()
    res = model.forward(tape, model.register(tape, params), a, x, training=False, cache=cache)
    distances = [distance_to_subspace(h.value, basis) for h in res.layers]
    try:
        lip = model.lipschitz(params)
    except ConvergenceError as err:
        log.warning("lipschitz estimate did not converge at epoch %d", epoch)
        lip = err.estimate
    return distances, lip


def train(model_cfg, bundle, split: SplitSpec, tc: TrainConfig, diagnostics: bool = False, graph=None) -> RunResult:
    """Full-batch Adam on masked cross-entropy with validation early stopping.

    With ``diagnostics`` each epoch record also carries the subspace distance
    of every hidden layer and the model's Lipschitz estimate, both taken from
    the parameters the epoch starts with.

    ``graph`` may pass a prebuilt ``(adjacency, basis)`` pair to skip
    normalization when many runs share one dataset.
    """
    x = _features(bundle)
    y = _labels(bundle)
    if graph is None:
        g = build_from_edges(len(y), bundle.edges)
        a = sym_normalize(g)
        basis = subspace_basis(a, connected_components(g)) if diagnostics else None
    else:
        a, basis = graph
    model = build_model(model_cfg)
    params = model.init_params(tc.seed)
    cache = model.prepare(a, x)
    state = ad.AdamState(lr=tc.lr)
    drop_rng = np.random.default_rng([tc.seed, 1])

    best_val, best_test, best_epoch = -1.0, 0.0, -1
    since_best = 0
    log_rows = []
    for epoch in range(tc.max_epochs):
        if diagnostics:
            # the state entering this epoch, so epoch 0 describes the untrained model
            distances, lip = _diagnose(model, params, a, x, basis, cache, epoch)
        tape = ad.Tape()
        pv = model.register(tape, params)
        res = model.forward(tape, pv, a, x, training=True, rng=drop_rng, cache=cache)
        loss = ad.softmax_cross_entropy(res.logits, y, split.train_idx)
        loss_value = float(loss.value.item())
        if not math.isfinite(loss_value):
            raise DivergenceError(epoch, loss_value)
        grads = tape.backward(loss)
        if tc.weight_decay:
            grads = {k: g + tc.weight_decay * params[k] for k, g in grads.items()}
        params = ad.adam_step(state, params, grads)

        eval_tape = ad.Tape()
        ev = model.forward(eval_tape, model.register(eval_tape, params), a, x, training=False, cache=cache)
        logits = ev.logits.value
        if not np.all(np.isfinite(logits)):
            raise DivergenceError(epoch, float("nan"))
        val_acc = _accuracy(logits, y, split.val_idx)
        test_acc = _accuracy(logits, y, split.test_idx)
        rec = EpochRecord(epoch, loss_value, val_acc, test_acc)
        if diagnostics:
            rec.distances, rec.lipschitz = distances, lip
        log_rows.append(rec)

        if val_acc > best_val:
            best_val, best_test, best_epoch = val_acc, test_acc, epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > tc.patience or (tc.patience == 0 and since_best > 0):
                break
    log.debug("stopped after %d epochs, best epoch %d", len(log_rows), best_epoch)
    return RunResult(best_val, best_test, best_epoch, log_rows)


@dataclass(frozen=True)
class ModelFamily:
    """Model template whose depth/hop count is filled in per run."""

    kind: str
    hidden: int = 64
    dropout_p: float = 0.5
    out_width: int | None = None
    fast_mode: bool = True

    def config(self, K: int, in_dim: int, num_classes: int):
        kind = self.kind
        if kind == "gcn":
            return GcnConfig.uniform(in_dim, self.hidden, num_classes, K, dropout_p=self.dropout_p)
        if kind == "r-ignn":
            return RIgnnConfig(in_dim, self.hidden, num_classes, K, self.dropout_p)
        if kind == "a-ignn":
            return AIgnnConfig(in_dim, self.hidden, num_classes, K, self.dropout_p)
        if kind == "c-ignn":
            return CIgnnConfig(in_dim, self.hidden, num_classes, K, self.out_width, self.dropout_p, self.fast_mode)
        if kind == "sign":
            return CIgnnConfig(in_dim, self.hidden, num_classes, K, None, self.dropout_p, self.fast_mode, relation=False)
        if kind == "sign-shared":
            return CIgnnConfig(
                in_dim, self.hidden, num_classes, K, None, self.dropout_p, self.fast_mode, separate=False, relation=False
            )
        if kind == "jknet":
            return JkConfig(in_dim, self.hidden, num_classes, K, self.dropout_p)
        raise ConfigError(f"unknown model kind {kind!r}")


def _shared_graph(bundle, diagnostics=False):
    y = _labels(bundle)
    g = build_from_edges(len(y), bundle.edges)
    a = sym_normalize(g)
    basis = subspace_basis(a, connected_components(g)) if diagnostics else None
    return a, basis


def _num_classes(bundle):
    lv = bundle.labels
    return lv.num_classes if hasattr(lv, "num_classes") else int(np.max(lv)) + 1


def _run_job(job):
    cfg, bundle, split, tc, graph = job
    return train(cfg, bundle, split, tc, graph=graph).test_acc_at_best_val


def _run_all(jobs, workers):
    # executor.map keeps submission order, so aggregation is independent of scheduling
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def hop_sweep(
    family: ModelFamily, bundle, splits: Sequence[SplitSpec], hops: Sequence[int], tc: TrainConfig, workers: int = 1
) -> list:
    """Rows ``(hop, mean_acc, std_acc)`` with one run per (hop, split).

    Run ``i`` of every hop uses split ``i`` and training seed ``tc.seed + i``.
    """
    if not hops:
        raise ValueError("hops must be non-empty")
    graph = _shared_graph(bundle)
    d = _features(bundle).shape[1]
    c = _num_classes(bundle)
    jobs = [
        (family.config(K, d, c), bundle, s, replace(tc, seed=tc.seed + i), graph)
        for K in hops
        for i, s in enumerate(splits)
    ]
    accs = np.array(_run_all(jobs, workers)).reshape(len(hops), len(splits))
    return [(K, float(np.mean(row)), float(np.std(row))) for K, row in zip(hops, accs)]


# principle subset -> equivalent variant
ABLATION_VARIANTS = {
    frozenset(): "gcn",
    frozenset({"IN"}): "sign-shared",
    frozenset({"NR"}): "jknet",
    frozenset({"IN", "NR"}): "r-ignn",
    frozenset({"SN", "IN"}): "sign",
    frozenset({"SN", "IN", "NR"}): "c-ignn",
}


def ablation_variant(principles) -> str:
    key = frozenset(principles)
    unknown = key - {"SN", "IN", "NR"}
    if unknown:
        raise ConfigError(f"unknown principles {sorted(unknown)}")
    if "SN" in key and "IN" not in key:
        raise ConfigError("SN cannot be applied without IN: separate per-hop transforms need parallel hop aggregation")
    return ABLATION_VARIANTS[key]


def ablation_grid(
    bundle, splits, principle_sets, K: int, tc: TrainConfig, hidden: int = 64, dropout_p: float = 0.5, workers: int = 1
) -> list:
    """Train the variant for each principle subset; rows ``(principles, variant, mean, std)``."""
    variants = [(frozenset(p), ablation_variant(p)) for p in principle_sets]
    graph = _shared_graph(bundle)
    d = _features(bundle).shape[1]
    c = _num_classes(bundle)
    jobs = [
        (ModelFamily(kind, hidden, dropout_p).config(K, d, c), bundle, s, replace(tc, seed=tc.seed + i), graph)
        for _, kind in variants
        for i, s in enumerate(splits)
    ]
    accs = np.array(_run_all(jobs, workers)).reshape(len(variants), len(splits))
    return [
        (tuple(sorted(key)), kind, float(np.mean(row)), float(np.std(row))) for (key, kind), row in zip(variants, accs)
    ]
