"""``ignn`` command-line interface.

Exit codes: 0 success, 1 failed check, 2 usage or config error, 3 numeric
divergence, 4 file IO or dataset error. Set ``IGNN_LOG=debug|info`` for
progress output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import SynthConfig, build_fig2_toy, generate_sbm, load_dataset, save_dataset
from .errors import ConfigError, DatasetError, DivergenceError
from .graph import adjacency_power, build_from_edges, sym_normalize
from .homophily import edge_homophily, ncd, ncd_shift_variance, per_hop_homophily
from .models import ReductionSpec, reduction_outputs
from .training import ModelFamily, SplitSpec, TrainConfig, hop_sweep, make_random_splits, train

log = logging.getLogger("ignn")

CLI_MODEL_KINDS = ("gcn", "r-ignn", "a-ignn", "c-ignn")


# --------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ModelSection:
    kind: str = "c-ignn"
    K: int = 2
    hidden: int = 64
    dropout_p: float = 0.5
    out_width: int | None = None
    fast_mode: bool = True

    def __post_init__(self):
        if self.kind not in CLI_MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {', '.join(CLI_MODEL_KINDS)}; got {self.kind!r}")
        if self.K < 0 or (self.K == 0 and self.kind != "c-ignn"):
            raise ConfigError(f"model.K={self.K} is invalid for {self.kind}")
        if self.hidden < 1 or not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("model.hidden must be >= 1 and model.dropout_p in [0, 1)")

    def family(self) -> ModelFamily:
        return ModelFamily(self.kind, self.hidden, self.dropout_p, self.out_width, self.fast_mode)


@dataclass(frozen=True)
class SplitSection:
    num_splits: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.num_splits < 1:
            raise ConfigError("splits.num_splits must be >= 1")


@dataclass(frozen=True)
class TrainSection:
    lr: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 1000
    patience: int = 100


@dataclass(frozen=True)
class CliConfig:
    seed: int = 0
    output_dir: str = "ignn-out"
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    splits: SplitSection = field(default_factory=SplitSection)
    synth: SynthConfig | None = None

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **dataclasses.asdict(self.train))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"model": ModelSection, "train": TrainSection, "splits": SplitSection, "synth": SynthConfig}


def _build(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**raw)
    except TypeError as err:
        raise ConfigError(f"{where}: {err}") from None


def parse_config(raw: dict) -> CliConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - {f.name for f in dataclasses.fields(CliConfig)})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kw = {k: v for k, v in raw.items() if k not in _SECTIONS}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    for name, cls in _SECTIONS.items():
        if name in raw:
            section = dict(raw[name]) if isinstance(raw[name], dict) else raw[name]
            if name == "synth" and isinstance(section, dict):
                section.setdefault("seed", seed)
            kw[name] = _build(cls, section, name)
    try:
        cfg = CliConfig(**kw)
        cfg.train_config()
    except TypeError as err:
        raise ConfigError(str(err)) from None
    return cfg


def load_config(path) -> CliConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}: invalid JSON: {err.msg}") from None
    return parse_config(raw)


# --------------------------------------------------------------------------
# output helpers


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _output_dir(args, cfg: CliConfig) -> Path:
    out = Path(args.out if getattr(args, "out", None) else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pick_split(bundle, cfg: CliConfig, args) -> SplitSpec:
    if getattr(args, "split_name", None):
        if args.split_name not in bundle.splits:
            raise ConfigError(f"dataset has no split named {args.split_name!r}")
        return bundle.splits[args.split_name]
    seed = cfg.splits.seed if args.split_seed is None else args.split_seed
    return make_random_splits(bundle.num_nodes, seed, 1, bundle.labels.labels)[0]


def _model_config(cfg: CliConfig, bundle):
    return cfg.model.family().config(cfg.model.K, bundle.features.shape[1], bundle.num_classes)


# --------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    bundle = load_dataset(args.data)
    split = _pick_split(bundle, cfg, args)
    result = train(_model_config(cfg, bundle), bundle, split, cfg.train_config())
    out = _output_dir(args, cfg)
    rows = [(r.epoch, _fmt(r.train_loss), _fmt(r.val_acc), _fmt(r.test_acc)) for r in result.epoch_log]
    _write_text(out / "epochs.csv", _csv_text(("epoch", "train_loss", "val_acc", "test_acc"), rows))
    _write_text(out / "result.json", _json_text(result.to_dict()))
    _write_text(out / "resolved_config.json", _json_text(cfg.to_dict()))
    print(f"test accuracy at best validation epoch {result.best_epoch}: {result.test_acc_at_best_val:.4f}")
    return 0


def _parse_hops(text: str) -> list:
    try:
        hops = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--hops must be a comma-separated list of integers, got {text!r}") from None
    if not hops or min(hops) < 0:
        raise ConfigError("--hops needs at least one non-negative value")
    return hops


def cmd_sweep_hops(args) -> int:
    cfg = load_config(args.config)
    hops = _parse_hops(args.hops)
    if cfg.model.kind != "c-ignn" and 0 in hops:
        raise ConfigError(f"hop 0 is only defined for c-ignn, not {cfg.model.kind}")
    bundle = load_dataset(args.data)
    splits = make_random_splits(bundle.num_nodes, cfg.splits.seed, cfg.splits.num_splits, bundle.labels.labels)
    rows = hop_sweep(cfg.model.family(), bundle, splits, hops, cfg.train_config(), workers=args.parallel)
    out = _output_dir(args, cfg)
    _write_text(out / "hops.csv", _csv_text(("hop", "mean_acc", "std_acc"), [(k, _fmt(m), _fmt(s)) for k, m, s in rows]))
    _write_text(out / "resolved_config.json", _json_text(cfg.to_dict()))
    for k, m, s in rows:
        print(f"hop {k:>3}: {m:.4f} ± {s:.4f}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    bundle = load_dataset(args.data)
    split = _pick_split(bundle, cfg, args)
    result = train(_model_config(cfg, bundle), bundle, split, cfg.train_config(), diagnostics=True)
    rows = []
    for rec in result.epoch_log:
        for layer, d in enumerate(rec.distances):
            rows.append((rec.epoch, layer, _fmt(d), _fmt(rec.lipschitz)))
    out = _output_dir(args, cfg)
    _write_text(out / "diagnostics.csv", _csv_text(("epoch", "layer", "d_m", "lipschitz"), rows))
    _write_text(out / "resolved_config.json", _json_text(cfg.to_dict()))
    print(f"{len(result.epoch_log)} epochs, {len(rows)} rows written to {out / 'diagnostics.csv'}")
    return 0


def cmd_homophily(args) -> int:
    if args.max_hop < 1:
        raise ConfigError("--max-hop must be >= 1")
    bundle = load_dataset(args.data)
    g = build_from_edges(bundle.num_nodes, bundle.edges)
    loops = args.self_loops == "on"
    edge = per_hop_homophily(g, bundle.labels, args.max_hop, loops, "edge")
    node = per_hop_homophily(g, bundle.labels, args.max_hop, loops, "node")
    rows = [(i + 1, _fmt(e), _fmt(n)) for i, (e, n) in enumerate(zip(edge, node))]
    text = _csv_text(("hop", "edge_homophily", "node_homophily"), rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "homophily.csv", text)
    sys.stdout.write(text)
    return 0


_SPEC_ALIASES = {"gpr": "gprgnn", "gprgnn": "gprgnn"}


def parse_reduction(text: str, K: int) -> ReductionSpec:
    """``appnp:0.1``, ``gpr:1,0.5,0.25``, ``sign``, ``mixhop[:c0,..]``, ``meanpool``, ``sumpool``, ``poly:θ0,..``.

    Coefficient lists fix K to their length minus one.
    """
    name, _, arg = text.partition(":")
    name = _SPEC_ALIASES.get(name, name)
    try:
        if name == "appnp":
            return ReductionSpec("appnp", K, alpha=float(arg))
        if name in ("gprgnn", "poly", "mixhop"):
            if not arg:
                if name != "mixhop":
                    raise ConfigError(f"{name} needs coefficients, e.g. {name}:1,0.5,0.25")
                return ReductionSpec("mixhop", K, coefficients=tuple(np.linspace(1.0, 0.5, K + 1)))
            coef = tuple(float(t) for t in arg.split(","))
            return ReductionSpec(name, len(coef) - 1, coefficients=coef)
        if name in ("sign", "meanpool", "sumpool") and not arg:
            return ReductionSpec(name, K)
    except ValueError as err:
        raise ConfigError(f"bad reduction spec {text!r}: {err}") from None
    raise ConfigError(f"unknown reduction spec {text!r}")


def random_instance(rng, max_nodes=20, in_dim=4, width=3):
    """Random connected-or-not graph with features for the equivalence checks."""
    n = int(rng.integers(5, max_nodes + 1))
    p = rng.uniform(0.1, 0.5)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    a = sym_normalize(build_from_edges(n, np.stack([iu[keep], ju[keep]], axis=1)))
    return a, rng.standard_normal((n, in_dim))


def run_equivalence(spec: ReductionSpec, trials: int, seed: int, tol: float = 1e-9) -> list:
    rng = np.random.default_rng(seed)
    worst = []
    for _ in range(trials):
        a, x = random_instance(rng)
        if spec.kind in ("appnp", "gprgnn", "poly"):
            w = rng.standard_normal((x.shape[1], 3))
        else:
            w = [rng.standard_normal((x.shape[1], 3)) for _ in range(spec.K + 1)]
        got, ref = reduction_outputs(spec, a, x, w)
        worst.append(float(np.max(np.abs(got - ref))))
    return worst


def cmd_equiv_check(args) -> int:
    spec = parse_reduction(args.spec, args.K)
    diffs = run_equivalence(spec, args.trials, args.seed)
    failed = sum(d >= args.tol for d in diffs)
    print(f"{args.spec}: K={spec.K}, {args.trials} random graphs, max abs diff {max(diffs):.3e} (tol {args.tol:g})")
    print("PASS" if not failed else f"FAIL ({failed} of {args.trials} instances)")
    return 0 if not failed else 1


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    if cfg.synth is None:
        raise ConfigError("config has no 'synth' section")
    bundle = generate_sbm(cfg.synth)
    splits = make_random_splits(bundle.num_nodes, cfg.splits.seed, cfg.splits.num_splits, bundle.labels.labels)
    bundle.splits = {f"split{i}": s for i, s in enumerate(splits)}
    out = save_dataset(bundle, args.out)
    g = build_from_edges(bundle.num_nodes, bundle.edges)
    h = edge_homophily(g, bundle.labels) if bundle.num_edges else float("nan")
    print(f"wrote {bundle.num_nodes} nodes, {bundle.num_edges} edges (edge homophily {h:.4f}) to {out}")
    return 0


def ncd_toy_report() -> str:
    toy = build_fig2_toy()
    graphs = [("G1", toy.g1), ("G1'", toy.g1_sparse), ("G2", toy.g2), ("G2'", toy.g2_sparse)]
    table = {}
    lines = ["graph  hop  counts (I/II/III)  NCD"]
    for name, b in graphs:
        g = build_from_edges(b.num_nodes, b.edges)
        for hop in (1, 2):
            row = ncd(g, b.labels, hop).rows[toy.root]
            members = adjacency_power(g, hop).neighbors(toy.root)
            counts = np.bincount(b.labels.labels[members], minlength=3)
            table[name, hop] = row
            ncd_txt = "[" + ", ".join(f"{v:.2f}" for v in row) + "]"
            lines.append(f"{name:<6} {hop:<4} {'/'.join(str(c) for c in counts):<18} {ncd_txt}")
    lines.append("")
    lines.append("shift variance s^2 = ||NCD - NCD'||^2 * 100")
    for base in ("G1", "G2"):
        for hop in (1, 2):
            s2 = ncd_shift_variance(table[base, hop], table[base + "'", hop])
            lines.append(f"s2 {base} vs {base}' hop {hop}: {s2:.0f}  ({s2:.2f})")
    return "\n".join(lines) + "\n"


def cmd_ncd_toy(args) -> int:
    sys.stdout.write(ncd_toy_report())
    return 0


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ignn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_run_args(sp, split=True):
        sp.add_argument("--data", required=True, help="dataset directory")
        sp.add_argument("--config", required=True, help="JSON run config")
        sp.add_argument("--out", help="output directory (default: output_dir from the config)")
        if split:
            sp.add_argument("--split-seed", type=int, default=None, help="seed for one random 48/32/20 split")
            sp.add_argument("--split-name", help="use a named split stored with the dataset instead")

    sp = sub.add_parser("train", help="train one model on one split")
    with_run_args(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sweep-hops", help="accuracy across hop counts / depths")
    with_run_args(sp, split=False)
    sp.add_argument("--hops", default="1,2,4,8,16,32")
    sp.add_argument("--parallel", type=int, default=1, help="worker processes for independent runs")
    sp.set_defaults(func=cmd_sweep_hops)

    sp = sub.add_parser("diagnose", help="per-epoch subspace distance and Lipschitz estimate")
    with_run_args(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("homophily", help="edge and node homophily of each hop")
    sp.add_argument("--data", required=True)
    sp.add_argument("--max-hop", type=int, default=4)
    sp.add_argument("--self-loops", choices=("on", "off"), default="off")
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_homophily)

    sp = sub.add_parser("equiv-check", help="check a c-IGNN weight construction against its reference model")
    sp.add_argument("--spec", required=True, help="appnp:0.1 | gpr:g0,g1,.. | sign | mixhop[:c0,..] | meanpool | sumpool | poly:t0,t1,..")
    sp.add_argument("--K", type=int, default=3, help="hops for specs without a coefficient list")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_equiv_check)

    sp = sub.add_parser("synth", help="write a synthetic block-model dataset")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("ncd-toy", help="print the sparsification toy table")
    sp.set_defaults(func=cmd_ncd_toy)
    return p


def _setup_logging():
    level = os.environ.get("IGNN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return 3
    except (DatasetError, OSError) as err:
        print(f"io error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
