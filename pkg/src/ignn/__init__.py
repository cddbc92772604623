"""Graph neural networks built around the smoothness/generalization trade-off.

Sparse graph utilities, subspace-distance and Lipschitz diagnostics, homophily
metrics, a small reverse-mode tape, GCN and inceptive variants (residual,
attentive, concatenative), a transductive trainer and a dataset format.
"""

from .data import DatasetBundle, SynthConfig, build_fig2_toy, generate_sbm, load_dataset, save_dataset
from .errors import ConfigError, ConvergenceError, DatasetError, DimensionError, DivergenceError, IgnnError
from .graph import CsrGraph, NormalizedAdjacency, build_from_edges, sym_normalize
from .homophily import LabelVector, edge_homophily, ncd, ncd_shift_variance, node_homophily, per_hop_homophily
from .models import AIgnnConfig, CIgnnConfig, GcnConfig, JkConfig, RIgnnConfig, build_model
from .training import ModelFamily, SplitSpec, TrainConfig, ablation_grid, hop_sweep, make_random_splits, train

__version__ = "0.1.0"
