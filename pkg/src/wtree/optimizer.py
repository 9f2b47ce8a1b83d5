"""Projected gradient descent over ultrametric matrices.

Each iteration fixes the greedy coupling per training pair on the current
tree, takes a gradient step on the distance-matrix entries, and reprojects to
the ultrametric space via single linkage (which re-ties entries sharing a
merge node and lets the topology change).  The skip-MST variant freezes the
initial topology and projects only once, after the last iteration.

The descent direction combines two views of the same residual-weighted
coupling sum: the raw entrywise gradient, which can split entries that the
current tree ties together (and thereby change the topology after
reprojection), and its aggregate over each merge node's LCA class, which
moves whole subtree heights at once and survives the projection.  Constant
factors of the squared-error derivative are absorbed into the learning
rate.  Diagonal coupling mass (mass matched in place at a leaf) multiplies
a pinned zero distance and contributes no gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .metric_core import SemimetricMatrix
from .tree_ot import tree_coupling_entries
from .ultra_tree import (
    UltrametricMatrix,
    UltraTree,
    lca_classes,
    project_to_ultrametric,
    tree_from_json,
    tree_to_json,
)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.01
    max_iters: int = 200
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    loss_tol: float = 1e-8         # relative loss delta triggering early stop
    patience: int = 10             # consecutive small deltas required
    log_every: int = 0             # 0 disables progress logging

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError("learning rate must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")


@dataclass
class TrainState:
    iteration: int
    tree: UltraTree
    matrix: UltrametricMatrix
    class_matrix: np.ndarray
    couplings: list  # per-sample sparse entry lists for the current tree
    loss_history: list = field(default_factory=list)


def _coupling_arrays(tree, dists, samples):
    """Sparse greedy couplings per sample: (row idx, col idx, mass) arrays."""
    out = []
    for s in samples:
        ent = tree_coupling_entries(tree, dists[s.mu], dists[s.rho])
        ii = np.fromiter((e[0] for e in ent), dtype=np.int64, count=len(ent))
        jj = np.fromiter((e[1] for e in ent), dtype=np.int64, count=len(ent))
        mm = np.fromiter((e[2] for e in ent), dtype=np.float64, count=len(ent))
        out.append((ii, jj, mm))
    return out


def _residuals(matrix_d, couplings, samples):
    w_u = np.array([m @ matrix_d[ii, jj] for ii, jj, m in couplings])
    w_true = np.array([s.w1 for s in samples])
    return w_u - w_true


def make_state(d0: SemimetricMatrix, dists, samples) -> TrainState:
    tree, matrix = project_to_ultrametric(d0)
    cls = lca_classes(tree).class_matrix
    coup = _coupling_arrays(tree, dists, samples)
    return TrainState(iteration=0, tree=tree, matrix=matrix,
                      class_matrix=cls, couplings=coup)


def loss(state: TrainState, samples) -> float:
    """Sum of squared residuals between measured and tree distances."""
    if not samples:
        raise ValidationError("empty sample set")
    r = _residuals(state.matrix.d, state.couplings, samples)
    return float(r @ r)


def _matrix_gradient(n, residuals, couplings, batch_idx):
    g = np.zeros((n, n))
    for b in batch_idx:
        ii, jj, mm = couplings[b]
        off = ii != jj
        np.add.at(g, (ii[off], jj[off]), residuals[b] * mm[off])
    return 0.5 * (g + g.T)


def gradient(state: TrainState, samples) -> np.ndarray:
    """Entrywise gradient matrix: residual-weighted off-diagonal coupling mass.

    Symmetrized so g[i, j] == g[j, i]; diagonal entries carry no gradient
    because the matrix diagonal is pinned at zero.
    """
    if not samples:
        raise ValidationError("empty sample set")
    r = _residuals(state.matrix.d, state.couplings, samples)
    return _matrix_gradient(state.matrix.n, r, state.couplings,
                            range(len(samples)))


def node_gradient(state: TrainState, samples) -> np.ndarray:
    """Per-node height gradient of the fixed-coupling loss.

    The distance between leaves i and j equals the height of their merge
    node, so the height derivative at a node is the sum of the entrywise
    gradient over the node's LCA class.  Unlike the training step, this is
    the exact derivative of the squared-error loss (factor 2 included) so it
    matches finite differences.  Leaf nodes get zero: no off-diagonal pair
    merges at a leaf.
    """
    g_mat = gradient(state, samples)
    g = np.zeros(state.tree.n_nodes)
    cls = state.class_matrix
    iu = np.triu_indices(state.matrix.n, k=1)
    np.add.at(g, cls[iu], 4.0 * g_mat[iu])
    return g


def _descent_direction(g_mat, class_matrix, n_nodes):
    """Entrywise gradient plus its per-class aggregate broadcast back."""
    n = g_mat.shape[0]
    g_cls = np.zeros(n_nodes)
    iu = np.triu_indices(n, k=1)
    np.add.at(g_cls, class_matrix[iu], 2.0 * g_mat[iu])
    return g_mat + g_cls[class_matrix]


def gd_step(matrix_d: np.ndarray, g: np.ndarray, alpha: float) -> np.ndarray:
    """One entrywise update: step, re-zero the diagonal, clamp negatives."""
    d_hat = matrix_d - alpha * g
    np.fill_diagonal(d_hat, 0.0)
    np.clip(d_hat, 0.0, None, out=d_hat)
    return 0.5 * (d_hat + d_hat.T)


def _run(d0, dists, samples, cfg, reproject: bool):
    if not samples:
        raise ValidationError("empty sample set")
    state = make_state(d0, dists, samples)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    current = state.matrix.d
    calm = 0
    prev_loss = None
    for k in range(cfg.max_iters):
        r = _residuals(current, state.couplings, samples)
        total_loss = float(r @ r)
        state.loss_history.append(total_loss)
        if cfg.log_every and k % cfg.log_every == 0:
            print(f"iter {k}: loss {total_loss:.6e}")
        if prev_loss is not None:
            delta = abs(total_loss - prev_loss) / max(prev_loss, 1e-12)
            calm = calm + 1 if delta < cfg.loss_tol else 0
            if calm >= cfg.patience:
                break
        prev_loss = total_loss
        if total_loss == 0.0:
            break

        if cfg.batch_size is None or cfg.batch_size >= len(samples):
            batch_idx = range(len(samples))
        else:
            batch_idx = rng.permutation(len(samples))[: cfg.batch_size]
        g_mat = _matrix_gradient(current.shape[0], r, state.couplings, batch_idx)
        g = _descent_direction(g_mat, state.class_matrix, state.tree.n_nodes)

        d_hat = gd_step(current, g, cfg.alpha)
        if reproject:
            tree, matrix = project_to_ultrametric(SemimetricMatrix(d_hat))
            state.tree = tree
            state.matrix = matrix
            state.class_matrix = lca_classes(tree).class_matrix
            state.couplings = _coupling_arrays(tree, dists, samples)
            current = matrix.d
        else:
            current = d_hat
        state.iteration = k + 1

    if reproject:
        final_tree, final_matrix = state.tree, state.matrix
    else:
        final_tree, final_matrix = project_to_ultrametric(SemimetricMatrix(current))
    return final_tree, final_matrix, state.loss_history


def train(d0: SemimetricMatrix, dists, samples, cfg: TrainConfig):
    """Full training loop with reprojection every iteration (tree topology
    may change between iterations)."""
    return _run(d0, dists, samples, cfg, reproject=True)


def train_skip_mst(d0: SemimetricMatrix, dists, samples, cfg: TrainConfig):
    """Ablation: topology and couplings frozen at the initial projection; the
    matrix is projected back to ultrametrics only once, after the last
    iteration."""
    return _run(d0, dists, samples, cfg, reproject=False)


# ---------------------------------------------------------------------------
# Checkpoints: tree + config + loss history in one JSON file; training can
# resume from the checkpointed matrix.


def save_checkpoint(path, tree: UltraTree, matrix: UltrametricMatrix,
                    history, cfg: TrainConfig):
    payload = {
        "tree": json.loads(tree_to_json(tree)),
        "matrix": matrix.d.tolist(),
        "loss_history": list(history),
        "config": {
            "alpha": cfg.alpha,
            "max_iters": cfg.max_iters,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "loss_tol": cfg.loss_tol,
            "patience": cfg.patience,
        },
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_checkpoint(path):
    with open(path) as f:
        payload = json.load(f)
    tree = tree_from_json(json.dumps(payload["tree"]))
    matrix = UltrametricMatrix(np.array(payload["matrix"]))
    cfg = TrainConfig(**payload["config"])
    return tree, matrix, payload["loss_history"], cfg
