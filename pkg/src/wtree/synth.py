"""Synthetic data generators and experiment metrics.

Every generator is a pure function of its parameters and a seed; randomness
comes from the counter-based Philox generator so that the same seed yields
identical datasets on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .metric_core import Distribution, PointCloud, SemimetricMatrix, TrainSample


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def gen_uniform_points(n: int, dim: int, lo: float, hi: float, seed: int) -> PointCloud:
    if n < 2 or lo >= hi:
        raise ValidationError("need n >= 2 and lo < hi")
    return PointCloud(_rng(seed).uniform(lo, hi, size=(n, dim)))


def gen_gaussian_points(n: int, dim: int, seed: int) -> PointCloud:
    if n < 2:
        raise ValidationError("need n >= 2")
    return PointCloud(_rng(seed).standard_normal((n, dim)))


def gen_distributions(n: int, count: int, sparsity: float, seed: int):
    """Random distributions supported on ceil(sparsity * n) points each.

    Masses are i.i.d. uniform(0, 1) on the chosen support, then normalized;
    sparsity 1 yields full-support distributions.
    """
    k = int(np.ceil(sparsity * n))
    if k < 1 or k > n:
        raise ValidationError(f"support size {k} out of range for n={n}")
    rng = _rng(seed)
    out = []
    for _ in range(count):
        p = np.zeros(n)
        support = rng.choice(n, size=k, replace=False)
        p[support] = rng.uniform(0.0, 1.0, size=k)
        out.append(Distribution(p / p.sum()))
    return out


@dataclass(frozen=True)
class RandomTree:
    """Uniform random attachment tree with unit edge weights."""

    parent: np.ndarray      # parent[0] = -1
    leaves: np.ndarray      # node ids of degree-1 non-root nodes

    @property
    def n_nodes(self):
        return len(self.parent)


def gen_random_tree(n_nodes: int, seed: int):
    """Random attachment tree; returns (tree, leaf SemimetricMatrix).

    Node i >= 1 attaches to a uniformly random earlier node.  The matrix
    holds unit-weight shortest-path distances between the leaves (a tree
    metric, generally not ultrametric).
    """
    if n_nodes < 3:
        raise ValidationError("need at least 3 nodes")
    rng = _rng(seed)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    for i in range(1, n_nodes):
        parent[i] = rng.integers(0, i)
    degree = np.zeros(n_nodes, dtype=np.int64)
    for i in range(1, n_nodes):
        degree[i] += 1
        degree[parent[i]] += 1
    leaves = np.flatnonzero(degree == 1)

    # node depths and pairwise path lengths through ancestor chains
    depth = np.zeros(n_nodes, dtype=np.int64)
    for i in range(1, n_nodes):
        depth[i] = depth[parent[i]] + 1

    def lca_node(u, v):
        while u != v:
            if depth[u] < depth[v]:
                u, v = v, u
            u = parent[u]
        return u

    m = len(leaves)
    d = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            anc = lca_node(int(leaves[a]), int(leaves[b]))
            d[a, b] = d[b, a] = depth[leaves[a]] + depth[leaves[b]] - 2 * depth[anc]
    return RandomTree(parent=parent, leaves=leaves), SemimetricMatrix(d)


def perturb_matrix(d: SemimetricMatrix, sigma: float, seed: int) -> SemimetricMatrix:
    """Add symmetric Gaussian noise with per-element variance 2 sigma^2.

    Upper-triangle elements are drawn i.i.d. and mirrored; the diagonal stays
    zero and negative results are clamped to 0.
    """
    if sigma < 0:
        raise ValidationError("sigma must be nonnegative")
    n = d.n
    rng = _rng(seed)
    noise = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    noise[iu] = rng.normal(0.0, np.sqrt(2.0) * sigma, size=len(iu[0]))
    noise = noise + noise.T
    out = d.d + noise
    np.fill_diagonal(out, 0.0)
    np.clip(out, 0.0, None, out=out)
    return SemimetricMatrix(out)


def tree_metric_distance(d1, d2) -> float:
    """Frobenius distance between leaf matrices scaled by 2 / (N (N - 1))."""
    a = np.asarray(d1, dtype=np.float64)
    b = np.asarray(d2, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    n = a.shape[0]
    return float(2.0 / (n * (n - 1)) * np.linalg.norm(a - b))


def gen_pair_indices(count: int, n_dists: int, seed: int):
    """Random (mu, rho) index pairs with mu != rho."""
    rng = _rng(seed)
    pairs = []
    for _ in range(count):
        i = int(rng.integers(0, n_dists))
        j = int(rng.integers(0, n_dists - 1))
        if j >= i:
            j += 1
        pairs.append((i, j))
    return pairs


def label_samples(d: SemimetricMatrix, dists, pairs, solver) -> list:
    """Turn index pairs into TrainSamples using an exact-W1 solver callable."""
    out = []
    for i, j in pairs:
        res = solver(d, dists[i], dists[j])
        out.append(TrainSample(i, j, float(res.cost)))
    return out
