"""Randomly shifted quadtree over Euclidean points, with the two baselines
built on it: quadtree Wasserstein and Flowtree.

The input is rescaled so the minimum pairwise distance is 1; the spread
(diameter after rescaling) is the root scale.  Reported distances are
multiplied back into the original units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .metric_core import Distribution, PointCloud

MAX_DEPTH = 100


@dataclass(frozen=True)
class Quadtree:
    points: PointCloud            # original, possibly with duplicates
    collapse: np.ndarray          # original point index -> support index
    support_coords: np.ndarray    # deduplicated coordinates, original units
    scale: float                  # original units per normalized unit
    delta: float                  # spread of the normalized support
    shift: np.ndarray
    parent: np.ndarray            # per node, -1 at the root
    level: np.ndarray             # per node, root at level 0
    leaf_point: np.ndarray        # support index per node, -1 for internal

    @property
    def n_nodes(self):
        return len(self.parent)

    @property
    def n_support(self):
        return self.support_coords.shape[0]

    def children_lists(self):
        ch = [[] for _ in range(self.n_nodes)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return ch


def build_quadtree(points: PointCloud, seed: int) -> Quadtree:
    """Build a randomly shifted quadtree; each leaf holds one distinct point.

    Coincident points are collapsed to a single support point; incoming
    distributions are aggregated through the collapse map.  The root cell has
    side twice the spread, so every point lands inside it for any shift drawn
    uniformly from [0, spread)^dim.
    """
    coords = points.coords
    uniq, collapse = np.unique(coords, axis=0, return_inverse=True)
    if uniq.shape[0] < 2:
        raise ValidationError("all points coincide; spread is undefined")
    diff = uniq[:, None, :] - uniq[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    dmin = dist.min()
    np.fill_diagonal(dist, 0.0)
    scale = dmin
    norm = uniq / scale
    delta = dist.max() / scale

    rng = np.random.Generator(np.random.Philox(seed))
    dim = norm.shape[1]
    shift = rng.uniform(0.0, delta, size=dim)
    root_lo = norm.min(axis=0) - shift
    root_side = 2.0 * delta

    parent = [-1]
    level = [0]
    leaf_point = [-1]

    def split(node, lo, side, idx, depth):
        if len(idx) == 1:
            leaf_point[node] = int(idx[0])
            return
        if depth > MAX_DEPTH:
            raise ValidationError("quadtree recursion exceeded maximum depth")
        center = lo + 0.5 * side
        codes = ((norm[idx] >= center) << np.arange(dim)).sum(axis=1)
        for code in np.unique(codes):
            sub = idx[codes == code]
            bits = (code >> np.arange(dim)) & 1
            child_lo = lo + 0.5 * side * bits
            child = len(parent)
            parent.append(node)
            level.append(depth + 1)
            leaf_point.append(-1)
            split(child, child_lo, 0.5 * side, sub, depth + 1)

    split(0, root_lo, root_side, np.arange(uniq.shape[0]), 0)

    return Quadtree(
        points=points,
        collapse=collapse.astype(np.int64),
        support_coords=uniq,
        scale=float(scale),
        delta=float(delta),
        shift=shift,
        parent=np.array(parent, dtype=np.int64),
        level=np.array(level, dtype=np.int64),
        leaf_point=np.array(leaf_point, dtype=np.int64),
    )


def _collapse_mass(qt: Quadtree, p: np.ndarray) -> np.ndarray:
    if len(p) != qt.points.n:
        raise DimensionMismatchError(
            f"distribution of size {len(p)} over {qt.points.n} points"
        )
    return np.bincount(qt.collapse, weights=p, minlength=qt.n_support)


def _postorder(qt: Quadtree):
    ch = qt.children_lists()
    order = []
    stack = [(0, False)]
    while stack:
        v, done = stack.pop()
        if done:
            order.append(v)
        else:
            stack.append((v, True))
            for c in reversed(ch[v]):
                stack.append((c, False))
    return order


def _subtree_gap(qt: Quadtree, mu: Distribution, rho: Distribution) -> np.ndarray:
    gap = np.zeros(qt.n_nodes)
    diff = _collapse_mass(qt, mu.p) - _collapse_mass(qt, rho.p)
    for v in range(qt.n_nodes):
        lp = qt.leaf_point[v]
        if lp >= 0:
            gap[v] = diff[lp]
    for v in _postorder(qt):
        p = qt.parent[v]
        if p >= 0:
            gap[p] += gap[v]
    return gap


def quadtree_wasserstein(qt: Quadtree, mu: Distribution, rho: Distribution) -> float:
    """Tree Wasserstein over the quadtree with edge weight spread * 2^-level.

    The level index of the child node acts as the exponent, so the edge
    weight equals the child cell's side length; the result is reported in
    the original coordinate units.
    """
    gap = _subtree_gap(qt, mu, rho)
    nonroot = qt.parent >= 0
    w = qt.delta * np.power(2.0, -qt.level[nonroot].astype(np.float64))
    return float(np.abs(gap[nonroot]) @ w) * qt.scale


def quadtree_coupling_entries(qt: Quadtree, mu: Distribution, rho: Distribution):
    """Greedy child-to-parent matching on the quadtree, over support indices."""
    a = _collapse_mass(qt, mu.p)
    b = _collapse_mass(qt, rho.p)
    entries = []
    mu_sur = [None] * qt.n_nodes
    rho_sur = [None] * qt.n_nodes
    ch = qt.children_lists()
    for v in _postorder(qt):
        ms, rs = [], []
        lp = qt.leaf_point[v]
        if lp >= 0:
            am, bm = a[lp], b[lp]
            m = min(am, bm)
            if m > 0:
                entries.append((int(lp), int(lp), m))
            if am > bm:
                ms.append([int(lp), am - bm])
            elif bm > am:
                rs.append([int(lp), bm - am])
        for c in ch[v]:
            ms.extend(mu_sur[c])
            rs.extend(rho_sur[c])
            mu_sur[c] = rho_sur[c] = None
        ai = bi = 0
        while ai < len(ms) and bi < len(rs):
            (i, am), (j, bm) = ms[ai], rs[bi]
            m = min(am, bm)
            if m > 0:
                entries.append((i, j, m))
            if am <= bm:
                rs[bi][1] = bm - am
                ai += 1
                if rs[bi][1] <= 0:
                    bi += 1
            else:
                ms[ai][1] = am - bm
                bi += 1
        mu_sur[v] = ms[ai:]
        rho_sur[v] = rs[bi:]
    return entries


def flowtree_distance(qt: Quadtree, points: PointCloud, mu: Distribution,
                      rho: Distribution) -> float:
    """Cost of the quadtree's greedy coupling under the true Euclidean metric."""
    if points.n != qt.points.n:
        raise DimensionMismatchError("point cloud does not match the quadtree input")
    total = 0.0
    sc = qt.support_coords
    for i, j, m in quadtree_coupling_entries(qt, mu, rho):
        total += m * float(np.linalg.norm(sc[i] - sc[j]))
    return total
