"""Closed-form tree Wasserstein distance, greedy coupling, and l1 embedding.

All distances are reported in ultrametric units (half the weighted tree
distance), so that <coupling, D_u> matches the matrix representation.  The
factor 1/2 is applied in exactly one place per function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .metric_core import Distribution, _frozen
from .ultra_tree import UltraTree

MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class Coupling:
    """Transport plan: pi[i, j] carries mass from mu's point i to rho's point j."""

    pi: np.ndarray

    @property
    def n(self):
        return self.pi.shape[0]

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))

    def marginals(self):
        return self.pi.sum(axis=1), self.pi.sum(axis=0)


def _check_dists(t: UltraTree, mu: Distribution, rho: Distribution):
    if mu.n != t.n_leaves or rho.n != t.n_leaves:
        raise DimensionMismatchError(
            f"distributions of size {mu.n}/{rho.n} on a tree with {t.n_leaves} leaves"
        )


def subtree_masses(t: UltraTree, p: np.ndarray) -> np.ndarray:
    """Total mass under each node, accumulated bottom-up."""
    mass = np.zeros(t.n_nodes)
    mass[: t.n_leaves] = p
    for v in t.postorder:
        par = t.parent[v]
        if par >= 0:
            mass[par] += mass[v]
    return mass

def tree_wasserstein(t: UltraTree, mu: Distribution, rho: Distribution) -> float:
    """W over the tree: sum of edge weight times absolute subtree mass gap.

    One bottom-up pass; linear in the node count.
    """
    _check_dists(t, mu, rho)
    gap = subtree_masses(t, mu.p - rho.p)
    par = t.parent
    nonroot = par >= 0
    w = t.height[par[nonroot]] - t.height[nonroot]
    return 0.5 * float(np.abs(gap[nonroot]) @ w)


def tree_coupling_entries(t: UltraTree, mu: Distribution, rho: Distribution):
    """Greedy child-to-parent matching; returns sparse (i, j, mass) entries.

    Mass shared at a leaf is matched in place; surpluses travel upward and
    are matched first-come-first-served at each node, with children taken in
    ascending id.  At most 2n entries are produced.
    """
    _check_dists(t, mu, rho)
    entries = []
    # per node at most one of the two surplus lists is nonempty
    mu_sur = [None] * t.n_nodes
    rho_sur = [None] * t.n_nodes
    for i in range(t.n_leaves):
        a, b = mu.p[i], rho.p[i]
        m = min(a, b)
        if m > 0:
            entries.append((i, i, m))
        mu_sur[i] = [[i, a - m]] if a > b else []
        rho_sur[i] = [[i, b - a]] if b > a else []
    for v in t.postorder:
        if v < t.n_leaves:
            continue
        ms, rs = [], []
        for c in t.children[v]:
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


def tree_coupling(t: UltraTree, mu: Distribution, rho: Distribution) -> Coupling:
    pi = np.zeros((t.n_leaves, t.n_leaves))
    for i, j, m in tree_coupling_entries(t, mu, rho):
        pi[i, j] += m
    return Coupling(pi)


def l1_embed(t: UltraTree, mu: Distribution) -> np.ndarray:
    """Per-non-root-node coordinates whose l1 differences equal the distance.

    Coordinate order: ascending node id with the root removed.
    """
    if mu.n != t.n_leaves:
        raise DimensionMismatchError(f"distribution size {mu.n} on {t.n_leaves} leaves")
    mass = subtree_masses(t, mu.p)
    par = t.parent
    nonroot = par >= 0
    w = t.height[par[nonroot]] - t.height[nonroot]
    return 0.5 * w * mass[nonroot]
