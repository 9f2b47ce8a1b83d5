"""Ultrametric trees and the single-linkage projection from semimetrics.

Node convention: for a tree over n points, node ids 0..n-1 are the leaves
(leaf id == point index); internal nodes take larger ids.  Heights are stored
per node; edge weights are always derived as h(parent) - h(child).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonMonotoneTreeError,
    NotUltrametricError,
    ParseError,
    ValidationError,
)
from .metric_core import SemimetricMatrix, _frozen, validate_semimetric

STRONG_TRIANGLE_TOL = 1e-9


@dataclass(frozen=True)
class UltrametricMatrix:
    """Semimetric matrix that also satisfies the strong triangle inequality."""

    d: np.ndarray

    @property
    def n(self):
        return self.d.shape[0]

    def __post_init__(self):
        object.__setattr__(self, "d", _frozen(self.d))

    @classmethod
    def validated(cls, raw) -> "UltrametricMatrix":
        m = validate_semimetric(raw)
        if not is_ultrametric(m.d):
            raise NotUltrametricError("matrix violates the strong triangle inequality")
        return cls(m.d)


def is_ultrametric(d, tol=STRONG_TRIANGLE_TOL) -> bool:
    """Check d[i,j] <= max(d[i,k], d[k,j]) + tol for all triples."""
    n = d.shape[0]
    for k in range(n):
        bound = np.maximum.outer(d[:, k], d[k, :])
        if np.any(d > bound + tol):
            return False
    return True


@dataclass(frozen=True)
class UltraTree:
    """Rooted tree with per-node heights; leaves are nodes 0..n_leaves-1."""

    n_leaves: int
    parent: np.ndarray  # int64, -1 at the root
    height: np.ndarray  # float64

    def __post_init__(self):
        parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        parent.setflags(write=False)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "height", _frozen(self.height))
        if len(self.parent) != len(self.height):
            raise ValidationError("parent and height arrays differ in length")
        roots = np.flatnonzero(self.parent < 0)
        if len(roots) != 1:
            raise ValidationError(f"tree must have exactly one root, found {len(roots)}")
        nonroot = self.parent >= 0
        if np.any(self.height[self.parent[nonroot]] < self.height[nonroot] - 1e-12):
            raise NonMonotoneTreeError("parent height below child height")

    @property
    def n_nodes(self):
        return len(self.parent)

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parent < 0)[0])

    @cached_property
    def children(self):
        ch = [[] for _ in range(self.n_nodes)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return tuple(tuple(c) for c in ch)

    @cached_property
    def postorder(self):
        """Children-before-parent node order (children visited in ascending id)."""
        order = []
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                order.append(v)
            else:
                stack.append((v, True))
                for c in reversed(self.children[v]):
                    stack.append((c, False))
        return tuple(order)

    @cached_property
    def leaf_lists(self):
        """Leaves under each node, in ascending point index."""
        sets = [None] * self.n_nodes
        for v in self.postorder:
            if v < self.n_leaves:
                sets[v] = [v]
            else:
                acc = []
                for c in self.children[v]:
                    acc.extend(sets[c])
                acc.sort()
                sets[v] = acc
        return tuple(tuple(s) for s in sets)


@dataclass(frozen=True)
class LcaClasses:
    """Grouping of index pairs by their lowest common ancestor.

    class_matrix[i, j] holds the LCA node id of leaves i and j; the diagonal
    holds the leaf node itself, so each pair (i, i) forms its own class.
    """

    class_matrix: np.ndarray  # int64, n x n

    @property
    def n(self):
        return self.class_matrix.shape[0]

    @cached_property
    def class_of(self):
        n = self.n
        m = self.class_matrix
        out = {}
        for i in range(n):
            for j in range(i, n):
                out[(i, j)] = int(m[i, j])
        return out

    @cached_property
    def members(self):
        out = {}
        for (i, j), v in self.class_of.items():
            out.setdefault(v, []).append((i, j))
        return out


def lca_classes(t: UltraTree) -> LcaClasses:
    """Group every pair of leaves by LCA; diagonal pairs map to their leaf."""
    n = t.n_leaves
    m = np.empty((n, n), dtype=np.int64)
    np.fill_diagonal(m, np.arange(n))
    for v in range(n, t.n_nodes):
        ch = t.children[v]
        for a in range(len(ch)):
            la = t.leaf_lists[ch[a]]
            for b in range(a + 1, len(ch)):
                lb = t.leaf_lists[ch[b]]
                m[np.ix_(la, lb)] = v
                m[np.ix_(lb, la)] = v
    m.setflags(write=False)
    return LcaClasses(m)


def project_to_ultrametric(d: SemimetricMatrix):
    """Single-linkage (subdominant) ultrametric projection of a semimetric.

    Repeatedly merges the two clusters at minimum cross-pair distance; the
    internal node created by a merge sits at that distance.  Equal minima are
    broken toward the lexicographically smallest (min-rep, max-rep) pair of
    cluster representatives, so the output tree is deterministic.

    Returns (UltraTree, UltrametricMatrix); leaf heights are 0 and the matrix
    equals h(LCA(i, j)) entrywise.
    """
    dm = d.d
    n = dm.shape[0]
    if n < 2:
        raise ValidationError("projection needs at least 2 points")

    total = 2 * n - 1
    parent = np.full(total, -1, dtype=np.int64)
    height = np.zeros(total, dtype=np.float64)
    u = np.zeros((n, n), dtype=np.float64)

    # Slot state: slot s is alive while it hosts a cluster.
    work = dm.copy()
    np.fill_diagonal(work, np.inf)
    alive = np.ones(n, dtype=bool)
    node_of = np.arange(n, dtype=np.int64)  # current tree node per slot
    rep = np.arange(n)  # min original member per slot
    members = [[i] for i in range(n)]

    for step in range(n - 1):
        masked = np.where(alive[:, None] & alive[None, :], work, np.inf)
        m = masked.min()
        cand = np.argwhere(masked == m)
        # lexicographic tie-break on (min rep, max rep)
        best = min(
            ((min(rep[a], rep[b]), max(rep[a], rep[b]), a, b) for a, b in cand if a < b),
        )
        a, b = best[2], best[3]
        new = n + step
        parent[node_of[a]] = new
        parent[node_of[b]] = new
        height[new] = m
        u[np.ix_(members[a], members[b])] = m
        u[np.ix_(members[b], members[a])] = m
        # merge b into a
        np.minimum(work[a, :], work[b, :], out=work[a, :])
        work[:, a] = work[a, :]
        work[a, a] = np.inf
        alive[b] = False
        rep[a] = min(rep[a], rep[b])
        members[a].extend(members[b])
        node_of[a] = new

    tree = UltraTree(n_leaves=n, parent=parent, height=height)
    return tree, UltrametricMatrix(u)


def linfty_shift(d: SemimetricMatrix, u: UltrametricMatrix):
    """Chepoi shift: the l-infinity-closest ultrametric to d.

    Given u = proj(d), returns (shift, shifted) where shift is half the max
    off-diagonal deviation and shifted adds it to every off-diagonal entry.
    """
    if d.n != u.n:
        raise DimensionMismatchError(f"size mismatch: {d.n} vs {u.n}")
    diff = np.abs(d.d - u.d)
    np.fill_diagonal(diff, 0.0)
    shift = 0.5 * diff.max()
    shifted = u.d + shift
    np.fill_diagonal(shifted, 0.0)
    return float(shift), shifted


def tree_distance(t: UltraTree, i: int, j: int) -> float:
    """Ultrametric distance between leaves: h(LCA) - (h(i) + h(j)) / 2."""
    n = t.n_leaves
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"leaf index out of range: ({i}, {j})")
    if i == j:
        return 0.0
    anc = set()
    v = i
    while v >= 0:
        anc.add(v)
        v = int(t.parent[v])
    v = j
    while v not in anc:
        v = int(t.parent[v])
    return float(t.height[v] - 0.5 * t.height[i] - 0.5 * t.height[j])


def tree_to_matrix(t: UltraTree) -> UltrametricMatrix:
    """Leaf distance matrix d[i, j] = h(LCA(i, j)) for zero leaf heights."""
    n = t.n_leaves
    d = np.zeros((n, n), dtype=np.float64)
    for v in range(t.n_nodes):
        ch = t.children[v]
        if not ch:
            continue
        h = t.height[v]
        for a in range(len(ch)):
            la = t.leaf_lists[ch[a]]
            for b in range(a + 1, len(ch)):
                lb = t.leaf_lists[ch[b]]
                d[np.ix_(la, lb)] = h
                d[np.ix_(lb, la)] = h
    lh = t.height[:n]
    d = d - 0.5 * lh[:, None] - 0.5 * lh[None, :]
    np.fill_diagonal(d, 0.0)
    return UltrametricMatrix(d)


def diametrical_tree(u: UltrametricMatrix) -> UltraTree:
    """Top-down tree for an ultrametric via its diametrical graph.

    The root sits at the diameter; children are the connected components of
    the graph that joins pairs strictly below the diameter.  Unlike the
    single-linkage tree this construction may produce multiway nodes, but it
    induces the same leaf distance matrix.
    """
    if not is_ultrametric(u.d):
        raise NotUltrametricError("input is not ultrametric")
    n = u.n
    parent = [-1] * n
    height = [0.0] * n

    def components(idx, dm):
        diam = dm.max()
        close = dm < diam - STRONG_TRIANGLE_TOL
        seen = np.zeros(len(idx), dtype=bool)
        comps = []
        for s in range(len(idx)):
            if seen[s]:
                continue
            stack = [s]
            comp = []
            seen[s] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                nxt = np.flatnonzero(close[v] & ~seen)
                seen[nxt] = True
                stack.extend(nxt.tolist())
            comps.append([idx[v] for v in comp])
        return diam, comps

    def build(idx):
        if len(idx) == 1:
            return idx[0]
        sub = u.d[np.ix_(idx, idx)]
        diam, comps = components(idx, sub)
        node = len(parent)
        parent.append(-1)
        height.append(float(diam))
        for comp in comps:
            c = build(comp)
            parent[c] = node
        return node

    build(list(range(n)))
    return UltraTree(n_leaves=n, parent=np.array(parent), height=np.array(height))


# ---------------------------------------------------------------------------
# Tree serialization.


def tree_to_json(t: UltraTree) -> str:
    nodes = []
    for v in range(t.n_nodes):
        p = int(t.parent[v])
        nodes.append(
            {
                "id": v,
                "parent": p if p >= 0 else None,
                "height": float(t.height[v]),
                "leaf": v if v < t.n_leaves else None,
            }
        )
    return json.dumps({"n": t.n_leaves, "nodes": nodes})


def tree_from_json(text: str) -> UltraTree:
    try:
        obj = json.loads(text)
        n = int(obj["n"])
        nodes = obj["nodes"]
        total = len(nodes)
        parent = np.full(total, -1, dtype=np.int64)
        height = np.zeros(total, dtype=np.float64)
        for rec in nodes:
            v = int(rec["id"])
            parent[v] = -1 if rec["parent"] is None else int(rec["parent"])
            height[v] = float(rec["height"])
            if rec["leaf"] is not None and int(rec["leaf"]) != v:
                raise ParseError(f"leaf index {rec['leaf']} does not match node id {v}")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad tree JSON: {exc}") from exc
    return UltraTree(n_leaves=n, parent=parent, height=height)


def save_tree(path, t: UltraTree):
    with open(path, "w") as f:
        f.write(tree_to_json(t) + "\n")


def load_tree(path) -> UltraTree:
    with open(path) as f:
        return tree_from_json(f.read())


def tree_to_newick(t: UltraTree) -> str:
    """Newick export with branch lengths h(parent) - h(child)."""

    def rec(v):
        label = f"x{v}" if v < t.n_leaves else ""
        ch = t.children[v]
        inner = f"({','.join(rec(c) for c in ch)})" if ch else ""
        p = int(t.parent[v])
        if p < 0:
            return f"{inner}{label}"
        return f"{inner}{label}:{format(float(t.height[p] - t.height[v]), '.17g')}"

    return rec(t.root) + ";"
