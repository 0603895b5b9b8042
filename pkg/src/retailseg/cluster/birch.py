"""BIRCH: a clustering-feature tree followed by global agglomeration of its leaves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..numeric import as_array
from ._result import ClusteringResult, relabel_by_first_appearance
from .agglomerative import agglomerative_fit


@dataclass(frozen=True)
class ClusterFeature:
    """Summary (count, linear sum, sum of squared norms) of a set of points."""

    n: int
    ls: np.ndarray
    ss: float

    @classmethod
    def of_point(cls, x) -> "ClusterFeature":
        x = np.asarray(x, dtype=float)
        return cls(1, x.copy(), float(np.dot(x, x)))

    @classmethod
    def of_points(cls, X) -> "ClusterFeature":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(len(X), X.sum(axis=0), float(np.sum(X * X)))

    def __add__(self, other: "ClusterFeature") -> "ClusterFeature":
        return ClusterFeature(self.n + other.n, self.ls + other.ls, self.ss + other.ss)

    merge = __add__

    @property
    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    @property
    def radius_sq(self) -> float:
        c = self.centroid
        return self.ss / self.n - float(np.dot(c, c))

    @property
    def radius(self) -> float:
        return float(np.sqrt(max(self.radius_sq, 0.0)))

    def __eq__(self, other):
        if not isinstance(other, ClusterFeature):
            return NotImplemented
        return self.n == other.n and self.ss == other.ss and np.array_equal(self.ls, other.ls)

    __hash__ = None


@dataclass(eq=False)
class _Entry:
    cf: ClusterFeature
    child: "_Node | None" = None
    uid: int = -1


@dataclass(eq=False)
class _Node:
    leaf: bool
    entries: list[_Entry] = field(default_factory=list)

    def centroids(self) -> np.ndarray:
        return np.array([e.cf.centroid for e in self.entries])


class CFTree:
    """Height-balanced tree of clustering features.

    A point descends to the closest child by centroid distance. At a leaf
    it is absorbed by the closest entry when the merged radius stays within
    ``threshold``; otherwise it opens a new entry. A node holding more than
    ``branching`` entries splits around its two farthest entries.
    """

    def __init__(self, threshold: float, branching: int = 50):
        if not threshold > 0:
            raise ConfigError("threshold must be > 0")
        if branching < 2:
            raise ConfigError("branching must be >= 2")
        self.threshold = threshold
        self.branching = branching
        self.root = _Node(leaf=True)
        self._next_uid = 0
        self.splits = 0

    def insert(self, x) -> _Entry:
        """Insert one point and return the leaf entry that now holds it."""
        point = ClusterFeature.of_point(x)
        holder, sibling = self._insert(self.root, point)
        if sibling is not None:
            old = self.root
            self.root = _Node(leaf=False, entries=[
                _Entry(_sum_cf(old), child=old), _Entry(_sum_cf(sibling), child=sibling)])
        return holder

    def _closest(self, node: _Node, x: np.ndarray) -> int:
        diff = node.centroids() - x
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def _insert(self, node: _Node, point: ClusterFeature):
        x = point.ls
        if node.leaf:
            holder = None
            if node.entries:
                i = self._closest(node, x)
                merged = node.entries[i].cf + point
                if merged.radius <= self.threshold:
                    node.entries[i].cf = merged
                    holder = node.entries[i]
            if holder is None:
                holder = _Entry(point, uid=self._next_uid)
                self._next_uid += 1
                node.entries.append(holder)
        else:
            i = self._closest(node, x)
            entry = node.entries[i]
            holder, sibling = self._insert(entry.child, point)
            if sibling is None:
                entry.cf = entry.cf + point
            else:
                entry.cf = _sum_cf(entry.child)
                node.entries.insert(i + 1, _Entry(_sum_cf(sibling), child=sibling))
        if len(node.entries) > self.branching:
            return holder, self._split(node)
        return holder, None

    def _split(self, node: _Node) -> _Node:
        """Split ``node`` in place; return the new sibling."""
        C = node.centroids()
        diff = C[:, None, :] - C[None, :, :]
        D = np.einsum("ijk,ijk->ij", diff, diff)
        a, b = np.unravel_index(int(np.argmax(D)), D.shape)
        keep, move = [], []
        for idx, entry in enumerate(node.entries):
            # ties stay with the first seed
            (keep if D[idx, a] <= D[idx, b] else move).append(entry)
        node.entries = keep
        self.splits += 1
        return _Node(leaf=node.leaf, entries=move)

    def leaves(self) -> list[_Entry]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.leaf:
                out.extend(node.entries)
            else:
                stack.extend(e.child for e in reversed(node.entries))
        return out


def _sum_cf(node: _Node) -> ClusterFeature:
    total = node.entries[0].cf
    for e in node.entries[1:]:
        total = total + e.cf
    return total


def build_cf_tree(X, threshold: float, branching: int = 50) -> tuple[CFTree, list[_Entry]]:
    """Insert every row; return the tree and the leaf entry holding each row."""
    tree = CFTree(threshold, branching)
    return tree, [tree.insert(x) for x in as_array(X)]


def birch_fit(X, threshold: float = 0.5, branching: int = 50, n_clusters: int = 3) -> ClusteringResult:
    """Two-phase BIRCH.

    Phase 1 builds a CF tree in one pass over the rows. Phase 2 runs
    average-linkage agglomeration on the leaf-entry centroids down to
    ``n_clusters`` groups (or fewer, if the tree has fewer leaf entries);
    every point takes the group of the leaf entry that absorbed it.
    """
    if n_clusters < 1:
        raise ConfigError("n_clusters must be >= 1")
    tree, holders = build_cf_tree(X, threshold, branching)

    leaves = tree.leaves()
    position = {e.uid: i for i, e in enumerate(leaves)}
    centroids = np.array([e.cf.centroid for e in leaves])
    k = min(n_clusters, len(leaves))
    group, _ = agglomerative_fit(centroids, k, "average")
    labels, found = relabel_by_first_appearance(group.labels[[position[h.uid] for h in holders]])

    return ClusteringResult(
        algorithm="birch",
        labels=labels,
        n_clusters=found,
        iterations=1,
        diagnostics={
            "threshold": threshold,
            "branching": branching,
            "leaf_entries": len(leaves),
            "node_splits": tree.splits,
            "requested_clusters": n_clusters,
        },
    )
