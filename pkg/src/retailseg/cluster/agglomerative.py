"""Bottom-up hierarchical clustering with single, complete, average or Ward linkage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..numeric import as_array
from ._result import ClusteringResult, iter_row_blocks, pairwise_sq_dists, relabel_by_first_appearance

LINKAGES = ("single", "complete", "average", "ward")


@dataclass(frozen=True)
class LinkageSpec:
    method: str = "ward"

    def __post_init__(self):
        if self.method not in LINKAGES:
            raise ConfigError(f"unknown linkage {self.method!r}; expected one of {LINKAGES}")


@dataclass(frozen=True)
class Merge:
    """One dendrogram step.

    Cluster ids follow the usual convention: ids below ``n`` are the input
    points, the cluster formed at step ``s`` (0-based) gets id ``n + s``.
    """

    cluster_a: int
    cluster_b: int
    distance: float
    size: int


def _update_distances(method, d_ki, d_kj, d_ij, n_i, n_j, n_k):
    """Lance-Williams recurrence: distance from every k to the union of i and j."""
    if method == "single":
        return np.minimum(d_ki, d_kj)
    if method == "complete":
        return np.maximum(d_ki, d_kj)
    if method == "average":
        return (n_i * d_ki + n_j * d_kj) / (n_i + n_j)
    # ward, expressed on Euclidean (not squared) distances
    total = n_i + n_j + n_k
    sq = ((n_i + n_k) * d_ki ** 2 + (n_j + n_k) * d_kj ** 2 - n_k * d_ij ** 2) / total
    return np.sqrt(np.maximum(sq, 0.0))


def _distance_matrix(A: np.ndarray) -> np.ndarray:
    n = len(A)
    D = np.empty((n, n))
    for rows in iter_row_blocks(n, n, A.shape[1]):
        D[rows] = np.sqrt(pairwise_sq_dists(A[rows], A))
    return D


def linkage_tree(X, linkage: LinkageSpec | str = "ward", stop_at: int = 1):
    """Merge clusters greedily until ``stop_at`` remain.

    Returns the merge list and the final per-point representative index.
    At each step the pair with the smallest linkage distance is merged;
    ties go to the lexicographically smallest ``(i, j)`` pair of current
    representative indices.
    """
    method = linkage.method if isinstance(linkage, LinkageSpec) else LinkageSpec(linkage).method
    A = as_array(X)
    n = len(A)
    D = _distance_matrix(A)
    np.fill_diagonal(D, np.inf)

    active = np.ones(n, dtype=bool)
    size = np.ones(n)
    ids = np.arange(n)
    owner = np.arange(n)
    nn = np.argmin(D, axis=1) if n > 1 else np.zeros(1, dtype=np.int64)
    nn_dist = D[np.arange(n), nn]

    merges: list[Merge] = []
    for step in range(n - stop_at):
        cand = np.where(active, nn_dist, np.inf)
        i = int(np.argmin(cand))
        j = int(nn[i])
        if j < i:
            i, j = j, i
        d_ij = D[i, j]

        merges.append(Merge(int(min(ids[i], ids[j])), int(max(ids[i], ids[j])), float(d_ij),
                            int(size[i] + size[j])))

        others = active.copy()
        others[[i, j]] = False
        new_row = np.full(n, np.inf)
        new_row[others] = _update_distances(method, D[i, others], D[j, others], d_ij,
                                            size[i], size[j], size[others])
        D[i, :] = new_row
        D[:, i] = new_row
        D[j, :] = np.inf
        D[:, j] = np.inf
        active[j] = False
        size[i] += size[j]
        ids[i] = n + step
        owner[owner == j] = i

        if not others.any():
            continue
        # rows whose cached neighbour was i or j must be rescanned
        stale = others & ((nn == i) | (nn == j))
        stale[i] = True
        for r in np.flatnonzero(stale):
            nn[r] = int(np.argmin(D[r]))
            nn_dist[r] = D[r, nn[r]]
        # the merged cluster may now be closer than a row's cached neighbour
        row = D[i]
        better = others & ~stale & ((row < nn_dist) | ((row == nn_dist) & (i < nn)))
        nn[better] = i
        nn_dist[better] = row[better]

    return merges, owner


def agglomerative_fit(X, n_clusters: int, linkage: LinkageSpec | str = "ward"
                      ) -> tuple[ClusteringResult, list[Merge]]:
    A = as_array(X)
    n = len(A)
    if not 1 <= n_clusters <= n:
        raise ConfigError(f"n_clusters must be in [1, {n}], got {n_clusters}")
    spec = linkage if isinstance(linkage, LinkageSpec) else LinkageSpec(linkage)
    merges, owner = linkage_tree(A, spec, stop_at=n_clusters)
    labels, k = relabel_by_first_appearance(owner)
    result = ClusteringResult(
        algorithm="agglomerative",
        labels=labels,
        n_clusters=k,
        iterations=len(merges),
        diagnostics={"linkage": spec.method, "final_merge_distance": merges[-1].distance if merges else 0.0},
    )
    return result, merges
