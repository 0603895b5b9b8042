"""Density-based clustering (DBSCAN) on exact Euclidean neighbourhoods."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..numeric import as_array
from ._result import NOISE, ClusteringResult, iter_row_blocks, pairwise_sq_dists


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_samples: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")
        if self.min_samples < 1:
            raise ConfigError(f"min_samples must be >= 1, got {self.min_samples}")


def neighbourhoods(X: np.ndarray, eps: float) -> list[np.ndarray]:
    """Indices within the closed ``eps``-ball of each row, the row itself included."""
    out = []
    for rows in iter_row_blocks(len(X), len(X), X.shape[1]):
        dist = np.sqrt(pairwise_sq_dists(X[rows], X))
        for r in dist:
            out.append(np.flatnonzero(r <= eps).astype(np.int32))
    return out


def core_distances(X, min_samples: int) -> np.ndarray:
    """Distance from each point to its ``min_samples``-th nearest point, counting itself.

    A point is core exactly when this is at most ``eps``.
    """
    A = as_array(X)
    if not 1 <= min_samples <= len(A):
        raise ConfigError("min_samples must lie in [1, n]")
    out = np.empty(len(A))
    for rows in iter_row_blocks(len(A), len(A), A.shape[1]):
        dist = np.sqrt(pairwise_sq_dists(A[rows], A))
        out[rows] = np.partition(dist, min_samples - 1, axis=1)[:, min_samples - 1]
    return out


def reachability_distance(X, p: int, q: int, min_samples: int) -> float:
    """max(core distance of p, ||p - q||)."""
    A = as_array(X)
    core = core_distances(A, min_samples)[p]
    return float(max(core, np.linalg.norm(A[p] - A[q])))


def dbscan_fit(X, params: DbscanParams | None = None, *, eps: float | None = None,
               min_samples: int | None = None) -> ClusteringResult:
    """Cluster by density connectivity.

    Points are scanned in row order; each unvisited core point starts a new
    cluster that grows breadth-first through core points. A border point
    keeps the first cluster that reaches it. Everything else is noise (-1).
    """
    if params is None:
        if eps is None:
            raise ConfigError("eps is required")
        params = DbscanParams(eps, 5 if min_samples is None else min_samples)
    A = as_array(X)
    n = len(A)
    neigh = neighbourhoods(A, params.eps)
    core = np.array([len(nb) >= params.min_samples for nb in neigh], dtype=bool)

    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            nb = neigh[queue.popleft()]
            fresh = nb[labels[nb] == NOISE]
            labels[fresh] = cluster
            queue.extend(fresh[core[fresh]].tolist())
        cluster += 1

    return ClusteringResult(
        algorithm="dbscan",
        labels=labels,
        n_clusters=cluster,
        iterations=1,
        diagnostics={
            "eps": params.eps,
            "min_samples": params.min_samples,
            "n_core": int(core.sum()),
            "n_noise": int(np.sum(labels == NOISE)),
        },
    )
