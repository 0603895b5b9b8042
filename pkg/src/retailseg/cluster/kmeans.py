"""Lloyd's k-means with k-means++ or random seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..numeric import as_array
from ._result import ClusteringResult, iter_row_blocks, pairwise_sq_dists

INITS = ("kmeanspp", "random")


@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    k: int
    n: int

    def predict(self, X) -> np.ndarray:
        return _assign(as_array(X), self.centroids)[0]

    def to_dict(self) -> dict:
        return {"centroids": self.centroids.tolist(), "inertia": self.inertia, "k": self.k, "n": self.n}


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # argmin returns the first minimum, so ties go to the lowest centroid index
    labels = np.empty(len(X), dtype=np.int64)
    d2 = np.empty(len(X))
    for rows in iter_row_blocks(len(X), len(centroids), X.shape[1]):
        D = pairwise_sq_dists(X[rows], centroids)
        labels[rows] = np.argmin(D, axis=1)
        d2[rows] = D[np.arange(D.shape[0]), labels[rows]]
    return labels, d2


def _distinct_row_indices(X: np.ndarray) -> np.ndarray:
    _, first = np.unique(X, axis=0, return_index=True)
    return np.sort(first)


def _init_kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centres = [X[rng.integers(n)]]
    closest = pairwise_sq_dists(X, centres[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        # rows already chosen have weight 0, so centres stay distinct
        idx = rng.choice(n, p=closest / total)
        centres.append(X[idx])
        closest = np.minimum(closest, pairwise_sq_dists(X, X[idx][None, :])[:, 0])
    return np.array(centres)


def _init_random(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    pool = _distinct_row_indices(X)
    return X[np.sort(rng.choice(pool, size=k, replace=False))].copy()


def _update(X, labels, d2, centroids):
    """New centroids as cluster means; empty clusters are reseeded.

    An empty cluster takes the point farthest from its current centroid,
    drawn from clusters that can spare a member.
    """
    k, dim = centroids.shape
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, dim))
    np.add.at(sums, labels, X)
    new = centroids.copy()
    nonempty = counts > 0
    new[nonempty] = sums[nonempty] / counts[nonempty, None]
    reseeded = 0
    if not nonempty.all():
        labels = labels.copy()
        d2 = d2.copy()
        for c in np.flatnonzero(~nonempty):
            donors = counts[labels] > 1
            cand = np.where(donors, d2, -1.0)
            far = int(np.argmax(cand))
            counts[labels[far]] -= 1
            labels[far] = c
            counts[c] = 1
            d2[far] = 0.0
            new[c] = X[far]
            reseeded += 1
        # recompute the donors' means after losing members
        sums = np.zeros((k, dim))
        np.add.at(sums, labels, X)
        new = sums / counts[:, None]
    return new, reseeded


def kmeans_fit(X, k: int, init: str = "kmeanspp", seed: int = 0, max_iter: int = 300,
               tol: float = 1e-10) -> tuple[KMeansModel, ClusteringResult]:
    """Fit k-means by Lloyd iterations.

    Stops once the Frobenius norm of the centroid shift is at most ``tol``,
    or after ``max_iter`` updates. The returned labels are always the
    nearest-centroid assignment for the returned centroids.
    """
    A = as_array(X)
    n = len(A)
    if init not in INITS:
        raise ConfigError(f"unknown init {init!r}; expected one of {INITS}")
    if max_iter < 1:
        raise ConfigError("max_iter must be >= 1")
    if k < 1:
        raise ConfigError("k must be >= 1")
    distinct = len(_distinct_row_indices(A))
    if k > distinct:
        raise ConfigError(f"k={k} exceeds the number of distinct rows ({distinct})")

    rng = np.random.default_rng(seed)
    centroids = _init_kmeanspp(A, k, rng) if init == "kmeanspp" else _init_random(A, k, rng)

    history = []
    reseeds = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        labels, d2 = _assign(A, centroids)
        history.append(float(d2.sum()))
        new, r = _update(A, labels, d2, centroids)
        reseeds += r
        shift = float(np.linalg.norm(new - centroids))
        centroids = new
        if shift <= tol:
            break

    labels, d2 = _assign(A, centroids)
    # a final reassignment can, rarely, strand a centroid
    for _ in range(k):
        if np.bincount(labels, minlength=k).min() > 0:
            break
        centroids, r = _update(A, labels, d2, centroids)
        reseeds += r
        labels, d2 = _assign(A, centroids)

    inertia = float(d2.sum())
    model = KMeansModel(centroids=centroids, inertia=inertia, k=k, n=n)
    result = ClusteringResult(
        algorithm="kmeans",
        labels=labels,
        n_clusters=k,
        seed=seed,
        iterations=iterations,
        diagnostics={"inertia": inertia, "inertia_history": history, "init": init, "reseeds": reseeds},
    )
    return model, result
