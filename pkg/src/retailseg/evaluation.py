"""Cluster-quality metrics and model-selection curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster._result import NOISE, iter_row_blocks, pairwise_sq_dists
from .cluster.kmeans import kmeans_fit
from .errors import ConfigError, DataError
from .numeric import as_array


@dataclass(frozen=True)
class SilhouetteReport:
    """Per-point silhouette values.

    Rows excluded from the computation (noise) carry NaN in the per-point
    arrays and do not enter ``mean_score``.
    """

    mean_score: float
    per_point: np.ndarray
    per_point_a: np.ndarray
    per_point_b: np.ndarray
    n_scored: int
    n_excluded: int


def silhouette(X, labels, noise: str = "exclude") -> SilhouetteReport:
    """Exact silhouette with Euclidean distances.

    Parameters
    ----------
    X : FeatureMatrix or array, shape (n, d)
    labels : array of int, shape (n,)
        ``-1`` marks noise.
    noise : {"exclude", "as_cluster"}
        Drop noise points, or score them as one more cluster.

    Notes
    -----
    Points in singleton clusters score 0.
    """
    A = as_array(X)
    labels = np.asarray(labels)
    if len(labels) != len(A):
        raise DataError("labels and rows differ in length")
    if noise not in ("exclude", "as_cluster"):
        raise ConfigError(f"unknown noise policy {noise!r}")

    keep = labels != NOISE if noise == "exclude" else np.ones(len(labels), dtype=bool)
    if not keep.any():
        raise DataError("no clustered points to score")
    P = A[keep]
    _, codes = np.unique(labels[keep], return_inverse=True)
    m = codes.max() + 1
    if m < 2:
        raise DataError("silhouette needs at least two clusters")

    counts = np.bincount(codes, minlength=m).astype(float)
    onehot = np.zeros((len(P), m))
    onehot[np.arange(len(P)), codes] = 1.0

    a = np.empty(len(P))
    b = np.empty(len(P))
    for rows in iter_row_blocks(len(P), len(P), P.shape[1]):
        dist = np.sqrt(pairwise_sq_dists(P[rows], P))
        sums = dist @ onehot
        own = codes[rows]
        idx = np.arange(len(own))
        own_count = counts[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a[rows] = np.where(own_count > 1, sums[idx, own] / (own_count - 1), 0.0)
        means = sums / counts
        means[idx, own] = np.inf
        b[rows] = means.min(axis=1)

    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[counts[codes] == 1] = 0.0

    per_point = np.full(len(A), np.nan)
    per_a = np.full(len(A), np.nan)
    per_b = np.full(len(A), np.nan)
    per_point[keep] = s
    per_a[keep] = a
    per_b[keep] = b
    return SilhouetteReport(
        mean_score=float(np.mean(s)),
        per_point=per_point,
        per_point_a=per_a,
        per_point_b=per_b,
        n_scored=int(keep.sum()),
        n_excluded=int((~keep).sum()),
    )


@dataclass(frozen=True)
class InertiaCurve:
    k_values: tuple[int, ...]
    inertias: tuple[float, ...]
    chosen_k: int | None = None


def knee_point(curve) -> int:
    """The interior k with the largest discrete second difference of inertia.

    Accepts an InertiaCurve or a ``(k_values, inertias)`` pair. Ties go to
    the smallest k.
    """
    if isinstance(curve, InertiaCurve):
        ks, ys = curve.k_values, curve.inertias
    else:
        ks, ys = curve
    ks = list(ks)
    ys = np.asarray(ys, dtype=float)
    if len(ks) < 3 or len(ys) != len(ks):
        raise DataError("knee detection needs at least three points")
    second = ys[:-2] - 2.0 * ys[1:-1] + ys[2:]
    return int(ks[1 + int(np.argmax(second))])


def inertia_curve(X, k_range, seeds: int = 10, seed0: int = 0, init: str = "kmeanspp") -> InertiaCurve:
    """Best-of-``seeds`` k-means inertia for each k, plus the knee."""
    ks = [int(k) for k in k_range]
    if not ks:
        raise ConfigError("k_range is empty")
    if seeds < 1:
        raise ConfigError("seeds must be >= 1")
    A = as_array(X)
    inertias = []
    for k in ks:
        best = min(kmeans_fit(A, k, init=init, seed=seed0 + s)[0].inertia for s in range(seeds))
        inertias.append(best)
    chosen = knee_point((ks, inertias)) if len(ks) >= 3 else None
    return InertiaCurve(tuple(ks), tuple(inertias), chosen)


def k_distance(X, k: int) -> np.ndarray:
    """Ascending distances from each point to its k-th nearest other point."""
    A = as_array(X)
    n = len(A)
    if not 1 <= k < n:
        raise ConfigError(f"k must be in [1, {n - 1}], got {k}")
    out = np.empty(n)
    for rows in iter_row_blocks(n, n, A.shape[1]):
        dist = np.sqrt(pairwise_sq_dists(A[rows], A))
        # drop self by index, not by value, so duplicates still count as neighbours
        dist[np.arange(dist.shape[0]), np.arange(rows.start, rows.stop)] = np.inf
        out[rows] = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return np.sort(out)
