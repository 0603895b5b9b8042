from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NOISE = -1


@dataclass(frozen=True)
class ClusteringResult:
    """Labels plus bookkeeping for one fitted clusterer.

    ``labels`` holds one integer per row; ``-1`` marks noise and is only
    produced by DBSCAN. ``diagnostics`` carries algorithm-specific
    JSON-serialisable values (inertia, log-likelihood, leaf counts, ...).
    """

    algorithm: str
    labels: np.ndarray
    n_clusters: int
    seed: int | None = None
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.labels == NOISE))

    def check(self) -> None:
        labels = self.labels
        valid = labels[labels != NOISE]
        if valid.size and (valid.min() < 0 or valid.max() >= self.n_clusters):
            raise AssertionError("label outside [0, n_clusters)")
        used = np.unique(valid)
        if used.size != self.n_clusters:
            raise AssertionError("some cluster ids are unused")
        if self.n_noise and self.algorithm != "dbscan":
            raise AssertionError("noise labels from a non-density algorithm")


def relabel_by_first_appearance(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber non-noise labels 0, 1, ... in order of first occurrence."""
    labels = np.asarray(labels)
    out = np.full(labels.shape, NOISE, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels.tolist()):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out, len(mapping)


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, computed from differences (no expansion)."""
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def iter_row_blocks(n: int, m: int, d: int, budget: int = 4_000_000):
    """Yield row slices so that a block x m x d temporary stays within ``budget`` floats."""
    step = max(1, budget // max(1, m * d))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))
