"""Shared oracles for the clustering tests."""

from itertools import product

import numpy as np


def partition(labels, noise=-1):
    """Labels as a set of frozensets of row indices, ignoring label ids."""
    groups = {}
    for i, lab in enumerate(np.asarray(labels).tolist()):
        if lab != noise:
            groups.setdefault(lab, set()).add(i)
    return {frozenset(g) for g in groups.values()}


def exhaustive_wcss(X, k):
    """Minimum within-cluster sum of squares over every labelling into exactly k groups."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    best = np.inf
    # fix point 0 in group 0 to skip symmetric copies
    for rest in product(range(k), repeat=n - 1):
        labels = np.array((0, *rest))
        if len(set(labels.tolist())) != k:
            continue
        total = 0.0
        for g in range(k):
            P = X[labels == g]
            total += float(((P - P.mean(axis=0)) ** 2).sum())
        best = min(best, total)
    return best


def brute_k_distance(X, k):
    X = np.asarray(X, dtype=float)
    out = []
    for i in range(len(X)):
        d = sorted(float(np.linalg.norm(X[i] - X[j])) for j in range(len(X)) if j != i)
        out.append(d[k - 1])
    return sorted(out)


def hand_silhouette(X, labels):
    """Straight transcription of the per-point definition, O(n^2) Python loops."""
    X = np.asarray(X, dtype=float)
    labels = list(labels)
    ids = sorted(set(labels))
    s = []
    for i in range(len(X)):
        own = [j for j in range(len(X)) if labels[j] == labels[i] and j != i]
        if not own:
            s.append(0.0)
            continue
        a = np.mean([np.linalg.norm(X[i] - X[j]) for j in own])
        b = min(np.mean([np.linalg.norm(X[i] - X[j]) for j in range(len(X)) if labels[j] == c])
                for c in ids if c != labels[i])
        s.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return np.array(s)
