"""Gaussian mixture with full covariances, fitted by expectation-maximisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import AlgorithmError, ConfigError
from ..numeric import as_array
from ._result import ClusteringResult
from .kmeans import kmeans_fit

_LOG_2PI = np.log(2.0 * np.pi)


class ComponentCollapse(AlgorithmError):
    def __init__(self, component: int):
        self.component = component
        super().__init__(f"covariance of component {component} is not positive definite")


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    covariances: np.ndarray  # (k, d, d)
    log_likelihood: float  # mean per-point log-likelihood
    responsibilities: np.ndarray  # (n, k)

    def predict_proba(self, X) -> np.ndarray:
        log_resp, _ = _e_step(as_array(X), self.weights, self.means, _cholesky_all(self.covariances))
        return np.exp(log_resp)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "log_likelihood": self.log_likelihood,
        }


def _cholesky_all(covs: np.ndarray) -> np.ndarray:
    chols = np.empty_like(covs)
    for j, cov in enumerate(covs):
        try:
            chols[j] = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ComponentCollapse(j) from None
        if not np.all(np.isfinite(chols[j])):
            raise ComponentCollapse(j)
    return chols


def _log_gaussian(X: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    # log N(x | mean, L L^T) via a triangular solve
    z = np.linalg.solve(chol, (X - mean).T)
    maha = np.sum(z * z, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (X.shape[1] * _LOG_2PI + log_det + maha)


def _e_step(X, weights, means, chols) -> tuple[np.ndarray, float]:
    """Return log-responsibilities and the mean log-likelihood."""
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    weighted = np.column_stack([
        log_w[j] + _log_gaussian(X, means[j], chols[j]) for j in range(len(weights))
    ])
    log_norm = logsumexp(weighted, axis=1)
    return weighted - log_norm[:, None], float(np.mean(log_norm))


def _m_step(X, resp, reg):
    n, d = X.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    safe = np.where(nk > 0, nk, 1.0)
    means = (resp.T @ X) / safe[:, None]
    covs = np.empty((len(nk), d, d))
    for j in range(len(nk)):
        diff = X - means[j]
        cov = (resp[:, j, None] * diff).T @ diff / safe[j]
        covs[j] = (cov + cov.T) / 2 + reg * np.eye(d)
    return weights, means, covs


def _init_from_kmeans(X, k, seed, reg):
    _, km = kmeans_fit(X, k, seed=seed)
    d = X.shape[1]
    weights = np.bincount(km.labels, minlength=k) / len(X)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        members = X[km.labels == j]
        means[j] = members.mean(axis=0)
        diff = members - means[j]
        covs[j] = diff.T @ diff / len(members) + reg * np.eye(d)
    return weights, means, covs


def gmm_fit(X, k: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-6,
            reg: float = 1e-6) -> tuple[GmmModel, ClusteringResult]:
    """Fit a ``k``-component Gaussian mixture by EM.

    Initial parameters come from a seeded k-means run. Each M-step adds
    ``reg`` to the covariance diagonals. Iteration stops when the mean
    per-point log-likelihood improves by less than ``tol`` or after
    ``max_iter`` M-steps. Hard labels are the argmax responsibilities; if a
    component wins no point the remaining ids are compacted (order kept)
    and the loser is listed in ``diagnostics["empty_components"]``.
    """
    A = as_array(X)
    n = len(A)
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k >= n:
        raise ConfigError(f"k={k} must be smaller than the number of rows ({n})")
    if reg < 0:
        raise ConfigError("reg must be non-negative")

    weights, means, covs = _init_from_kmeans(A, k, seed, reg)
    log_resp, ll = _e_step(A, weights, means, _cholesky_all(covs))
    history = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        weights, means, covs = _m_step(A, np.exp(log_resp), reg)
        log_resp, ll_new = _e_step(A, weights, means, _cholesky_all(covs))
        history.append(ll_new)
        improvement = ll_new - ll
        ll = ll_new
        if improvement < tol:
            converged = True
            break

    resp = np.exp(log_resp)
    resp /= resp.sum(axis=1, keepdims=True)
    hard = np.argmax(resp, axis=1)
    used, labels = np.unique(hard, return_inverse=True)
    n_clusters = len(used)
    empty = sorted(set(range(k)) - set(used.tolist()))

    model = GmmModel(weights=weights, means=means, covariances=covs, log_likelihood=ll,
                     responsibilities=resp)
    result = ClusteringResult(
        algorithm="gmm",
        labels=labels.astype(np.int64),
        n_clusters=n_clusters,
        seed=seed,
        iterations=iterations,
        diagnostics={
            "log_likelihood": ll,
            "log_likelihood_history": history,
            "converged": converged,
            "empty_components": empty,
        },
    )
    return model, result
