"""Feature matrices, scaling, covariance, a Jacobi eigen-solver and PCA."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError

SCALINGS = ("raw", "minmax", "zscore")


@dataclass(frozen=True)
class Scaling:
    """Affine per-column map applied to a matrix.

    ``kind`` is one of ``raw``, ``minmax`` or ``zscore``. ``offset`` and
    ``scale`` are such that ``scaled = (x - offset) / scale``; columns
    recorded with scale 0 were constant and map to 0.
    """

    kind: str = "raw"
    offset: tuple[float, ...] = ()
    scale: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "offset": list(self.offset), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaling":
        return cls(d["kind"], tuple(map(float, d["offset"])), tuple(map(float, d["scale"])))


@dataclass(frozen=True)
class FeatureMatrix:
    data: np.ndarray
    columns: tuple[str, ...]
    row_ids: tuple[str, ...] | None = None
    scaling: Scaling = field(default_factory=Scaling)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"feature matrix must be n x d with n, d >= 1, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("feature matrix contains non-finite values")
        if len(self.columns) != data.shape[1]:
            raise DataError("column names do not match matrix width")
        if self.row_ids is not None and len(self.row_ids) != data.shape[0]:
            raise DataError("row ids do not match matrix height")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __len__(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_array(cls, data, columns=None, row_ids=None) -> "FeatureMatrix":
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if columns is None:
            columns = tuple(f"x{i + 1}" for i in range(data.shape[1]))
        return cls(data, tuple(columns), None if row_ids is None else tuple(row_ids))


def as_array(X) -> np.ndarray:
    """Return the float data of a FeatureMatrix or array-like, as 2-D."""
    if isinstance(X, FeatureMatrix):
        return X.data
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _check_finite(X: np.ndarray) -> None:
    if not np.all(np.isfinite(X)):
        raise DataError("input contains non-finite values")


def _coerce(X) -> FeatureMatrix:
    if isinstance(X, FeatureMatrix):
        return X
    arr = np.asarray(X, dtype=float)
    _check_finite(arr)
    return FeatureMatrix.from_array(arr)


def _apply(fm: FeatureMatrix, offset: np.ndarray, scale: np.ndarray, kind: str) -> FeatureMatrix:
    safe = np.where(scale > 0, scale, 1.0)
    out = np.where(scale > 0, (fm.data - offset) / safe, 0.0)
    return replace(fm, data=out, scaling=Scaling(kind, tuple(offset.tolist()), tuple(scale.tolist())))


def minmax_scale(X) -> FeatureMatrix:
    """Map each column onto [0, 1]; constant columns become 0."""
    fm = _coerce(X)
    lo = fm.data.min(axis=0)
    hi = fm.data.max(axis=0)
    return _apply(fm, lo, hi - lo, "minmax")


def standard_scale(X) -> FeatureMatrix:
    """Centre each column and divide by its sample (n - 1) standard deviation.

    Constant columns become 0. A single-row input has undefined variance and
    is treated as constant.
    """
    fm = _coerce(X)
    mean = fm.data.mean(axis=0)
    if len(fm) < 2:
        sd = np.zeros(fm.shape[1])
    else:
        sd = fm.data.std(axis=0, ddof=1)
    return _apply(fm, mean, sd, "zscore")


def inverse_transform(X: FeatureMatrix) -> FeatureMatrix:
    """Undo the recorded scaling. Constant columns are restored from ``offset``."""
    if X.scaling.kind == "raw":
        return X
    offset = np.asarray(X.scaling.offset)
    scale = np.asarray(X.scaling.scale)
    data = X.data * scale + offset
    return replace(X, data=data, scaling=Scaling())


def scale(X, kind: str) -> FeatureMatrix:
    if kind == "raw":
        return _coerce(X)
    if kind == "minmax":
        return minmax_scale(X)
    if kind == "zscore":
        return standard_scale(X)
    raise ConfigError(f"unknown scaler {kind!r}; expected one of {SCALINGS}")


def covariance_matrix(X) -> np.ndarray:
    """Sample covariance with the n - 1 denominator; exactly symmetric."""
    A = as_array(X)
    _check_finite(A)
    n, d = A.shape
    if n < 2:
        raise DataError("covariance needs at least two rows")
    centred = A - A.mean(axis=0)
    C = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            C[i, j] = C[j, i] = np.dot(centred[:, i], centred[:, j]) / (n - 1)
    return C


def eigen_symmetric(C, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns
    -------
    eigenvalues : ndarray, shape (d,)
        Sorted in descending order.
    eigenvectors : ndarray, shape (d, d)
        Column ``i`` pairs with ``eigenvalues[i]``. Each column is signed so
        that its largest-magnitude entry is positive.
    """
    A = np.array(C, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"expected a square matrix, got shape {A.shape}")
    _check_finite(A)
    d = A.shape[0]
    norm = np.linalg.norm(A)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * max(norm, 1.0):
        raise DataError("matrix is not symmetric")
    A = (A + A.T) / 2
    V = np.eye(d)

    mask = ~np.eye(d, dtype=bool)

    def off(M):
        return np.sqrt(np.sum(M[mask] ** 2))

    sweeps = 0
    while norm > 0 and off(A) >= tol * norm and sweeps < max_sweeps:
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                # rotation angle chosen to zero A[p, q]; t is the smaller root
                h = A[q, q] - A[p, p]
                if abs(apq) < 1e-36 * abs(h):
                    t = apq / h
                else:
                    theta = h / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq

    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    V = V[:, order]
    for i in range(d):
        col = V[:, i]
        if col[np.argmax(np.abs(col))] < 0:
            V[:, i] = -col
    return values, V


@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray  # k x d, orthonormal rows
    eigenvalues: np.ndarray  # k, descending
    column_means: np.ndarray
    explained_variance_ratio: np.ndarray
    total_variance: float

    def transform(self, X) -> np.ndarray:
        return (as_array(X) - self.column_means) @ self.components.T

    def inverse(self, scores) -> np.ndarray:
        return np.asarray(scores) @ self.components + self.column_means

    def to_dict(self) -> dict:
        return {
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "column_means": self.column_means.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }


def pca_fit_transform(X, k: int) -> tuple[PcaModel, FeatureMatrix]:
    """Project onto the top-``k`` eigenvectors of the sample covariance.

    Scores are returned as a FeatureMatrix with columns ``P1..Pk``.
    """
    A = as_array(X)
    n, d = A.shape
    if not 1 <= k <= min(n, d):
        raise ConfigError(f"number of components must be in [1, {min(n, d)}], got {k}")
    means = A.mean(axis=0)
    if n >= 2:
        values, vectors = eigen_symmetric(covariance_matrix(A))
    else:
        values, vectors = np.zeros(d), np.eye(d)
    total = float(values.sum())
    ratio = values[:k] / total if total > 0 else np.zeros(k)
    model = PcaModel(
        components=vectors[:, :k].T.copy(),
        eigenvalues=values[:k].copy(),
        column_means=means,
        explained_variance_ratio=ratio,
        total_variance=total,
    )
    row_ids = X.row_ids if isinstance(X, FeatureMatrix) else None
    scores = FeatureMatrix(model.transform(A), tuple(f"P{i + 1}" for i in range(k)), row_ids)
    return model, scores
