"""Correspondence matrices: ground-truth, soft, outlier-augmented, and metrics.

A correspondence matrix has one column per source point. Column i is a
probability distribution over the target points (with one trailing outlier
row in the augmented variant), so every column sums to one. Hard matrices
are one-hot per column. Nearest-neighbor searches are exact O(N^2) scans
with ties broken toward the lowest target index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .geom import PointCloud, _pairwise_distances

COLUMN_SUM_TOL = 1e-9


@dataclass(frozen=True)
class CorrespondenceMatrix:
    """Column-stochastic matching matrix over target points.

    entries is (N_y, N_x), or (N_y + 1, N_x) when outlier_augmented: the
    extra last row holds the probability that a source point matches
    nothing.
    """

    entries: np.ndarray
    hard: bool = False
    outlier_augmented: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"expected a 2D matrix, got shape {m.shape}")
        rows = m.shape[0] - (1 if self.outlier_augmented else 0)
        if rows < 1 or m.shape[1] < 1:
            raise ValueError("correspondence matrix needs at least one target and one source")
        if not np.all(np.isfinite(m)):
            raise ValueError("correspondence entries must be finite")
        if m.min() < -COLUMN_SUM_TOL or m.max() > 1.0 + COLUMN_SUM_TOL:
            raise ValueError("correspondence entries must lie in [0, 1]")
        col_sums = m.sum(axis=0)
        if np.max(np.abs(col_sums - 1.0)) > COLUMN_SUM_TOL:
            raise ValueError("every correspondence column must sum to 1")
        if self.hard:
            if np.max(np.abs(m - np.round(m))) > COLUMN_SUM_TOL:
                raise ValueError("hard correspondence entries must be 0 or 1")
            if not np.all((m > 0.5).sum(axis=0) == 1):
                raise ValueError("hard correspondence needs exactly one 1 per column")
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n_source(self) -> int:
        return self.entries.shape[1]

    @property
    def n_target(self) -> int:
        return self.entries.shape[0] - (1 if self.outlier_augmented else 0)

    @property
    def outlier_index(self) -> int | None:
        """Row index of the outlier class (None for plain matrices)."""
        return self.n_target if self.outlier_augmented else None

    def save_csv(self, path) -> None:
        """Inspection dump: header j0..jN, one row per target index (outlier row last)."""
        with open(path, "w", encoding="ascii") as f:
            f.write(",".join(f"j{i}" for i in range(self.n_source)) + "\n")
            for row in self.entries:
                f.write(",".join(repr(float(v)) for v in row) + "\n")


def nearest_neighbor_indices(src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    """Index of each source point's nearest target (exact scan, lowest-index tie break)."""
    return np.argmin(_pairwise_distances(src, tgt), axis=1)


def _one_hot(rows: int, indices: np.ndarray) -> np.ndarray:
    m = np.zeros((rows, indices.shape[0]))
    m[indices, np.arange(indices.shape[0])] = 1.0
    return m


def ground_truth_correspondence(X: PointCloud, Y_aligned: PointCloud) -> CorrespondenceMatrix:
    """Hard matrix pairing each source point with its nearest target.

    Both clouds must be expressed in the same frame. The mapping may be
    many-to-one.
    """
    idx = nearest_neighbor_indices(X.points, Y_aligned.points)
    return CorrespondenceMatrix(_one_hot(len(Y_aligned), idx), hard=True)


def ground_truth_correspondence_outlier(
    X: PointCloud, Y_aligned: PointCloud, threshold: float
) -> CorrespondenceMatrix:
    """Hard outlier-augmented matrix: points farther than threshold from every target go to the outlier row."""
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    d = _pairwise_distances(X.points, Y_aligned.points)
    idx = np.argmin(d, axis=1)
    best = d[np.arange(len(X)), idx]
    n_y = len(Y_aligned)
    idx = np.where(best <= threshold, idx, n_y)
    return CorrespondenceMatrix(_one_hot(n_y + 1, idx), hard=True, outlier_augmented=True)


def column_softmax(logits: np.ndarray) -> np.ndarray:
    """Column-wise softmax, stabilized by subtracting each column's max logit."""
    z = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def _check_features(F: np.ndarray, name: str) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
        raise ValueError(f"{name} must be a 2D (embedding_dim, n_points) matrix")
    if not np.all(np.isfinite(F)):
        raise ValueError(f"{name} must be finite")
    return F


def soft_correspondence(F_X: np.ndarray, F_Y: np.ndarray) -> CorrespondenceMatrix:
    """Soft matrix from per-point features: column softmax of F_Y^T F_X."""
    F_X = _check_features(F_X, "F_X")
    F_Y = _check_features(F_Y, "F_Y")
    if F_X.shape[0] != F_Y.shape[0]:
        raise ValueError(f"embedding dims differ: {F_X.shape[0]} vs {F_Y.shape[0]}")
    return CorrespondenceMatrix(column_softmax(F_Y.T @ F_X))


def outlier_embedding(F_Y: np.ndarray, b: float = -1.0) -> np.ndarray:
    """Feature vector representing "matches nothing".

    Minimum-norm least-squares solution of F_Y^T f = b 1, via SVD
    pseudoinverse with singular values below 1e-10 * sigma_max dropped.
    With b < 0 the embedding projects negatively on every target feature,
    so its softmax row only wins for points unlike all targets.
    """
    F_Y = _check_features(F_Y, "F_Y")
    if not np.any(F_Y != 0.0):
        warnings.warn("all-zero feature matrix: outlier embedding degenerates to the zero vector")
    target = float(b) * np.ones(F_Y.shape[1])
    f, *_ = np.linalg.lstsq(F_Y.T, target, rcond=1e-10)
    for _ in range(2):  # refine: the raw solve leaves a normal-equation residual ~ feature scale
        correction, *_ = np.linalg.lstsq(F_Y.T, target - F_Y.T @ f, rcond=1e-10)
        f = f + correction
    return f


def soft_correspondence_outlier(
    F_X: np.ndarray, F_Y: np.ndarray, f_outlier: np.ndarray
) -> CorrespondenceMatrix:
    """Soft outlier-augmented matrix: softmax over targets plus the outlier embedding."""
    F_X = _check_features(F_X, "F_X")
    F_Y = _check_features(F_Y, "F_Y")
    f_o = np.asarray(f_outlier, dtype=float).reshape(-1)
    if F_X.shape[0] != F_Y.shape[0] or f_o.shape[0] != F_Y.shape[0]:
        raise ValueError("embedding dims of F_X, F_Y and the outlier embedding must match")
    stacked = np.concatenate([F_Y, f_o[:, None]], axis=1)
    return CorrespondenceMatrix(column_softmax(stacked.T @ F_X), outlier_augmented=True)


def sinkhorn_normalize(
    M: np.ndarray, iters: int = 5, eps: float = 1e-9, outlier_augmented: bool = False
) -> CorrespondenceMatrix:
    """Alternating row/column normalization of a nonnegative matrix.

    Each iteration normalizes rows then columns, so the result always ends
    column-stochastic. eps is added up front to keep zero rows/columns
    harmless.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2D matrix")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if np.any(M < 0.0) or not np.all(np.isfinite(M)):
        raise ValueError("entries must be finite and nonnegative")
    if not np.any(M > 0.0):
        raise NumericalError("cannot normalize an all-zero matrix")
    W = M + eps
    for _ in range(iters):
        W = W / W.sum(axis=1, keepdims=True)
        W = W / W.sum(axis=0, keepdims=True)
    return CorrespondenceMatrix(W, outlier_augmented=outlier_augmented)


def hard_assign(C: CorrespondenceMatrix) -> np.ndarray:
    """Argmax decode: the matched row index per source point, ties to the lowest index.

    For outlier-augmented matrices the value n_target marks the outlier class.
    """
    return np.argmax(C.entries, axis=0)


def correspondence_accuracy(C_pred: CorrespondenceMatrix, C_star: CorrespondenceMatrix) -> float:
    """Percentage of source points whose decoded match agrees with the reference."""
    if C_pred.n_source != C_star.n_source:
        raise ValueError(f"source counts differ: {C_pred.n_source} vs {C_star.n_source}")
    pred = hard_assign(C_pred)
    truth = hard_assign(C_star)
    return 100.0 * float(np.mean(pred == truth))
