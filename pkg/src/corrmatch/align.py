"""Closed-form rigid alignment from correspondences, plus an ICP baseline.

A single SVD pathway (Arun/Kabsch with determinant correction) backs the
paired, soft-weighted, and outlier-weighted solvers; the closed-form
methods are interchangeable for this purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correspondence import CorrespondenceMatrix, nearest_neighbor_indices
from .errors import NumericalError
from .geom import PointCloud, RigidTransform, _pairwise_distances, apply_transform, rotation_error


@dataclass(frozen=True)
class AlignmentResult:
    """Estimated transform with its RMS pairing residual and total inlier weight."""

    transform: RigidTransform
    residual: float
    effective_weight: float


@dataclass(frozen=True)
class IcpStep:
    residual: float
    rotation_change_deg: float
    translation_change: float


@dataclass(frozen=True)
class IcpResult:
    alignment: AlignmentResult
    steps: tuple[IcpStep, ...]
    converged: bool


def _kabsch_rotation(H: np.ndarray) -> np.ndarray:
    """Best proper rotation for covariance H = sum_i w_i x~_i y~_i^T.

    The sign of the smallest singular direction is flipped when needed so
    det(R) = +1 even if the unconstrained optimum is a reflection.
    """
    U, S, Vt = np.linalg.svd(H)
    if S[0] <= 1e-12 or S[1] <= 1e-12 * S[0]:
        raise NumericalError("degenerate configuration: correspondence covariance has rank <= 1")
    V = Vt.T
    d = 1.0 if np.linalg.det(V @ U.T) > 0.0 else -1.0
    return V @ np.diag([1.0, 1.0, d]) @ U.T


def _fit_paired(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> AlignmentResult:
    total = float(w.sum())
    if total < 1e-12:
        raise NumericalError("total correspondence weight is zero")
    x_bar = (w @ x) / total
    y_bar = (w @ y) / total
    xc = x - x_bar
    yc = y - y_bar
    H = (xc * w[:, None]).T @ yc
    R = _kabsch_rotation(H)
    t = y_bar - R @ x_bar
    err = np.linalg.norm(x @ R.T + t - y, axis=1)
    residual = float(np.sqrt((w * err**2).sum() / total))
    return AlignmentResult(RigidTransform(R, t), residual, total)


def horn_align(X: PointCloud, Y_paired: PointCloud) -> AlignmentResult:
    """Closed-form argmin over (R, t) of the paired squared error sum.

    X and Y_paired must have equal length; point i of X corresponds to
    point i of Y_paired.
    """
    if len(X) != len(Y_paired):
        raise ValueError(f"paired clouds must have equal length, got {len(X)} vs {len(Y_paired)}")
    if len(X) < 3:
        raise NumericalError(f"underdetermined: need at least 3 point pairs, got {len(X)}")
    return _fit_paired(X.points, Y_paired.points, np.ones(len(X)))


def weighted_align(X: PointCloud, Y: PointCloud, C: CorrespondenceMatrix) -> AlignmentResult:
    """Alignment through a (possibly soft) correspondence matrix.

    Each source point's target is the probability-weighted blend of Y's
    points (Y_hat = Y C), then the paired solver runs on (X, Y_hat).
    """
    if C.outlier_augmented:
        raise ValueError("use weighted_align_outlier for outlier-augmented matrices")
    if C.entries.shape != (len(Y), len(X)):
        raise ValueError(
            f"correspondence shape {C.entries.shape} does not match clouds ({len(Y)}, {len(X)})"
        )
    y_hat = C.entries.T @ Y.points
    return horn_align(X, PointCloud(y_hat))


def weighted_align_outlier(X: PointCloud, Y: PointCloud, C_O: CorrespondenceMatrix) -> AlignmentResult:
    """Outlier-weighted alignment: the last row of C_O downweights each source point.

    Inlier weight w_i = 1 - P(outlier); each column's target rows are
    renormalized to blend a target point, columns with no inlier mass get
    weight zero, and a weighted Procrustes solve runs on the rest.
    """
    if not C_O.outlier_augmented:
        raise ValueError("expected an outlier-augmented correspondence matrix")
    if C_O.entries.shape != (len(Y) + 1, len(X)):
        raise ValueError(
            f"correspondence shape {C_O.entries.shape} does not match clouds ({len(Y) + 1}, {len(X)})"
        )
    w = np.clip(1.0 - C_O.entries[-1, :], 0.0, None)
    inlier = C_O.entries[:-1, :]
    mass = inlier.sum(axis=0)
    ok = mass > 1e-12
    w = np.where(ok, w, 0.0)
    y_hat = np.zeros((len(X), 3))
    y_hat[ok] = (inlier[:, ok] / mass[ok]).T @ Y.points
    total = float(w.sum())
    if total < 3.0:
        raise NumericalError(f"insufficient inliers: effective weight {total:.3g} < 3")
    return _fit_paired(X.points, y_hat, w)


def icp(
    X: PointCloud,
    Y: PointCloud,
    T_init: RigidTransform | None = None,
    max_iters: int = 50,
    tol: float = 1e-6,
) -> IcpResult:
    """Iterative closest point: alternate nearest-neighbor pairing and closed-form alignment.

    Convergence is declared when one update changes the rotation by less
    than tol radians (geodesic) and the translation by less than tol. Only
    locally optimal: large misalignments may settle far from the truth.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    T = T_init if T_init is not None else RigidTransform.identity()
    steps: list[IcpStep] = []
    converged = False
    residual = float("nan")
    for _ in range(max_iters):
        moved = apply_transform(T, X)
        idx = nearest_neighbor_indices(moved.points, Y.points)
        fit = horn_align(X, PointCloud(Y.points[idx]))
        T_new = fit.transform
        rot_change = rotation_error(T.rotation, T_new.rotation, "geodesic")
        trans_change = float(np.linalg.norm(T.translation - T_new.translation))
        nn = _pairwise_distances(apply_transform(T_new, X).points, Y.points).min(axis=1)
        residual = float(np.sqrt(np.mean(nn**2)))
        steps.append(IcpStep(residual, rot_change, trans_change))
        T = T_new
        if math.radians(rot_change) < tol and trans_change < tol:
            converged = True
            break
    result = AlignmentResult(T, residual, float(len(X)))
    return IcpResult(result, tuple(steps), converged)
