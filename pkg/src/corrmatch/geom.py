"""Point-cloud and rigid-transform algebra, synthetic shapes, and metrics.

Conventions: clouds are (N, 3) float64 arrays, one point per row, and the
row index is the point's identity. Rotation vectors are axis-angle
3-vectors whose norm is the angle in radians. Euler-angle error metrics
use the intrinsic ZYX convention; the geodesic metric is provided as the
convention-free alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError

ROTATION_TOL = 1e-9

SHAPE_KINDS = ("asymmetric-blob", "box-surface", "helix", "L-bracket")


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points; order carries identity."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected points of shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


def _check_rotation(R, tol: float = ROTATION_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("expected a finite 3x3 rotation matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValueError("matrix is not orthonormal within tolerance")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix determinant differs from +1 (improper rotation)")
    return R


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (proper, orthonormal) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        R = np.ascontiguousarray(R)
        R.setflags(write=False)
        t = np.ascontiguousarray(t)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        """Composition: (self @ other) applies other first, then self."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    @property
    def rotation_vector(self) -> np.ndarray:
        return matrix_to_rotvec(self.rotation)


def skew(v) -> np.ndarray:
    """Cross-product matrix of a 3-vector."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotvec_to_matrix(v) -> np.ndarray:
    """Rodrigues formula: axis-angle 3-vector to rotation matrix.

    The zero vector maps to the identity.
    """
    v = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError("rotation vector must be finite")
    theta = float(np.linalg.norm(v))
    if theta < 1e-12:
        return np.eye(3)
    K = skew(v / theta)
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def matrix_to_rotvec(R) -> np.ndarray:
    """Inverse of rotvec_to_matrix, with angle wrapped into [0, pi].

    At angles near pi the sine-based formula degenerates, so the axis is
    recovered from the symmetric part of R; when the angle is pi exactly the
    sign of the axis is a pure convention, fixed here so that the first
    nonzero component is positive.
    """
    R = _check_rotation(R)
    cos_theta = min(1.0, max(-1.0, (np.trace(R) - 1.0) / 2.0))
    theta = math.acos(cos_theta)
    # w = sin(theta) * axis, from the antisymmetric part
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = float(np.linalg.norm(w))
    if theta < 1e-6:
        return w  # first order: |v - w| = O(theta^3)
    if theta < math.pi - 1e-4:
        return (theta / s) * w
    M = (0.5 * (R + R.T) - cos_theta * np.eye(3)) / (1.0 - cos_theta)  # = axis axis^T
    i = int(np.argmax(np.diag(M)))
    axis = np.empty(3)
    axis[i] = math.sqrt(max(M[i, i], 0.0))
    for j in range(3):
        if j != i:
            axis[j] = M[i, j] / axis[i]
    axis /= np.linalg.norm(axis)
    if s > 1e-8:
        if float(axis @ w) < 0.0:
            axis = -axis
    else:
        for c in axis:
            if abs(c) > 1e-12:
                if c < 0.0:
                    axis = -axis
                break
    return theta * axis


def sample_misalignment(rng: np.random.Generator, theta0: float, t_bound: float) -> RigidTransform:
    """Random misalignment: uniform axis, angle U(-theta0, theta0), translation U(-t_bound, t_bound) per component.

    The axis is uniform on the unit sphere (normalized Gaussian draw). Note
    the angle distribution is uniform, not Haar-uniform over rotations.
    """
    if not 0.0 <= theta0 <= math.pi + 1e-12:
        raise ValueError("theta0 must lie in [0, pi]")
    if t_bound < 0.0:
        raise ValueError("t_bound must be nonnegative")
    axis = rng.normal(size=3)
    norm = float(np.linalg.norm(axis))
    while norm < 1e-12:
        axis = rng.normal(size=3)
        norm = float(np.linalg.norm(axis))
    axis /= norm
    theta = float(rng.uniform(-theta0, theta0))
    translation = rng.uniform(-t_bound, t_bound, size=3)
    return RigidTransform(rotvec_to_matrix(theta * axis), translation)


def apply_transform(T: RigidTransform, X: PointCloud) -> PointCloud:
    """Map every point to R x + t, preserving order."""
    return PointCloud(X.points @ T.rotation.T + T.translation)


def crop_partial(
    X: PointCloud, keep_fraction: float, rng: np.random.Generator
) -> tuple[PointCloud, np.ndarray]:
    """Keep the points on one side of a random plane through the centroid.

    A random unit normal defines signed distances from the centroid plane;
    the round(keep_fraction * N) points with the largest signed distance
    survive (ties broken by lower index), which removes the points farthest
    on the discarded side. Returns (cropped cloud, survivor indices) with
    the original ordering preserved.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    n = len(X)
    n_keep = int(math.floor(keep_fraction * n + 0.5))
    if n_keep < 3:
        raise NumericalError(f"too few survivors: keep_fraction {keep_fraction} of {n} points leaves {n_keep} < 3")
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    signed = (X.points - X.centroid()) @ normal
    order = np.argsort(-signed, kind="stable")
    keep = np.sort(order[:n_keep])
    return PointCloud(X.points[keep]), keep


def _min_pair_distance(pts: np.ndarray) -> float:
    d = _pairwise_distances(pts, pts)
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def _blob(n: int, rng: np.random.Generator) -> np.ndarray:
    pts = rng.normal(size=(n, 3)) * np.array([0.50, 0.33, 0.21])
    pts[:, 0] += 0.25 * np.sin(2.3 * pts[:, 1]) + 0.15 * pts[:, 2] ** 2
    pts[:, 2] += 0.20 * np.cos(1.9 * pts[:, 0])
    pts -= pts.mean(axis=0)
    pts *= 0.5 / np.max(np.abs(pts))
    return pts


def _box_surface(n: int, rng: np.random.Generator) -> np.ndarray:
    half = np.array([0.5, 0.35, 0.2])
    # face k is the pair of faces normal to axis k; weight by face area
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    weights = np.repeat(areas, 2)
    weights = weights / weights.sum()
    faces = rng.choice(6, size=n, p=weights)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    for row, (face, (u, v)) in enumerate(zip(faces, uv)):
        axis = face // 2
        sign = 1.0 if face % 2 == 0 else -1.0
        others = [a for a in range(3) if a != axis]
        pts[row, axis] = sign * half[axis]
        pts[row, others[0]] = u * half[others[0]]
        pts[row, others[1]] = v * half[others[1]]
    return pts


def _helix(n: int) -> np.ndarray:
    t = np.linspace(0.0, 4.0 * math.pi, n)
    r = 0.35 + 0.02 * t
    pts = np.stack([r * np.cos(t), r * np.sin(t), 0.08 * t], axis=1)
    pts[:, 2] -= pts[:, 2].mean()
    return pts


def _l_bracket(n: int, rng: np.random.Generator) -> np.ndarray:
    # two slabs sharing a corner; sampled proportionally to volume
    slab_a = np.array([[-0.5, 0.5], [-0.5, -0.3], [-0.1, 0.1]])
    slab_b = np.array([[-0.5, -0.3], [-0.3, 0.5], [-0.1, 0.1]])
    vol_a = np.prod(slab_a[:, 1] - slab_a[:, 0])
    vol_b = np.prod(slab_b[:, 1] - slab_b[:, 0])
    in_a = rng.random(n) < vol_a / (vol_a + vol_b)
    u = rng.uniform(0.0, 1.0, size=(n, 3))
    pts = np.empty((n, 3))
    for slab, mask in ((slab_a, in_a), (slab_b, ~in_a)):
        lo, hi = slab[:, 0], slab[:, 1]
        pts[mask] = lo + u[mask] * (hi - lo)
    return pts


def generate_shape(kind: str, n: int, rng: np.random.Generator) -> PointCloud:
    """Synthetic test cloud, deterministic for a given (kind, n, rng seed).

    Kinds: asymmetric-blob (warped anisotropic Gaussian), box-surface,
    helix (deterministic in n; rng unused), L-bracket. All are free of
    continuous rotational symmetry, so correspondence is well posed.
    """
    if n < 8:
        raise ValueError("n must be at least 8")
    if kind == "helix":
        return PointCloud(_helix(n))
    if kind == "asymmetric-blob":
        gen = _blob
    elif kind == "box-surface":
        gen = _box_surface
    elif kind == "L-bracket":
        gen = _l_bracket
    else:
        raise ValueError(f"unknown shape kind {kind!r}; expected one of {SHAPE_KINDS}")
    pts = gen(n, rng)
    while _min_pair_distance(pts) <= 1e-5:  # collisions have ~zero probability; resample defensively
        pts = gen(n, rng)
    return PointCloud(pts)


def euler_zyx_angles(R) -> np.ndarray:
    """Intrinsic ZYX Euler angles (yaw, pitch, roll) of a rotation, in radians."""
    R = _check_rotation(R)
    sin_pitch = min(1.0, max(-1.0, -float(R[2, 0])))
    pitch = math.asin(sin_pitch)
    if abs(sin_pitch) > 1.0 - 1e-9:  # gimbal lock: yaw and roll are coupled
        yaw = math.atan2(-R[0, 1], R[1, 1])
        roll = 0.0
    else:
        yaw = math.atan2(R[1, 0], R[0, 0])
        roll = math.atan2(R[2, 1], R[2, 2])
    return np.array([yaw, pitch, roll])


def rotation_error(R_pred, R_true, metric: str = "geodesic") -> float:
    """Rotation distance in degrees.

    geodesic: angle of R_pred^T R_true. euler-mae / euler-rmse: mean
    absolute / RMS of the intrinsic ZYX Euler angles of R_pred^T R_true.
    """
    rel = _check_rotation(R_pred).T @ _check_rotation(R_true)
    if metric == "geodesic":
        # atan2 of (sin, cos) stays accurate near 0 and pi, unlike acos of the trace
        cos_theta = (np.trace(rel) - 1.0) / 2.0
        w = 0.5 * np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
        return math.degrees(math.atan2(float(np.linalg.norm(w)), cos_theta))
    angles = euler_zyx_angles(rel)
    if metric == "euler-mae":
        return math.degrees(float(np.mean(np.abs(angles))))
    if metric == "euler-rmse":
        return math.degrees(float(np.sqrt(np.mean(angles**2))))
    raise ValueError(f"unknown rotation error metric {metric!r}")


def translation_rmse(t_pred, t_true) -> float:
    """Euclidean translation error; RMSE over rows when given (N, 3) batches."""
    a = np.asarray(t_pred, dtype=float)
    b = np.asarray(t_true, dtype=float)
    if a.shape != b.shape:
        raise ValueError("translation arrays must have matching shapes")
    if a.ndim == 1:
        return float(np.linalg.norm(a - b))
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact differences (not the quadratic expansion) so self-distances are exactly zero
    out = np.empty((a.shape[0], b.shape[0]))
    chunk = max(1, 1_000_000 // max(1, b.shape[0]))
    for start in range(0, a.shape[0], chunk):
        diff = a[start : start + chunk, None, :] - b[None, :, :]
        out[start : start + chunk] = np.sqrt((diff * diff).sum(axis=2))
    return out


def chamfer_distance(X: PointCloud, Y: PointCloud) -> float:
    """Symmetric mean nearest-neighbor distance (plain distances, not squared)."""
    d = _pairwise_distances(X.points, Y.points)
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def save_xyz(cloud: PointCloud, path) -> None:
    """Write an ASCII XYZ file: one point per line, three floats, space separated."""
    with open(path, "w", encoding="ascii") as f:
        for p in cloud.points:
            f.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")


def load_xyz(path) -> PointCloud:
    """Read an ASCII XYZ file; '#'-prefixed and blank lines are ignored."""
    rows = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}: line {lineno}: expected 3 values, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: not a number: {line!r}") from None
    if not rows:
        raise DataError(f"{path}: no points found")
    return PointCloud(np.array(rows))
