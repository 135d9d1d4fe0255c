"""Trainable feature embedder and the cross-entropy correspondence loss.

The embedder is a small MLP over rotation-invariant per-point descriptors,
so the matching it induces cannot depend on the initial misalignment.
Feature towers for source and target share one set of weights. Training
minimizes the per-point mean of the correspondence cross-entropy; pose
errors are evaluation metrics only and are never differentiated through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .align import weighted_align
from .correspondence import (
    CorrespondenceMatrix,
    column_softmax,
    correspondence_accuracy,
    soft_correspondence,
)
from .errors import DataError, NumericalError
from .geom import (
    PointCloud,
    RigidTransform,
    _pairwise_distances,
    apply_transform,
    chamfer_distance,
    rotation_error,
    translation_rmse,
)
from .seeding import rng_from

DESCRIPTOR_DIM = 7
CHECKPOINT_MAGIC = "corrmatch-checkpoint v1"


def point_descriptors(X: PointCloud, k: int) -> np.ndarray:
    """Rotation-invariant per-point descriptors, shape (N, 7).

    Per point: distance to the cloud centroid; mean, min, and max distance
    to its k nearest neighbors; and the three eigenvalues of the local
    k-neighbor covariance, sorted descending.
    """
    n = len(X)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    pts = X.points
    d = _pairwise_distances(pts, pts)
    np.fill_diagonal(d, np.inf)
    nn_idx = np.argsort(d, axis=1, kind="stable")[:, :k]
    nn_d = np.take_along_axis(d, nn_idx, axis=1)
    desc = np.empty((n, DESCRIPTOR_DIM))
    desc[:, 0] = np.linalg.norm(pts - pts.mean(axis=0), axis=1)
    desc[:, 1] = nn_d.mean(axis=1)
    desc[:, 2] = nn_d.min(axis=1)
    desc[:, 3] = nn_d.max(axis=1)
    for i in range(n):
        nb = pts[nn_idx[i]]
        centered = nb - nb.mean(axis=0)
        cov = (centered.T @ centered) / k
        desc[i, 4:7] = np.linalg.eigvalsh(cov)[::-1]
    return desc


@dataclass
class FeatureNet:
    """MLP mapping per-point descriptors to embedding columns.

    Hidden layers use tanh; the output layer is linear. weights[i] has
    shape (fan_out, fan_in).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    descriptor_k: int

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be nonempty parallel lists")
        prev = None
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError("each bias must match its weight's fan-out")
            if prev is not None and W.shape[1] != prev:
                raise ValueError("layer shapes do not chain")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("parameters must be finite")
            prev = W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @classmethod
    def init(
        cls,
        seed: int,
        in_dim: int = DESCRIPTOR_DIM,
        hidden: tuple[int, ...] = (64, 64),
        out_dim: int = 32,
        descriptor_k: int = 8,
    ) -> "FeatureNet":
        """Seeded Glorot-uniform initialization: U(+-sqrt(6 / (fan_in + fan_out)))."""
        rng = rng_from(seed, "featurenet-init")
        dims = (in_dim, *hidden, out_dim)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, descriptor_k)

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out


def _forward(net: FeatureNet, descriptors: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Column-wise forward pass; returns (features (N_e, N), activations for backprop)."""
    if descriptors.ndim != 2 or descriptors.shape[1] != net.in_dim:
        raise ValueError(f"descriptor dim {descriptors.shape} does not match net input {net.in_dim}")
    a = descriptors.T
    acts = [a]
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = W @ a + b[:, None]
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return a, acts


def _backward(net: FeatureNet, acts: list[np.ndarray], d_out: np.ndarray) -> list[np.ndarray]:
    """Gradients w.r.t. parameters, in parameters() order."""
    grads: list[np.ndarray] = []
    da = d_out
    for i in reversed(range(len(net.weights))):
        if i != len(net.weights) - 1:
            da = da * (1.0 - acts[i + 1] ** 2)  # through tanh
        grads.append(da.sum(axis=1))  # bias
        grads.append(da @ acts[i].T)  # weight
        da = net.weights[i].T @ da
    grads.reverse()
    return grads


def featurize(net: FeatureNet, X: PointCloud) -> np.ndarray:
    """Per-point feature columns, shape (N_e, N)."""
    features, _ = _forward(net, point_descriptors(X, net.descriptor_k))
    return features


class CrossEntropy(NamedTuple):
    total: float
    mean: float


def _check_ce_inputs(logits: np.ndarray, C_star: CorrespondenceMatrix) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    if not C_star.hard:
        raise ValueError("the correspondence cross-entropy needs a hard (one-hot) reference")
    if logits.shape != C_star.entries.shape:
        raise ValueError(f"logit shape {logits.shape} does not match reference {C_star.entries.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return logits


def cross_entropy_loss(logits: np.ndarray, C_star: CorrespondenceMatrix) -> CrossEntropy:
    """Multi-class cross entropy of raw matching logits against a hard reference.

    Column i contributes log-sum-exp(logits[:, i]) minus the logit selected
    by the reference one-hot; reported as the total and the per-point mean.
    """
    logits = _check_ce_inputs(logits, C_star)
    m = logits.max(axis=0)
    lse = m + np.log(np.exp(logits - m).sum(axis=0))
    picked = (logits * C_star.entries).sum(axis=0)
    total = float((lse - picked).sum())
    return CrossEntropy(total, total / logits.shape[1])


def cross_entropy_grad(logits: np.ndarray, C_star: CorrespondenceMatrix) -> np.ndarray:
    """d(total loss)/d(logits): per column, softmax(logits) minus the one-hot reference."""
    logits = _check_ce_inputs(logits, C_star)
    return column_softmax(logits) - C_star.entries


def dcp_loss(T_pred: RigidTransform, T_true: RigidTransform) -> float:
    """Pose-space metric: ||R_pred^T R_true - I||_F^2 + ||t_pred - t_true||^2."""
    d_rot = T_pred.rotation.T @ T_true.rotation - np.eye(3)
    d_t = T_pred.translation - T_true.translation
    return float(np.sum(d_rot**2) + np.sum(d_t**2))


def rpmnet_reg_loss(X: PointCloud, T_pred: RigidTransform, T_true: RigidTransform) -> float:
    """Mean elementwise L1 distance between the two transformed copies of X."""
    a = X.points @ T_true.rotation.T + T_true.translation
    b = X.points @ T_pred.rotation.T + T_pred.translation
    return float(np.mean(np.abs(a - b).sum(axis=1)))


@dataclass(frozen=True)
class RegistrationSample:
    """One (source, transformed target, reference matching) training example."""

    source: PointCloud
    target: PointCloud
    truth: CorrespondenceMatrix
    transform: RigidTransform
    source_desc: np.ndarray
    target_desc: np.ndarray


def make_sample(
    source: PointCloud,
    target: PointCloud,
    truth: CorrespondenceMatrix,
    transform: RigidTransform,
    descriptor_k: int,
) -> RegistrationSample:
    """Bundle a training example with precomputed descriptors (clouds are immutable)."""
    return RegistrationSample(
        source,
        target,
        truth,
        transform,
        point_descriptors(source, descriptor_k),
        point_descriptors(target, descriptor_k),
    )


@dataclass
class TrainState:
    """Net parameters plus Adam accumulators and hyperparameters."""

    net: FeatureNet
    moment1: list[np.ndarray]
    moment2: list[np.ndarray]
    step: int
    seed: int
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    @classmethod
    def init(
        cls,
        seed: int,
        learning_rate: float = 1e-3,
        batch_size: int = 8,
        epochs: int = 50,
        embed_dim: int = 32,
        descriptor_k: int = 8,
    ) -> "TrainState":
        net = FeatureNet.init(seed, out_dim=embed_dim, descriptor_k=descriptor_k)
        params = net.parameters()
        return cls(
            net=net,
            moment1=[np.zeros_like(p) for p in params],
            moment2=[np.zeros_like(p) for p in params],
            step=0,
            seed=seed,
            learning_rate=learning_rate,
            batch_size=batch_size,
            epochs=epochs,
        )


def _sample_loss_and_grads(
    net: FeatureNet, sample: RegistrationSample
) -> tuple[float, list[np.ndarray], CorrespondenceMatrix]:
    """Mean CE loss, parameter gradients (both towers, shared weights), and the soft matching."""
    f_x, acts_x = _forward(net, sample.source_desc)
    f_y, acts_y = _forward(net, sample.target_desc)
    logits = f_y.T @ f_x
    loss = cross_entropy_loss(logits, sample.truth).mean
    g = cross_entropy_grad(logits, sample.truth) / logits.shape[1]  # d(mean)/d(logits)
    grads_x = _backward(net, acts_x, f_y @ g)
    grads_y = _backward(net, acts_y, f_x @ g.T)
    grads = [gx + gy for gx, gy in zip(grads_x, grads_y)]
    soft = CorrespondenceMatrix(column_softmax(logits))
    return loss, grads, soft


def _adam_step(state: TrainState, grads: list[np.ndarray]) -> None:
    state.step += 1
    t = state.step
    for p, g, m, v in zip(state.net.parameters(), grads, state.moment1, state.moment2):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g**2
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.adam_eps)


def train_epoch(state: TrainState, dataset: list[RegistrationSample]) -> tuple[TrainState, dict]:
    """One pass over the dataset with Adam updates per batch.

    Returns the (mutated) state and epoch metrics: mean per-point loss,
    correspondence accuracy, rotation errors, and translation RMSE from
    aligning through the soft matching. Alignment failures (degenerate
    early-training matchings) are counted and excluded from pose metrics.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    order = rng_from(state.seed, "epoch-shuffle", state.step).permutation(len(dataset))
    losses: list[float] = []
    accuracies: list[float] = []
    rot_geo: list[float] = []
    rot_mae: list[float] = []
    t_pred: list[np.ndarray] = []
    t_true: list[np.ndarray] = []
    failures = 0
    for start in range(0, len(order), state.batch_size):
        batch = [dataset[i] for i in order[start : start + state.batch_size]]
        batch_grads: list[np.ndarray] | None = None
        for sample in batch:
            loss, grads, soft = _sample_loss_and_grads(state.net, sample)
            if not math.isfinite(loss):
                raise NumericalError(f"training diverged: non-finite loss at step {state.step}")
            losses.append(loss)
            accuracies.append(correspondence_accuracy(soft, sample.truth))
            try:
                fit = weighted_align(sample.source, sample.target, soft)
                rot_geo.append(rotation_error(fit.transform.rotation, sample.transform.rotation))
                rot_mae.append(
                    rotation_error(fit.transform.rotation, sample.transform.rotation, "euler-mae")
                )
                t_pred.append(fit.transform.translation)
                t_true.append(sample.transform.translation)
            except NumericalError:
                failures += 1
            if batch_grads is None:
                batch_grads = grads
            else:
                batch_grads = [a + b for a, b in zip(batch_grads, grads)]
        assert batch_grads is not None
        _adam_step(state, [g / len(batch) for g in batch_grads])
    metrics = {
        "loss": float(np.mean(losses)),
        "correspondence_pct": float(np.mean(accuracies)),
        "rotation_geodesic_deg": float(np.mean(rot_geo)) if rot_geo else float("nan"),
        "rotation_euler_mae_deg": float(np.mean(rot_mae)) if rot_mae else float("nan"),
        "translation_rmse": translation_rmse(np.array(t_pred), np.array(t_true)) if t_pred else float("nan"),
        "alignment_failures": float(failures),
    }
    return state, metrics


def evaluate(net: FeatureNet, samples: list[RegistrationSample]) -> dict:
    """Held-out metrics for a trained net (no parameter updates)."""
    losses, accuracies, rot_geo, rot_mae, chamfers = [], [], [], [], []
    t_pred, t_true = [], []
    failures = 0
    for sample in samples:
        f_x, _ = _forward(net, sample.source_desc)
        f_y, _ = _forward(net, sample.target_desc)
        logits = f_y.T @ f_x
        losses.append(cross_entropy_loss(logits, sample.truth).mean)
        soft = CorrespondenceMatrix(column_softmax(logits))
        accuracies.append(correspondence_accuracy(soft, sample.truth))
        try:
            fit = weighted_align(sample.source, sample.target, soft)
            rot_geo.append(rotation_error(fit.transform.rotation, sample.transform.rotation))
            rot_mae.append(rotation_error(fit.transform.rotation, sample.transform.rotation, "euler-mae"))
            t_pred.append(fit.transform.translation)
            t_true.append(sample.transform.translation)
            chamfers.append(chamfer_distance(apply_transform(fit.transform, sample.source), sample.target))
        except NumericalError:
            failures += 1
    return {
        "loss": float(np.mean(losses)),
        "correspondence_pct": float(np.mean(accuracies)),
        "rotation_geodesic_deg": float(np.mean(rot_geo)) if rot_geo else float("nan"),
        "rotation_euler_mae_deg": float(np.mean(rot_mae)) if rot_mae else float("nan"),
        "translation_rmse": translation_rmse(np.array(t_pred), np.array(t_true)) if t_pred else float("nan"),
        "chamfer": float(np.mean(chamfers)) if chamfers else float("nan"),
        "alignment_failures": float(failures),
    }


def predict_soft_correspondence(net: FeatureNet, X: PointCloud, Y: PointCloud) -> CorrespondenceMatrix:
    """Featurize both clouds and form the soft matching."""
    return soft_correspondence(featurize(net, X), featurize(net, Y))


def save_checkpoint(net: FeatureNet, path) -> None:
    """Text checkpoint: format tag, descriptor k, then named tensors with shape headers."""
    with open(path, "w", encoding="ascii") as f:
        f.write(CHECKPOINT_MAGIC + "\n")
        f.write(f"descriptor_k {net.descriptor_k}\n")
        for i, (W, b) in enumerate(zip(net.weights, net.biases)):
            for name, tensor in ((f"W{i}", W), (f"b{i}", b)):
                dims = " ".join(str(d) for d in tensor.shape)
                f.write(f"tensor {name} {tensor.ndim} {dims}\n")
                f.write(" ".join(repr(float(v)) for v in tensor.ravel()) + "\n")


def load_checkpoint(path) -> FeatureNet:
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a corrmatch checkpoint (bad format tag)")
    if len(lines) < 2 or not lines[1].startswith("descriptor_k "):
        raise DataError(f"{path}: missing descriptor_k header")
    descriptor_k = int(lines[1].split()[1])
    tensors: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split()
        if head[0] != "tensor" or len(head) < 3:
            raise DataError(f"{path}: malformed tensor header at line {i + 1}")
        name, ndim = head[1], int(head[2])
        shape = tuple(int(d) for d in head[3 : 3 + ndim])
        values = np.array([float(v) for v in lines[i + 1].split()])
        if values.size != int(np.prod(shape)):
            raise DataError(f"{path}: tensor {name} has {values.size} values, expected {np.prod(shape)}")
        tensors[name] = values.reshape(shape)
        i += 2
    weights, biases = [], []
    layer = 0
    while f"W{layer}" in tensors:
        if f"b{layer}" not in tensors:
            raise DataError(f"{path}: missing bias b{layer}")
        weights.append(tensors[f"W{layer}"])
        biases.append(tensors[f"b{layer}"])
        layer += 1
    if not weights:
        raise DataError(f"{path}: no layers found")
    return FeatureNet(weights, biases, descriptor_k)
