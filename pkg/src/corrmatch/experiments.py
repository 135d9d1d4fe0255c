"""Experiment runner: robustness, misalignment, partial-cloud, outlier, and training studies.

Every study consumes an ExperimentConfig, derives all randomness from the
base seed via labelled child seeds, and writes a long-format CSV
(study,trial,seed,param,metric,value) whose data rows are byte-identical
across re-runs. A '#'-prefixed metadata block at the top of each file
echoes the full configuration and the tool version. Summary statistics go
to a separate *_summary.csv. Failed trials are recorded as rows with an
error code in the value column and excluded from summaries.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .align import horn_align, weighted_align, weighted_align_outlier
from .correspondence import (
    CorrespondenceMatrix,
    correspondence_accuracy,
    ground_truth_correspondence,
    ground_truth_correspondence_outlier,
    hard_assign,
    outlier_embedding,
    soft_correspondence,
)
from .errors import ConfigError, NumericalError
from .geom import (
    SHAPE_KINDS,
    PointCloud,
    RigidTransform,
    apply_transform,
    crop_partial,
    generate_shape,
    matrix_to_rotvec,
    rotation_error,
    rotvec_to_matrix,
    sample_misalignment,
)
from .learn import (
    FeatureNet,
    RegistrationSample,
    TrainState,
    evaluate,
    featurize,
    load_checkpoint,
    make_sample,
    save_checkpoint,
    train_epoch,
)
from .seeding import derive_seed, rng_from

BUCKETS_DEG = ((0, 30), (30, 60), (60, 90), (90, 120), (120, 150), (150, 180))

# capped at 90: with every pairing corrupted the matching-based error saturates
# near the random-rotation mean and the two curves cross
DEFAULT_CORRUPTION_GRID = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0)

CSV_HEADER = "study,trial,seed,param,metric,value"
SUMMARY_HEADER = "study,param,metric,mean,std,n"


@dataclass
class ExperimentConfig:
    """Knobs for every study; all fields are echoed into output metadata."""

    base_seed: int = 0
    shape: str = "asymmetric-blob"
    n_points: int = 512
    trials: int = 100
    theta0: float = math.pi / 2  # radians
    t_bound: float = 0.5
    corruption_grid: tuple[float, ...] = DEFAULT_CORRUPTION_GRID
    keep_fraction: float = 0.7
    outlier_fraction: float = 0.1
    outlier_threshold: float = 0.1
    outlier_b: float = -1.0
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 50
    train_clouds: int = 200
    heldout_clouds: int = 50
    embed_dim: int = 32
    descriptor_k: int = 8
    mode: str = "oracle"  # oracle | learned
    checkpoint: str = ""
    out_dir: str = "out"

    def validate(self) -> None:
        if self.trials < 0:
            raise ConfigError("trials must be nonnegative")
        if self.n_points < 8:
            raise ConfigError("n_points must be at least 8")
        if self.shape not in SHAPE_KINDS:
            raise ConfigError(f"shape must be one of {SHAPE_KINDS}, got {self.shape!r}")
        if not 0.0 <= self.theta0 <= math.pi + 1e-12:
            raise ConfigError("theta0 must lie in [0, pi] radians")
        if self.t_bound < 0.0:
            raise ConfigError("t_bound must be nonnegative")
        if not self.corruption_grid or any(not 0.0 <= p <= 100.0 for p in self.corruption_grid):
            raise ConfigError("corruption_grid percentages must lie in [0, 100]")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ConfigError("keep_fraction must lie in (0, 1]")
        if not 0.0 <= self.outlier_fraction <= 0.5:
            raise ConfigError("outlier_fraction must lie in [0, 0.5]")
        if not self.outlier_threshold > 0.0:
            raise ConfigError("outlier_threshold must be positive")
        if not self.learning_rate > 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.train_clouds < 1:
            raise ConfigError("train_clouds must be at least 1")
        if self.heldout_clouds < 0:
            raise ConfigError("heldout_clouds must be nonnegative")
        if self.embed_dim < 1 or self.descriptor_k < 1:
            raise ConfigError("embed_dim and descriptor_k must be at least 1")
        if self.descriptor_k >= self.n_points:
            raise ConfigError("descriptor_k must be smaller than n_points")
        if self.mode not in ("oracle", "learned"):
            raise ConfigError(f"mode must be 'oracle' or 'learned', got {self.mode!r}")

    def replace(self, **changes) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def metadata_items(self) -> list[tuple[str, str]]:
        items = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "corruption_grid":
                value = ",".join(repr(float(p)) for p in value)
            items.append((f.name, str(value)))
        return items

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse a flat 'key = value' config file; '#' starts a comment; unknown keys are rejected."""
        raw: dict[str, object] = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in _CONFIG_PARSERS:
                    raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
                if key in raw:
                    raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
                try:
                    raw[key] = _CONFIG_PARSERS[key](value)
                except ValueError:
                    raise ConfigError(f"{path}: line {lineno}: bad value for {key}: {value!r}") from None
        cfg = cls(**raw)
        cfg.validate()
        return cfg


def _parse_grid(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


_CONFIG_PARSERS = {
    "base_seed": int,
    "shape": str,
    "n_points": int,
    "trials": int,
    "theta0": float,
    "t_bound": float,
    "corruption_grid": _parse_grid,
    "keep_fraction": float,
    "outlier_fraction": float,
    "outlier_threshold": float,
    "outlier_b": float,
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
    "train_clouds": int,
    "heldout_clouds": int,
    "embed_dim": int,
    "descriptor_k": int,
    "mode": str,
    "checkpoint": str,
    "out_dir": str,
}


class TrialRow(NamedTuple):
    """One long-format CSV record; value is a float or an error code string."""

    study: str
    trial: int
    seed: int
    param: str
    metric: str
    value: float | str


@dataclass(frozen=True)
class StudyResult:
    rows: tuple[TrialRow, ...]
    csv_path: Path
    summary_path: Path | None
    checkpoint_path: Path | None = None


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    return repr(float(value))


def _metadata_lines(config: ExperimentConfig, study: str) -> list[str]:
    lines = [f"# corrmatch {__version__}", f"# study = {study}"]
    lines.extend(f"# {key} = {value}" for key, value in config.metadata_items())
    return lines


def _write_rows_csv(path: Path, config: ExperimentConfig, study: str, rows: list[TrialRow]) -> None:
    lines = _metadata_lines(config, study)
    lines.append(CSV_HEADER)
    for r in rows:
        lines.append(f"{r.study},{r.trial},{r.seed},{r.param},{r.metric},{_format_value(r.value)}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_summary_csv(path: Path, config: ExperimentConfig, study: str, rows: list[TrialRow]) -> None:
    groups: dict[tuple[str, str], list[float]] = {}
    excluded = 0
    order: list[tuple[str, str]] = []
    for r in rows:
        if isinstance(r.value, str) or not math.isfinite(float(r.value)):
            excluded += 1
            continue
        key = (r.param, r.metric)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(float(r.value))
    lines = _metadata_lines(config, study)
    lines.append(f"# excluded_rows = {excluded}")
    lines.append(SUMMARY_HEADER)
    for param, metric in order:
        vals = np.array(groups[(param, metric)])
        lines.append(
            f"{study},{param},{metric},{_format_value(vals.mean())},{_format_value(vals.std())},{vals.size}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _finish_study(
    out_dir: Path,
    config: ExperimentConfig,
    study: str,
    rows: list[TrialRow],
    checkpoint_path: Path | None = None,
) -> StudyResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{study}.csv"
    summary_path = out_dir / f"{study}_summary.csv"
    _write_rows_csv(csv_path, config, study, rows)
    _write_summary_csv(summary_path, config, study, rows)
    return StudyResult(tuple(rows), csv_path, summary_path, checkpoint_path)


def corrupt_correspondence(
    C_star: CorrespondenceMatrix, p: float, rng: np.random.Generator
) -> CorrespondenceMatrix:
    """Reassign floor(p% of the columns) to uniformly chosen wrong targets."""
    if not C_star.hard:
        raise ValueError("can only corrupt a hard correspondence matrix")
    if C_star.outlier_augmented:
        raise ValueError("corruption of outlier-augmented matrices is not defined")
    if not 0.0 <= p <= 100.0:
        raise ValueError("p must lie in [0, 100]")
    n_x, n_y = C_star.n_source, C_star.n_target
    if p > 0.0 and n_y < 2:
        raise ValueError("need at least 2 targets to corrupt a correspondence")
    count = int(math.floor(p * n_x / 100.0 + 1e-9))
    if count == 0:
        return C_star
    columns = rng.choice(n_x, size=count, replace=False)
    entries = np.array(C_star.entries)
    for col in columns:
        old = int(np.argmax(entries[:, col]))
        new = int(rng.integers(0, n_y - 1))
        if new >= old:
            new += 1  # resample among the other targets only
        entries[:, col] = 0.0
        entries[new, col] = 1.0
    return CorrespondenceMatrix(entries, hard=True)


def corrupt_rotation(v_star, p: float, rng: np.random.Generator) -> np.ndarray:
    """Add a random-direction perturbation of norm (p/100)*|v*| to a rotation vector."""
    v = np.asarray(v_star, dtype=float).reshape(3)
    if p < 0.0:
        raise ValueError("p must be nonnegative")
    norm = float(np.linalg.norm(v))
    if p > 0.0 and norm == 0.0:
        raise NumericalError("degenerate: a zero rotation vector cannot be proportionally corrupted")
    if p == 0.0:
        return v.copy()
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return v + (p / 100.0) * norm * direction


def run_perturbation_study(config: ExperimentConfig, out_dir) -> StudyResult:
    """Robustness comparison: corrupt matchings vs corrupt rotation vectors.

    Per trial: sample a cloud uniformly in the unit cube, misalign it, then
    for each percentage on the grid (a) corrupt that share of the reference
    matching and re-align through the decoded pairs, (b) corrupt the
    rotation vector directly; record the rotation error of both modes.
    """
    config.validate()
    study = "perturb"
    trials = []
    identity = None
    for trial in range(config.trials):
        seed = derive_seed(config.base_seed, study, trial)
        cloud_rng = rng_from(seed, "cloud")
        X = PointCloud(cloud_rng.uniform(-0.5, 0.5, size=(config.n_points, 3)))
        T = sample_misalignment(rng_from(seed, "misalign"), config.theta0, config.t_bound)
        trials.append((trial, seed, X, apply_transform(T, X), T, matrix_to_rotvec(T.rotation)))
    if config.trials:
        identity = CorrespondenceMatrix(np.eye(config.n_points), hard=True)
    rows: list[TrialRow] = []
    for p in config.corruption_grid:
        param = repr(float(p))
        for trial, seed, X, Y, T, v_star in trials:
            try:
                corrupted = corrupt_correspondence(identity, p, rng_from(seed, "corrupt-corr", p))
                pairs = PointCloud(Y.points[hard_assign(corrupted)])
                fit = horn_align(X, pairs)
                rows.append(TrialRow(study, trial, seed, param, "corr_geodesic_deg",
                                     rotation_error(fit.transform.rotation, T.rotation)))
                rows.append(TrialRow(study, trial, seed, param, "corr_euler_rmse_deg",
                                     rotation_error(fit.transform.rotation, T.rotation, "euler-rmse")))
            except NumericalError as err:
                rows.append(TrialRow(study, trial, seed, param, "failed", f"corr:{type(err).__name__}"))
            try:
                R_pert = rotvec_to_matrix(corrupt_rotation(v_star, p, rng_from(seed, "corrupt-rot", p)))
                rows.append(TrialRow(study, trial, seed, param, "rot_geodesic_deg",
                                     rotation_error(R_pert, T.rotation)))
                rows.append(TrialRow(study, trial, seed, param, "rot_euler_rmse_deg",
                                     rotation_error(R_pert, T.rotation, "euler-rmse")))
            except NumericalError as err:
                rows.append(TrialRow(study, trial, seed, param, "failed", f"rot:{type(err).__name__}"))
    return _finish_study(Path(out_dir), config, study, rows)


def _load_net_for_mode(config: ExperimentConfig) -> FeatureNet | None:
    if config.mode == "oracle":
        return None
    if not config.checkpoint:
        raise ConfigError("learned mode requires a checkpoint path")
    return load_checkpoint(config.checkpoint)


def _shuffled_pair(seed: int, config: ExperimentConfig) -> tuple[PointCloud, PointCloud, np.ndarray]:
    """Fresh shape cloud plus its shuffled copy (the pre-transform target)."""
    X = generate_shape(config.shape, config.n_points, rng_from(seed, "cloud"))
    perm = rng_from(seed, "shuffle").permutation(config.n_points)
    return X, PointCloud(X.points[perm]), perm


def run_misalignment_sweep(config: ExperimentConfig, out_dir) -> StudyResult:
    """Registration accuracy per initial-misalignment bucket (translation held at zero).

    Shares clouds across buckets (per-trial seeds) so the bucket effect is
    isolated from cloud sampling noise.
    """
    config.validate()
    study = "sweep"
    net = _load_net_for_mode(config)
    rows: list[TrialRow] = []
    for lo, hi in BUCKETS_DEG:
        param = f"{lo}-{hi}"
        for trial in range(config.trials):
            seed = derive_seed(config.base_seed, study, trial)
            X, Y_pre, _ = _shuffled_pair(seed, config)
            mis_rng = rng_from(seed, "misalign", param)
            axis = mis_rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            theta = math.radians(mis_rng.uniform(lo, hi))
            T = RigidTransform(rotvec_to_matrix(theta * axis), np.zeros(3))
            Y = apply_transform(T, Y_pre)
            C_star = ground_truth_correspondence(X, Y_pre)
            try:
                C = C_star if net is None else soft_correspondence(featurize(net, X), featurize(net, Y))
                fit = weighted_align(X, Y, C)
                rows.append(TrialRow(study, trial, seed, param, "rotation_euler_mae_deg",
                                     rotation_error(fit.transform.rotation, T.rotation, "euler-mae")))
                rows.append(TrialRow(study, trial, seed, param, "rotation_geodesic_deg",
                                     rotation_error(fit.transform.rotation, T.rotation)))
                rows.append(TrialRow(study, trial, seed, param, "correspondence_pct",
                                     correspondence_accuracy(C, C_star)))
            except NumericalError as err:
                rows.append(TrialRow(study, trial, seed, param, "failed", type(err).__name__))
    return _finish_study(Path(out_dir), config, study, rows)


def run_partial_experiment(config: ExperimentConfig, out_dir) -> StudyResult:
    """Partial-source registration: crop the source, then register.

    Oracle mode evaluates the closed-form pipeline on reference matchings
    per trial; learned mode trains the embedder on partial samples and
    records per-epoch held-out metrics.
    """
    config.validate()
    if config.mode == "learned":
        return _run_training_study(config, "partial", Path(out_dir), config.keep_fraction)
    study = "partial"
    rows: list[TrialRow] = []
    param = repr(float(config.keep_fraction))
    for trial in range(config.trials):
        seed = derive_seed(config.base_seed, study, trial)
        X_full, Y_pre, _ = _shuffled_pair(seed, config)
        T = sample_misalignment(rng_from(seed, "misalign"), config.theta0, config.t_bound)
        Y = apply_transform(T, Y_pre)
        try:
            if config.keep_fraction < 1.0:
                X_part, kept = crop_partial(X_full, config.keep_fraction, rng_from(seed, "crop"))
            else:
                X_part, kept = X_full, np.arange(len(X_full))
            C_star = ground_truth_correspondence(X_part, Y_pre)
            fit = weighted_align(X_part, Y, C_star)
            rows.append(TrialRow(study, trial, seed, param, "n_points_kept", float(len(kept))))
            rows.append(TrialRow(study, trial, seed, param, "rotation_euler_mae_deg",
                                 rotation_error(fit.transform.rotation, T.rotation, "euler-mae")))
            rows.append(TrialRow(study, trial, seed, param, "rotation_geodesic_deg",
                                 rotation_error(fit.transform.rotation, T.rotation)))
            rows.append(TrialRow(study, trial, seed, param, "correspondence_pct",
                                 correspondence_accuracy(C_star, C_star)))
        except NumericalError as err:
            rows.append(TrialRow(study, trial, seed, param, "failed", type(err).__name__))
    return _finish_study(Path(out_dir), config, study, rows)


def run_outlier_experiment(config: ExperimentConfig, out_dir) -> StudyResult:
    """Outlier-contaminated registration with the augmented matching and weighted solve.

    A fraction of source points is moved to random positions in the unit
    cube; the reference augmented matching flags points whose nearest
    target is farther than the threshold, and alignment downweights them.
    Also records the least-squares stationarity of the outlier embedding
    built from per-point features (checkpoint features in learned mode,
    a seeded random net otherwise).
    """
    config.validate()
    study = "outlier"
    net = _load_net_for_mode(config)
    if net is None:
        net = FeatureNet.init(
            derive_seed(config.base_seed, study, "feature-net"),
            out_dim=config.embed_dim,
            descriptor_k=config.descriptor_k,
        )
    rows: list[TrialRow] = []
    param = repr(float(config.outlier_fraction))
    n = config.n_points
    n_out = int(math.floor(config.outlier_fraction * n + 0.5))
    for trial in range(config.trials):
        seed = derive_seed(config.base_seed, study, trial)
        X_full, Y_pre, _ = _shuffled_pair(seed, config)
        T = sample_misalignment(rng_from(seed, "misalign"), config.theta0, config.t_bound)
        Y = apply_transform(T, Y_pre)
        corrupt_rng = rng_from(seed, "corrupt")
        out_idx = np.sort(corrupt_rng.choice(n, size=n_out, replace=False))
        pts = np.array(X_full.points)
        pts[out_idx] = corrupt_rng.uniform(-0.5, 0.5, size=(n_out, 3))
        X = PointCloud(pts)
        C_star = ground_truth_correspondence_outlier(X, Y_pre, config.outlier_threshold)
        flagged = hard_assign(C_star) == n
        is_out = np.zeros(n, dtype=bool)
        is_out[out_idx] = True
        true_pos = int(np.sum(flagged & is_out))
        precision = 100.0 * true_pos / flagged.sum() if flagged.any() else 100.0
        recall = 100.0 * true_pos / n_out if n_out else 100.0
        rows.append(TrialRow(study, trial, seed, param, "outlier_precision_pct", precision))
        rows.append(TrialRow(study, trial, seed, param, "outlier_recall_pct", recall))
        try:
            fit = weighted_align_outlier(X, Y, C_star)
            rows.append(TrialRow(study, trial, seed, param, "rotation_geodesic_deg",
                                 rotation_error(fit.transform.rotation, T.rotation)))
            rows.append(TrialRow(study, trial, seed, param, "rotation_euler_rmse_deg",
                                 rotation_error(fit.transform.rotation, T.rotation, "euler-rmse")))
            rows.append(TrialRow(study, trial, seed, param, "translation_error",
                                 float(np.linalg.norm(fit.transform.translation - T.translation))))
            rows.append(TrialRow(study, trial, seed, param, "effective_weight", fit.effective_weight))
        except NumericalError as err:
            rows.append(TrialRow(study, trial, seed, param, "failed", type(err).__name__))
        F_Y = featurize(net, Y)
        f_o = outlier_embedding(F_Y, config.outlier_b)
        residual = F_Y.T @ f_o - config.outlier_b * np.ones(F_Y.shape[1])
        stationarity = float(np.linalg.norm(F_Y @ residual))
        rows.append(TrialRow(study, trial, seed, param, "outlier_embedding_stationarity", stationarity))
    return _finish_study(Path(out_dir), config, study, rows)


def _protocol_sample(seed: int, config: ExperimentConfig, keep_fraction: float) -> RegistrationSample:
    """One training/eval example: shape cloud, shuffled copy, misalignment, optional crop."""
    X_full = generate_shape(config.shape, config.n_points, rng_from(seed, "cloud"))
    perm = rng_from(seed, "shuffle").permutation(config.n_points)
    Y_pre = PointCloud(X_full.points[perm])
    T = sample_misalignment(rng_from(seed, "misalign"), config.theta0, config.t_bound)
    Y = apply_transform(T, Y_pre)
    if keep_fraction < 1.0:
        X, _ = crop_partial(X_full, keep_fraction, rng_from(seed, "crop"))
    else:
        X = X_full
    C_star = ground_truth_correspondence(X, Y_pre)
    return make_sample(X, Y, C_star, T, config.descriptor_k)


_EVAL_METRIC_NAMES = (
    ("loss", "heldout_loss"),
    ("correspondence_pct", "heldout_correspondence_pct"),
    ("rotation_euler_mae_deg", "heldout_rotation_euler_mae_deg"),
    ("rotation_geodesic_deg", "heldout_rotation_geodesic_deg"),
    ("translation_rmse", "heldout_translation_rmse"),
    ("chamfer", "heldout_chamfer"),
    ("alignment_failures", "heldout_alignment_failures"),
)


def _run_training_study(
    config: ExperimentConfig, study: str, out_dir: Path, keep_fraction: float
) -> StudyResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    train_samples = [
        _protocol_sample(derive_seed(config.base_seed, study, "train-data", i), config, keep_fraction)
        for i in range(config.train_clouds)
    ]
    heldout = [
        _protocol_sample(derive_seed(config.base_seed, study, "heldout-data", i), config, keep_fraction)
        for i in range(config.heldout_clouds)
    ]
    state = TrainState.init(
        derive_seed(config.base_seed, study, "init"),
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        epochs=config.epochs,
        embed_dim=config.embed_dim,
        descriptor_k=config.descriptor_k,
    )
    ckpt_path = Path(config.checkpoint) if config.checkpoint else out_dir / f"{study}_featurenet.ckpt"
    save_checkpoint(state.net, ckpt_path)  # epoch-0 checkpoint; also the divergence fallback
    rows: list[TrialRow] = []
    for epoch in range(config.epochs):
        seed = derive_seed(config.base_seed, study, "epoch", epoch)
        state, train_metrics = train_epoch(state, train_samples)  # divergence leaves the last checkpoint
        save_checkpoint(state.net, ckpt_path)
        param = str(epoch)
        rows.append(TrialRow(study, epoch, seed, param, "train_loss", train_metrics["loss"]))
        rows.append(TrialRow(study, epoch, seed, param, "train_correspondence_pct",
                             train_metrics["correspondence_pct"]))
        if heldout:
            ev = evaluate(state.net, heldout)
            for key, name in _EVAL_METRIC_NAMES:
                value = ev[key]
                if math.isfinite(value):
                    rows.append(TrialRow(study, epoch, seed, param, name, value))
                else:
                    rows.append(TrialRow(study, epoch, seed, param, name, "failed:degenerate"))
    return _finish_study(out_dir, config, study, rows, checkpoint_path=ckpt_path)


def run_training(config: ExperimentConfig, out_dir) -> StudyResult:
    """Train the feature embedder, logging per-epoch metrics and writing a checkpoint."""
    config.validate()
    return _run_training_study(config, "train", Path(out_dir), keep_fraction=1.0)
