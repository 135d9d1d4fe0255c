"""corrmatch: correspondence-first rigid point-cloud registration.

Registration is treated as a matching problem: build a column-stochastic
correspondence matrix between two clouds (hard, soft, or with an extra
outlier class), then recover the rigid transform in closed form.
"""

__version__ = "0.1.0"

from .align import AlignmentResult, IcpResult, horn_align, icp, weighted_align, weighted_align_outlier
from .correspondence import (
    CorrespondenceMatrix,
    correspondence_accuracy,
    ground_truth_correspondence,
    ground_truth_correspondence_outlier,
    hard_assign,
    outlier_embedding,
    sinkhorn_normalize,
    soft_correspondence,
    soft_correspondence_outlier,
)
from .errors import ConfigError, DataError, NumericalError
from .geom import (
    PointCloud,
    RigidTransform,
    apply_transform,
    chamfer_distance,
    crop_partial,
    generate_shape,
    load_xyz,
    matrix_to_rotvec,
    rotation_error,
    rotvec_to_matrix,
    sample_misalignment,
    save_xyz,
    translation_rmse,
)
from .learn import (
    FeatureNet,
    TrainState,
    cross_entropy_grad,
    cross_entropy_loss,
    dcp_loss,
    featurize,
    point_descriptors,
    rpmnet_reg_loss,
    train_epoch,
)
from .seeding import derive_seed, rng_from

__all__ = [
    "AlignmentResult",
    "ConfigError",
    "CorrespondenceMatrix",
    "DataError",
    "FeatureNet",
    "IcpResult",
    "NumericalError",
    "PointCloud",
    "RigidTransform",
    "TrainState",
    "apply_transform",
    "chamfer_distance",
    "correspondence_accuracy",
    "crop_partial",
    "cross_entropy_grad",
    "cross_entropy_loss",
    "dcp_loss",
    "derive_seed",
    "featurize",
    "generate_shape",
    "ground_truth_correspondence",
    "ground_truth_correspondence_outlier",
    "hard_assign",
    "horn_align",
    "icp",
    "load_xyz",
    "matrix_to_rotvec",
    "outlier_embedding",
    "point_descriptors",
    "rng_from",
    "rotation_error",
    "rotvec_to_matrix",
    "rpmnet_reg_loss",
    "sample_misalignment",
    "save_xyz",
    "sinkhorn_normalize",
    "soft_correspondence",
    "soft_correspondence_outlier",
    "train_epoch",
    "translation_rmse",
    "weighted_align",
    "weighted_align_outlier",
]
