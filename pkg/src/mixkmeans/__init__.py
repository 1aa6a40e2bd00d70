"""k-means++ with simulated low-precision and mixed-precision distances."""

import logging

from .data import Dataset, gaussian_blobs, load_csv, save_csv, zscore_normalize
from .distance import (
    BlockDistance,
    DistanceOutcome,
    PrecisionContext,
    dist_sq_diff,
    dist_sq_gram,
    dist_sq_mixed,
    kernel_matrix_diff,
)
from .kmeans import Clustering, KMeansConfig, fit
from .metrics import MetricsReport, ami, ari, evaluate, homogeneity_completeness_v
from .simfloat import FP16, FP32, FP64, Q52, FloatFormat, get_format, round_to_format

__all__ = [
    "BlockDistance",
    "Clustering",
    "Dataset",
    "DistanceOutcome",
    "FP16",
    "FP32",
    "FP64",
    "FloatFormat",
    "KMeansConfig",
    "MetricsReport",
    "PrecisionContext",
    "Q52",
    "ami",
    "ari",
    "dist_sq_diff",
    "dist_sq_gram",
    "dist_sq_mixed",
    "evaluate",
    "fit",
    "gaussian_blobs",
    "get_format",
    "homogeneity_completeness_v",
    "kernel_matrix_diff",
    "load_csv",
    "round_to_format",
    "save_csv",
    "zscore_normalize",
]

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
