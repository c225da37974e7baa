"""Clustering of web-usage sessions: tolerance clustering, improved fuzzy
c-means, and purity based evaluation."""

__version__ = "0.1.0"

from .cluster_eval import EvalReport, evaluate, inverse_purity, purity, purity_f
from .feature_space import FeatureWeights, compute_feature_weights, frequency_matrix
from .improved_fcm import FcmConfig, FcmResult, harden, run_fcm
from .session_ingest import (
    CategoryDictionary,
    Session,
    SessionDataset,
    dataset_stats,
    parse_log,
    read_log,
)
from .tolerance_cluster import ClusterSet, similarity_matrix, tolerance_clusters

__all__ = [
    "CategoryDictionary",
    "ClusterSet",
    "EvalReport",
    "FcmConfig",
    "FcmResult",
    "FeatureWeights",
    "Session",
    "SessionDataset",
    "compute_feature_weights",
    "dataset_stats",
    "evaluate",
    "frequency_matrix",
    "harden",
    "inverse_purity",
    "parse_log",
    "purity",
    "purity_f",
    "read_log",
    "run_fcm",
    "similarity_matrix",
    "tolerance_clusters",
]
