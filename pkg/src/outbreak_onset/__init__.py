"""Detect the onset of a novel lesion phenotype in a stream of simulated cases."""

from .detector import (
    CalibrationStats,
    DetectionReport,
    OnsetDetector,
    calibrate,
    d_dev,
    detect,
    kde_score,
    mean_pairwise_distance,
)
from .features import GramFeatureExtractor, FilterBank, describe, extract_features, fuse, gram_matrix
from .metrics import ablation, project_2d, silhouette
from .reduce import PCAReducer, SGDAutoencoder, pca_reduce
from .stream import CaseStream, StreamConfig, build_stream, gamma_from_R, sample_known_timestamps, sample_novel_timestamps
from .volumes import CANONICAL_DISEASES, AnomalyVolume, DiseaseConfig, make_mask, synthesize_volume

__version__ = "0.1.0"

__all__ = [
    "AnomalyVolume",
    "CANONICAL_DISEASES",
    "CalibrationStats",
    "CaseStream",
    "DetectionReport",
    "DiseaseConfig",
    "FilterBank",
    "GramFeatureExtractor",
    "OnsetDetector",
    "PCAReducer",
    "SGDAutoencoder",
    "StreamConfig",
    "ablation",
    "build_stream",
    "calibrate",
    "d_dev",
    "describe",
    "detect",
    "extract_features",
    "fuse",
    "gamma_from_R",
    "gram_matrix",
    "kde_score",
    "make_mask",
    "mean_pairwise_distance",
    "pca_reduce",
    "project_2d",
    "sample_known_timestamps",
    "sample_novel_timestamps",
    "silhouette",
    "synthesize_volume",
]
