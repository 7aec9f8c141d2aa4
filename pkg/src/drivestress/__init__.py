"""Driver stress detection from heart rate variability, breathing and GSR."""

__version__ = "0.1.0"

from .evaluation import LabeledDataset, compute_metrics, loocv  # noqa: E402
from .features import FEATURE_NAMES, WindowFeatureExtractor, extract_all  # noqa: E402
from .labeling import GSRStressLabeler  # noqa: E402
from .mrmr import MRMRSelector, mrmr_rank  # noqa: E402
from .svm import RBFSupportVectorClassifier, ZScoreNormalizer, train_svm  # noqa: E402

__all__ = [
    "FEATURE_NAMES",
    "GSRStressLabeler",
    "LabeledDataset",
    "MRMRSelector",
    "RBFSupportVectorClassifier",
    "WindowFeatureExtractor",
    "ZScoreNormalizer",
    "compute_metrics",
    "extract_all",
    "loocv",
    "mrmr_rank",
    "train_svm",
]
