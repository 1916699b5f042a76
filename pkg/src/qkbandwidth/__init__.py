"""Statevector quantum kernels, an SMO support-vector classifier, and bandwidth sweeps."""
__version__ = "0.1.0"

from .statevector import CapacityError, StateVector
from .feature_maps import HamEvoFeatureMap, IqpFeatureMap, make_feature_map
from .kernels import ShotNoiseConfig, cross_gram, gram, nearest_psd, rbf_gram
from .svm import SvcModel, balanced_accuracy, select_c_by_cv, train_svc
from .data import Dataset, preprocess, synthetic_two_class
from .experiments import ExperimentConfig, ResultRow, load_config

__all__ = [
    "CapacityError", "StateVector", "HamEvoFeatureMap", "IqpFeatureMap",
    "make_feature_map", "ShotNoiseConfig", "cross_gram", "gram", "nearest_psd",
    "rbf_gram", "SvcModel", "balanced_accuracy", "select_c_by_cv", "train_svc",
    "Dataset", "preprocess", "synthetic_two_class", "ExperimentConfig",
    "ResultRow", "load_config",
]
