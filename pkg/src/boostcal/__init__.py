"""Boosted stumps and trees with calibrated probability outputs."""

from .boost import BaseSpec, BoostConfig, BoostedEnsemble, boost_train, staged_scores
from .calib import (CalibrationSet, IsotonicCalibrator, SigmoidCalibrator,
                    cv_calibration_scores, isotonic_apply, logistic_correction,
                    pav_fit, platt_fit, platt_targets, sigmoid_apply)
from .dataset import (Dataset, FoldPartition, SplitSpec, binarize_multiclass,
                      kfold_partition, load_dataset, stratified_split)
from .metrics import (brier_score, cross_entropy, prediction_histogram,
                      reliability_diagram, roc_auc)
from .weak import Stump, Tree, train_stump, train_tree, weak_predict

__all__ = [
    "BaseSpec", "BoostConfig", "BoostedEnsemble", "boost_train", "staged_scores",
    "CalibrationSet", "IsotonicCalibrator", "SigmoidCalibrator", "cv_calibration_scores",
    "isotonic_apply", "logistic_correction", "pav_fit", "platt_fit", "platt_targets",
    "sigmoid_apply", "Dataset", "FoldPartition", "SplitSpec", "binarize_multiclass",
    "kfold_partition", "load_dataset", "stratified_split", "brier_score",
    "cross_entropy", "prediction_histogram", "reliability_diagram", "roc_auc",
    "Stump", "Tree", "train_stump", "train_tree", "weak_predict",
]

__version__ = "0.1.0"
