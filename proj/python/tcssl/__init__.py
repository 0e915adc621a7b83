"""Python bindings for the tcssl core.

The heavy lifting (training, evaluation, the CLI) lives in the C++ library;
this module exposes the primitives that are useful interactively: pseudo-label
arithmetic, triplet mining, the loss and metric functions, fold planning, and
the synthetic corpus generator.
"""

from _tcssl import (
    ConfigError,
    DataError,
    NumericError,
    accuracy_p0,
    apportion_slots,
    auc_roc,
    confusion_matrix,
    count_positives,
    crc32,
    cross_entropy,
    f1,
    frame_distance,
    generate_corpus,
    grouped_kfold,
    is_positive,
    lr_at,
    mcc,
    mine_batch_all_classes,
    mine_batch_all_windowed,
    pseudo_label,
    sensitivity_at_specificity,
    triplet_loss,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "accuracy_p0",
    "apportion_slots",
    "auc_roc",
    "confusion_matrix",
    "count_positives",
    "crc32",
    "cross_entropy",
    "f1",
    "frame_distance",
    "generate_corpus",
    "grouped_kfold",
    "is_positive",
    "lr_at",
    "mcc",
    "mine_batch_all_classes",
    "mine_batch_all_windowed",
    "pseudo_label",
    "sensitivity_at_specificity",
    "triplet_loss",
]
