"""Hierarchical classification of phonological categories from
multichannel imagined-speech EEG.

Pipeline: zero-phase bandpass and mean removal, channel cross-covariance
features with data-driven channel rejection, parallel CNN/LSTM branches whose
penultimate activations fuse into a 1152-dim vector, an autoencoder that
compresses it to 32 dims, and a boosted-tree classifier on the latent code.
"""

from .config import DEFAULT_TASK_TABLE, TASK_IDS, RunConfig, load_config
from .covariance import (
    CovMatrix,
    ccv_matrix,
    reject_channels,
    rejection_scores,
    submatrix,
    to_network_input,
)
from .errors import ConfigError, DataError, LeakageError, TrainingError
from .metrics import cohen_kappa, confusion_matrix, improvement_over, summarize
from .pipeline import (
    EvalReport,
    Fold,
    ModelBundle,
    SplitPlan,
    Task,
    derive_label,
    make_splits,
    run_task,
)
from .recording import PROMPTS, BandpassSpec, Recording, bandpass_filter, subtract_channel_means

__version__ = "0.1.0"

__all__ = [
    "BandpassSpec",
    "ConfigError",
    "CovMatrix",
    "DEFAULT_TASK_TABLE",
    "DataError",
    "EvalReport",
    "Fold",
    "LeakageError",
    "ModelBundle",
    "PROMPTS",
    "Recording",
    "RunConfig",
    "SplitPlan",
    "TASK_IDS",
    "Task",
    "TrainingError",
    "bandpass_filter",
    "ccv_matrix",
    "cohen_kappa",
    "confusion_matrix",
    "derive_label",
    "improvement_over",
    "load_config",
    "make_splits",
    "reject_channels",
    "rejection_scores",
    "run_task",
    "submatrix",
    "subtract_channel_means",
    "summarize",
    "to_network_input",
]
