"""RBM training, feature ranking, pruning and adaptive transfer learning.

The library trains restricted Boltzmann machines by contrastive
divergence, scores every hidden unit by the mean absolute weight of its
visible connections (the value that provably minimizes the loss of a
sign-times-scale approximation of the weights), and uses the ranking to
prune models or to transfer high-ranking sub-networks, frozen, into a
target model where newly added units adapt around them.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    PcaModel,
    load_csv,
    load_idx_images,
    load_idx_labels,
    normalize,
    pca_fit,
    pca_transform,
    resize_nearest,
    split,
)
from .rbm import (
    GibbsState,
    Rbm,
    TrainConfig,
    TrainTrace,
    cd_update,
    exact_log_likelihood,
    free_energy,
    hidden_probs,
    init_rbm,
    reconstruction_error,
    sample_bernoulli,
    train,
    visible_probs,
)
from .ranking import (
    FeatureRanking,
    LogicalRule,
    SubNetwork,
    extract_subnetworks,
    prune,
    rank,
    rule_consistency,
    score_features,
    to_logical_rules,
    verify_minimizer,
    write_filter_pgms,
)
from .transfer import (
    TargetRbm,
    TransferSpec,
    build_transfer_spec,
    extract_features,
    init_target,
    self_taught_features,
    train_adaptive,
)
from .probe import (
    ProbeConfig,
    SoftmaxModel,
    accuracy,
    mean_ci95,
    predict,
    train_softmax,
)
from .model_io import load_model, save_model

__all__ = [
    "__version__",
    "Dataset", "PcaModel", "load_csv", "load_idx_images", "load_idx_labels",
    "normalize", "pca_fit", "pca_transform", "resize_nearest", "split",
    "GibbsState", "Rbm", "TrainConfig", "TrainTrace", "cd_update",
    "exact_log_likelihood", "free_energy", "hidden_probs", "init_rbm",
    "reconstruction_error", "sample_bernoulli", "train", "visible_probs",
    "FeatureRanking", "LogicalRule", "SubNetwork", "extract_subnetworks",
    "prune", "rank", "rule_consistency", "score_features", "to_logical_rules",
    "verify_minimizer", "write_filter_pgms",
    "TargetRbm", "TransferSpec", "build_transfer_spec", "extract_features",
    "init_target", "self_taught_features", "train_adaptive",
    "ProbeConfig", "SoftmaxModel", "accuracy", "mean_ci95", "predict",
    "train_softmax",
    "load_model", "save_model",
]
