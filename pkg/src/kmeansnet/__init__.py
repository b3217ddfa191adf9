"""k-means as a softmax-assignment objective trained by stochastic gradients."""

from .baseline import LloydResult, inertia, lloyd
from .core import (
    ClusterModel,
    Gradients,
    LossBreakdown,
    beta,
    centroids_to_params,
    gradients,
    hard_assign,
    logits,
    loss,
    loss_and_gradients,
    recover_centers,
    soft_assign,
)
from .data import LabeledDataset, load_csv, load_idx, make_blobs, normalize_l2
from .errors import CapacityError, DegeneracyError, IDXFormatError, ShapeError, TrainingError
from .init import InitMethod, init_kmeans, init_kmeanspp, init_random, initialize
from .metrics import ClusteringReport, accuracy_hungarian, ami, ari, clustering_report, nmi, purity
from .modelio import load_model, save_model
from .optim import OptimizerConfig, OptimizerKind, TrainConfig, TrainTrace, predict, train

__version__ = "0.1.0"
