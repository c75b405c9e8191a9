"""Text outlier detection with l1,2-regularized nonnegative matrix factorization."""

from .baselines import knn_scores, knn_sweep, svd_scores
from .corpus_io import load_bow, load_labels, load_matrix_market
from .evaluation import auc, roc_curve, score_stats
from .solver import SolverConfig, solve
from .synthgen import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "SolverConfig",
    "SynthConfig",
    "auc",
    "generate",
    "knn_scores",
    "knn_sweep",
    "load_bow",
    "load_labels",
    "load_matrix_market",
    "roc_curve",
    "score_stats",
    "solve",
    "svd_scores",
]
