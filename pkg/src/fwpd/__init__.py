"""Clustering of incomplete data with a feature weighted penalty based dissimilarity."""
from .baselines import CompletedDataset, KNNImputer, MeanImputer, SVDImputer, ZeroImputer
from .dataset import IncompleteDataset, load_csv, load_iris, write_csv
from .dissimilarity import DissimilarityContext, fwpd, pairwise_matrix
from .evaluation import ari, nmi, wilcoxon_rank_sum
from .hac import HACFWPD, Dendrogram
from .kmeans import KMeansFWPD

__version__ = "0.1.0"

__all__ = [
    "CompletedDataset",
    "DissimilarityContext",
    "Dendrogram",
    "HACFWPD",
    "IncompleteDataset",
    "KMeansFWPD",
    "KNNImputer",
    "MeanImputer",
    "SVDImputer",
    "ZeroImputer",
    "ari",
    "fwpd",
    "load_csv",
    "load_iris",
    "nmi",
    "pairwise_matrix",
    "wilcoxon_rank_sum",
    "write_csv",
]
