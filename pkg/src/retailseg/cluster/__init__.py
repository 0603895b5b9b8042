"""From-scratch clustering algorithms sharing one result type."""

from ._result import NOISE, ClusteringResult
from .agglomerative import LINKAGES, LinkageSpec, Merge, agglomerative_fit, linkage_tree
from .birch import CFTree, ClusterFeature, birch_fit, build_cf_tree
from .dbscan import DbscanParams, core_distances, dbscan_fit, reachability_distance
from .gmm import ComponentCollapse, GmmModel, gmm_fit
from .kmeans import KMeansModel, kmeans_fit

__all__ = [
    "NOISE",
    "ClusteringResult",
    "LINKAGES",
    "LinkageSpec",
    "Merge",
    "agglomerative_fit",
    "linkage_tree",
    "CFTree",
    "ClusterFeature",
    "birch_fit",
    "build_cf_tree",
    "DbscanParams",
    "core_distances",
    "dbscan_fit",
    "reachability_distance",
    "ComponentCollapse",
    "GmmModel",
    "gmm_fit",
    "KMeansModel",
    "kmeans_fit",
]
