"""Edge-connectivity-aware broadcast and its applications on a CONGEST simulator."""

from .graph import Graph, generate, oracle_apsp, exact_edge_connectivity, exact_diameter, min_cut
from .sim import run, RunReport, NodeProgram, LocalView, BandwidthError, LocalityError
from .packing import partition, build_trees, exponential_search, verify_packing, sample_subgraph
from .broadcast import BroadcastInstance, basic_broadcast, k_broadcast, place_messages
from .apsp import sample_clusters, cluster_apsp, estimate_unweighted_apsp
from .spanner import baswana_sen_spanner, estimate_weighted_apsp
from .cuts import uniform_cut_sparsifier, broadcast_and_estimate_cuts

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "generate",
    "oracle_apsp",
    "exact_edge_connectivity",
    "exact_diameter",
    "min_cut",
    "run",
    "RunReport",
    "NodeProgram",
    "LocalView",
    "BandwidthError",
    "LocalityError",
    "partition",
    "build_trees",
    "exponential_search",
    "verify_packing",
    "sample_subgraph",
    "BroadcastInstance",
    "basic_broadcast",
    "k_broadcast",
    "place_messages",
    "sample_clusters",
    "cluster_apsp",
    "estimate_unweighted_apsp",
    "baswana_sen_spanner",
    "estimate_weighted_apsp",
    "uniform_cut_sparsifier",
    "broadcast_and_estimate_cuts",
]
