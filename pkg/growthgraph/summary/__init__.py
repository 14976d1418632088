from .outputs import read_partition_file, summarize_store, write_diffnet
from .posterior import (
    binder_loss,
    binder_partition,
    cluster_count_distribution,
    cluster_trajectories,
    coclustering,
    coefficient_intervals,
    differential_network,
    edge_probabilities,
    median_graph,
    metabolite_cluster_means,
    precision_means,
)
