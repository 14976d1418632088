import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from growthgraph.gtypes import Graph, Partition
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError

logger = logging.getLogger(__name__)


def _as_samples(partitions) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(partitions, dtype=int))
    if samples.shape[0] == 0:
        raise DataError("at least one partition sample is required")
    return samples


def coclustering(partitions) -> np.ndarray:
    """Fraction of samples in which each pair of subjects shares a cluster."""
    samples = _as_samples(partitions)
    P = np.zeros((samples.shape[1], samples.shape[1]))
    for labels in samples:
        P += labels[:, None] == labels[None, :]
    return P / samples.shape[0]


def binder_loss(assignments, coclust: np.ndarray) -> float:
    """Posterior expected Binder loss with unit costs: sum over pairs i < j of |1{c_i = c_j} - P_ij|."""
    labels = np.asarray(assignments)
    same = labels[:, None] == labels[None, :]
    upper = np.triu_indices(labels.size, k=1)
    return float(np.sum(np.abs(same[upper] - coclust[upper])))


def binder_losses(partitions, coclust: Optional[np.ndarray] = None) -> np.ndarray:
    samples = _as_samples(partitions)
    coclust = coclustering(samples) if coclust is None else coclust
    return np.array([binder_loss(labels, coclust) for labels in samples])


def binder_partition(partitions, coclust: Optional[np.ndarray] = None) -> Partition:
    """Sampled partition with the smallest Binder loss; the earliest sample wins ties."""
    samples = _as_samples(partitions)
    losses = binder_losses(samples, coclust)
    best = int(np.argmin(losses))
    logger.info(f"Binder partition: sample {best}, loss {losses[best]:.4f}")
    return Partition.from_labels(samples[best])


def cluster_count_distribution(partitions) -> pd.DataFrame:
    samples = _as_samples(partitions)
    K = samples.max(axis=1) + 1
    values, counts = np.unique(K, return_counts=True)
    return pd.DataFrame({"K": values, "probability": counts / samples.shape[0]})


def edge_probabilities(graphs: Sequence[Graph]) -> np.ndarray:
    if not graphs:
        raise DataError("at least one graph sample is required")
    p = graphs[0].p
    pi = np.zeros((p, p))
    for graph in graphs:
        if graph.p != p:
            raise DataError("graph samples have different node counts")
        pi += graph.adjacency()
    return pi / len(graphs)


def median_graph(pi_hat: np.ndarray, threshold: float = consts.MEDIAN_GRAPH_THRESHOLD) -> Graph:
    """Edges whose posterior inclusion probability is strictly above ``threshold``."""
    pi_hat = np.asarray(pi_hat, dtype=float)
    return Graph.from_adjacency(pi_hat > threshold)


def differential_network(pi1: np.ndarray, pi2: np.ndarray, threshold: float = consts.DIFFNET_THRESHOLD) -> Graph:
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    if pi1.shape != pi2.shape:
        raise DataError(f"edge-probability matrices differ in shape: {pi1.shape} vs {pi2.shape}")
    if not 0 <= threshold <= 1:
        raise DataError(f"differential-network threshold must lie in [0, 1], got {threshold}")
    return Graph.from_adjacency(np.abs(pi1 - pi2) > threshold)


def coefficient_intervals(samples, names: Optional[List[str]] = None, level: float = 0.95) -> pd.DataFrame:
    """Posterior mean and equal-tailed interval per coefficient, flagging intervals that exclude zero."""
    if isinstance(samples, pd.DataFrame):
        names = list(samples.columns) if names is None else names
        samples = samples.to_numpy(dtype=float)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise DataError("coefficient intervals need at least two samples")
    if not 0 <= level <= 1:
        raise DataError(f"interval level must lie in [0, 1], got {level}")
    names = names if names is not None else [str(c) for c in range(samples.shape[1])]
    tail = 0.5 * (1.0 - level)
    lo = np.quantile(samples, tail, axis=0)
    hi = np.quantile(samples, 1.0 - tail, axis=0)
    return pd.DataFrame({
        "coefficient": names,
        "mean": samples.mean(axis=0),
        "lo": lo,
        "hi": hi,
        "relevant": (lo > 0) | (hi < 0),
    })


def cluster_trajectories(theta_samples: Sequence[np.ndarray], times: Sequence[Sequence[float]],
                         process_names: Sequence[str]) -> pd.DataFrame:
    """Posterior mean of each cluster's theta*, laid out per process and time."""
    if not theta_samples:
        raise DataError("at least one theta* sample is required")
    K = max(t.shape[0] for t in theta_samples)
    rows = []
    for k in range(K):
        present = [t[k] for t in theta_samples if t.shape[0] > k]
        mean = np.mean(present, axis=0)
        offset = 0
        for name, grid in zip(process_names, times):
            for c, time in enumerate(grid):
                rows.append({"cluster": k, "process": name, "time": float(time),
                             "mean": float(mean[offset + c]), "n_samples": len(present)})
            offset += len(grid)
    return pd.DataFrame(rows)


def precision_means(omega_samples: Sequence[np.ndarray]) -> np.ndarray:
    if not omega_samples:
        raise DataError("at least one precision sample is required")
    return np.mean(np.stack(omega_samples), axis=0)


def metabolite_cluster_means(M: np.ndarray, partition: Partition, names: Sequence[str]) -> pd.DataFrame:
    """Observed-value means of every metabolite within each cluster (NaN entries skipped)."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] != partition.N:
        raise DataError(f"partition has {partition.N} subjects, metabolite matrix has {M.shape[0]} rows")
    rows = []
    for k in range(partition.K):
        block = M[partition.members(k)]
        n_observed = np.sum(~np.isnan(block), axis=0)
        # NaN where a cluster has no observed value of the metabolite
        means = np.where(n_observed > 0, np.nansum(block, axis=0) / np.maximum(n_observed, 1), np.nan)
        rows.append({"cluster": k, "size": int(block.shape[0]), **dict(zip(names, means.tolist()))})
    return pd.DataFrame(rows)
