import json
import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from growthgraph.gtypes import Partition, TransformRecord
from growthgraph.preprocess.transforms import invert_transform
from growthgraph.sampler.store import SampleStore, load_sample_store
from growthgraph.summary.posterior import (
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
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError

logger = logging.getLogger(__name__)


def _write_json(path: str, payload: dict) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    return path


def _write_csv(path: str, frame: pd.DataFrame, index: bool = False) -> str:
    frame.to_csv(path, index=index)
    return path


def _load_transforms(store_dir: str) -> dict:
    path = os.path.join(store_dir, consts.TRANSFORMS_FILE)
    if not os.path.exists(path):
        return {}
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    return {name: TransformRecord.from_dict(record) for name, record in payload.get("longitudinal", {}).items()}


def write_trajectories(store: SampleStore, out_dir: str) -> str:
    layout = store.layout
    frame = cluster_trajectories(store.theta_star(), layout["times"], layout["process_names"])
    records = _load_transforms(store.path)
    if records:
        raw = np.full(len(frame), np.nan)
        for name, record in records.items():
            rows = (frame["process"] == name).to_numpy()
            raw[rows] = invert_transform(frame.loc[rows, "mean"].to_numpy(), record)
        frame["raw_mean"] = raw
    return _write_csv(os.path.join(out_dir, consts.TRAJECTORIES_TABLE), frame)


def write_beta_intervals(store: SampleStore, out_dir: str, level: float = 0.95) -> Optional[str]:
    frames = []
    for block, table in (("Y", store.beta_Y), ("M", store.beta_M)):
        if table.shape[1] == 0:
            continue
        frame = coefficient_intervals(table, level=level)
        frame.insert(0, "block", block)
        frames.append(frame)
    if not frames:
        logger.info("No covariates in the store; skipping coefficient intervals")
        return None
    return _write_csv(os.path.join(out_dir, consts.BETA_INTERVALS_TABLE), pd.concat(frames, ignore_index=True))


def write_cluster_networks(store: SampleStore, out_dir: str) -> List[str]:
    names = store.layout["metabolites"]
    written = []
    for k in range(store.max_clusters()):
        graphs = store.graphs(k)
        if not graphs:
            continue
        pi = edge_probabilities(graphs)
        written.append(_write_csv(os.path.join(out_dir, consts.EDGE_PROBS_TABLE.format(k=k)),
                                  pd.DataFrame(pi, index=names, columns=names), index=True))
        record = median_graph(pi).to_json(names)
        record["cluster"] = k
        record["n_samples"] = len(graphs)
        written.append(_write_json(os.path.join(out_dir, consts.MEDIAN_GRAPH_RECORD.format(k=k)), record))
        omega = precision_means(store.omegas(k))
        written.append(_write_csv(os.path.join(out_dir, consts.PRECISION_MEAN_TABLE.format(k=k)),
                                  pd.DataFrame(omega, index=names, columns=names), index=True))
    return written


def write_diffnet(store: SampleStore, out_dir: str, k1: int, k2: int,
                  threshold: float = consts.DIFFNET_THRESHOLD) -> str:
    names = store.layout["metabolites"]
    graphs = {k: store.graphs(k) for k in (k1, k2)}
    for k, samples in graphs.items():
        if not samples:
            raise DataError(f"cluster {k} does not occur in the sample store (max label {store.max_clusters() - 1})")
    pi1, pi2 = edge_probabilities(graphs[k1]), edge_probabilities(graphs[k2])
    record = differential_network(pi1, pi2, threshold).to_json(names)
    record.update({"clusters": [k1, k2], "threshold": threshold,
                   "differences": [float(abs(pi1[h, k] - pi2[h, k])) for h, k in record["edges"]]})
    path = _write_json(os.path.join(out_dir, consts.DIFFNET_RECORD.format(k1=k1, k2=k2)), record)
    logger.info(f"Differential network {k1} vs {k2} at threshold {threshold}: {len(record['edges'])} edges")
    return path


def summarize_store(store_dir: str, out_dir: Optional[str] = None,
                    diffnets: Sequence[Tuple[int, int]] = (),
                    threshold: float = consts.DIFFNET_THRESHOLD) -> List[str]:
    """Write every posterior summary of a SampleStore; returns the written paths."""
    store = load_sample_store(store_dir)
    out_dir = out_dir or store_dir
    os.makedirs(out_dir, exist_ok=True)
    if not store.fixed_partition:
        logger.warning("Store comes from a chain with a random partition; per-cluster summaries are subject "
                       "to label switching. Refit with the Binder partition for cluster-specific posteriors.")
    written = []
    subject_ids = store.subject_ids

    P = coclustering(store.partitions)
    written.append(_write_csv(os.path.join(out_dir, consts.COCLUSTERING_TABLE),
                              pd.DataFrame(P, index=subject_ids, columns=subject_ids), index=True))
    binder = binder_partition(store.partitions, P)
    written.append(_write_csv(os.path.join(out_dir, consts.BINDER_TABLE),
                              pd.DataFrame({consts.SUBJECT_ID: subject_ids, "cluster": binder.assignments})))
    written.append(_write_csv(os.path.join(out_dir, consts.N_CLUSTERS_TABLE),
                              cluster_count_distribution(store.partitions)))

    path = write_beta_intervals(store, out_dir) if store.n_saved >= 2 else None
    if path:
        written.append(path)
    written.append(write_trajectories(store, out_dir))
    written.extend(write_cluster_networks(store, out_dir))

    met_path = os.path.join(store_dir, consts.PREPROCESSED_METABOLITES)
    if os.path.exists(met_path):
        met = pd.read_csv(met_path, dtype={consts.SUBJECT_ID: str}).set_index(consts.SUBJECT_ID)
        frame = metabolite_cluster_means(met.loc[subject_ids].to_numpy(dtype=float), binder, list(met.columns))
        written.append(_write_csv(os.path.join(out_dir, consts.METABOLITE_MEANS_TABLE), frame))

    for k1, k2 in diffnets:
        written.append(write_diffnet(store, out_dir, k1, k2, threshold))
    logger.info(f"Wrote {len(written)} summary files to {out_dir}")
    return written


def read_partition_file(path: str, subject_ids: Sequence[str]) -> Partition:
    """Partition from a ``binder_partition.csv``-style file, aligned to ``subject_ids``."""
    if not os.path.exists(path):
        raise DataError("partition file not found", file=path)
    frame = pd.read_csv(path, dtype={consts.SUBJECT_ID: str})
    if "cluster" not in frame.columns:
        raise DataError("partition file needs a 'cluster' column", file=path, line=1)
    if len(frame) != len(subject_ids):
        raise DataError(f"partition file has {len(frame)} rows but the data has {len(subject_ids)} subjects",
                        file=path)
    if consts.SUBJECT_ID in frame.columns:
        frame = frame.set_index(consts.SUBJECT_ID)
        unknown = sorted(set(subject_ids) - set(frame.index))
        if unknown:
            raise DataError(f"subjects missing from partition file: {unknown[:5]}", file=path)
        labels = frame.loc[list(subject_ids), "cluster"].to_numpy(dtype=int)
    else:
        labels = frame["cluster"].to_numpy(dtype=int)
    return Partition(labels)
