import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from growthgraph.gtypes import ChainState, Graph, ModelData
from growthgraph.utils import consts
from growthgraph.utils.errors import TruncatedStoreError

logger = logging.getLogger(__name__)


def coordinate_names(data: ModelData) -> List[str]:
    """Column label of every longitudinal coordinate, e.g. ``zbmi[24]``."""
    long = data.longitudinal
    return [f"{name}[{t:g}]" for name, grid in zip(long.process_names, long.times) for t in grid]


def _coefficient_names(rows: List[str], covariates: List[str]) -> List[str]:
    return [f"{r}:{c}" for r in rows for c in covariates]


class SampleStoreWriter:
    """Append-only writer of saved iterations, flushed every ``flush_every`` records."""

    def __init__(self, out_dir: str, data: ModelData, n_saved: int, flush_every: int = 100,
                 fixed_partition: bool = False):
        self.out_dir = out_dir
        self.flush_every = flush_every
        os.makedirs(out_dir, exist_ok=True)
        for name in consts.STORE_FILES + [consts.PREPROCESSED_METABOLITES]:
            path = os.path.join(out_dir, name)
            if os.path.exists(path):
                os.remove(path)

        covariates = data.covariates.column_names
        self.process_names = data.longitudinal.process_names
        self.columns = {
            consts.PARTITION_TABLE: ["iteration"] + list(data.subject_ids),
            consts.BETA_Y_TABLE: ["iteration"] + _coefficient_names(coordinate_names(data), covariates),
            consts.BETA_M_TABLE: ["iteration"] + _coefficient_names(data.metabolites.column_names, covariates),
            consts.SCALAR_TABLE: (["iteration", "K"] + [f"tau2_{name}" for name in self.process_names]
                                  + ["sigma2", "phi2", "eta2"] + [f"xi_{name}" for name in self.process_names]
                                  + ["loglik"]),
        }
        self._rows: Dict[str, list] = {name: [] for name in self.columns}
        self._records: Dict[str, list] = {consts.GRAPH_RECORDS: [], consts.THETA_RECORDS: []}
        self.n_written = 0

        layout = {
            "subject_ids": list(data.subject_ids),
            "process_names": list(self.process_names),
            "times": [grid.tolist() for grid in data.longitudinal.times],
            "coordinates": coordinate_names(data),
            "metabolites": list(data.metabolites.column_names),
            "covariates": list(covariates),
            "fixed_partition": fixed_partition,
            "n_saved": n_saved,
        }
        with open(os.path.join(out_dir, consts.LAYOUT_FILE), "w", encoding="utf-8") as f:
            json.dump(layout, f, indent=2)
        met = data.metabolites
        frame = pd.DataFrame(met.M, columns=met.column_names)
        frame.insert(0, consts.SUBJECT_ID, met.subject_ids)
        frame.to_csv(os.path.join(out_dir, consts.PREPROCESSED_METABOLITES), index=False)

    def append(self, state: ChainState, loglik: float) -> None:
        t = state.iteration
        kp = state.kernel_params
        self._rows[consts.PARTITION_TABLE].append([t] + state.partition.assignments.tolist())
        self._rows[consts.BETA_Y_TABLE].append([t] + state.beta_Y.ravel().tolist())
        self._rows[consts.BETA_M_TABLE].append([t] + state.beta_M.ravel().tolist())
        self._rows[consts.SCALAR_TABLE].append(
            [t, state.K] + state.tau2.tolist() + [kp.sigma2, kp.phi2, kp.eta2] + list(kp.xi) + [loglik]
        )
        clusters = []
        for graph, omega in zip(state.atoms.graph, state.atoms.omega):
            edges = sorted(graph.edges)
            clusters.append({
                "edges": [[h, k] for h, k in edges],
                "omega_diag": np.diag(omega.omega).tolist(),
                "omega_edges": [float(omega.omega[h, k]) for h, k in edges],
            })
        self._records[consts.GRAPH_RECORDS].append({"iteration": t, "clusters": clusters})
        self._records[consts.THETA_RECORDS].append({
            "iteration": t,
            "mu_theta": state.mu_theta.tolist(),
            "theta_star": [theta.tolist() for theta in state.atoms.theta],
        })
        self.n_written += 1
        if len(self._rows[consts.PARTITION_TABLE]) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        for name, rows in self._rows.items():
            if not rows:
                continue
            path = os.path.join(self.out_dir, name)
            pd.DataFrame(rows, columns=self.columns[name]).to_csv(
                path, mode="a", header=not os.path.exists(path), index=False
            )
            rows.clear()
        for name, records in self._records.items():
            with open(os.path.join(self.out_dir, name), "a", encoding="utf-8") as f:
                for record in records:
                    f.write(json.dumps(record) + "\n")
            records.clear()

    def close(self) -> None:
        self.flush()
        logger.info(f"Wrote {self.n_written} saved iterations to {self.out_dir}")


@dataclass
class SampleStore:
    path: str
    layout: dict
    partitions: np.ndarray
    iterations: np.ndarray
    beta_Y: pd.DataFrame
    beta_M: pd.DataFrame
    scalars: pd.DataFrame
    graph_records: List[dict]
    theta_records: List[dict]

    @property
    def n_saved(self) -> int:
        return int(self.partitions.shape[0])

    @property
    def subject_ids(self) -> List[str]:
        return list(self.layout["subject_ids"])

    @property
    def fixed_partition(self) -> bool:
        return bool(self.layout.get("fixed_partition", False))

    @property
    def p_M(self) -> int:
        return len(self.layout["metabolites"])

    def max_clusters(self) -> int:
        return int(self.partitions.max()) + 1 if self.partitions.size else 0

    def graphs(self, k: int) -> List[Graph]:
        """Sampled graphs of cluster ``k`` over the iterations where it exists."""
        out = []
        for record in self.graph_records:
            if k < len(record["clusters"]):
                out.append(Graph(self.p_M, frozenset(tuple(e) for e in record["clusters"][k]["edges"])))
        return out

    def omegas(self, k: int) -> List[np.ndarray]:
        out = []
        for record in self.graph_records:
            if k < len(record["clusters"]):
                cluster = record["clusters"][k]
                omega = np.diag(np.asarray(cluster["omega_diag"], dtype=float))
                for (h, j), value in zip(cluster["edges"], cluster["omega_edges"]):
                    omega[h, j] = omega[j, h] = value
                out.append(omega)
        return out

    def theta_star(self) -> List[np.ndarray]:
        return [np.asarray(record["theta_star"], dtype=float) for record in self.theta_records]


def _read_jsonl(path: str) -> List[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def load_sample_store(path: str, required: Optional[List[str]] = None) -> SampleStore:
    """Read a SampleStore directory; incomplete stores raise ``TruncatedStoreError``."""
    required = required or consts.STORE_FILES
    missing = [name for name in required if not os.path.exists(os.path.join(path, name))]
    if missing:
        for name in missing:
            logger.warning(f"Required file not found: {name}")
        raise TruncatedStoreError(missing)

    with open(os.path.join(path, consts.LAYOUT_FILE), "r", encoding="utf-8") as f:
        layout = json.load(f)
    tables = {name: pd.read_csv(os.path.join(path, name))
              for name in (consts.PARTITION_TABLE, consts.BETA_Y_TABLE, consts.BETA_M_TABLE, consts.SCALAR_TABLE)}
    records = {name: _read_jsonl(os.path.join(path, name)) for name in (consts.GRAPH_RECORDS, consts.THETA_RECORDS)}

    expected = int(layout.get("n_saved", 0))
    short = [f"{name} ({len(table)} of {expected} rows)" for name, table in tables.items() if len(table) != expected]
    short += [f"{name} ({len(rows)} of {expected} records)" for name, rows in records.items() if len(rows) != expected]
    if short:
        raise TruncatedStoreError(short)

    partitions = tables[consts.PARTITION_TABLE]
    return SampleStore(
        path=path,
        layout=layout,
        partitions=partitions[layout["subject_ids"]].to_numpy(dtype=int) if expected else
        np.zeros((0, len(layout["subject_ids"])), dtype=int),
        iterations=partitions["iteration"].to_numpy(dtype=int),
        beta_Y=tables[consts.BETA_Y_TABLE].set_index("iteration"),
        beta_M=tables[consts.BETA_M_TABLE].set_index("iteration"),
        scalars=tables[consts.SCALAR_TABLE].set_index("iteration"),
        graph_records=records[consts.GRAPH_RECORDS],
        theta_records=records[consts.THETA_RECORDS],
    )
