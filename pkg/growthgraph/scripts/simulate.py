"""Forward simulation of a clustered growth/metabolite dataset in the input file layout."""
import json
import logging
import os
from itertools import combinations
from typing import Optional

import numpy as np
import pandas as pd
import yaml

from growthgraph.configs.run_config import SimulationSection
from growthgraph.gtypes import Graph, KernelParams
from growthgraph.model.gp_kernel import build_kernel_matrix
from growthgraph.utils import consts
from growthgraph.utils.errors import ConfigError
from growthgraph.utils.rng import simulation_rng

logger = logging.getLogger(__name__)

# Chain schedule written into the generated config
SIMULATION_SCHEDULE = {"n_iter": 20_000, "n_burnin": 16_000, "thin": 2, "adapt_init": 100}


def _distinct_graphs(p: int, k: int, n_edges: int, rng: np.random.Generator):
    pairs = list(combinations(range(p), 2))
    if n_edges > len(pairs):
        raise ConfigError(f"edges_per_graph={n_edges} exceeds the {len(pairs)} possible edges for p_m={p}")
    graphs = []
    for _ in range(k):
        for _attempt in range(100):
            chosen = rng.choice(len(pairs), size=n_edges, replace=False)
            graph = Graph(p, frozenset(pairs[c] for c in chosen))
            if graph not in graphs:
                break
        graphs.append(graph)
    return graphs


def _precision_for(graph: Graph, strength: float, rng: np.random.Generator) -> np.ndarray:
    omega = np.eye(graph.p)
    for h, k in graph.edges:
        omega[h, k] = omega[k, h] = strength * rng.choice([-1.0, 1.0])
    smallest = np.min(np.linalg.eigvalsh(omega))
    if smallest < 0.1:
        omega += (0.1 - smallest) * np.eye(graph.p)
    return omega


def simulate_dataset(sim: SimulationSection, out_dir: str, seed: Optional[int] = None) -> dict:
    """Write longitudinal/metabolite/covariate CSVs, ``truth.json`` and a ready-to-fit ``config.yaml``."""
    seed = sim.seed if seed is None else seed
    rng = simulation_rng(seed)
    if sim.k_true > sim.n_subjects:
        raise ConfigError(f"k_true={sim.k_true} exceeds n_subjects={sim.n_subjects}")
    if len(sorted(set(sim.times))) != len(sim.times) or sorted(sim.times) != list(sim.times):
        raise ConfigError("simulation times must be strictly increasing")
    os.makedirs(out_dir, exist_ok=True)

    N, S, K, p_M, q = sim.n_subjects, len(sim.processes), sim.k_true, sim.p_m, sim.n_covariates
    times = [np.asarray(sim.times, dtype=float) for _ in range(S)]
    p_Y = S * len(sim.times)

    labels = rng.permutation(np.arange(N) % K)
    order = []
    for label in labels:
        if label not in order:
            order.append(int(label))
    remap = np.empty(K, dtype=int)
    remap[order] = np.arange(K)
    labels = remap[labels]

    spacing = float(np.median(np.diff(sim.times))) if len(sim.times) > 1 else 1.0
    kernel_params = KernelParams(sigma2=0.5, phi2=(2.0 * spacing) ** 2, eta2=0.05, xi=(1.0,) * S)
    kernel = build_kernel_matrix(kernel_params, times)
    offsets = (np.arange(K) - 0.5 * (K - 1)) * sim.theta_separation
    theta_star = np.stack([offsets[j] + kernel.chol @ rng.standard_normal(p_Y) for j in range(K)])

    graphs = _distinct_graphs(p_M, K, sim.edges_per_graph, rng)
    omegas = [_precision_for(g, sim.edge_strength, rng) for g in graphs]

    X = rng.standard_normal((N, q))
    beta_Y = sim.beta_scale * rng.standard_normal((p_Y, q))
    beta_M = sim.beta_scale * rng.standard_normal((p_M, q))
    Y = theta_star[labels] + X @ beta_Y.T + np.sqrt(sim.tau2) * rng.standard_normal((N, p_Y))
    M = X @ beta_M.T
    for j in range(K):
        members = np.flatnonzero(labels == j)
        cov = np.linalg.inv(omegas[j])
        M[members] += rng.multivariate_normal(np.zeros(p_M), cov, size=members.size)

    Y[rng.random(Y.shape) < sim.missing_rate] = np.nan
    M[rng.random(M.shape) < sim.missing_rate] = np.nan

    ids = [f"S{i + 1:04d}" for i in range(N)]
    rows = []
    for i, sid in enumerate(ids):
        for s, name in enumerate(sim.processes):
            for c, t in enumerate(sim.times):
                rows.append({consts.SUBJECT_ID: sid, "process": name, "time": t, "value": Y[i, s * len(sim.times) + c]})
    pd.DataFrame(rows).to_csv(os.path.join(out_dir, consts.LONGITUDINAL_FILE), index=False)

    met_names = [f"m{c + 1}" for c in range(p_M)]
    met = pd.DataFrame(np.exp(M), columns=met_names)
    met.insert(0, consts.SUBJECT_ID, ids)
    met.to_csv(os.path.join(out_dir, consts.METABOLITE_FILE), index=False)

    cov_names = [f"x{c + 1}" for c in range(q)]
    cov = pd.DataFrame(X, columns=cov_names)
    cov.insert(0, consts.SUBJECT_ID, ids)
    cov.to_csv(os.path.join(out_dir, consts.COVARIATE_FILE), index=False)

    truth = {
        "seed": seed,
        "subject_ids": ids,
        "partition": labels.tolist(),
        "graphs": [g.to_json(met_names) for g in graphs],
        "precisions": [o.tolist() for o in omegas],
        "theta_star": theta_star.tolist(),
        "beta_Y": beta_Y.tolist(),
        "beta_M": beta_M.tolist(),
        "tau2": [sim.tau2] * S,
        "kernel_params": kernel_params.to_dict(),
    }
    with open(os.path.join(out_dir, consts.TRUTH_FILE), "w", encoding="utf-8") as f:
        json.dump(truth, f, indent=2)

    config = {
        "data": {"base_dir": ".", "processes": [{"name": name, "transform": "none"} for name in sim.processes]},
        "mcmc": dict(SIMULATION_SCHEDULE, seed=seed),
    }
    with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as f:
        yaml.safe_dump(config, f, sort_keys=False)

    logger.info(f"Simulated N={N}, K={K}, p_Y={p_Y}, p_M={p_M}, q={q} into {out_dir}")
    return truth
