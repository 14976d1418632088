import json
import logging
import os
import pickle
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.cluster import vq

from growthgraph.configs import settings
from growthgraph.configs.run_config import SamplerConfig
from growthgraph.gtypes import ChainState, ClusterAtoms, Graph, KernelParams, ModelData, Partition, PrecisionMatrix
from growthgraph.model.dp_partition import BaseMeasure, SubjectLikelihood, polya_urn_sweep
from growthgraph.model.ggm import NormalizingConstantCache, bd_update
from growthgraph.sampler.adaptive import AdaptiveProposal
from growthgraph.sampler.store import SampleStore, SampleStoreWriter, load_sample_store
from growthgraph.sampler.updates import (
    ModelContext,
    impute_missing,
    log_likelihood,
    update_beta,
    update_kernel_hyperparams,
    update_mu_theta,
    update_tau2,
    update_theta_star,
)
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError, GrowthGraphError, SamplerError
from growthgraph.utils.rng import chain_rng, cluster_rng, stream

logger = logging.getLogger(__name__)


class ChainRunner:
    """Owns one chain: its state, its random streams and its output directory."""

    def __init__(self, config: SamplerConfig, data: ModelData, out_dir: str,
                 n_workers: Optional[int] = None, check_invariants: Optional[bool] = None):
        self.config = config
        self.data = data
        self.out_dir = out_dir
        self.n_workers = n_workers or settings.n_workers
        self.check_invariants = settings.check_invariants if check_invariants is None else check_invariants
        self.ctx = ModelContext(data=data, config=config)
        self.rng = chain_rng(config.seed)
        self.norm_cache = NormalizingConstantCache(seed=config.seed, n_mc=config.bd_n_mc)
        self.fixed = config.fixed_partition is not None
        self.bd_proposed = 0
        self.bd_accepted = 0
        if self.fixed and config.fixed_partition.N != data.N:
            raise DataError(f"fixed partition has {config.fixed_partition.N} subjects, data has {data.N}")

    @property
    def snapshot_path(self) -> str:
        return os.path.join(self.out_dir, consts.SNAPSHOT_FILE)

    def _initial_partition(self, Y: np.ndarray, M: np.ndarray) -> Partition:
        k = min(self.config.init_clusters, self.data.N)
        if k <= 1:
            return Partition(np.zeros(self.data.N, dtype=int))
        features = np.hstack([Y, M])
        _, labels = vq.kmeans2(features, k, minit="++", seed=stream(self.config.seed, consts.STREAM_INIT))
        partition = Partition.from_labels(labels)
        logger.info(f"k-means start with {partition.K} clusters of sizes {partition.sizes.tolist()}")
        return partition

    def initial_state(self) -> ChainState:
        data = self.data
        long = data.longitudinal
        Y = np.where(long.observed_mask, long.Y, 0.0)
        M = np.where(data.metabolites.observed_mask, data.metabolites.M, 0.0)
        if self.fixed:
            partition = self.config.fixed_partition.canonical()
        else:
            partition = self._initial_partition(Y, M)

        all_times = np.concatenate(long.times)
        spread = float(np.var(all_times)) if all_times.size > 1 else 1.0
        kernel_params = KernelParams(sigma2=1.0, phi2=max(spread, 1e-2), eta2=1.0, xi=(1.0,) * long.S)
        p_M = data.metabolites.p_M
        atoms = ClusterAtoms()
        for j in range(partition.K):
            members = partition.members(j)
            atoms.append(Y[members].mean(axis=0), PrecisionMatrix(np.eye(p_M)), Graph.empty(p_M))

        q = data.covariates.q
        dim_kernel = 3 + long.S
        adaptive = {
            "beta_Y": AdaptiveProposal(long.p_Y * q, initial_sd=0.05, name="beta_Y"),
            "beta_M": AdaptiveProposal(p_M * q, initial_sd=0.05, name="beta_M"),
            "kernel": AdaptiveProposal(dim_kernel, initial_sd=0.1, name="kernel"),
        }
        return ChainState(
            partition=partition,
            atoms=atoms,
            beta_Y=np.zeros((long.p_Y, q)),
            beta_M=np.zeros((p_M, q)),
            tau2=np.ones(long.S),
            mu_theta=np.full(long.p_Y, self.config.mu_theta_mean),
            kernel_params=kernel_params,
            Y=Y,
            M=M,
            iteration=0,
            adaptive=adaptive,
        )

    def _cluster_graphs(self, state: ChainState, t: int) -> None:
        """Birth-death updates of every cluster's (G, Omega), fanned out over threads."""
        if self.config.bd_steps == 0:
            return
        resid = state.M - self.ctx.X @ state.beta_M.T
        p_M = resid.shape[1]

        def work(j: int):
            rng = cluster_rng(self.config.seed, t, j)
            members = state.partition.members(j)
            data = resid[members] if self.ctx.metabolites_on else np.zeros((0, p_M))
            graph, omega = state.atoms.graph[j], state.atoms.omega[j]
            accepted = 0
            for _ in range(self.config.bd_steps):
                graph, omega, ok = bd_update(data, graph, omega, self.config.gwishart, self.config.d, rng,
                                             cache=self.norm_cache, check=self.check_invariants)
                accepted += int(ok)
            return graph, omega, accepted

        clusters = range(state.K)
        if self.n_workers > 1 and state.K > 1:
            with ThreadPoolExecutor(max_workers=self.n_workers) as pool:
                results = list(pool.map(work, clusters))
        else:
            results = [work(j) for j in clusters]
        for j, (graph, omega, accepted) in enumerate(results):
            state.atoms.graph[j] = graph
            state.atoms.omega[j] = omega
            self.bd_accepted += accepted
            self.bd_proposed += self.config.bd_steps

    def _urn_sweep(self, state: ChainState) -> None:
        ctx = self.ctx
        likelihood = SubjectLikelihood(
            resid_Y=state.Y - ctx.X @ state.beta_Y.T,
            tau2=ctx.tau2_vector(state.tau2),
            resid_M=state.M - ctx.X @ state.beta_M.T,
            use_longitudinal=self.config.use_longitudinal,
            use_metabolites=self.config.use_metabolites,
            enabled=self.config.likelihood_enabled,
        )
        base = BaseMeasure(
            mu_theta=state.mu_theta,
            kernel=ctx.kernel(state.kernel_params),
            gwishart=self.config.gwishart,
            d=self.config.d,
        )
        state.partition, state.atoms = polya_urn_sweep(state.partition, state.atoms, likelihood,
                                                       self.config.dp, base, self.rng)

    def step(self, state: ChainState, t: int) -> ChainState:
        """One full iteration in the fixed update order."""
        self.ctx.adapting = self.config.adapt_init <= t < self.config.n_burnin
        if t == self.config.n_burnin:
            for proposal in state.adaptive.values():
                proposal.freeze()
        rng = self.rng
        impute_missing(state, self.ctx, rng)
        if not self.fixed:
            self._urn_sweep(state)
        update_theta_star(state, self.ctx, rng)
        self._cluster_graphs(state, t)
        update_beta(state, self.ctx, "Y", rng)
        update_beta(state, self.ctx, "M", rng)
        update_tau2(state, self.ctx, rng)
        update_mu_theta(state, self.ctx, rng)
        update_kernel_hyperparams(state, self.ctx, rng)
        state.iteration = t
        if self.check_invariants:
            for graph, omega in zip(state.atoms.graph, state.atoms.omega):
                omega.check(graph)
        return state

    def snapshot(self, state: ChainState) -> str:
        payload = {"state": state, "rng": self.rng.bit_generator.state, "iteration": state.iteration}
        with open(self.snapshot_path, "wb") as f:
            pickle.dump(payload, f)
        return self.snapshot_path

    def acceptance(self, state: ChainState) -> dict:
        out = {name: proposal.summary() for name, proposal in state.adaptive.items()}
        out["graph"] = {
            "proposed": self.bd_proposed,
            "accepted": self.bd_accepted,
            "rate": self.bd_accepted / self.bd_proposed if self.bd_proposed else None,
        }
        out["normalizing_constants"] = {"hits": self.norm_cache.hits, "misses": self.norm_cache.misses}
        return out

    def run(self) -> SampleStore:
        config = self.config
        logger.info(f"Starting chain: seed={config.seed}, n_iter={config.n_iter}, n_burnin={config.n_burnin}, "
                    f"thin={config.thin}, fixed partition={self.fixed}")
        writer = SampleStoreWriter(self.out_dir, self.data, n_saved=config.n_saved,
                                   flush_every=config.flush_every, fixed_partition=self.fixed)
        state = self.initial_state()
        started = time.time()
        for t in range(config.n_iter):
            try:
                state = self.step(state, t)
            except (GrowthGraphError, ArithmeticError, ValueError, linalg.LinAlgError) as e:
                logger.error(f"Chain failed at iteration {t}: {e}", exc_info=True)
                writer.close()
                path = self.snapshot(state)
                raise SamplerError(str(e), iteration=t, snapshot_path=path) from e
            if config.is_saved(t):
                writer.append(state, log_likelihood(state, self.ctx))
            if config.snapshot_every and (t + 1) % config.snapshot_every == 0:
                self.snapshot(state)
            if (t + 1) % config.log_every == 0:
                rates = {name: p.acceptance_rate for name, p in state.adaptive.items()}
                logger.info(f"Iteration {t + 1}/{config.n_iter}: K={state.K}, "
                            f"acceptance={ {k: round(v, 3) for k, v in rates.items()} }, "
                            f"elapsed {time.time() - started:.1f}s")
        writer.close()
        with open(os.path.join(self.out_dir, consts.ACCEPTANCE_FILE), "w", encoding="utf-8") as f:
            json.dump(self.acceptance(state), f, indent=2)
        return load_sample_store(self.out_dir)


def run_chain(config: SamplerConfig, data: ModelData, out_dir: str, **kwargs) -> SampleStore:
    return ChainRunner(config, data, out_dir, **kwargs).run()


def run_fixed_partition(config: SamplerConfig, data: ModelData, out_dir: str, **kwargs) -> SampleStore:
    """Chain with cluster labels frozen to ``config.fixed_partition``."""
    if config.fixed_partition is None:
        raise DataError("run_fixed_partition needs a fixed partition")
    return ChainRunner(config, data, out_dir, **kwargs).run()


def load_snapshot(path: str) -> dict:
    with open(path, "rb") as f:
        return pickle.load(f)
