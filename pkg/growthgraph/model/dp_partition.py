import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from growthgraph.gtypes import ClusterAtoms, DPConfig, Graph, GWishartParams, Partition, PrecisionMatrix
from growthgraph.model.ggm import (
    NormalizingConstantCache,
    graph_prior_logpmf,
    gwishart_sample,
    scatter_matrix,
    enumerate_graphs,
)
from growthgraph.model.gp_kernel import LOG_2PI, KernelMatrix
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError, NumericalError
from growthgraph.utils.linalg import jittered_cholesky, logdet_from_cholesky

logger = logging.getLogger(__name__)

MAX_PPMX_NODES = 4


def crp_k_moments(alpha: float, N: int) -> Tuple[float, float]:
    """Exact mean and variance of the number of clusters among N draws from a CRP."""
    i = np.arange(N, dtype=float)
    mean = float(np.sum(alpha / (alpha + i)))
    variance = float(np.sum(alpha * i / (alpha + i) ** 2))
    return mean, variance


def log_stirling_first(N: int) -> np.ndarray:
    """log |s(N, k)| for k = 0..N (unsigned Stirling numbers of the first kind)."""
    row = np.full(N + 1, -np.inf)
    row[0] = 0.0
    for n in range(N):
        nxt = np.full(N + 1, -np.inf)
        with np.errstate(divide="ignore"):
            nxt[1:] = np.logaddexp(np.log(n) + row[1:] if n > 0 else -np.inf, row[:-1])
        row = nxt
    return row


def crp_k_pmf(alpha: float, N: int) -> np.ndarray:
    """P(K_N = k) for k = 0..N; entry 0 is zero for N >= 1."""
    k = np.arange(N + 1)
    with np.errstate(divide="ignore"):
        log_p = log_stirling_first(N) + k * np.log(alpha) + special.gammaln(alpha) - special.gammaln(alpha + N)
    pmf = np.exp(log_p)
    return pmf / pmf.sum()


def calibrate_alpha(target_mean: float, N: int) -> float:
    """DP mass giving the requested prior expected number of clusters."""
    if not 1.0 < target_mean < N:
        raise DataError(f"target number of clusters must lie in (1, {N}), got {target_mean}")
    return float(optimize.brentq(lambda a: crp_k_moments(a, N)[0] - target_mean, 1e-10, 1e10, xtol=1e-12))


def stick_breaking_weights(alpha: float, truncation: int, rng: np.random.Generator) -> np.ndarray:
    if truncation < 1:
        raise DataError("stick-breaking truncation must be at least 1")
    v = rng.beta(1.0, alpha, size=truncation)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v)[:-1]])
    return v * remaining


def canonicalize(assignments: Sequence[int]) -> Partition:
    return Partition.from_labels(assignments)


def enumerate_set_partitions(N: int) -> Iterator[np.ndarray]:
    """Every set partition of N items as a canonical label vector (restricted growth strings)."""
    if N == 0:
        yield np.zeros(0, dtype=int)
        return
    labels = [0] * N
    maxima = [0] * N

    def fill(i: int):
        if i == N:
            yield np.array(labels)
            return
        for c in range(maxima[i - 1] + 2):
            labels[i] = c
            maxima[i] = max(maxima[i - 1], c)
            yield from fill(i + 1)

    yield from fill(1)


@dataclass
class BaseMeasure:
    """P0: GP(mu_theta, K) x G-Wishart(nu, Psi, G) x Bernoulli(d) edges."""

    mu_theta: np.ndarray
    kernel: KernelMatrix
    gwishart: GWishartParams
    d: float

    def draw(self, rng: np.random.Generator) -> Tuple[np.ndarray, PrecisionMatrix, Graph]:
        theta = self.mu_theta + self.kernel.chol @ rng.standard_normal(self.kernel.dim)
        p = self.gwishart.p
        pairs = list(combinations(range(p), 2))
        keep = rng.random(len(pairs)) < self.d
        graph = Graph(p, frozenset(e for e, k in zip(pairs, keep) if k))
        return theta, gwishart_sample(self.gwishart, graph, rng), graph


def draw_from_base(base: BaseMeasure, rng: np.random.Generator) -> Tuple[np.ndarray, PrecisionMatrix, Graph]:
    return base.draw(rng)


@dataclass
class SubjectLikelihood:
    """Per-subject log-likelihood of an atom given everything outside the partition.

    ``resid_Y`` is Y - X beta_Y' and ``resid_M`` is M - X beta_M' (imputed
    values filled in); ``tau2`` is the noise variance of each longitudinal
    coordinate.
    """

    resid_Y: np.ndarray
    tau2: np.ndarray
    resid_M: np.ndarray
    use_longitudinal: bool = True
    use_metabolites: bool = True
    enabled: bool = True
    _factors: Dict[int, tuple] = field(default_factory=dict, repr=False)

    def _precision_factor(self, omega: PrecisionMatrix) -> Tuple[np.ndarray, float]:
        cached = self._factors.get(id(omega))
        if cached is not None and cached[0] is omega:
            return cached[1], cached[2]
        chol, _ = jittered_cholesky(omega.omega, context="cluster precision")
        logdet = logdet_from_cholesky(chol)
        self._factors[id(omega)] = (omega, chol, logdet)
        return chol, logdet

    def reset(self) -> None:
        self._factors.clear()

    def __call__(self, i: int, theta: np.ndarray, omega: PrecisionMatrix) -> float:
        if not self.enabled:
            return 0.0
        total = 0.0
        if self.use_longitudinal:
            r = self.resid_Y[i] - theta
            total += -0.5 * float(np.sum(LOG_2PI + np.log(self.tau2) + r ** 2 / self.tau2))
        if self.use_metabolites:
            chol, logdet = self._precision_factor(omega)
            z = self.resid_M[i] @ chol
            total += 0.5 * logdet - 0.5 * chol.shape[0] * LOG_2PI - 0.5 * float(z @ z)
        return total


def _sample_index(log_weights: np.ndarray, rng: np.random.Generator) -> int:
    w = np.exp(log_weights - log_weights.max())
    cdf = np.cumsum(w)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(w) - 1))


def polya_urn_sweep(partition: Partition, atoms: ClusterAtoms, likelihood: SubjectLikelihood, dp: DPConfig,
                    base: BaseMeasure, rng: np.random.Generator) -> Tuple[Partition, ClusterAtoms]:
    """One pass of the auxiliary-atom Polya urn over all subjects, in index order.

    A subject whose cluster empties on removal keeps that cluster's atom as
    the first auxiliary candidate; the remaining candidates come from P0.
    """
    labels = partition.assignments.copy()
    theta = list(atoms.theta)
    omega = list(atoms.omega)
    graph = list(atoms.graph)
    counts = list(np.bincount(labels, minlength=len(theta)))
    m = dp.m_aux
    log_aux = np.log(dp.alpha / m)

    for i in range(labels.size):
        c = int(labels[i])
        counts[c] -= 1
        candidates = []
        if counts[c] == 0:
            candidates.append((theta.pop(c), omega.pop(c), graph.pop(c)))
            counts.pop(c)
            labels[labels > c] -= 1
        while len(candidates) < m:
            candidates.append(base.draw(rng))

        K = len(theta)
        log_w = np.empty(K + m)
        for j in range(K):
            log_w[j] = np.log(counts[j]) + likelihood(i, theta[j], omega[j])
        for a, (t, o, _) in enumerate(candidates):
            log_w[K + a] = log_aux + likelihood(i, t, o)
        if np.any(np.isnan(log_w)) or np.any(log_w == np.inf) or not np.isfinite(log_w.max()):
            raise NumericalError(f"non-finite urn weights for subject {i}: K={K}, "
                                 f"log weights {np.array2string(log_w, precision=3)}")
        choice = _sample_index(log_w, rng)
        if choice < K:
            labels[i] = choice
            counts[choice] += 1
        else:
            t, o, g = candidates[choice - K]
            theta.append(t)
            omega.append(o)
            graph.append(g)
            counts.append(1)
            labels[i] = K

    order = []
    for label in labels:
        if label not in order:
            order.append(int(label))
    new_atoms = ClusterAtoms(theta=theta, omega=omega, graph=graph).reordered(order)
    remap = np.empty(len(order), dtype=int)
    remap[order] = np.arange(len(order))
    return Partition(remap[labels]), new_atoms


def ppmx_log_marginal_partition(rho: Partition, M: np.ndarray, alpha: float, nu: float, psi: np.ndarray,
                                d: float, n_mc: int = consts.DEFAULT_BD_N_MC, seed: int = 0,
                                cache: Optional[NormalizingConstantCache] = None) -> float:
    """log p(rho | M) up to a constant, with (G, Omega) integrated out of every cluster.

    Graphs are summed exhaustively, so only small p is allowed; normalizing
    constants are Monte Carlo estimates.
    """
    M = np.asarray(M, dtype=float)
    p = M.shape[1]
    if p > MAX_PPMX_NODES:
        raise DataError(f"partition marginal is limited to p_M <= {MAX_PPMX_NODES}, got {p}")
    if rho.N != M.shape[0]:
        raise DataError(f"partition has {rho.N} subjects but the data has {M.shape[0]} rows")
    prior = GWishartParams(nu=nu, psi=psi)
    cache = cache or NormalizingConstantCache(seed=seed, n_mc=n_mc)
    graphs = enumerate_graphs(p)
    log_prior = np.array([graph_prior_logpmf(g, d) for g in graphs])

    total = rho.K * np.log(alpha) + special.gammaln(alpha) - special.gammaln(alpha + rho.N)
    for j in range(rho.K):
        members = M[rho.members(j)]
        posterior = prior.posterior(members.shape[0], scatter_matrix(members))
        terms = log_prior + np.array([cache.log_marginal_ratio(prior, posterior, g) for g in graphs])
        total += special.gammaln(members.shape[0]) + special.logsumexp(terms)
    return float(total)
