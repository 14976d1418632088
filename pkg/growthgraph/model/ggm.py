import hashlib
import logging
import threading
from collections import OrderedDict
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg, special, stats

from growthgraph.gtypes import Graph, GWishartParams, PrecisionMatrix
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError, NumericalError
from growthgraph.utils.linalg import jittered_cholesky, logdet_from_cholesky, symmetrize
from growthgraph.utils.rng import stream

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
MAX_ENUMERATION_NODES = 5


def default_edge_probability(p: int) -> float:
    """2 / (p - 1), which puts about one edge per node a priori."""
    return 2.0 / (p - 1) if p > 2 else 0.5


def graph_prior_logpmf(graph: Graph, d: float) -> float:
    if not 0 < d < 1:
        raise DataError(f"edge inclusion probability must lie in (0, 1), got {d}")
    return graph.n_edges * np.log(d) + (graph.max_edges - graph.n_edges) * np.log1p(-d)


def gwishart_logdensity_unnorm(omega: PrecisionMatrix, params: GWishartParams, graph: Graph) -> float:
    violation = omega.pattern_violation(graph)
    if violation >= consts.PATTERN_TOL:
        raise DataError(f"precision matrix violates the zero pattern of its graph by {violation:.3g}")
    sign, logdet = np.linalg.slogdet(omega.omega)
    if sign <= 0:
        raise DataError("precision matrix is not positive definite")
    return 0.5 * (params.nu - 2.0) * logdet - 0.5 * float(np.sum(params.psi * omega.omega))


def wishart_lognorm(b: float, D: np.ndarray) -> float:
    """log I_G(b, D) for the complete graph (a Wishart with b + p - 1 degrees of freedom)."""
    p = D.shape[0]
    n = b + p - 1
    _, logdet = np.linalg.slogdet(D)
    return 0.5 * n * p * np.log(2.0) + special.multigammaln(0.5 * n, p) - 0.5 * n * logdet


def empty_graph_lognorm(b: float, D: np.ndarray) -> float:
    """log I_G(b, D) for the graph without edges: a product of Gamma integrals."""
    diag = np.diag(D)
    return float(np.sum(special.gammaln(0.5 * b) + 0.5 * b * (np.log(2.0) - np.log(diag))))


def gwishart_lognorm_mc(params: GWishartParams, graph: Graph, n_mc: int,
                        rng: np.random.Generator) -> Tuple[float, float]:
    """Monte Carlo estimate of log I_G(nu, Psi) and its delta-method standard error.

    Omega is written as Phi'Phi with Phi = Q T, where T'T = Psi^-1 and Q is
    upper triangular. Free entries of Q are chi / standard normal draws; the
    entries at non-edges are completed so that Omega keeps its zeros, and the
    estimator averages exp(-sum of their squares / 2).
    """
    b, D = float(params.nu), params.psi
    p = D.shape[0]
    adj = graph.adjacency()
    T = linalg.cholesky(np.linalg.inv(D), lower=True).T
    t_diag = np.diag(T)
    upper = np.triu(adj, k=1)
    nu_i = upper.sum(axis=1)
    k_i = upper.sum(axis=0)
    log_const = float(np.sum(
        0.5 * (b + nu_i) * np.log(2.0)
        + special.gammaln(0.5 * (b + nu_i))
        + 0.5 * nu_i * LOG_2PI
        + (b + nu_i + k_i) * np.log(t_diag)
    ))
    if graph.n_edges == graph.max_edges:
        return log_const, 0.0

    Q = np.zeros((n_mc, p, p))
    Phi = np.zeros((n_mc, p, p))
    penalty = np.zeros(n_mc)
    for i in range(p):
        Q[:, i, i] = np.sqrt(rng.chisquare(b + nu_i[i], size=n_mc))
        Phi[:, i, i] = Q[:, i, i] * T[i, i]
        for j in range(i + 1, p):
            partial = Q[:, i, i:j] @ T[i:j, j]
            if adj[i, j]:
                Q[:, i, j] = rng.standard_normal(n_mc)
            else:
                target = -np.einsum("nr,nr->n", Phi[:, :i, i], Phi[:, :i, j]) / Phi[:, i, i] if i > 0 else 0.0
                Q[:, i, j] = (target - partial) / T[j, j]
                penalty += Q[:, i, j] ** 2
            Phi[:, i, j] = partial + Q[:, i, j] * T[j, j]

    log_w = -0.5 * penalty
    log_mean = special.logsumexp(log_w) - np.log(n_mc)
    w = np.exp(log_w - log_w.max())
    std_error = float(np.std(w, ddof=1) / (np.sqrt(n_mc) * np.mean(w))) if n_mc > 1 else float("inf")
    return log_const + float(log_mean), std_error


def gwishart_sample(params: GWishartParams, graph: Graph, rng: np.random.Generator,
                    tol: float = consts.PATTERN_TOL,
                    max_iter: int = consts.GWISHART_MAX_ITER) -> PrecisionMatrix:
    """Draw from G-Wishart(nu, Psi) by completing a Wishart draw onto the graph's zero pattern."""
    p = params.p
    df = params.nu + p - 1
    scale = np.linalg.inv(params.psi)
    K = np.atleast_2d(stats.wishart.rvs(df=df, scale=symmetrize(scale), random_state=rng))
    if graph.n_edges == graph.max_edges:
        return PrecisionMatrix(symmetrize(K))

    chol, _ = jittered_cholesky(K, context="Wishart draw")
    Sigma = linalg.cho_solve((chol, True), np.eye(p))
    W = Sigma.copy()
    neighbors = [graph.neighbors(j) for j in range(p)]
    for iteration in range(1, max_iter + 1):
        W_prev = W.copy()
        for j in range(p):
            others = np.array([k for k in range(p) if k != j], dtype=int)
            beta = np.zeros(p - 1)
            if neighbors[j]:
                nj = np.array(neighbors[j], dtype=int)
                beta_star = linalg.solve(W[np.ix_(nj, nj)], Sigma[nj, j], assume_a="pos")
                beta[np.searchsorted(others, nj)] = beta_star
            column = W[np.ix_(others, others)] @ beta
            W[others, j] = column
            W[j, others] = column
        change = np.max(np.abs(W - W_prev))
        if change < tol * max(1.0, np.max(np.abs(W))):
            break
    else:
        raise NumericalError(f"G-Wishart completion did not converge after {max_iter} iterations "
                             f"(last change {change:.3g})")

    chol, _ = jittered_cholesky(symmetrize(W), context="completed G-Wishart covariance")
    omega = symmetrize(linalg.cho_solve((chol, True), np.eye(p)))
    omega[~graph.pattern()] = 0.0
    return PrecisionMatrix(omega)


def _digest(matrix: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(matrix).tobytes()).hexdigest()


class NormalizingConstantCache:
    """Memoized log I_G estimates.

    Each estimate draws from a stream addressed by the graph itself, so a value
    does not depend on which caller asked first, and prior and posterior
    constants of the same graph share their Monte Carlo draws.

    Prior constants are pinned: there are at most 2^(p(p-1)/2) of them per
    chain. Posterior constants change with the cluster scatter matrix on
    nearly every iteration and are reused only between the birth-death steps
    of one iteration, so they live in a small least-recently-used store.
    """

    def __init__(self, seed: int, n_mc: int = consts.DEFAULT_BD_N_MC, max_entries: int = 4096):
        self.seed = seed
        self.n_mc = n_mc
        self.max_entries = max_entries
        self._pinned: Dict[tuple, float] = {}
        self._values: "OrderedDict[tuple, float]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._pinned) + len(self._values)

    def _rng(self, graph: Graph) -> np.random.Generator:
        index = [h * graph.p + k for h, k in sorted(graph.edges)]
        return stream(self.seed, consts.STREAM_NORM_CONST, graph.p, len(index), *index)

    def lognorm(self, params: GWishartParams, graph: Graph, pinned: bool = False) -> float:
        key = (graph.key, float(params.nu), _digest(params.psi))
        store = self._pinned if pinned else self._values
        with self._lock:
            if key in store:
                self.hits += 1
                if not pinned:
                    self._values.move_to_end(key)
                return store[key]
        value, _ = gwishart_lognorm_mc(params, graph, self.n_mc, self._rng(graph))
        with self._lock:
            self.misses += 1
            store[key] = value
            if not pinned:
                while len(self._values) > self.max_entries:
                    self._values.popitem(last=False)
        return value

    def log_marginal_ratio(self, prior: GWishartParams, posterior: GWishartParams, graph: Graph) -> float:
        """log I_G(posterior) - log I_G(prior): the graph-dependent part of p(data | G)."""
        return self.lognorm(posterior, graph) - self.lognorm(prior, graph, pinned=True)


def scatter_matrix(data: np.ndarray) -> np.ndarray:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return data.T @ data


def bd_update(data: np.ndarray, graph: Graph, omega: PrecisionMatrix, params: GWishartParams, d: float,
              rng: np.random.Generator, cache: Optional[NormalizingConstantCache] = None,
              check: bool = False) -> Tuple[Graph, PrecisionMatrix, bool]:
    """One birth-or-death move on a uniformly chosen edge, then a fresh precision draw.

    ``data`` holds the cluster's centred metabolite vectors as rows. The move
    adds the edge if it is absent and removes it otherwise; it is accepted with
    the Metropolis-Hastings probability of the graph posterior (precision
    integrated out), after which Omega is resampled from its G-Wishart full
    conditional. Returns the new graph, the new precision and whether the
    move was accepted.
    """
    data = np.asarray(data, dtype=float).reshape(-1, params.p)
    if omega.p != params.p or graph.p != params.p:
        raise DataError("graph, precision and G-Wishart dimensions disagree")
    if cache is None:
        cache = NormalizingConstantCache(seed=int(rng.integers(2 ** 31)))
    posterior = params.posterior(data.shape[0], scatter_matrix(data))

    accepted = False
    if graph.max_edges > 0:
        h, k = list(combinations(range(graph.p), 2))[int(rng.integers(graph.max_edges))]
        proposal = graph.toggled(h, k)
        log_rate = (
            graph_prior_logpmf(proposal, d) - graph_prior_logpmf(graph, d)
            + cache.log_marginal_ratio(params, posterior, proposal)
            - cache.log_marginal_ratio(params, posterior, graph)
        )
        if np.isnan(log_rate):
            logger.warning(f"Non-finite birth-death rate for edge ({h}, {k}); staying at the current graph")
        elif np.log(rng.random()) < min(0.0, log_rate):
            graph = proposal
            accepted = True

    omega = gwishart_sample(posterior, graph, rng)
    if check:
        omega.check(graph)
    return graph, omega, accepted


def enumerate_graphs(p: int) -> List[Graph]:
    """All 2^(p(p-1)/2) graphs on p nodes, ordered by edge bitmask."""
    if p > MAX_ENUMERATION_NODES:
        raise DataError(f"graph enumeration is limited to p <= {MAX_ENUMERATION_NODES}, got {p}")
    pairs = list(combinations(range(p), 2))
    graphs = []
    for mask in range(2 ** len(pairs)):
        graphs.append(Graph(p, frozenset(e for b, e in enumerate(pairs) if mask >> b & 1)))
    return graphs


def gaussian_logdensity_precision(m: np.ndarray, mu: np.ndarray, omega):
    """Normal log-density under a precision matrix; rows of a 2-d ``m`` are evaluated separately."""
    omega = omega.omega if isinstance(omega, PrecisionMatrix) else np.asarray(omega, dtype=float)
    m = np.asarray(m, dtype=float)
    r = m - np.asarray(mu, dtype=float)
    p = omega.shape[0]
    if r.shape[-1] != p:
        raise DataError(f"dimension mismatch: vector of length {r.shape[-1]} against a {p}x{p} precision")
    chol, _ = jittered_cholesky(omega, context="precision matrix")
    z = np.atleast_2d(r) @ chol
    out = 0.5 * logdet_from_cholesky(chol) - 0.5 * p * LOG_2PI - 0.5 * np.sum(z ** 2, axis=1)
    return float(out[0]) if r.ndim == 1 else out


def precision_conditional(x: np.ndarray, mu: np.ndarray, omega,
                          observed_mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Missing block of N(mu, Omega^-1) given the observed block, read off the precision."""
    omega = omega.omega if isinstance(omega, PrecisionMatrix) else np.asarray(omega, dtype=float)
    observed = np.asarray(observed_mask, dtype=bool)
    missing = ~observed
    if not missing.any():
        return np.empty(0), np.empty((0, 0))
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    chol, _ = jittered_cholesky(omega[np.ix_(missing, missing)], context="missing block of precision")
    cov = linalg.cho_solve((chol, True), np.eye(int(missing.sum())))
    shift = omega[np.ix_(missing, observed)] @ (x[observed] - mu[observed])
    mean = mu[missing] - cov @ shift
    return mean, symmetrize(cov)
