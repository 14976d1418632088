import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from growthgraph.gtypes import KernelParams
from growthgraph.utils.errors import DataError
from growthgraph.utils.linalg import inverse_from_cholesky, jittered_cholesky, logdet_from_cholesky

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


def kernel_entry(params: KernelParams, s1: int, s2: int, ti: float, tj: float) -> float:
    """Covariance between process s1 at time ti and process s2 at time tj."""
    value = params.xi[s1] * params.xi[s2] * params.sigma2 * np.exp(-((ti - tj) ** 2) / params.phi2)
    if s1 == s2 and ti == tj:
        value += params.eta2
    return float(value)


@dataclass(frozen=True)
class KernelMatrix:
    """Joint covariance of the concatenated process grids, factorized once."""

    K: np.ndarray
    chol: np.ndarray
    ridge: float
    params: KernelParams

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    @cached_property
    def logdet(self) -> float:
        return logdet_from_cholesky(self.chol)

    @cached_property
    def inverse(self) -> np.ndarray:
        return inverse_from_cholesky(self.chol)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.chol, True), b)


def build_kernel_matrix(params: KernelParams, times: Sequence[np.ndarray]) -> KernelMatrix:
    if len(times) != params.S:
        raise DataError(f"kernel has {params.S} process scales but {len(times)} time grids were given")
    t = np.concatenate([np.asarray(g, dtype=float) for g in times])
    process = np.repeat(np.arange(len(times)), [len(g) for g in times])
    xi = np.asarray(params.xi)[process]
    diff = t[:, None] - t[None, :]
    K = np.outer(xi, xi) * params.sigma2 * np.exp(-(diff ** 2) / params.phi2)
    K[(process[:, None] == process[None, :]) & (diff == 0)] += params.eta2
    K = 0.5 * (K + K.T)
    chol, ridge = jittered_cholesky(K, context=f"kernel parameters {params.to_dict()}")
    if ridge > 0:
        logger.debug(f"Kernel factorized with ridge {ridge:g} for parameters {params.to_dict()}")
    return KernelMatrix(K=K, chol=chol, ridge=ridge, params=params)


def _factor(cov: Union[KernelMatrix, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(cov, KernelMatrix):
        return cov.K, cov.chol
    cov = np.asarray(cov, dtype=float)
    chol, _ = jittered_cholesky(cov, context="gaussian covariance")
    return cov, chol


def gaussian_logpdf_cov(x: np.ndarray, mu: np.ndarray, K: Union[KernelMatrix, np.ndarray]):
    """Multivariate normal log-density; rows of a 2-d ``x`` are evaluated separately."""
    cov, chol = _factor(K)
    x = np.asarray(x, dtype=float)
    r = x - np.asarray(mu, dtype=float)
    if r.shape[-1] != cov.shape[0]:
        raise DataError(f"dimension mismatch: vector of length {r.shape[-1]} against a {cov.shape[0]}-dim covariance")
    z = linalg.solve_triangular(chol, np.atleast_2d(r).T, lower=True)
    out = -0.5 * (cov.shape[0] * LOG_2PI + logdet_from_cholesky(chol) + np.sum(z ** 2, axis=0))
    return float(out[0]) if r.ndim == 1 else out


def gaussian_conditional(x: np.ndarray, mu: np.ndarray, K: Union[KernelMatrix, np.ndarray],
                         observed_mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Law of the unobserved coordinates of N(mu, K) given the observed ones.

    Returns (mean, covariance) of the missing block; both are empty when
    nothing is missing.
    """
    cov, _ = _factor(K)
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    observed = np.asarray(observed_mask, dtype=bool)
    if x.shape != mu.shape or observed.shape != mu.shape or cov.shape[0] != mu.shape[0]:
        raise DataError("dimension mismatch in gaussian_conditional")
    missing = ~observed
    if not missing.any():
        logger.debug("gaussian_conditional called with nothing missing; no-op")
        return np.empty(0), np.empty((0, 0))
    if not observed.any():
        return mu.copy(), cov.copy()
    K_oo = cov[np.ix_(observed, observed)]
    K_mo = cov[np.ix_(missing, observed)]
    chol, _ = jittered_cholesky(K_oo, context="observed block of conditional")
    gain = linalg.cho_solve((chol, True), K_mo.T).T
    mean = mu[missing] + gain @ (x[observed] - mu[observed])
    cond = cov[np.ix_(missing, missing)] - gain @ K_mo.T
    return mean, 0.5 * (cond + cond.T)


def process_layout(times: Sequence[np.ndarray]) -> List[slice]:
    """Slices of each process inside the concatenated vector."""
    offsets = np.concatenate([[0], np.cumsum([len(t) for t in times])]).astype(int)
    return [slice(offsets[s], offsets[s + 1]) for s in range(len(times))]
