"""Full-conditional updates of the chain, one function per parameter block.

Every update takes the current ``ChainState`` and a ``ModelContext`` and
returns the state after modifying it in place.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from growthgraph.configs.run_config import SamplerConfig
from growthgraph.gtypes import ChainState, KernelParams, ModelData
from growthgraph.model.ggm import gaussian_logdensity_precision, precision_conditional
from growthgraph.model.gp_kernel import LOG_2PI, KernelMatrix, build_kernel_matrix, gaussian_logpdf_cov
from growthgraph.utils.errors import DataError, NumericalError
from growthgraph.utils.linalg import jittered_cholesky, sample_mvn_precision

logger = logging.getLogger(__name__)

KERNEL_CACHE_SIZE = 4


@dataclass
class ModelContext:
    """Read-only data and settings shared by every update of one chain."""

    data: ModelData
    config: SamplerConfig
    adapting: bool = False
    _kernels: "OrderedDict[KernelParams, KernelMatrix]" = field(default_factory=OrderedDict, repr=False)

    def __post_init__(self):
        self.X = self.data.covariates.X
        self.times = self.data.longitudinal.times
        self.process_index = self.data.longitudinal.process_index
        self.observed_Y = self.data.longitudinal.observed_mask
        self.observed_M = self.data.metabolites.observed_mask

    @property
    def N(self) -> int:
        return self.data.N

    @property
    def q(self) -> int:
        return self.data.covariates.q

    @property
    def longitudinal_on(self) -> bool:
        return self.config.likelihood_enabled and self.config.use_longitudinal

    @property
    def metabolites_on(self) -> bool:
        return self.config.likelihood_enabled and self.config.use_metabolites

    def kernel(self, params: KernelParams) -> KernelMatrix:
        if params in self._kernels:
            self._kernels.move_to_end(params)
            return self._kernels[params]
        matrix = build_kernel_matrix(params, self.times)
        self._kernels[params] = matrix
        while len(self._kernels) > KERNEL_CACHE_SIZE:
            self._kernels.popitem(last=False)
        return matrix

    def tau2_vector(self, tau2: np.ndarray) -> np.ndarray:
        return np.asarray(tau2, dtype=float)[self.process_index]


def _fitted_Y(state: ChainState, ctx: ModelContext) -> np.ndarray:
    return state.theta_of_subjects() + ctx.X @ state.beta_Y.T


def update_tau2(state: ChainState, ctx: ModelContext, rng: np.random.Generator) -> ChainState:
    prior = ctx.config.tau2_prior
    resid = state.Y - _fitted_Y(state, ctx)
    tau2 = np.empty_like(state.tau2)
    for s in range(len(tau2)):
        shape, rate = prior.a, prior.b
        if ctx.longitudinal_on and ctx.N > 0:
            seg = ctx.data.longitudinal.segment(s)
            shape += 0.5 * ctx.N * (seg.stop - seg.start)
            rate += 0.5 * float(np.sum(resid[:, seg] ** 2))
        tau2[s] = stats.invgamma.rvs(shape, scale=rate, random_state=rng)
    state.tau2 = tau2
    return state


def update_mu_theta(state: ChainState, ctx: ModelContext, rng: np.random.Generator) -> ChainState:
    kernel = ctx.kernel(state.kernel_params)
    prior_precision = 1.0 / ctx.config.mu_theta_sd ** 2
    dim = kernel.dim
    precision = prior_precision * np.eye(dim)
    mean_part = np.full(dim, prior_precision * ctx.config.mu_theta_mean)
    if len(state.atoms):
        thetas = np.stack(state.atoms.theta)
        precision = precision + thetas.shape[0] * kernel.inverse
        mean_part = mean_part + kernel.solve(thetas.sum(axis=0))
    state.mu_theta = sample_mvn_precision(mean_part, precision, rng, context="mu_theta full conditional")
    return state


def update_theta_star(state: ChainState, ctx: ModelContext, rng: np.random.Generator) -> ChainState:
    kernel = ctx.kernel(state.kernel_params)
    prior_part = kernel.solve(state.mu_theta)
    tau2v = ctx.tau2_vector(state.tau2)
    resid = state.Y - ctx.X @ state.beta_Y.T
    for j in range(state.K):
        precision = kernel.inverse.copy()
        mean_part = prior_part.copy()
        if ctx.longitudinal_on:
            members = state.partition.members(j)
            precision[np.diag_indices_from(precision)] += members.size / tau2v
            mean_part += resid[members].sum(axis=0) / tau2v
        state.atoms.theta[j] = sample_mvn_precision(mean_part, precision, rng, context=f"theta* of cluster {j}")
    return state


def _beta_log_likelihood(beta: np.ndarray, block: str, state: ChainState, ctx: ModelContext) -> float:
    if block == "Y":
        if not ctx.longitudinal_on:
            return 0.0
        resid = state.Y - state.theta_of_subjects() - ctx.X @ beta.T
        return -0.5 * float(np.sum(resid ** 2 / ctx.tau2_vector(state.tau2)))
    if not ctx.metabolites_on:
        return 0.0
    resid = state.M - ctx.X @ beta.T
    total = 0.0
    for j in range(state.K):
        r = resid[state.partition.members(j)]
        total -= 0.5 * float(np.sum((r @ state.atoms.omega[j].omega) * r))
    return total


def update_beta(state: ChainState, ctx: ModelContext, block: str, rng: np.random.Generator) -> ChainState:
    """Adaptive Metropolis step on the whole coefficient matrix of one regression (``Y`` or ``M``)."""
    if block not in ("Y", "M"):
        raise DataError(f"unknown regression block '{block}'")
    if ctx.q == 0:
        return state
    attr = f"beta_{block}"
    beta = getattr(state, attr)
    shape = beta.shape
    proposal = state.adaptive[attr]

    def log_target(vec: np.ndarray) -> float:
        B = vec.reshape(shape)
        return -0.5 * float(vec @ vec) + _beta_log_likelihood(B, block, state, ctx)

    x = beta.ravel()
    x, _, _ = proposal.step(x, log_target, log_target(x), rng)
    if ctx.adapting:
        proposal.update(x)
    setattr(state, attr, x.reshape(shape))
    return state


def kernel_log_prior(params: KernelParams, config: SamplerConfig) -> float:
    lp = 0.0
    for value, prior in ((params.sigma2, config.sigma2_prior), (params.phi2, config.phi2_prior),
                         (params.eta2, config.eta2_prior)):
        lp += stats.invgamma.logpdf(value, prior.a, scale=prior.b)
    lp += float(np.sum(stats.gamma.logpdf(np.asarray(params.xi), config.xi_prior.shape,
                                          scale=1.0 / config.xi_prior.rate)))
    return float(lp)


def update_kernel_hyperparams(state: ChainState, ctx: ModelContext, rng: np.random.Generator) -> ChainState:
    """Adaptive Metropolis step on (log sigma2, log phi2, log eta2, log xi_s)."""
    proposal = state.adaptive["kernel"]
    thetas = np.stack(state.atoms.theta) if len(state.atoms) else np.zeros((0, ctx.data.longitudinal.p_Y))

    def log_target(v: np.ndarray) -> float:
        try:
            params = KernelParams.from_log_vector(v)
            kernel = ctx.kernel(params)
        except (DataError, NumericalError):
            return -np.inf
        lp = kernel_log_prior(params, ctx.config) + float(np.sum(v))
        if thetas.shape[0]:
            lp += float(np.sum(gaussian_logpdf_cov(thetas, state.mu_theta, kernel)))
        return lp

    x = state.kernel_params.to_log_vector()
    x, _, accepted = proposal.step(x, log_target, log_target(x), rng)
    if ctx.adapting:
        proposal.update(x)
    if accepted:
        state.kernel_params = KernelParams.from_log_vector(x)
    return state


def impute_missing(state: ChainState, ctx: ModelContext, rng: np.random.Generator) -> ChainState:
    """Redraw every unobserved response and metabolite from its full conditional."""
    missing_Y = ~ctx.observed_Y
    if missing_Y.any():
        mean = _fitted_Y(state, ctx)
        sd = np.broadcast_to(np.sqrt(ctx.tau2_vector(state.tau2)), mean.shape)
        state.Y[missing_Y] = mean[missing_Y] + sd[missing_Y] * rng.standard_normal(int(missing_Y.sum()))

    missing_M = ~ctx.observed_M
    if missing_M.any():
        mean_M = ctx.X @ state.beta_M.T
        labels = state.partition.assignments
        for i in np.flatnonzero(missing_M.any(axis=1)):
            omega = state.atoms.omega[labels[i]]
            cond_mean, cond_cov = precision_conditional(state.M[i], mean_M[i], omega, ctx.observed_M[i])
            chol, _ = jittered_cholesky(cond_cov, context=f"metabolite imputation of subject {i}")
            state.M[i, missing_M[i]] = cond_mean + chol @ rng.standard_normal(cond_mean.size)
    return state


def log_likelihood(state: ChainState, ctx: ModelContext) -> float:
    """Joint log-likelihood of the completed responses and metabolites."""
    total = 0.0
    if ctx.longitudinal_on:
        tau2v = ctx.tau2_vector(state.tau2)
        resid = state.Y - _fitted_Y(state, ctx)
        total += -0.5 * float(np.sum(LOG_2PI + np.log(tau2v) + resid ** 2 / tau2v))
    if ctx.metabolites_on:
        resid = state.M - ctx.X @ state.beta_M.T
        for j in range(state.K):
            members = state.partition.members(j)
            total += float(np.sum(gaussian_logdensity_precision(resid[members], np.zeros(resid.shape[1]),
                                                                state.atoms.omega[j])))
    return total
