import logging
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from growthgraph.utils import consts

logger = logging.getLogger(__name__)


class AdaptiveProposal:
    """Gaussian random-walk proposal whose covariance tracks the chain's history.

    The proposal covariance is ``scale / dim * (C + ridge * I)``, where ``C`` is
    the running sample covariance of every state passed to :meth:`update`, or
    ``initial_sd**2 * I`` while fewer than two states have been seen. After
    :meth:`freeze` nothing changes any more.
    """

    def __init__(self, dim: int, initial_sd: float = 0.1, name: str = "",
                 scale: float = consts.ADAPT_SCALE, ridge: float = consts.ADAPT_RIDGE):
        self.dim = dim
        self.name = name
        self.scale = scale
        self.ridge = ridge
        self.initial_sd = initial_sd
        self.n = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros((dim, dim))
        self.frozen = False
        self.n_proposed = 0
        self.n_accepted = 0
        self._chol: Optional[np.ndarray] = None

    @property
    def empirical_cov(self) -> np.ndarray:
        if self.n < 2:
            return self.initial_sd ** 2 * np.eye(self.dim)
        return self._m2 / (self.n - 1)

    @property
    def proposal_cov(self) -> np.ndarray:
        cov = self.empirical_cov
        cov = 0.5 * (cov + cov.T) + self.ridge * np.eye(self.dim)
        return self.scale / self.dim * cov

    def _factor(self) -> np.ndarray:
        if self._chol is None:
            self._chol = linalg.cholesky(self.proposal_cov, lower=True)
        return self._chol

    def update(self, x: np.ndarray) -> None:
        if self.frozen:
            return
        x = np.asarray(x, dtype=float).ravel()
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self._m2 = self._m2 + np.outer(delta, x - self.mean)
        self._chol = None

    def freeze(self) -> None:
        if not self.frozen:
            logger.debug(f"Freezing adaptive proposal '{self.name}' after {self.n} adaptation steps")
        self.frozen = True

    def propose(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return x + self._factor() @ rng.standard_normal(self.dim)

    def step(self, x: np.ndarray, log_target: Callable[[np.ndarray], float], current_log_target: float,
             rng: np.random.Generator):
        """One Metropolis move; returns (state, log target at state, accepted)."""
        proposal = self.propose(x, rng)
        self.n_proposed += 1
        proposed_log_target = log_target(proposal)
        log_ratio = proposed_log_target - current_log_target
        if np.isfinite(proposed_log_target) and np.log(rng.random()) < min(0.0, log_ratio):
            self.n_accepted += 1
            return proposal, proposed_log_target, True
        return np.asarray(x, dtype=float).ravel(), current_log_target, False

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else float("nan")

    def summary(self) -> dict:
        return {
            "proposed": self.n_proposed,
            "accepted": self.n_accepted,
            "rate": self.acceptance_rate if self.n_proposed else None,
            "adaptation_steps": self.n,
            "frozen": self.frozen,
        }
