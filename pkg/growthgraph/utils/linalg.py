import logging
from typing import Tuple

import numpy as np
from scipy import linalg

from growthgraph.utils import consts
from growthgraph.utils.errors import NumericalError

logger = logging.getLogger(__name__)


def jittered_cholesky(matrix: np.ndarray, context: str = "") -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating an additive ridge until it succeeds.

    Returns the factor and the ridge that was used.
    """
    eye = np.eye(matrix.shape[0])
    for ridge in consts.JITTER_LEVELS:
        try:
            return linalg.cholesky(matrix + ridge * eye, lower=True, check_finite=True), ridge
        except (linalg.LinAlgError, ValueError):
            continue
    raise NumericalError(f"Cholesky factorization failed after ridge {consts.JITTER_LEVELS[-1]:g}: {context}")


def logdet_from_cholesky(chol: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def inverse_from_cholesky(chol: np.ndarray) -> np.ndarray:
    return linalg.cho_solve((chol, True), np.eye(chol.shape[0]))


def sample_mvn_precision(mean_part: np.ndarray, precision: np.ndarray, rng: np.random.Generator,
                         context: str = "") -> np.ndarray:
    """Draw from N(P^-1 b, P^-1) given the canonical parameters (b, P)."""
    chol, _ = jittered_cholesky(precision, context)
    mean = linalg.cho_solve((chol, True), mean_part)
    z = rng.standard_normal(mean.shape[0])
    return mean + linalg.solve_triangular(chol.T, z, lower=False)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)
