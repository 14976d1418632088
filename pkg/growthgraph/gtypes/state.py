from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from growthgraph.gtypes.kernel import KernelParams
from growthgraph.gtypes.partition import ClusterAtoms, Partition


@dataclass
class ChainState:
    """Every model parameter at one iteration.

    ``Y`` and ``M`` hold observed values where observed and the current
    imputations elsewhere; the observation masks on the dataset tell them apart.
    """

    partition: Partition
    atoms: ClusterAtoms
    beta_Y: np.ndarray  # p_Y x q
    beta_M: np.ndarray  # p_M x q
    tau2: np.ndarray  # one per process
    mu_theta: np.ndarray
    kernel_params: KernelParams
    Y: np.ndarray
    M: np.ndarray
    iteration: int = 0
    adaptive: Dict[str, object] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.partition.K

    def theta_of_subjects(self) -> np.ndarray:
        """N x p_Y matrix of each subject's cluster atom."""
        if len(self.atoms) == 0:
            return np.zeros_like(self.Y)
        return np.stack(self.atoms.theta)[self.partition.assignments]
