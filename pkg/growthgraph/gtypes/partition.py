from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field

from growthgraph.gtypes.graph import Graph, PrecisionMatrix
from growthgraph.utils.errors import DataError


def canonical_labels(labels: Sequence[int]) -> np.ndarray:
    """Relabel clusters 0..K-1 by order of first appearance."""
    mapping = {}
    out = np.empty(len(labels), dtype=int)
    for i, label in enumerate(labels):
        if label not in mapping:
            mapping[label] = len(mapping)
        out[i] = mapping[label]
    return out


@dataclass
class Partition:
    assignments: np.ndarray

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=int)
        if self.assignments.ndim != 1:
            raise DataError("partition assignments must be a vector")
        if self.N and (self.assignments.min() < 0 or set(np.unique(self.assignments)) != set(range(self.K))):
            raise DataError("partition labels must be 0..K-1 with no gaps")

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Partition":
        return cls(canonical_labels(list(labels)))

    @property
    def N(self) -> int:
        return int(self.assignments.size)

    @property
    def K(self) -> int:
        return int(self.assignments.max()) + 1 if self.N else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.K)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)

    def is_canonical(self) -> bool:
        return bool(np.array_equal(self.assignments, canonical_labels(self.assignments.tolist())))

    def canonical(self) -> "Partition":
        return Partition(canonical_labels(self.assignments.tolist()))


@dataclass
class ClusterAtoms:
    """Unique values psi*_j = (theta*_j, Omega*_j, G*_j), one per occupied cluster."""

    theta: List[np.ndarray] = field(default_factory=list)
    omega: List[PrecisionMatrix] = field(default_factory=list)
    graph: List[Graph] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.theta)

    def append(self, theta: np.ndarray, omega: PrecisionMatrix, graph: Graph) -> None:
        self.theta.append(theta)
        self.omega.append(omega)
        self.graph.append(graph)

    def pop(self, j: int):
        return self.theta.pop(j), self.omega.pop(j), self.graph.pop(j)

    def reordered(self, order: Sequence[int]) -> "ClusterAtoms":
        return ClusterAtoms(
            theta=[self.theta[j] for j in order],
            omega=[self.omega[j] for j in order],
            graph=[self.graph[j] for j in order],
        )

    def copy(self) -> "ClusterAtoms":
        return ClusterAtoms(
            theta=[t.copy() for t in self.theta],
            omega=[PrecisionMatrix(o.omega.copy()) for o in self.omega],
            graph=list(self.graph),
        )


class DPConfig(BaseModel):
    alpha: float = Field(0.18, gt=0)
    m_aux: int = Field(2, ge=1)
