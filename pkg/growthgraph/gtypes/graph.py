from dataclasses import dataclass
from itertools import combinations
from typing import FrozenSet, Iterable, List, Tuple

import numpy as np

from growthgraph.utils import consts
from growthgraph.utils.errors import DataError

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Undirected graph over nodes 0..p-1; edges stored as (h, k) with h < k."""

    p: int
    edges: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        normalized = set()
        for h, k in self.edges:
            h, k = int(h), int(k)
            if h == k:
                raise DataError(f"self-loop ({h}, {k}) is not allowed")
            if not (0 <= h < self.p and 0 <= k < self.p):
                raise DataError(f"edge ({h}, {k}) outside nodes 0..{self.p - 1}")
            normalized.add((min(h, k), max(h, k)))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(p)

    @classmethod
    def complete(cls, p: int) -> "Graph":
        return cls(p, frozenset(combinations(range(p), 2)))

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray) -> "Graph":
        adjacency = np.asarray(adjacency)
        rows, cols = np.nonzero(np.triu(adjacency, k=1))
        return cls(adjacency.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_edges(self) -> int:
        return self.p * (self.p - 1) // 2

    @property
    def key(self) -> Tuple[int, Tuple[Edge, ...]]:
        return self.p, tuple(sorted(self.edges))

    def has_edge(self, h: int, k: int) -> bool:
        return (min(h, k), max(h, k)) in self.edges

    def toggled(self, h: int, k: int) -> "Graph":
        edge = (min(h, k), max(h, k))
        return Graph(self.p, self.edges ^ {edge})

    def neighbors(self, j: int) -> List[int]:
        return sorted({k for h, k in self.edges if h == j} | {h for h, k in self.edges if k == j})

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.p, self.p), dtype=bool)
        for h, k in self.edges:
            adj[h, k] = adj[k, h] = True
        return adj

    def pattern(self) -> np.ndarray:
        """Positions allowed to be nonzero in a precision matrix (edges plus diagonal)."""
        return self.adjacency() | np.eye(self.p, dtype=bool)

    def to_json(self, names: Iterable[str] = None) -> dict:
        nodes = list(names) if names is not None else list(range(self.p))
        return {"nodes": nodes, "edges": [[h, k] for h, k in sorted(self.edges)]}

    @classmethod
    def from_json(cls, data: dict) -> "Graph":
        return cls(len(data["nodes"]), frozenset(tuple(e) for e in data["edges"]))


@dataclass
class PrecisionMatrix:
    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    def pattern_violation(self, graph: Graph) -> float:
        off = ~graph.pattern()
        return float(np.max(np.abs(self.omega[off]))) if off.any() else 0.0

    def is_positive_definite(self) -> bool:
        try:
            np.linalg.cholesky(self.omega)
        except np.linalg.LinAlgError:
            return False
        return True

    def check(self, graph: Graph, tol: float = consts.PATTERN_TOL) -> None:
        if not np.allclose(self.omega, self.omega.T, atol=tol):
            raise DataError("precision matrix is not symmetric")
        violation = self.pattern_violation(graph)
        if violation >= tol:
            raise DataError(f"precision matrix violates the zero pattern of its graph by {violation:.3g}")
        if not self.is_positive_definite():
            raise DataError("precision matrix is not positive definite")


@dataclass
class GWishartParams:
    """Density proportional to |Omega|^((nu-2)/2) exp(-tr(Psi Omega)/2) on P_G."""

    nu: float
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        if self.nu <= 2:
            raise DataError(f"G-Wishart degrees of freedom must exceed 2, got {self.nu}")
        if self.psi.ndim != 2 or self.psi.shape[0] != self.psi.shape[1]:
            raise DataError("G-Wishart scale must be a square matrix")
        if not np.allclose(self.psi, self.psi.T):
            raise DataError("G-Wishart scale must be symmetric")
        if self.psi.shape[0] > 0 and np.min(np.linalg.eigvalsh(self.psi)) <= 0:
            raise DataError("G-Wishart scale must be positive definite")

    @classmethod
    def identity_scaled(cls, p: int, nu: float, scale: float = consts.DEFAULT_PSI_SCALE) -> "GWishartParams":
        return cls(nu=nu, psi=scale * np.eye(p))

    @property
    def p(self) -> int:
        return self.psi.shape[0]

    def posterior(self, n: int, scatter: np.ndarray) -> "GWishartParams":
        """Conjugate update with n centred observations whose scatter matrix is given."""
        return GWishartParams(nu=self.nu + n, psi=self.psi + scatter)
