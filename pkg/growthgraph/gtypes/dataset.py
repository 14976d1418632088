from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from growthgraph.utils.errors import DataError


@dataclass(frozen=True)
class TransformRecord:
    """Enough to undo a column's preprocessing on observed values."""

    transform: str = "none"  # none | logit | box_cox
    lambda_: Optional[float] = None
    mean: float = 0.0
    sd: float = 1.0
    percent: bool = False

    def to_dict(self) -> dict:
        return {
            "transform": self.transform,
            "lambda": self.lambda_,
            "mean": self.mean,
            "sd": self.sd,
            "percent": self.percent,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransformRecord":
        return cls(
            transform=data.get("transform", "none"),
            lambda_=data.get("lambda"),
            mean=float(data.get("mean", 0.0)),
            sd=float(data.get("sd", 1.0)),
            percent=bool(data.get("percent", False)),
        )


@dataclass
class LongitudinalDataset:
    """Responses of all processes concatenated per subject.

    ``Y`` is N x p_Y with NaN at missing entries; columns are ordered by
    process, then time.
    """

    process_names: List[str]
    times: List[np.ndarray]
    Y: np.ndarray
    observed_mask: np.ndarray
    subject_ids: List[str]
    records: Dict[str, TransformRecord] = field(default_factory=dict)

    def __post_init__(self):
        self.times = [np.asarray(t, dtype=float) for t in self.times]
        self.Y = np.asarray(self.Y, dtype=float)
        self.observed_mask = np.asarray(self.observed_mask, dtype=bool)
        if len(self.process_names) != len(self.times):
            raise DataError("one time grid is required per process")
        for name, grid in zip(self.process_names, self.times):
            if grid.size == 0:
                raise DataError(f"process '{name}' has an empty time grid")
            if np.any(np.diff(grid) <= 0):
                raise DataError(f"time grid of process '{name}' is not strictly increasing")
        if self.Y.shape != (len(self.subject_ids), self.p_Y):
            raise DataError(f"response matrix has shape {self.Y.shape}, expected ({len(self.subject_ids)}, {self.p_Y})")
        if self.observed_mask.shape != self.Y.shape:
            raise DataError("observed mask does not align with the response matrix")

    @property
    def S(self) -> int:
        return len(self.process_names)

    @property
    def N(self) -> int:
        return len(self.subject_ids)

    @property
    def n_s(self) -> List[int]:
        return [len(t) for t in self.times]

    @property
    def p_Y(self) -> int:
        return int(sum(self.n_s))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.n_s)])

    def segment(self, s: int) -> slice:
        off = self.offsets
        return slice(int(off[s]), int(off[s + 1]))

    @property
    def process_index(self) -> np.ndarray:
        """Process of each of the p_Y coordinates."""
        return np.repeat(np.arange(self.S), self.n_s)

    def block(self, i: int, s: int) -> np.ndarray:
        return self.Y[i, self.segment(s)]


@dataclass
class MetaboliteMatrix:
    M: np.ndarray
    observed_mask: np.ndarray
    column_names: List[str]
    subject_ids: List[str]
    records: Dict[str, TransformRecord] = field(default_factory=dict)

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.observed_mask = np.asarray(self.observed_mask, dtype=bool)
        if self.M.shape != (len(self.subject_ids), len(self.column_names)):
            raise DataError(f"metabolite matrix has shape {self.M.shape}, expected "
                            f"({len(self.subject_ids)}, {len(self.column_names)})")
        if self.observed_mask.shape != self.M.shape:
            raise DataError("observed mask does not align with the metabolite matrix")

    @property
    def p_M(self) -> int:
        return len(self.column_names)

    @property
    def N(self) -> int:
        return len(self.subject_ids)


@dataclass
class CovariateMatrix:
    """Covariates shared by both regressions (X^Y = X^M)."""

    X: np.ndarray
    column_names: List[str]
    subject_ids: List[str]
    categorical: List[str] = field(default_factory=list)
    levels: Dict[str, List[str]] = field(default_factory=dict)
    records: Dict[str, TransformRecord] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.subject_ids), len(self.column_names))

    @property
    def q(self) -> int:
        return len(self.column_names)

    q_Y = q
    q_M = q

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.X).any())


@dataclass
class ModelData:
    """The three aligned blocks the sampler consumes."""

    longitudinal: LongitudinalDataset
    metabolites: MetaboliteMatrix
    covariates: CovariateMatrix

    def __post_init__(self):
        ids = self.longitudinal.subject_ids
        if self.metabolites.subject_ids != ids or self.covariates.subject_ids != ids:
            raise DataError("longitudinal, metabolite and covariate blocks are not aligned by subject")

    @property
    def N(self) -> int:
        return self.longitudinal.N

    @property
    def subject_ids(self) -> List[str]:
        return self.longitudinal.subject_ids
