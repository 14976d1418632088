from dataclasses import dataclass

import numpy as np

from growthgraph.utils.errors import DataError


@dataclass(frozen=True)
class KernelParams:
    """sigma2 (global variance), phi2 (length-scale), eta2 (nugget), xi (per-process scale)."""

    sigma2: float
    phi2: float
    eta2: float
    xi: tuple

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(x) for x in self.xi))
        values = [self.sigma2, self.phi2, self.eta2, *self.xi]
        if not all(np.isfinite(v) and v > 0 for v in values):
            raise DataError(f"kernel parameters must be strictly positive, got {values}")

    @property
    def S(self) -> int:
        return len(self.xi)

    def to_log_vector(self) -> np.ndarray:
        return np.log(np.array([self.sigma2, self.phi2, self.eta2, *self.xi]))

    @classmethod
    def from_log_vector(cls, x: np.ndarray) -> "KernelParams":
        v = np.exp(np.asarray(x, dtype=float))
        return cls(sigma2=float(v[0]), phi2=float(v[1]), eta2=float(v[2]), xi=tuple(v[3:]))

    def to_dict(self) -> dict:
        out = {"sigma2": self.sigma2, "phi2": self.phi2, "eta2": self.eta2}
        out.update({f"xi_{s}": x for s, x in enumerate(self.xi)})
        return out
