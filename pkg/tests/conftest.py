import numpy as np
import pandas as pd
import pytest

from growthgraph.configs import DataSection, ProcessSpec, SamplerConfig
from growthgraph.gtypes import CovariateMatrix, GWishartParams, LongitudinalDataset, MetaboliteMatrix, ModelData


def make_model_data(rng: np.random.Generator, N: int = 12, times=((1.0, 2.0, 3.0), (1.0, 2.0)), p_M: int = 3,
                    q: int = 2, missing_rate: float = 0.1) -> ModelData:
    ids = [f"S{i:03d}" for i in range(N)]
    p_Y = sum(len(t) for t in times)
    groups = np.arange(N) % 2
    Y = rng.standard_normal((N, p_Y)) + 1.5 * groups[:, None]
    M = rng.standard_normal((N, p_M))
    Y[rng.random(Y.shape) < missing_rate] = np.nan
    M[rng.random(M.shape) < missing_rate] = np.nan
    # Every subject keeps at least one observed metabolite
    M[:, 0] = np.where(np.isnan(M[:, 0]), 0.1, M[:, 0])
    longitudinal = LongitudinalDataset(
        process_names=[f"proc{s}" for s in range(len(times))],
        times=[np.asarray(t) for t in times],
        Y=Y,
        observed_mask=~np.isnan(Y),
        subject_ids=ids,
    )
    metabolites = MetaboliteMatrix(M=M, observed_mask=~np.isnan(M),
                                   column_names=[f"m{c}" for c in range(p_M)], subject_ids=ids)
    covariates = CovariateMatrix(X=rng.standard_normal((N, q)), column_names=[f"x{c}" for c in range(q)],
                                 subject_ids=ids)
    return ModelData(longitudinal, metabolites, covariates)


def make_sampler_config(p_M: int, **overrides) -> SamplerConfig:
    values = dict(n_iter=10, n_burnin=5, thin=1, adapt_init=2, seed=7, bd_n_mc=200, bd_steps=1,
                  gwishart=GWishartParams.identity_scaled(p_M, nu=p_M + 2.0), d=0.5, log_every=1000)
    values.update(overrides)
    return SamplerConfig(**values)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def model_data(rng):
    return make_model_data(rng)


@pytest.fixture
def tiny_files(tmp_path):
    """Three small input files and the matching data section."""
    rows = []
    heights = {"A": [50.0, 55.0, 61.0], "B": [49.0, 53.5, 58.0], "C": [52.0, 57.0, 63.0], "D": [47.5, 52.0, 56.0],
               "E": [51.0, 56.0, 60.0]}
    fat = {"A": [20.0, 22.0], "B": [18.0, 25.0], "C": [21.0, 19.0], "D": [23.0, 24.0], "E": [20.0, 20.5]}
    for sid in ["A", "B", "C", "D", "E"]:
        for t, v in zip([1, 2, 3], heights[sid]):
            rows.append({"subject_id": sid, "process": "height", "time": t, "value": v})
        for t, v in zip([1, 2], fat[sid]):
            rows.append({"subject_id": sid, "process": "fat_pct", "time": t, "value": v})
    # One missing response for C
    rows[2 * 5 + 1]["value"] = np.nan
    pd.DataFrame(rows).to_csv(tmp_path / "longitudinal.csv", index=False)

    pd.DataFrame({
        "subject_id": ["A", "B", "C", "D"],
        "m1": [1.2, 3.4, 2.2, 5.1],
        "m2": [0.5, 0.9, None, 1.7],
    }).to_csv(tmp_path / "metabolites.csv", index=False)

    # E has no covariate row and is dropped
    pd.DataFrame({
        "subject_id": ["A", "B", "C", "D"],
        "age": [30.0, 35.0, None, 28.0],
        "sex": ["F", "M", "F", None],
    }).to_csv(tmp_path / "covariates.csv", index=False)

    schema = DataSection(
        base_dir=str(tmp_path),
        processes=[
            ProcessSpec(name="height"),
            ProcessSpec(name="fat_pct", transform="logit", percent=True),
        ],
        categorical_covariates=["sex"],
    )
    return tmp_path, schema
