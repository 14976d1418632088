import logging
from typing import Optional, Tuple

import numpy as np
from scipy import special, stats

from growthgraph.gtypes import CovariateMatrix, TransformRecord
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError

logger = logging.getLogger(__name__)


def logit_transform(p, row: Optional[object] = None, column: Optional[str] = None):
    """log(p / (1 - p)) elementwise; NaN entries pass through."""
    arr = np.asarray(p, dtype=float)
    observed = ~np.isnan(arr)
    bad = observed & ((arr <= 0.0) | (arr >= 1.0))
    if bad.any():
        where = row
        if where is None and arr.ndim > 0:
            where = int(np.flatnonzero(bad.ravel())[0])
        raise DataError(f"logit needs values strictly inside (0, 1), got {arr[bad].ravel()[0]!r}",
                        row=where, column=column)
    out = special.logit(arr)
    return float(out) if out.ndim == 0 else out


def inverse_logit(x):
    out = special.expit(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def box_cox(x, lam: float, column: Optional[str] = None):
    """(x^lam - 1) / lam, with the log at lam = 0."""
    arr = np.asarray(x, dtype=float)
    observed = ~np.isnan(arr)
    if np.any(arr[observed] <= 0):
        raise DataError("Box-Cox needs strictly positive values", column=column)
    out = special.boxcox(arr, lam)
    return float(out) if out.ndim == 0 else out


def inverse_box_cox(y, lam: float):
    out = special.inv_boxcox(np.asarray(y, dtype=float), lam)
    return float(out) if out.ndim == 0 else out


def fit_box_cox(column, grid=consts.BOX_COX_GRID, name: Optional[str] = None) -> float:
    """Profile-likelihood maximizer of lambda over a fixed grid, missing entries skipped."""
    arr = np.asarray(column, dtype=float)
    values = arr[~np.isnan(arr)]
    if values.size == 0:
        raise DataError("Box-Cox fit needs at least one observed value", column=name)
    if np.any(values <= 0):
        raise DataError("Box-Cox fit needs strictly positive values", column=name)
    if values.size < 2 or np.ptp(values) == 0:
        raise DataError("Box-Cox fit on a constant column", column=name)
    llf = np.array([stats.boxcox_llf(lam, values) for lam in grid])
    best = float(grid[int(np.nanargmax(llf))])
    logger.debug(f"Box-Cox lambda for {name}: {best}")
    return best


def standardize(column, name: Optional[str] = None) -> Tuple[np.ndarray, float, float]:
    """Centre and scale the observed entries (sample sd); NaN stays NaN."""
    arr = np.asarray(column, dtype=float)
    values = arr[~np.isnan(arr)]
    if values.size < 2:
        raise DataError("standardization needs at least two observed values", column=name)
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if not sd > 0:
        raise DataError("standardization of a zero-variance column", column=name)
    return (arr - mean) / sd, mean, sd


def unstandardize(column, mean: float, sd: float) -> np.ndarray:
    return np.asarray(column, dtype=float) * sd + mean


def invert_transform(values, record: TransformRecord) -> np.ndarray:
    """Map model-scale values back to the raw scale of the input file."""
    out = unstandardize(values, record.mean, record.sd)
    if record.transform == "box_cox":
        out = inverse_box_cox(out, record.lambda_)
    elif record.transform == "logit":
        out = inverse_logit(out)
        if record.percent:
            out = out * 100.0
    return np.asarray(out, dtype=float)


def impute_covariates(covariates: CovariateMatrix) -> CovariateMatrix:
    """Mean fill for continuous columns, mode fill for categorical ones."""
    X = covariates.X.copy()
    for c, name in enumerate(covariates.column_names):
        col = X[:, c]
        missing = np.isnan(col)
        if missing.all():
            raise DataError("covariate column is entirely missing", column=name)
        if not missing.any():
            continue
        if name in covariates.categorical:
            codes, counts = np.unique(col[~missing], return_counts=True)
            # np.unique sorts, so ties resolve to the smallest code
            fill = codes[int(np.argmax(counts))]
        else:
            fill = col[~missing].mean()
        col[missing] = fill
        logger.info(f"Imputed {int(missing.sum())} missing values in covariate '{name}'")
    return CovariateMatrix(
        X=X,
        column_names=list(covariates.column_names),
        subject_ids=list(covariates.subject_ids),
        categorical=list(covariates.categorical),
        levels=dict(covariates.levels),
        records=dict(covariates.records),
    )


def expand_categoricals(covariates: CovariateMatrix) -> CovariateMatrix:
    """Replace each categorical with three or more levels by drop-first indicators named '<name>=<level>'.

    Binary categoricals stay a single 0/1 column. Expects imputed codes.
    """
    columns, names, categorical = [], [], []
    for c, name in enumerate(covariates.column_names):
        col = covariates.X[:, c]
        levels = covariates.levels.get(name, [])
        if name in covariates.categorical and len(levels) > 2:
            for k, level in enumerate(levels[1:], start=1):
                columns.append((col == k).astype(float))
                names.append(f"{name}={level}")
                categorical.append(names[-1])
            logger.info(f"Expanded covariate '{name}' into {len(levels) - 1} indicator columns")
            continue
        columns.append(col)
        names.append(name)
        if name in covariates.categorical:
            categorical.append(name)
    X = np.column_stack(columns) if columns else np.zeros((len(covariates.subject_ids), 0))
    return CovariateMatrix(
        X=X,
        column_names=names,
        subject_ids=list(covariates.subject_ids),
        categorical=categorical,
        levels=dict(covariates.levels),
        records=dict(covariates.records),
    )


def standardize_covariates(covariates: CovariateMatrix) -> CovariateMatrix:
    X = covariates.X.copy()
    records = dict(covariates.records)
    for c, name in enumerate(covariates.column_names):
        if name in covariates.categorical:
            continue
        X[:, c], mean, sd = standardize(X[:, c], name=name)
        records[name] = TransformRecord(mean=mean, sd=sd)
    return CovariateMatrix(
        X=X,
        column_names=list(covariates.column_names),
        subject_ids=list(covariates.subject_ids),
        categorical=list(covariates.categorical),
        levels=dict(covariates.levels),
        records=records,
    )
