import json
import logging
import os
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from growthgraph.configs.run_config import DataSection
from growthgraph.gtypes import (
    CovariateMatrix,
    LongitudinalDataset,
    MetaboliteMatrix,
    ModelData,
    TransformRecord,
)
from growthgraph.preprocess.transforms import (
    box_cox,
    expand_categoricals,
    fit_box_cox,
    impute_covariates,
    logit_transform,
    standardize,
    standardize_covariates,
)
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError

logger = logging.getLogger(__name__)

LONGITUDINAL_COLUMNS = [consts.SUBJECT_ID, "process", "time", "value"]


def _read_table(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise DataError("input file not found", file=path)
    try:
        df = pd.read_csv(path, dtype={consts.SUBJECT_ID: str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"could not parse CSV: {e}", file=path) from e
    if consts.SUBJECT_ID not in df.columns:
        raise DataError(f"missing column '{consts.SUBJECT_ID}'", file=path, line=1)
    df[consts.SUBJECT_ID] = df[consts.SUBJECT_ID].str.strip()
    return df


def _check_unique_subjects(df: pd.DataFrame, path: str) -> None:
    duplicated = df[consts.SUBJECT_ID].duplicated()
    if duplicated.any():
        r = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise DataError(f"duplicate subject id '{df[consts.SUBJECT_ID].iloc[r]}'", file=path, line=r + 2)


def _numeric_columns(df: pd.DataFrame, columns: List[str], path: str) -> np.ndarray:
    out = np.empty((len(df), len(columns)))
    for c, name in enumerate(columns):
        try:
            out[:, c] = pd.to_numeric(df[name], errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as e:
            raise DataError(f"non-numeric value: {e}", file=path, column=name) from e
    return out


def read_longitudinal(path: str, schema: DataSection) -> Tuple[Dict[str, dict], List[np.ndarray], List[str]]:
    """Parse the long-format responses.

    Returns per-subject {(process, time): value}, the time grid of each process
    and subject ids in order of first appearance.
    """
    df = _read_table(path)
    if list(df.columns) != LONGITUDINAL_COLUMNS:
        raise DataError(f"expected columns {LONGITUDINAL_COLUMNS}, got {list(df.columns)}", file=path, line=1)
    names = [p.name for p in schema.processes]
    process_of = {name: s for s, name in enumerate(names)}

    cells: Dict[str, dict] = {}
    last_time: Dict[Tuple[str, int], float] = {}
    grids: List[set] = [set() for _ in names]
    order: List[str] = []
    for r, (sid, process, time, value) in enumerate(df.itertuples(index=False, name=None)):
        line = r + 2
        process = str(process).strip()
        if process not in process_of:
            raise DataError(f"undeclared process '{process}'", file=path, line=line)
        try:
            time = float(time)
        except (TypeError, ValueError) as e:
            raise DataError(f"invalid time {time!r}", file=path, line=line) from e
        if not np.isfinite(time):
            raise DataError("missing time value", file=path, line=line)
        s = process_of[process]
        key = (sid, s)
        if key in last_time:
            if time == last_time[key]:
                raise DataError(f"duplicate observation for subject '{sid}', process '{process}', time {time}",
                                file=path, line=line)
            if time < last_time[key]:
                raise DataError(f"non-monotone time grid for subject '{sid}', process '{process}'",
                                file=path, line=line)
        last_time[key] = time
        if sid not in cells:
            cells[sid] = {}
            order.append(sid)
        try:
            cells[sid][(s, time)] = float(value) if not pd.isna(value) else np.nan
        except (TypeError, ValueError) as e:
            raise DataError(f"invalid value {value!r}", file=path, line=line) from e
        grids[s].add(time)

    times = []
    for s, name in enumerate(names):
        if not grids[s]:
            raise DataError(f"no observations for declared process '{name}'", file=path)
        times.append(np.array(sorted(grids[s])))
    return cells, times, order


def _transform_longitudinal(Y: np.ndarray, times: List[np.ndarray], schema: DataSection) -> Dict[str, TransformRecord]:
    records = {}
    offsets = np.concatenate([[0], np.cumsum([len(t) for t in times])])
    for s, proc in enumerate(schema.processes):
        seg = slice(int(offsets[s]), int(offsets[s + 1]))
        block = Y[:, seg]
        if proc.transform == "logit":
            if proc.percent:
                block = block / 100.0
            block = logit_transform(block, column=proc.name)
        mean, sd = 0.0, 1.0
        do_standardize = schema.standardize_longitudinal if proc.standardize is None else proc.standardize
        if do_standardize:
            flat, mean, sd = standardize(block.ravel(), name=proc.name)
            block = flat.reshape(block.shape)
        Y[:, seg] = block
        records[proc.name] = TransformRecord(transform=proc.transform, mean=mean, sd=sd, percent=proc.percent)
    return records


def _transform_metabolites(M: np.ndarray, columns: List[str], schema: DataSection) -> Dict[str, TransformRecord]:
    records = {}
    for c, name in enumerate(columns):
        col = M[:, c]
        lam = None
        if schema.box_cox:
            lam = fit_box_cox(col, name=name)
            col = box_cox(col, lam, column=name)
        col, mean, sd = standardize(col, name=name)
        M[:, c] = col
        records[name] = TransformRecord(transform="box_cox" if schema.box_cox else "none",
                                        lambda_=lam, mean=mean, sd=sd)
    return records


def _encode_covariates(df: pd.DataFrame, columns: List[str], categorical: List[str],
                       path: str) -> Tuple[np.ndarray, Dict[str, List[str]]]:
    X = np.empty((len(df), len(columns)))
    levels = {}
    for c, name in enumerate(columns):
        if name in categorical:
            raw = df[name].astype("string")
            present = sorted(raw.dropna().unique().tolist())
            levels[name] = present
            code = {level: k for k, level in enumerate(present)}
            X[:, c] = [code[v] if not pd.isna(v) else np.nan for v in raw]
        else:
            X[:, c] = _numeric_columns(df, [name], path)[:, 0]
    return X, levels


def load_dataset(schema: DataSection) -> Tuple[LongitudinalDataset, MetaboliteMatrix, CovariateMatrix]:
    """Read, align and transform the three input files into model-ready blocks."""
    long_path = schema.path("longitudinal")
    met_path = schema.path("metabolites")
    cov_path = schema.path("covariates")
    logger.info(f"Loading dataset from {schema.base_dir}")

    cells, times, long_order = read_longitudinal(long_path, schema)

    met_df = _read_table(met_path)
    _check_unique_subjects(met_df, met_path)
    met_columns = [c for c in met_df.columns if c != consts.SUBJECT_ID]
    if not met_columns:
        raise DataError("no metabolite columns", file=met_path, line=1)

    cov_df = _read_table(cov_path)
    _check_unique_subjects(cov_df, cov_path)
    cov_columns = [c for c in cov_df.columns if c != consts.SUBJECT_ID]
    unknown = sorted(set(schema.categorical_covariates) - set(cov_columns))
    if unknown:
        raise DataError(f"categorical covariates not in file: {unknown}", file=cov_path, line=1)

    # Subjects in order of first appearance across the three files
    subject_ids: List[str] = []
    seen = set()
    for sid in long_order + met_df[consts.SUBJECT_ID].tolist() + cov_df[consts.SUBJECT_ID].tolist():
        if sid not in seen:
            seen.add(sid)
            subject_ids.append(sid)

    X_raw, levels = _encode_covariates(cov_df, cov_columns, schema.categorical_covariates, cov_path)
    cov_rows = {sid: r for r, sid in enumerate(cov_df[consts.SUBJECT_ID])}
    kept = []
    for sid in subject_ids:
        r = cov_rows.get(sid)
        if r is None or (cov_columns and np.isnan(X_raw[r]).all()):
            logger.warning(f"Dropping subject '{sid}': no covariates available")
            continue
        kept.append(sid)
    if not kept:
        raise DataError("no subject has covariates", file=cov_path)
    subject_ids = kept
    N = len(subject_ids)

    # Longitudinal block on the shared grid
    grid_index = [{t: k for k, t in enumerate(grid)} for grid in times]
    offsets = np.concatenate([[0], np.cumsum([len(t) for t in times])])
    Y = np.full((N, int(offsets[-1])), np.nan)
    for i, sid in enumerate(subject_ids):
        for (s, t), value in cells.get(sid, {}).items():
            Y[i, offsets[s] + grid_index[s][t]] = value
    n_empty = sum(1 for sid in subject_ids if sid not in cells)
    if n_empty:
        logger.warning(f"{n_empty} subjects have no longitudinal observations; all responses will be imputed")
    long_records = _transform_longitudinal(Y, times, schema)
    longitudinal = LongitudinalDataset(
        process_names=[p.name for p in schema.processes],
        times=times,
        Y=Y,
        observed_mask=~np.isnan(Y),
        subject_ids=subject_ids,
        records=long_records,
    )

    met_rows = {sid: r for r, sid in enumerate(met_df[consts.SUBJECT_ID])}
    met_values = _numeric_columns(met_df, met_columns, met_path)
    M = np.full((N, len(met_columns)), np.nan)
    for i, sid in enumerate(subject_ids):
        if sid in met_rows:
            M[i] = met_values[met_rows[sid]]
    met_records = _transform_metabolites(M, met_columns, schema)
    metabolites = MetaboliteMatrix(
        M=M,
        observed_mask=~np.isnan(M),
        column_names=met_columns,
        subject_ids=subject_ids,
        records=met_records,
    )

    X = np.vstack([X_raw[cov_rows[sid]] for sid in subject_ids]) if cov_columns else np.zeros((N, 0))
    covariates = CovariateMatrix(
        X=X,
        column_names=cov_columns,
        subject_ids=subject_ids,
        categorical=list(schema.categorical_covariates),
        levels=levels,
    )
    covariates = standardize_covariates(expand_categoricals(impute_covariates(covariates)))

    logger.info(f"Loaded N={N} subjects, p_Y={longitudinal.p_Y}, p_M={metabolites.p_M}, q={covariates.q}")
    return longitudinal, metabolites, covariates


def load_model_data(schema: DataSection) -> ModelData:
    return ModelData(*load_dataset(schema))


def write_transforms(path: str, data: ModelData) -> None:
    payload = {
        "longitudinal": {k: v.to_dict() for k, v in data.longitudinal.records.items()},
        "metabolites": {k: v.to_dict() for k, v in data.metabolites.records.items()},
        "covariates": {k: v.to_dict() for k, v in data.covariates.records.items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
