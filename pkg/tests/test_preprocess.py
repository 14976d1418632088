import json

import numpy as np
import pandas as pd
import pytest

from growthgraph.configs import DataSection, ProcessSpec
from growthgraph.gtypes import CovariateMatrix, TransformRecord
from growthgraph.preprocess import (
    box_cox,
    expand_categoricals,
    fit_box_cox,
    impute_covariates,
    invert_transform,
    inverse_box_cox,
    inverse_logit,
    load_dataset,
    load_model_data,
    logit_transform,
    read_longitudinal,
    standardize,
    write_transforms,
)
from growthgraph.utils.errors import DataError


def test_logit_values_and_nan_passthrough():
    assert logit_transform(0.5) == pytest.approx(0.0)
    assert logit_transform(0.75) == pytest.approx(np.log(3.0))
    out = logit_transform(np.array([0.25, np.nan]))
    assert out[0] == pytest.approx(-np.log(3.0))
    assert np.isnan(out[1])
    assert inverse_logit(np.log(3.0)) == pytest.approx(0.75)


@pytest.mark.parametrize("value", [0.0, 1.0, 1.5, -0.1])
def test_logit_rejects_values_outside_unit_interval(value):
    with pytest.raises(DataError):
        logit_transform(np.array([0.5, value]), column="fat_pct")


def test_box_cox_at_zero_is_log():
    x = np.array([0.5, 1.0, 4.0])
    np.testing.assert_allclose(box_cox(x, 0.0), np.log(x))
    np.testing.assert_allclose(box_cox(x, 0.5), (np.sqrt(x) - 1.0) / 0.5)
    np.testing.assert_allclose(inverse_box_cox(box_cox(x, 0.5), 0.5), x)


def test_box_cox_rejects_non_positive():
    with pytest.raises(DataError):
        box_cox(np.array([1.0, 0.0]), 0.5)


def test_fit_box_cox_finds_log_for_lognormal(rng):
    x = np.exp(rng.standard_normal(500))
    assert abs(fit_box_cox(x)) <= 0.3


def test_fit_box_cox_skips_missing_and_rejects_constant(rng):
    x = np.exp(rng.standard_normal(200))
    x[::7] = np.nan
    assert -2.0 <= fit_box_cox(x) <= 2.0
    with pytest.raises(DataError):
        fit_box_cox(np.array([2.0, 2.0, 2.0]), name="flat")


def test_standardize_observed_entries():
    out, mean, sd = standardize(np.array([1.0, 2.0, np.nan, 3.0]))
    assert mean == pytest.approx(2.0)
    assert sd == pytest.approx(1.0)
    np.testing.assert_allclose(out[[0, 1, 3]], [-1.0, 0.0, 1.0])
    assert np.isnan(out[2])
    with pytest.raises(DataError):
        standardize(np.array([5.0, 5.0]))


def test_invert_transform_recovers_percent_scale():
    record = TransformRecord(transform="logit", mean=0.2, sd=1.5, percent=True)
    raw = np.array([10.0, 35.0, 80.0])
    model = (logit_transform(raw / 100.0) - 0.2) / 1.5
    np.testing.assert_allclose(invert_transform(model, record), raw)


def test_impute_covariates_mean_and_mode():
    X = np.array([[1.0, 0.0], [np.nan, 1.0], [3.0, np.nan], [2.0, 1.0], [4.0, 0.0]])
    cov = CovariateMatrix(X=X, column_names=["age", "sex"], subject_ids=list("abcde"), categorical=["sex"])
    out = impute_covariates(cov)
    assert out.X[1, 0] == pytest.approx(2.5)
    # Tie between codes 0 and 1 resolves to the smaller code
    assert out.X[2, 1] == 0.0
    assert not out.has_missing
    assert np.isnan(cov.X[1, 0])


def test_load_dataset_aligns_and_transforms(tiny_files):
    _, schema = tiny_files
    long, met, cov = load_dataset(schema)

    assert long.subject_ids == ["A", "B", "C", "D"]
    assert long.process_names == ["height", "fat_pct"]
    assert long.p_Y == 5
    np.testing.assert_array_equal(long.times[0], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(long.times[1], [1.0, 2.0])
    assert not long.observed_mask[2, 1]
    assert long.observed_mask.sum() == 19

    height = long.Y[:, :3][long.observed_mask[:, :3]]
    assert height.mean() == pytest.approx(0.0, abs=1e-12)
    assert height.std(ddof=1) == pytest.approx(1.0)
    assert long.records["fat_pct"].transform == "logit"
    assert long.records["fat_pct"].percent

    assert met.column_names == ["m1", "m2"]
    assert not met.observed_mask[2, 1]
    assert met.records["m1"].transform == "box_cox"

    assert cov.column_names == ["age", "sex"]
    assert cov.levels["sex"] == ["F", "M"]
    assert not cov.has_missing
    # Mode fill for the missing sex of D, kept as an unscaled code
    assert cov.X[3, 1] == 0.0
    assert cov.X[:, 0].mean() == pytest.approx(0.0, abs=1e-12)


def test_load_model_data_and_write_transforms(tiny_files):
    path, schema = tiny_files
    data = load_model_data(schema)
    assert data.N == 4
    target = path / "transforms.json"
    write_transforms(str(target), data)
    payload = json.loads(target.read_text())
    assert set(payload) == {"longitudinal", "metabolites", "covariates"}
    assert payload["metabolites"]["m2"]["transform"] == "box_cox"
    assert "age" in payload["covariates"]


def _schema(tmp_path):
    return DataSection(base_dir=str(tmp_path), processes=[ProcessSpec(name="height")])


def test_read_longitudinal_rejects_undeclared_process(tmp_path):
    pd.DataFrame({"subject_id": ["A", "A"], "process": ["height", "weight"], "time": [1, 1],
                  "value": [1.0, 2.0]}).to_csv(tmp_path / "longitudinal.csv", index=False)
    with pytest.raises(DataError) as err:
        read_longitudinal(str(tmp_path / "longitudinal.csv"), _schema(tmp_path))
    assert err.value.line == 3


def test_read_longitudinal_rejects_duplicates_and_unsorted_times(tmp_path):
    path = tmp_path / "longitudinal.csv"
    pd.DataFrame({"subject_id": ["A", "A"], "process": ["height", "height"], "time": [1, 1],
                  "value": [1.0, 2.0]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="duplicate"):
        read_longitudinal(str(path), _schema(tmp_path))

    pd.DataFrame({"subject_id": ["A", "A"], "process": ["height", "height"], "time": [2, 1],
                  "value": [1.0, 2.0]}).to_csv(path, index=False)
    with pytest.raises(DataError, match="non-monotone"):
        read_longitudinal(str(path), _schema(tmp_path))


def test_read_longitudinal_rejects_bad_header(tmp_path):
    path = tmp_path / "longitudinal.csv"
    pd.DataFrame({"subject_id": ["A"], "process": ["height"], "t": [1], "value": [1.0]}).to_csv(path, index=False)
    with pytest.raises(DataError) as err:
        read_longitudinal(str(path), _schema(tmp_path))
    assert err.value.line == 1


def test_missing_input_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_dataset(_schema(tmp_path))


def test_logit_and_box_cox_are_strictly_increasing(rng):
    p = np.sort(rng.uniform(1e-6, 1 - 1e-6, 1000))
    assert np.all(np.diff(logit_transform(p)) > 0)
    x = np.sort(rng.uniform(1e-3, 50.0, 1000))
    for lam in (-2.0, -0.5, 0.0, 0.7, 2.0):
        assert np.all(np.diff(box_cox(x, lam)) > 0)


@pytest.mark.parametrize("transform, lam", [("box_cox", 0.3), ("box_cox", 0.0), ("none", None)])
def test_invert_transform_undoes_transform_and_standardize(rng, transform, lam):
    raw = np.exp(rng.normal(1.0, 0.5, 200))
    raw[::17] = np.nan
    scaled = box_cox(raw, lam) if transform == "box_cox" else raw
    model, mean, sd = standardize(scaled)
    record = TransformRecord(transform=transform, lambda_=lam, mean=mean, sd=sd)
    back = invert_transform(model, record)
    np.testing.assert_allclose(back[~np.isnan(raw)], raw[~np.isnan(raw)], rtol=1e-10)
    assert np.array_equal(np.isnan(back), np.isnan(raw))


def test_expand_categoricals_drop_first_indicators():
    X = np.array([[0.5, 0.0, 2.0], [1.5, 1.0, 0.0], [2.5, 0.0, 1.0], [3.5, 1.0, 2.0]])
    cov = CovariateMatrix(X=X, column_names=["age", "sex", "ethnicity"], subject_ids=list("abcd"),
                          categorical=["sex", "ethnicity"],
                          levels={"sex": ["F", "M"], "ethnicity": ["asian", "black", "white"]})
    out = expand_categoricals(cov)
    assert out.column_names == ["age", "sex", "ethnicity=black", "ethnicity=white"]
    assert out.categorical == ["sex", "ethnicity=black", "ethnicity=white"]
    np.testing.assert_array_equal(out.X[:, 2], [0.0, 0.0, 1.0, 0.0])
    np.testing.assert_array_equal(out.X[:, 3], [1.0, 0.0, 0.0, 1.0])
    # Reference level is all zeros
    np.testing.assert_array_equal(out.X[1, 2:], [0.0, 0.0])
    np.testing.assert_array_equal(out.X[:, :2], X[:, :2])


def test_load_dataset_encodes_nominal_covariates_as_indicators(tiny_files):
    path, schema = tiny_files
    cov_df = pd.read_csv(path / "covariates.csv")
    cov_df["ethnicity"] = ["white", "asian", None, "black"]
    cov_df.to_csv(path / "covariates.csv", index=False)
    schema = schema.model_copy(update={"categorical_covariates": ["sex", "ethnicity"]})

    _, _, cov = load_dataset(schema)
    assert cov.levels["ethnicity"] == ["asian", "black", "white"]
    assert cov.column_names == ["age", "sex", "ethnicity=black", "ethnicity=white"]
    # Indicators stay 0/1 after standardization; C takes the mode (tie -> asian)
    np.testing.assert_array_equal(cov.X[:, 2], [0.0, 0.0, 0.0, 1.0])
    np.testing.assert_array_equal(cov.X[:, 3], [1.0, 0.0, 0.0, 0.0])
