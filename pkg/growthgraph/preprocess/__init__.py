from .loader import load_dataset, load_model_data, read_longitudinal, write_transforms
from .transforms import (
    box_cox,
    expand_categoricals,
    fit_box_cox,
    impute_covariates,
    invert_transform,
    inverse_box_cox,
    inverse_logit,
    logit_transform,
    standardize,
    standardize_covariates,
    unstandardize,
)
