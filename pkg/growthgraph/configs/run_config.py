import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, InstanceOf, ValidationError, model_validator

from growthgraph.gtypes import DPConfig, GWishartParams, Partition
from growthgraph.utils import consts
from growthgraph.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    # Unknown keys are configuration mistakes, not extensions
    model_config = ConfigDict(extra="forbid")


class ProcessSpec(_Section):
    name: str
    transform: Literal["none", "logit"] = "none"
    # Values given as percentages are divided by 100 before the logit
    percent: bool = False
    # None falls back to data.standardize_longitudinal
    standardize: Optional[bool] = None
    time_unit: str = ""


class DataSection(_Section):
    base_dir: str = "."
    longitudinal: str = consts.LONGITUDINAL_FILE
    metabolites: str = consts.METABOLITE_FILE
    covariates: str = consts.COVARIATE_FILE
    processes: List[ProcessSpec]
    categorical_covariates: List[str] = []
    box_cox: bool = True
    standardize_longitudinal: bool = True

    def path(self, name: str) -> str:
        return os.path.join(self.base_dir, getattr(self, name))


class InvGammaPrior(_Section):
    a: float = Field(3.0, gt=0)
    b: float = Field(2.0, gt=0)


class GammaPrior(_Section):
    shape: float = Field(1.0, gt=0)
    rate: float = Field(1.0, gt=0)


class ModelSection(_Section):
    alpha: float = Field(consts.DEFAULT_ALPHA, gt=0)
    m_aux: int = Field(consts.DEFAULT_M_AUX, ge=1)
    # None means 2 / (p_M - 1)
    d: Optional[float] = Field(None, gt=0, lt=1)
    # None means p_M + 2
    nu: Optional[float] = Field(None, gt=2)
    psi_scale: float = Field(consts.DEFAULT_PSI_SCALE, gt=0)
    tau2_prior: InvGammaPrior = InvGammaPrior()
    sigma2_prior: InvGammaPrior = InvGammaPrior()
    phi2_prior: InvGammaPrior = InvGammaPrior()
    eta2_prior: InvGammaPrior = InvGammaPrior()
    xi_prior: GammaPrior = GammaPrior()
    mu_theta_mean: float = 0.0
    mu_theta_sd: float = Field(1.0, gt=0)
    bd_n_mc: int = Field(consts.DEFAULT_BD_N_MC, ge=100)
    # Birth-death calls per cluster and iteration; None means p_M
    bd_steps: Optional[int] = Field(None, ge=0)
    use_longitudinal: bool = True
    use_metabolites: bool = True
    likelihood_enabled: bool = True


class McmcSection(_Section):
    n_iter: int = Field(50_000, ge=1)
    n_burnin: int = Field(40_000, ge=0)
    thin: int = Field(2, ge=1)
    adapt_init: int = Field(100, ge=0)
    seed: int = 0
    fixed_partition: Optional[str] = None
    # k-means start over the standardized responses and metabolites; 1 puts everyone in one cluster
    init_clusters: int = Field(1, ge=1)
    snapshot_every: int = Field(1000, ge=0)
    log_every: int = Field(1000, ge=1)

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.n_burnin >= self.n_iter:
            raise ValueError(f"n_burnin ({self.n_burnin}) must be smaller than n_iter ({self.n_iter})")
        return self


class OutputSection(_Section):
    dir: str = "output"
    flush_every: int = Field(100, ge=1)


class SimulationSection(_Section):
    n_subjects: int = Field(60, ge=1)
    processes: List[str] = ["growth_a", "growth_b"]
    times: List[float] = [1.0, 2.0, 3.0, 4.0, 5.0]
    p_m: int = Field(6, ge=1)
    k_true: int = Field(2, ge=1)
    edges_per_graph: int = Field(4, ge=0)
    n_covariates: int = Field(2, ge=0)
    missing_rate: float = Field(0.05, ge=0, lt=1)
    theta_separation: float = Field(3.0, ge=0)
    tau2: float = Field(0.05, gt=0)
    edge_strength: float = Field(0.45, gt=0, lt=1)
    beta_scale: float = Field(0.3, ge=0)
    seed: int = 1


class RunConfig(_Section):
    data: Optional[DataSection] = None
    model: ModelSection = ModelSection()
    mcmc: McmcSection = McmcSection()
    output: OutputSection = OutputSection()
    simulation: Optional[SimulationSection] = None

    def sampler_config(self, p_m: int, fixed_partition: Optional[Partition] = None,
                       seed: Optional[int] = None) -> "SamplerConfig":
        model = self.model
        if model.d is not None:
            d = model.d
        elif p_m > 2:
            d = 2.0 / (p_m - 1)
        else:
            # 2 / (p_M - 1) leaves (0, 1) for p_M <= 2
            d = 0.5
        nu = model.nu if model.nu is not None else p_m + 2.0
        return SamplerConfig(
            n_iter=self.mcmc.n_iter,
            n_burnin=self.mcmc.n_burnin,
            thin=self.mcmc.thin,
            adapt_init=self.mcmc.adapt_init,
            seed=self.mcmc.seed if seed is None else seed,
            tau2_prior=model.tau2_prior,
            sigma2_prior=model.sigma2_prior,
            phi2_prior=model.phi2_prior,
            eta2_prior=model.eta2_prior,
            xi_prior=model.xi_prior,
            mu_theta_mean=model.mu_theta_mean,
            mu_theta_sd=model.mu_theta_sd,
            dp=DPConfig(alpha=model.alpha, m_aux=model.m_aux),
            gwishart=GWishartParams.identity_scaled(p_m, nu=nu, scale=model.psi_scale),
            d=d,
            fixed_partition=fixed_partition,
            init_clusters=self.mcmc.init_clusters,
            bd_n_mc=model.bd_n_mc,
            bd_steps=p_m if model.bd_steps is None else model.bd_steps,
            use_longitudinal=model.use_longitudinal,
            use_metabolites=model.use_metabolites,
            likelihood_enabled=model.likelihood_enabled,
            snapshot_every=self.mcmc.snapshot_every,
            log_every=self.mcmc.log_every,
            flush_every=self.output.flush_every,
        )


class SamplerConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")

    n_iter: int = Field(50_000, ge=1)
    n_burnin: int = Field(40_000, ge=0)
    thin: int = Field(2, ge=1)
    adapt_init: int = Field(100, ge=0)
    seed: int = 0
    tau2_prior: InvGammaPrior = InvGammaPrior()
    sigma2_prior: InvGammaPrior = InvGammaPrior()
    phi2_prior: InvGammaPrior = InvGammaPrior()
    eta2_prior: InvGammaPrior = InvGammaPrior()
    xi_prior: GammaPrior = GammaPrior()
    mu_theta_mean: float = 0.0
    mu_theta_sd: float = Field(1.0, gt=0)
    dp: DPConfig = DPConfig()
    gwishart: InstanceOf[GWishartParams]
    d: float = Field(..., gt=0, lt=1)
    fixed_partition: Optional[InstanceOf[Partition]] = None
    init_clusters: int = Field(1, ge=1)
    bd_n_mc: int = Field(consts.DEFAULT_BD_N_MC, ge=1)
    bd_steps: int = Field(1, ge=0)
    use_longitudinal: bool = True
    use_metabolites: bool = True
    likelihood_enabled: bool = True
    snapshot_every: int = Field(1000, ge=0)
    log_every: int = Field(1000, ge=1)
    flush_every: int = Field(100, ge=1)

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.n_burnin >= self.n_iter:
            raise ValueError(f"n_burnin ({self.n_burnin}) must be smaller than n_iter ({self.n_iter})")
        return self

    @property
    def n_saved(self) -> int:
        return -(-(self.n_iter - self.n_burnin) // self.thin)

    def is_saved(self, iteration: int) -> bool:
        return iteration >= self.n_burnin and (iteration - self.n_burnin) % self.thin == 0


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(x) for x in item.get("loc", ()))
        if item.get("type") == "extra_forbidden":
            parts.append(f"unknown key '{loc}'")
        else:
            parts.append(f"{loc}: {item.get('msg')}")
    return "; ".join(parts)


def parse_run_config(raw: dict, base_dir: Union[str, Path] = ".") -> RunConfig:
    try:
        config = RunConfig.model_validate(raw or {})
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_format_validation_error(e)}") from e
    if config.data is not None and not os.path.isabs(config.data.base_dir):
        config.data.base_dir = os.path.normpath(os.path.join(str(base_dir), config.data.base_dir))
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read a YAML run configuration; relative data paths resolve against its directory."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Could not parse {path}: {e}") from e
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a mapping with sections data, model, mcmc, output")
    logger.info(f"Loaded run configuration from {path}")
    return parse_run_config(raw, base_dir=path.parent.resolve())
