from .adaptive import AdaptiveProposal
from .chain import ChainRunner, run_chain, run_fixed_partition
from .store import SampleStore, SampleStoreWriter, load_sample_store
from .updates import (
    ModelContext,
    impute_missing,
    update_beta,
    update_kernel_hyperparams,
    update_mu_theta,
    update_tau2,
    update_theta_star,
)
