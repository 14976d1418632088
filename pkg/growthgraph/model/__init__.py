from .dp_partition import (
    BaseMeasure,
    SubjectLikelihood,
    calibrate_alpha,
    canonicalize,
    crp_k_moments,
    crp_k_pmf,
    draw_from_base,
    enumerate_set_partitions,
    polya_urn_sweep,
    ppmx_log_marginal_partition,
    stick_breaking_weights,
)
from .ggm import (
    NormalizingConstantCache,
    bd_update,
    default_edge_probability,
    enumerate_graphs,
    gaussian_logdensity_precision,
    graph_prior_logpmf,
    gwishart_lognorm_mc,
    gwishart_logdensity_unnorm,
    gwishart_sample,
    precision_conditional,
)
from .gp_kernel import KernelMatrix, build_kernel_matrix, gaussian_conditional, gaussian_logpdf_cov, kernel_entry
