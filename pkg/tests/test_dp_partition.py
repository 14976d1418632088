import numpy as np
import pytest
from conftest import make_model_data, make_sampler_config

from growthgraph.gtypes import ClusterAtoms, DPConfig, Graph, GWishartParams, KernelParams, Partition, PrecisionMatrix
from growthgraph.model.dp_partition import (
    BaseMeasure,
    SubjectLikelihood,
    calibrate_alpha,
    canonicalize,
    crp_k_moments,
    crp_k_pmf,
    enumerate_set_partitions,
    log_stirling_first,
    polya_urn_sweep,
    ppmx_log_marginal_partition,
    stick_breaking_weights,
)
from growthgraph.model.ggm import NormalizingConstantCache
from growthgraph.model.gp_kernel import build_kernel_matrix
from growthgraph.sampler.chain import ChainRunner
from growthgraph.utils.errors import DataError, NumericalError


def _base(p_Y: int = 2, p_M: int = 2, d: float = 0.5) -> BaseMeasure:
    kernel = build_kernel_matrix(KernelParams(sigma2=1.0, phi2=1.0, eta2=0.5, xi=(1.0,)),
                                 [np.arange(1.0, p_Y + 1.0)])
    return BaseMeasure(mu_theta=np.zeros(p_Y), kernel=kernel,
                       gwishart=GWishartParams.identity_scaled(p_M, nu=p_M + 2.0), d=d)


def _likelihood(N: int, p_Y: int = 2, p_M: int = 2, enabled: bool = True, seed: int = 0) -> SubjectLikelihood:
    rng = np.random.default_rng(seed)
    return SubjectLikelihood(resid_Y=rng.standard_normal((N, p_Y)), tau2=np.ones(p_Y),
                             resid_M=rng.standard_normal((N, p_M)), enabled=enabled)


def _one_cluster(N: int, p_Y: int = 2, p_M: int = 2):
    atoms = ClusterAtoms()
    atoms.append(np.zeros(p_Y), PrecisionMatrix(np.eye(p_M)), Graph.empty(p_M))
    return Partition(np.zeros(N, dtype=int)), atoms


def test_crp_moments_for_default_mass():
    mean, var = crp_k_moments(0.18, 227)
    assert 1.9 <= mean <= 2.1
    assert 0.85 <= var <= 1.15


def test_crp_pmf_agrees_with_moments():
    pmf = crp_k_pmf(0.7, 30)
    k = np.arange(31)
    mean, var = crp_k_moments(0.7, 30)
    assert pmf.sum() == pytest.approx(1.0)
    assert pmf[0] == 0.0
    assert (k * pmf).sum() == pytest.approx(mean)
    assert ((k - mean) ** 2 * pmf).sum() == pytest.approx(var)
    np.testing.assert_allclose(crp_k_pmf(2.0, 1), [0.0, 1.0])


def test_stirling_numbers():
    np.testing.assert_allclose(np.exp(log_stirling_first(4)), [0.0, 6.0, 11.0, 6.0, 1.0])


def test_calibrate_alpha_inverts_mean():
    target, _ = crp_k_moments(0.18, 227)
    assert calibrate_alpha(target, 227) == pytest.approx(0.18, rel=1e-6)
    with pytest.raises(DataError):
        calibrate_alpha(0.5, 227)


def test_stick_breaking_weights(rng):
    w = stick_breaking_weights(1.0, 50, rng)
    assert w.shape == (50,)
    assert np.all(w > 0)
    assert w.sum() <= 1.0 + 1e-12


def test_canonicalize():
    np.testing.assert_array_equal(canonicalize([2, 2, 0, 1, 0]).assignments, [0, 0, 1, 2, 1])
    assert canonicalize([5, 5, 5]).K == 1


@pytest.mark.parametrize("N, bell", [(1, 1), (4, 15), (5, 52), (8, 4140)])
def test_enumerate_set_partitions_counts(N, bell):
    seen = set()
    for labels in enumerate_set_partitions(N):
        assert Partition(labels).is_canonical()
        seen.add(tuple(labels))
    assert len(seen) == bell


def test_urn_with_single_subject(rng):
    partition, atoms = _one_cluster(1)
    new_partition, new_atoms = polya_urn_sweep(partition, atoms, _likelihood(1), DPConfig(alpha=1.0, m_aux=2),
                                               _base(), rng)
    np.testing.assert_array_equal(new_partition.assignments, [0])
    assert len(new_atoms) == 1


def test_urn_output_is_canonical_with_one_atom_per_cluster(rng):
    partition, atoms = _one_cluster(10)
    likelihood = _likelihood(10)
    dp = DPConfig(alpha=2.0, m_aux=3)
    base = _base()
    for _ in range(5):
        partition, atoms = polya_urn_sweep(partition, atoms, likelihood, dp, base, rng)
        assert partition.is_canonical()
        assert len(atoms) == partition.K
        for graph, omega in zip(atoms.graph, atoms.omega):
            omega.check(graph)


def test_urn_rejects_non_finite_weights(rng):
    partition, atoms = _one_cluster(3)
    likelihood = _likelihood(3)
    likelihood.resid_Y[1, 0] = np.nan
    with pytest.raises(NumericalError):
        polya_urn_sweep(partition, atoms, likelihood, DPConfig(), _base(), rng)


@pytest.mark.slow
def test_urn_without_likelihood_samples_the_crp_prior():
    rng = np.random.default_rng(21)
    N, alpha = 5, 1.0
    partition, atoms = _one_cluster(N)
    likelihood = _likelihood(N, enabled=False)
    dp = DPConfig(alpha=alpha, m_aux=2)
    base = _base()
    counts = np.zeros(N + 1)
    n_sweeps = 3000
    for _ in range(n_sweeps):
        partition, atoms = polya_urn_sweep(partition, atoms, likelihood, dp, base, rng)
        counts[partition.K] += 1
    np.testing.assert_allclose(counts / n_sweeps, crp_k_pmf(alpha, N), atol=0.04)


def test_partition_marginal_guards_and_prefers_true_split():
    rng = np.random.default_rng(4)
    with pytest.raises(DataError):
        ppmx_log_marginal_partition(Partition(np.zeros(3, dtype=int)), np.zeros((3, 5)), 1.0, 7.0, np.eye(5), 0.5)
    with pytest.raises(DataError):
        ppmx_log_marginal_partition(Partition(np.zeros(3, dtype=int)), np.zeros((4, 2)), 1.0, 4.0, np.eye(2), 0.5)

    a = rng.multivariate_normal([0, 0], [[1.0, 0.9], [0.9, 1.0]], size=25)
    b = rng.multivariate_normal([0, 0], [[1.0, -0.9], [-0.9, 1.0]], size=25)
    M = np.vstack([a, b])
    truth = Partition(np.repeat([0, 1], 25))
    merged = Partition(np.zeros(50, dtype=int))
    lp_truth = ppmx_log_marginal_partition(truth, M, 1.0, 4.0, np.eye(2), 0.5, n_mc=500)
    lp_merged = ppmx_log_marginal_partition(merged, M, 1.0, 4.0, np.eye(2), 0.5, n_mc=500)
    assert np.isfinite(lp_truth) and np.isfinite(lp_merged)
    assert lp_truth > lp_merged


def test_stick_breaking_weight_means():
    rng = np.random.default_rng(6)
    alpha = 2.0
    w = np.stack([stick_breaking_weights(alpha, 5, rng) for _ in range(20000)])
    assert w[:, 0].mean() == pytest.approx(1.0 / (1.0 + alpha), abs=0.01)
    assert w[:, 1].mean() == pytest.approx(alpha / (1.0 + alpha) ** 2, abs=0.01)


@pytest.mark.slow
def test_chain_without_likelihood_samples_the_crp_prior(tmp_path):
    rng = np.random.default_rng(31)
    N, alpha = 6, 1.0
    data = make_model_data(rng, N=N, times=((1.0, 2.0),), p_M=2, q=0, missing_rate=0.0)
    n_steps = 30_000
    config = make_sampler_config(2, n_iter=n_steps, n_burnin=100, likelihood_enabled=False, bd_steps=0,
                                 dp=DPConfig(alpha=alpha, m_aux=2))
    runner = ChainRunner(config, data, str(tmp_path), n_workers=1)
    state = runner.initial_state()
    counts = np.zeros(N + 1)
    for t in range(n_steps):
        state = runner.step(state, t)
        counts[state.K] += 1
    total_variation = 0.5 * np.abs(counts / n_steps - crp_k_pmf(alpha, N)).sum()
    assert total_variation <= 0.02


@pytest.mark.slow
def test_metabolite_only_chain_matches_enumerated_partition_posterior(tmp_path):
    rng = np.random.default_rng(37)
    N, alpha, n_mc = 5, 0.5, 20000
    data = make_model_data(rng, N=N, times=((1.0, 2.0),), p_M=3, q=0, missing_rate=0.0)
    n_burnin, n_steps = 1000, 50_000
    config = make_sampler_config(3, n_iter=n_burnin + n_steps, n_burnin=n_burnin, use_longitudinal=False,
                                 bd_n_mc=n_mc, dp=DPConfig(alpha=alpha, m_aux=2))

    cache = NormalizingConstantCache(seed=config.seed, n_mc=n_mc)
    partitions = [tuple(labels) for labels in enumerate_set_partitions(N)]
    log_post = np.array([
        ppmx_log_marginal_partition(Partition(np.array(labels)), data.metabolites.M, alpha, config.gwishart.nu,
                                    config.gwishart.psi, config.d, cache=cache)
        for labels in partitions
    ])
    exact = np.exp(log_post - log_post.max())
    exact /= exact.sum()

    runner = ChainRunner(config, data, str(tmp_path), n_workers=1)
    state = runner.initial_state()
    index = {labels: c for c, labels in enumerate(partitions)}
    counts = np.zeros(len(partitions))
    for t in range(n_burnin + n_steps):
        state = runner.step(state, t)
        if t >= n_burnin:
            counts[index[tuple(state.partition.assignments)]] += 1
    total_variation = 0.5 * np.abs(counts / n_steps - exact).sum()
    assert total_variation <= 0.05
