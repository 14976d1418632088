import os

import numpy as np
import pytest
from conftest import make_sampler_config

from growthgraph.gtypes import Partition
from growthgraph.sampler import ChainRunner, load_sample_store, run_chain, run_fixed_partition
from growthgraph.sampler.chain import load_snapshot
from growthgraph.sampler.store import coordinate_names
from growthgraph.utils import consts
from growthgraph.utils.errors import DataError, TruncatedStoreError


def test_schedule_saves_thinned_post_burnin_iterations():
    config = make_sampler_config(3, n_iter=20, n_burnin=5, thin=4)
    assert [t for t in range(20) if config.is_saved(t)] == [5, 9, 13, 17]
    assert config.n_saved == 4
    with pytest.raises(ValueError):
        make_sampler_config(3, n_iter=5, n_burnin=5)


def test_short_chain_writes_a_complete_store(model_data, tmp_path):
    config = make_sampler_config(model_data.metabolites.p_M)
    store = run_chain(config, model_data, str(tmp_path))

    assert store.n_saved == 5
    np.testing.assert_array_equal(store.iterations, [5, 6, 7, 8, 9])
    for name in consts.STORE_FILES + [consts.ACCEPTANCE_FILE, consts.PREPROCESSED_METABOLITES]:
        assert os.path.exists(tmp_path / name)
    assert store.partitions.shape == (5, model_data.N)
    assert list(store.beta_Y.columns)[:2] == ["proc0[1]:x0", "proc0[1]:x1"]
    assert store.scalars.columns[0] == "K"
    np.testing.assert_array_equal(store.scalars["K"].to_numpy(), store.partitions.max(axis=1) + 1)
    for record, labels in zip(store.graph_records, store.partitions):
        assert len(record["clusters"]) == labels.max() + 1
    assert len(store.theta_star()[0][0]) == model_data.longitudinal.p_Y
    for omega in store.omegas(0):
        assert np.all(np.linalg.eigvalsh(omega) > 0)


def test_chain_is_reproducible_for_a_seed(model_data, tmp_path):
    config = make_sampler_config(model_data.metabolites.p_M)
    first = run_chain(config, model_data, str(tmp_path / "a"))
    second = run_chain(config, model_data, str(tmp_path / "b"), n_workers=3)
    np.testing.assert_array_equal(first.partitions, second.partitions)
    np.testing.assert_allclose(first.scalars.to_numpy(), second.scalars.to_numpy())
    assert first.graph_records == second.graph_records


def test_fixed_partition_is_never_resampled(model_data, tmp_path):
    labels = np.arange(model_data.N) % 3
    config = make_sampler_config(model_data.metabolites.p_M, fixed_partition=Partition(labels))
    store = run_fixed_partition(config, model_data, str(tmp_path))
    assert store.fixed_partition
    for sample in store.partitions:
        np.testing.assert_array_equal(sample, labels)
    assert len(store.graphs(2)) == 5


def test_fixed_partition_run_requires_partition(model_data, tmp_path):
    config = make_sampler_config(model_data.metabolites.p_M)
    with pytest.raises(DataError):
        run_fixed_partition(config, model_data, str(tmp_path))
    bad = make_sampler_config(model_data.metabolites.p_M, fixed_partition=Partition(np.zeros(3, dtype=int)))
    with pytest.raises(DataError):
        ChainRunner(bad, model_data, str(tmp_path))


def test_snapshot_round_trip(model_data, tmp_path):
    runner = ChainRunner(make_sampler_config(model_data.metabolites.p_M), model_data, str(tmp_path))
    state = runner.step(runner.initial_state(), 0)
    payload = load_snapshot(runner.snapshot(state))
    assert payload["iteration"] == 0
    np.testing.assert_array_equal(payload["state"].partition.assignments, state.partition.assignments)


def test_truncated_store_is_detected(model_data, tmp_path):
    run_chain(make_sampler_config(model_data.metabolites.p_M), model_data, str(tmp_path))
    path = tmp_path / consts.SCALAR_TABLE
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(TruncatedStoreError):
        load_sample_store(str(tmp_path))
    os.remove(tmp_path / consts.GRAPH_RECORDS)
    with pytest.raises(TruncatedStoreError) as err:
        load_sample_store(str(tmp_path))
    assert consts.GRAPH_RECORDS in err.value.missing


def test_coordinate_names(model_data):
    assert coordinate_names(model_data) == ["proc0[1]", "proc0[2]", "proc0[3]", "proc1[1]", "proc1[2]"]


def test_k_means_start_is_seeded_and_canonical(model_data, tmp_path):
    config = make_sampler_config(model_data.metabolites.p_M, init_clusters=3)
    first = ChainRunner(config, model_data, str(tmp_path)).initial_state()
    second = ChainRunner(config, model_data, str(tmp_path)).initial_state()
    np.testing.assert_array_equal(first.partition.assignments, second.partition.assignments)
    assert first.partition.is_canonical()
    assert 1 <= first.K <= 3
    assert len(first.atoms) == first.K
    for j in range(first.K):
        np.testing.assert_allclose(first.atoms.theta[j], first.Y[first.partition.members(j)].mean(axis=0))

    single = ChainRunner(make_sampler_config(model_data.metabolites.p_M), model_data, str(tmp_path)).initial_state()
    assert single.K == 1
