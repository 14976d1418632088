import numpy as np

from growthgraph.utils import consts


def stream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic named sub-stream of the run seed.

    ``key`` starts with one of the ``consts.STREAM_*`` names; further integers
    (iteration, cluster index, ...) address a child stream.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key)))


def chain_rng(seed: int) -> np.random.Generator:
    return stream(seed, consts.STREAM_CHAIN)


def cluster_rng(seed: int, iteration: int, cluster: int) -> np.random.Generator:
    return stream(seed, consts.STREAM_CLUSTER, iteration, cluster)


def simulation_rng(seed: int) -> np.random.Generator:
    return stream(seed, consts.STREAM_SIMULATION)
