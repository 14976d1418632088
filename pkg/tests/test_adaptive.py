import numpy as np
import pytest

from growthgraph.sampler.adaptive import AdaptiveProposal
from growthgraph.utils import consts


def test_initial_proposal_covariance():
    proposal = AdaptiveProposal(3, initial_sd=0.2)
    expected = consts.ADAPT_SCALE / 3 * (0.04 + consts.ADAPT_RIDGE) * np.eye(3)
    np.testing.assert_allclose(proposal.proposal_cov, expected)


def test_running_covariance_matches_numpy(rng):
    points = rng.standard_normal((50, 2)) @ np.array([[1.0, 0.5], [0.0, 2.0]])
    proposal = AdaptiveProposal(2)
    for x in points:
        proposal.update(x)
    np.testing.assert_allclose(proposal.mean, points.mean(axis=0))
    np.testing.assert_allclose(proposal.empirical_cov, np.cov(points, rowvar=False))


def test_freeze_stops_adaptation(rng):
    proposal = AdaptiveProposal(2)
    for x in rng.standard_normal((5, 2)):
        proposal.update(x)
    proposal.freeze()
    before = proposal.proposal_cov.copy()
    proposal.update(np.array([100.0, -100.0]))
    np.testing.assert_array_equal(proposal.proposal_cov, before)
    assert proposal.n == 5


def test_step_accepts_on_flat_target_and_rejects_impossible_moves(rng):
    proposal = AdaptiveProposal(2)
    x, lt, accepted = proposal.step(np.zeros(2), lambda v: 0.0, 0.0, rng)
    assert accepted and lt == 0.0
    y, lt, accepted = proposal.step(x, lambda v: -np.inf, 0.0, rng)
    assert not accepted
    np.testing.assert_array_equal(y, x)
    assert proposal.acceptance_rate == pytest.approx(0.5)
    summary = proposal.summary()
    assert summary["proposed"] == 2 and summary["accepted"] == 1


def test_acceptance_rate_before_any_proposal_is_nan():
    proposal = AdaptiveProposal(1)
    assert np.isnan(proposal.acceptance_rate)
    assert proposal.summary()["rate"] is None


@pytest.mark.slow
def test_adapted_covariance_tracks_the_target():
    rng = np.random.default_rng(8)
    cov = np.array([[1.0, 0.8], [0.8, 2.0]])
    precision = np.linalg.inv(cov)
    proposal = AdaptiveProposal(2, initial_sd=0.1)

    def log_target(v):
        return -0.5 * float(v @ precision @ v)

    x = np.zeros(2)
    lt = log_target(x)
    for _ in range(20000):
        x, lt, _ = proposal.step(x, log_target, lt, rng)
        proposal.update(x)
    np.testing.assert_allclose(proposal.empirical_cov, cov, atol=0.3)
    assert 0.15 < proposal.acceptance_rate < 0.7
