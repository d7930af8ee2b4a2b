import numpy as np
import pytest
from scipy.stats import geom

from regenmc import (
    FiniteKernel,
    exact_stationary,
    extract_blocks,
    finite_atom_chain,
    finite_doeblin_chain,
    simulate,
    simulate_split_retrospective,
    two_state_chain,
    wrapped_doeblin_chain,
)
from regenmc.chains import SamplingError, sample_path

from .helpers import batch_means_se, discrete_ks_pvalue


def test_absorbing_identity_kernel():
    model = finite_atom_chain(np.eye(2), atom=0)
    traj = simulate(model, 5, seed=0)
    assert np.all(traj.states == 0)


def test_simulate_requires_positive_n():
    with pytest.raises(ValueError):
        simulate(two_state_chain(), 0, seed=1)


def test_determinism_byte_for_byte(tmp_path):
    model = two_state_chain()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    simulate(model, 500, seed=123).to_csv(p1)
    simulate(model, 500, seed=123).to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert not np.array_equal(simulate(model, 500, seed=124).states,
                              simulate(model, 500, seed=123).states)


def test_trajectory_csv_roundtrip(tmp_path):
    traj = simulate_split_retrospective(wrapped_doeblin_chain(0.4, 0.3), 200, seed=9)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    back = type(traj).from_csv(path)
    assert np.array_equal(back.regen_flags, traj.regen_flags)
    assert np.allclose(back.states, traj.states)
    assert back.seed == traj.seed and back.model_id == traj.model_id


def test_ergodic_frequency_matches_exact_stationary():
    model = two_state_chain(0.5, 0.2)
    traj = simulate(model, 10**6, seed=7)
    pi = exact_stationary(model.kernel)
    freq0 = (traj.states == 0).astype(float)
    se = batch_means_se(freq0)
    assert abs(freq0.mean() - pi[0]) <= 3 * se
    assert np.allclose(pi, [2 / 7, 5 / 7])


def test_exact_stationary_symmetric():
    assert np.allclose(exact_stationary(np.array([[0.5, 0.5], [0.5, 0.5]])), [0.5, 0.5])


def test_exact_stationary_two_state_hand_solved():
    # balance equation: pi0 * p01 = pi1 * p10 -> pi = (p10, p01) / (p01 + p10)
    pi = exact_stationary(np.array([[0.5, 0.5], [0.2, 0.8]]))
    assert np.allclose(pi, [2 / 7, 5 / 7], atol=1e-12)


def test_exact_stationary_rejects_periodic():
    with pytest.raises(ValueError, match="period"):
        exact_stationary(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_exact_stationary_rejects_reducible():
    with pytest.raises(ValueError, match="reducible"):
        exact_stationary(np.eye(2))


def test_finite_kernel_validates_rows():
    with pytest.raises(ValueError):
        FiniteKernel(np.array([[0.5, 0.4], [0.2, 0.8]]))
    with pytest.raises(ValueError):
        FiniteKernel(np.array([[1.2, -0.2], [0.2, 0.8]]))


def test_doeblin_domination_checked_exactly():
    with pytest.raises(ValueError, match="domination"):
        finite_doeblin_chain(0.5, np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([0.5, 0.5]))


def test_doeblin_delta_one_every_step_regenerates():
    # delta = 1 forces the kernel rows to equal psi: pure regeneration draws
    model = finite_doeblin_chain(1.0, np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5]))
    traj = simulate_split_retrospective(model, 1000, seed=3)
    assert traj.regen_flags.all()
    assert extract_blocks(traj).lengths.max() == 1


def test_doeblin_block_lengths_geometric():
    # oracle: closed-form geometric pmf of the Bernoulli split
    delta = 0.3
    model = wrapped_doeblin_chain(delta, 0.25)
    failures = 0
    mean_taus = []
    for s in range(20):
        traj = simulate_split_retrospective(model, 20_000, seed=100 + s)
        taus = extract_blocks(traj).lengths
        mean_taus.append(taus.mean())
        if discrete_ks_pvalue(taus, lambda k: geom.cdf(k, delta)) <= 0.01:
            failures += 1
    assert failures <= 2
    # mean block length -> 1/delta within 3 std errors (pooled)
    pooled = np.mean(mean_taus)
    se = np.std(mean_taus, ddof=1) / np.sqrt(len(mean_taus))
    assert abs(pooled - 1 / delta) <= 3 * se


def test_sampling_error_carries_step_index():
    class ExplodingKernel:
        def sample_next(self, x, rng):
            raise RuntimeError("boom")

    with pytest.raises(SamplingError, match="step 1"):
        sample_path(ExplodingKernel(), np.array([0.0]), 5, np.random.default_rng(0))
