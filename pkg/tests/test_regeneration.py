import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from regenmc import (
    ChainModel,
    Trajectory,
    block_bootstrap_se,
    extract_blocks,
    finite_doeblin_chain,
    pitman_estimate,
    regen_stats,
    simulate,
    simulate_split_forward,
    simulate_split_retrospective,
    two_state_chain,
    wrapped_doeblin_chain,
)
from regenmc.regeneration import RegenStats


def indicator_of_one(states):
    return (np.asarray(states) == 1).astype(float)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def test_retrospective_flag_probability_reduces_to_delta():
    # kernel rows equal psi, so the flag ratio is delta at every transition
    delta = 0.3
    model = finite_doeblin_chain(delta, np.array([[0.5, 0.5], [0.5, 0.5]]),
                                 np.array([0.5, 0.5]))
    traj = simulate_split_retrospective(model, 100_000, seed=11)
    freq = traj.regen_flags.mean()
    se = np.sqrt(delta * (1 - delta) / traj.n)
    assert abs(freq - delta) <= 3 * se


def test_doeblin_flag_frequency():
    delta = 0.3
    traj = simulate_split_retrospective(wrapped_doeblin_chain(delta, 0.25), 100_000, seed=2)
    se = np.sqrt(delta * (1 - delta) / traj.n)
    assert abs(traj.regen_flags.mean() - delta) <= 3 * se


def test_retrospective_marginal_matches_plain_simulation():
    # oracle: the plain simulator; thinning keeps the two-sample KS null valid
    model = wrapped_doeblin_chain(0.3, 0.25)
    stride = 10
    failures = 0
    for s in range(20):
        a = simulate_split_retrospective(model, 10_000, seed=300 + s).values_1d()[::stride]
        b = simulate(model, 10_000, seed=900 + s).values_1d()[::stride]
        if ks_2samp(a, b).pvalue <= 0.01:
            failures += 1
    assert failures <= 2


def test_invalid_certificate_detected():
    model = finite_doeblin_chain(0.3, np.array([[0.5, 0.5], [0.2, 0.8]]),
                                 np.array([0.5, 0.5]))
    bad_cert = type(model.minorization)(
        delta=0.9,  # claims more than the kernel provides
        psi_sample=model.minorization.psi_sample,
        psi_density=model.minorization.psi_density,
        small_set=model.minorization.small_set)
    bad = ChainModel(kernel=model.kernel, initial_sample=model.initial_sample,
                     minorization=bad_cert, model_id="bad")
    with pytest.raises(ValueError, match="flag probability"):
        simulate_split_retrospective(bad, 2000, seed=0)


def test_forward_delta_one_all_flags():
    model = finite_doeblin_chain(1.0, np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5]))
    traj = simulate_split_forward(model, 500, seed=4)
    assert traj.regen_flags.all()


def test_forward_split_joint_transitions_match_hand_matrix():
    # enumerate the split-chain transition law from the mixture construction:
    # next X ~ psi on a flag, else the residual row; the new flag is then
    # Bernoulli(delta) regardless of the state (whole space small)
    delta, p = 0.3, np.array([[0.5, 0.5], [0.2, 0.8]])
    psi = np.array([0.6, 0.4])
    residual = (p - delta * psi[None, :]) / (1 - delta)
    model = finite_doeblin_chain(delta, p, psi)
    traj = simulate_split_forward(model, 500_000, seed=21)
    xs, ys = traj.states, traj.regen_flags.astype(int)
    counts = np.zeros((2, 2, 2, 2))
    np.add.at(counts, (xs[:-1], ys[:-1], xs[1:], ys[1:]), 1)
    for x in range(2):
        for y in range(2):
            total = counts[x, y].sum()
            for x2 in range(2):
                move = psi[x2] if y == 1 else residual[x, x2]
                for y2 in range(2):
                    expected = move * (delta if y2 == 1 else 1 - delta)
                    observed = counts[x, y, x2, y2] / total
                    se = np.sqrt(max(expected * (1 - expected), 1e-12) / total)
                    assert abs(observed - expected) <= 4 * se, (x, y, x2, y2)


def test_forward_and_retrospective_agree():
    model = finite_doeblin_chain(0.3, np.array([[0.5, 0.5], [0.2, 0.8]]),
                                 np.array([0.5, 0.5]))
    fwd = simulate_split_forward(model, 50_000, seed=6)
    retro = simulate_split_retrospective(model, 50_000, seed=7)
    f1, f2 = fwd.regen_flags.mean(), retro.regen_flags.mean()
    se = np.sqrt(2 * 0.3 * 0.7 / 50_000)
    assert abs(f1 - f2) <= 3 * se
    # block-length two-sample tests across seeds
    failures = 0
    for s in range(20):
        t1 = extract_blocks(simulate_split_forward(model, 5000, seed=800 + s)).lengths
        t2 = extract_blocks(simulate_split_retrospective(model, 5000, seed=1800 + s)).lengths
        if ks_2samp(t1, t2).pvalue <= 0.01:
            failures += 1
    assert failures <= 2


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


def _traj_from_flags(flags):
    states = np.arange(len(flags), dtype=np.int64)
    return Trajectory(states=states, regen_flags=np.asarray(flags, dtype=bool),
                      seed=0, model_id="fixture")


def test_extract_blocks_example():
    flags = np.zeros(8, dtype=bool)
    flags[[2, 5]] = True
    blocks = extract_blocks(_traj_from_flags(flags))
    assert blocks.initial_bounds == (0, 3)
    assert blocks.complete_bounds.tolist() == [[3, 6]]
    assert blocks.trailing_bounds == (6, 8)
    assert blocks.l_n == 2


def test_extract_blocks_no_flags():
    blocks = extract_blocks(_traj_from_flags(np.zeros(5, dtype=bool)))
    assert blocks.l_n == 0 and blocks.n_complete == 0
    assert blocks.initial_bounds == (0, 5) and blocks.trailing_bounds is None


def test_extract_blocks_edge_flags():
    flags = np.zeros(4, dtype=bool)
    flags[[0, 3]] = True
    blocks = extract_blocks(_traj_from_flags(flags))
    assert blocks.initial_bounds == (0, 1)
    assert blocks.trailing_bounds is None
    assert blocks.complete_bounds.tolist() == [[1, 4]]


@given(st.lists(st.booleans(), min_size=1, max_size=60))
@settings(max_examples=200, deadline=None)
def test_block_reconstruction(flags):
    blocks = extract_blocks(_traj_from_flags(flags))
    pieces = []
    if blocks.initial_bounds:
        pieces.append(blocks.initial.states)
    pieces.extend(b.states for b in blocks.complete_blocks())
    if blocks.trailing_bounds:
        pieces.append(blocks.trailing.states)
    assert np.array_equal(np.concatenate(pieces), blocks.states)


def test_doeblin_mean_block_length():
    traj = simulate_split_retrospective(wrapped_doeblin_chain(0.3, 0.25), 100_000, seed=5)
    taus = extract_blocks(traj).lengths
    se = taus.std(ddof=1) / np.sqrt(len(taus))
    assert abs(taus.mean() - 1 / 0.3) <= 3 * se


def test_complete_blocks_uncorrelated():
    model = wrapped_doeblin_chain(0.3, 0.25)
    exceptions = 0
    for s in range(20):
        blocks = extract_blocks(simulate_split_retrospective(model, 20_000, seed=40 + s))
        vals = blocks.block_values(lambda x: np.ravel(x))
        v = vals - vals.mean()
        rho1 = (v[:-1] * v[1:]).mean() / v.var()
        if abs(rho1) > 4 / np.sqrt(len(vals)):
            exceptions += 1
    assert exceptions <= 2


# ---------------------------------------------------------------------------
# Occupation ratio
# ---------------------------------------------------------------------------


def test_pitman_constant_function_is_one():
    traj = simulate_split_retrospective(two_state_chain(), 5000, seed=1)
    blocks = extract_blocks(traj)
    assert pitman_estimate(blocks, lambda s: np.ones(len(s))) == 1.0


def test_pitman_single_block_arithmetic():
    states = np.array([9, 1, 2, 3], dtype=np.int64)
    flags = np.array([True, False, False, True])
    blocks = extract_blocks(Trajectory(states=states, regen_flags=flags, seed=0, model_id="x"))
    assert pitman_estimate(blocks, lambda s: np.asarray(s, dtype=float)) == 2.0


def test_pitman_requires_complete_blocks():
    blocks = extract_blocks(_traj_from_flags(np.zeros(5, dtype=bool)))
    with pytest.raises(ValueError, match="no regenerations"):
        pitman_estimate(blocks, lambda s: np.ones(len(s)))


def test_pitman_two_state_stationary():
    traj = simulate_split_retrospective(two_state_chain(), 100_000, seed=17)
    blocks = extract_blocks(traj)
    est = pitman_estimate(blocks, indicator_of_one)
    se = block_bootstrap_se(blocks, indicator_of_one, seed=3)
    assert abs(est - 5 / 7) <= 3 * se


# ---------------------------------------------------------------------------
# Regeneration-time statistics
# ---------------------------------------------------------------------------


def test_regen_stats_constant_blocks():
    stats = RegenStats(tau_samples=np.ones(100, dtype=np.int64))
    for p in (1, 2, 3.5):
        assert stats.moment(p) == 1.0
    val, reliable = stats.mgf(0.7)
    assert np.isclose(val, np.exp(0.7)) and reliable


def test_regen_stats_arithmetic():
    stats = RegenStats(tau_samples=np.array([1, 2, 3]))
    assert np.isclose(stats.moment(2), 14 / 3)
    assert stats.moment(0) == 1.0
    assert stats.mgf(0.0)[0] == 1.0


def test_regen_stats_moments_nondecreasing_in_p():
    stats = RegenStats(tau_samples=np.array([1, 2, 2, 5, 3]))
    moments = [stats.moment(p) for p in (0.5, 1, 1.5, 2, 3)]
    assert all(a <= b for a, b in zip(moments, moments[1:]))


def test_geometric_mgf_and_tail():
    delta, lam = 0.3, 0.15
    traj = simulate_split_retrospective(wrapped_doeblin_chain(delta, 0.25), 300_000, seed=23)
    blocks = extract_blocks(traj)
    stats = regen_stats(blocks)
    # closed-form geometric MGF: delta e^l / (1 - (1-delta) e^l), finite for
    # e^l (1-delta) < 1, i.e. l < -log(0.7) ~ 0.357
    analytic = delta * np.exp(lam) / (1 - (1 - delta) * np.exp(lam))
    val, reliable = stats.mgf(lam)
    terms = np.exp(lam * blocks.lengths.astype(float))
    se = terms.std(ddof=1) / np.sqrt(len(terms))
    assert reliable
    assert abs(val - analytic) <= 4 * se
    rate, _ = stats.tail_rate()
    assert abs(rate - (-np.log(1 - delta))) < 0.05
    se_m = blocks.lengths.std(ddof=1) / np.sqrt(blocks.n_complete)
    assert abs(stats.moment(1) - 1 / delta) <= 3 * se_m


def test_mgf_unreliable_when_one_block_dominates():
    stats = RegenStats(tau_samples=np.array([1] * 100 + [50]))
    _, reliable = stats.mgf(1.0)
    assert not reliable


def test_regen_stats_warns_on_few_blocks():
    with pytest.warns(UserWarning, match="unreliable"):
        regen_stats(extract_blocks(_traj_from_flags([True, True, False, True])), min_blocks=30)
