import numpy as np
import pytest
from scipy import stats

import oracles
from ifs_coupler import streams
from ifs_coupler.coupling import (coupled_draws, coupled_step, coupling_time, hitting_time, overlap_mass,
                                  run_coupled_ensemble, simulate_coupled)
from ifs_coupler.kernel import draw_times


def test_overlap_mass_matches_brute_force(tilted):
    for x, y in [(1.0, 0.2), (0.0, 4.0), (2.0, 2.5)]:
        p, q = oracles.tilted_p(x, 0.2, 1.0), oracles.tilted_p(y, 0.2, 1.0)
        ref = oracles.dense_integral(lambda t: np.minimum(p(t), q(t)), 1.0)
        assert overlap_mass(tilted, x, y) == pytest.approx(ref, abs=1e-9)
    assert overlap_mass(tilted, 1.0, 0.2) == pytest.approx(0.971789058213457, abs=1e-9)


def test_overlap_mass_identical_states(tilted):
    assert overlap_mass(tilted, 1.3, 1.3) == pytest.approx(1.0, abs=1e-12)


def test_state_free_density_always_glues(halving):
    run = run_coupled_ensemble(halving, 0.0, 4.0, 200, 12, eps=0.25, c=0.5, seed=1)
    assert np.all(run.thetas == 1)
    assert np.all(run.tau_hat == 1) and not run.censored.any()


def test_theta_frequency_is_bernoulli_kappa(tilted):
    x, y = 0.0, 4.0
    kappa = overlap_mass(tilted, x, y)
    n = 50000
    _, _, theta, _, _ = coupled_draws(tilted, x, y, streams.substream(9).random((n, 3)))
    se = np.sqrt(kappa * (1 - kappa) / n)
    assert abs(theta.mean() - kappa) < 4 * se


def test_glued_step_shares_time(tilted):
    xn, yn, theta, tx, ty = coupled_draws(tilted, 0.5, 3.0, streams.substream(1).random((2000, 3)))
    g = theta == 1
    np.testing.assert_array_equal(tx[g], ty[g])
    np.testing.assert_allclose(yn[g] - xn[g], 1.25)


def test_gluing_persists_once_equal(tilted):
    traj = simulate_coupled(tilted, 1.7, 1.7, 25, eps=0.2, c=0.5, seed=4)
    assert np.all(traj.thetas == 1)
    np.testing.assert_array_equal(traj.pairs[:, 0], traj.pairs[:, 1])
    assert traj.tau_hat == 1 and not traj.tau_censored


def test_marginals_match_single_chain(tilted):
    n = 20000
    x, y = 0.0, 4.0
    xn, yn, *_ = coupled_draws(tilted, x, y, streams.substream(21).random((n, 3)))
    tx = draw_times(tilted, np.full((n, 1), x), streams.substream(22).random(n))
    ty = draw_times(tilted, np.full((n, 1), y), streams.substream(23).random(n))
    assert stats.ks_2samp(xn[:, 0], 0.5 * (x + tx)).pvalue > 0.001
    assert stats.ks_2samp(yn[:, 0], 0.5 * (y + ty)).pvalue > 0.001


def test_coupled_step_fields(tilted):
    st = coupled_step(tilted, 0.0, 4.0, np.random.default_rng(0))
    if st.theta == 1:
        assert st.t_shared is not None and st.t_x is None
    else:
        assert st.t_x is not None and st.t_y is not None


@pytest.mark.parametrize("thetas,horizon,expected", [
    ([1, 1, 1, 1], 4, (1, False)),
    ([0, 1, 1, 1], 4, (2, False)),
    ([1, 0, 1, 0, 1, 1, 1, 1, 1, 1], 10, (5, False)),
    ([1] * 9 + [0], 10, (11, True)),
    ([1] * 18 + [0, 1], 20, (20, True)),
])
def test_coupling_time(thetas, horizon, expected):
    assert coupling_time(thetas, horizon) == expected


def test_hitting_time(halving):
    pairs = np.array([[[4.0], [4.0]], [[2.0], [2.0]], [[1.0], [0.5]], [[0.5], [0.5]]])
    assert hitting_time(halving, pairs, eps=0.5, c=1.0) == 2
    assert hitting_time(halving, pairs, eps=0.5, c=0.1) is None


def test_eps_precondition(tilted):
    with pytest.raises(ValueError, match="eps"):
        simulate_coupled(tilted, 0.0, 1.0, 5, eps=0.6, c=0.5, seed=0, a=0.5)


def test_vectorized_tau_matches_scalar(tilted):
    run = run_coupled_ensemble(tilted, 0.0, 4.0, 300, 20, eps=0.25, c=0.5, seed=3, threads=2)
    for i in range(0, 300, 17):
        assert (run.tau_hat[i], run.censored[i]) == coupling_time(run.thetas[i], 20)
    assert run.tail_frequency(0) == 1.0
    assert 0.0 <= run.tail_frequency(10) <= 1.0


def test_coupled_ensemble_thread_independent(tilted):
    a = run_coupled_ensemble(tilted, 0.0, 4.0, 700, 6, eps=0.25, c=0.5, seed=8, threads=1)
    b = run_coupled_ensemble(tilted, 0.0, 4.0, 700, 6, eps=0.25, c=0.5, seed=8, threads=8)
    np.testing.assert_array_equal(a.thetas, b.thetas)
    np.testing.assert_array_equal(a.first_path, b.first_path)
