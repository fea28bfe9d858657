import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ifs_coupler.errors import RateFitError, SupportCapError
from ifs_coupler.metrics import EmpiricalMeasure, bounded_lipschitz, fit_rate, v_moment, wasserstein1_1d


def _measure(draw_atoms, draw_weights):
    return EmpiricalMeasure.from_weights(np.array(draw_atoms), np.array(draw_weights))


measures = st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.lists(st.floats(-5, 5), min_size=n, max_size=n),
                        st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
).map(lambda aw: _measure(*aw))


def test_w1_of_diracs():
    mu = EmpiricalMeasure.from_points([1.0])
    nu = EmpiricalMeasure.from_points([4.5])
    assert wasserstein1_1d(mu, nu) == pytest.approx(3.5)
    # bounded-Lipschitz caps at 2 for far-apart diracs
    assert bounded_lipschitz(mu, nu) == pytest.approx(2.0)


def test_bl_small_separation():
    mu = EmpiricalMeasure.from_points([0.0])
    nu = EmpiricalMeasure.from_points([0.3])
    assert bounded_lipschitz(mu, nu) == pytest.approx(0.3)
    tiny = EmpiricalMeasure.from_points([1e-6])
    assert bounded_lipschitz(mu, tiny) > 0


def test_w1_against_transport_lp(rng):
    for _ in range(20):
        m, n = rng.integers(1, 20, 2)
        xa, xb = rng.normal(size=m), rng.normal(1, 2, size=n)
        wa, wb = rng.random(m) + 0.1, rng.random(n) + 0.1
        mu, nu = _measure(xa, wa), _measure(xb, wb)
        assert wasserstein1_1d(mu, nu) == pytest.approx(
            oracles.transport_w1(xa, mu.weights, xb, nu.weights), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(measures, measures)
def test_bl_below_w1_and_two(mu, nu):
    assert bounded_lipschitz(mu, nu) <= min(wasserstein1_1d(mu, nu), 2.0) + 1e-9


@settings(max_examples=30, deadline=None)
@given(measures, measures, measures)
def test_triangle_and_symmetry(a, b, c):
    for d in (wasserstein1_1d, bounded_lipschitz):
        assert d(a, b) == pytest.approx(d(b, a), abs=1e-9)
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


@settings(max_examples=20, deadline=None)
@given(measures)
def test_bl_self_distance_zero(mu):
    assert bounded_lipschitz(mu, mu) == 0.0


def test_bl_two_dimensional_matches_pair_bound(rng):
    mu = EmpiricalMeasure.from_points(rng.normal(size=(30, 2)))
    nu = EmpiricalMeasure.from_points(rng.normal(size=(30, 2)) + [0.2, 0.0])
    d = bounded_lipschitz(mu, nu)
    assert 0 < d <= 2
    # the custom-metric path gives the same answer for the Euclidean metric
    assert bounded_lipschitz(mu, nu, metric=lambda x, y: np.linalg.norm(x - y, axis=-1)) == pytest.approx(d, abs=1e-9)


def test_support_cap():
    mu = EmpiricalMeasure.from_points(np.arange(300.0))
    nu = EmpiricalMeasure.from_points(np.arange(300.0) + 0.5)
    with pytest.raises(SupportCapError):
        bounded_lipschitz(mu, nu)


def test_measure_validation():
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros(2), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros(2), np.array([1.0, 0.0]))


def test_v_moment():
    mu = EmpiricalMeasure.from_points([[0.0], [2.0]])
    assert v_moment(mu, [1.0]) == pytest.approx(1.0)


def test_fit_exact_sequence():
    data = [(n, 3 * 0.5**n) for n in range(1, 11)]
    fit = fit_rate(data)
    assert abs(fit.q_hat - 0.5) < 1e-12 and abs(fit.C_hat - 3) < 1e-12
    assert fit.r_squared == 1.0 and fit.n_points == 10


def test_fit_constant_sequence_non_contractive():
    with pytest.raises(RateFitError, match="non-contractive"):
        fit_rate([(n, 0.7) for n in range(10)])


def test_fit_needs_three_points():
    with pytest.raises(RateFitError, match="at least 3"):
        fit_rate([(0, 1.0), (1, 0.5), (2, 1e-4)], noise_floor=1e-3)


def test_fit_window_and_floor():
    data = [(n, 2 * 0.6**n + (1.0 if n == 0 else 0.0)) for n in range(0, 12)]
    fit = fit_rate(data, window=(1, 11), noise_floor=2 * 0.6**9)
    assert fit.n_range == (1, 8)
    assert fit.q_hat == pytest.approx(0.6, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.05, 0.95))
def test_fit_scale_equivariance(s, q):
    rng = np.random.default_rng(0)
    data = [(n, q**n * np.exp(0.01 * rng.normal())) for n in range(1, 12)]
    base = fit_rate(data)
    scaled = fit_rate([(n, s * v) for n, v in data])
    assert scaled.q_hat == pytest.approx(base.q_hat, rel=1e-12)
    assert scaled.C_hat == pytest.approx(s * base.C_hat, rel=1e-10)
