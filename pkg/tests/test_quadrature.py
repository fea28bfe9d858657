import numpy as np
from hypothesis import given, settings, strategies as st

from ifs_coupler.quadrature import cumulative_simpson, simpson, simpson_nodes


def test_nodes_count_and_endpoints():
    t = simpson_nodes(2.0, 5)
    assert len(t) == 11 and t[0] == 0.0 and t[-1] == 2.0


def test_simpson_exact_on_cubics():
    t = simpson_nodes(1.5, 3)
    v = 4 * t**3 - t**2 + 2
    exact = 1.5**4 - 1.5**3 / 3 + 3.0
    assert abs(simpson(v, 1.5) - exact) < 1e-12


def test_simpson_batched_rows():
    t = simpson_nodes(1.0, 8)
    rows = np.stack([np.ones_like(t), t, t**2])
    np.testing.assert_allclose(simpson(rows, 1.0), [1.0, 0.5, 1.0 / 3.0], atol=1e-14)


def test_cumulative_ends_at_total():
    t = simpson_nodes(1.0, 16)
    v = np.exp(t)
    F = cumulative_simpson(v, 1.0)
    assert F.shape == (17,)
    assert F[0] == 0.0
    assert abs(F[-1] - simpson(v, 1.0)) < 1e-14
    assert abs(F[-1] - (np.e - 1)) < 1e-7


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=9, max_size=9))
def test_cumulative_monotone_for_nonnegative_values(vals):
    F = cumulative_simpson(np.array(vals), 1.0)
    assert np.all(np.diff(F) >= -1e-15)
