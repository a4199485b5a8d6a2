import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aslsl.graph import build_label_graph, empty_graph, laplacian_quadratic
from oracles import pairwise_quadratic


def test_identical_columns_get_unit_weight():
    Y = np.array([[1, 1, 0], [0, 0, 1]])
    g = build_label_graph(Y, q=1, sigma=1.0)
    assert g.affinity[0, 1] == 1.0


def test_orthogonal_columns_weight():
    # ||[1,0] - [0,1]||^2 = 2 -> exp(-2)
    Y = np.array([[1, 0], [0, 1]])
    g = build_label_graph(Y, q=1, sigma=1.0)
    assert g.affinity[0, 1] == pytest.approx(0.1353352832366127, abs=1e-15)
    assert g.affinity[0, 1] == pytest.approx(math.exp(-2))


def test_sigma_scales_exponent():
    Y = np.array([[1, 0], [0, 1]])
    g = build_label_graph(Y, q=1, sigma=2.0)
    assert g.affinity[0, 1] == pytest.approx(math.exp(-0.5))


def test_or_rule_symmetrisation():
    # column 2 is far from both; with q=1 its nearest neighbour is column 0
    # (tie broken by index), but column 0's nearest is column 1.
    Y = np.array([[1, 1, 0], [0, 0, 1], [0, 0, 1]])
    g = build_label_graph(Y, q=1, sigma=1.0)
    assert g.affinity[0, 1] == 1.0
    assert g.affinity[2, 0] == g.affinity[0, 2] == pytest.approx(math.exp(-3))
    assert g.affinity[2, 1] == 0.0


def test_ties_broken_by_index():
    Y = np.ones((2, 5))
    g = build_label_graph(Y, q=1, sigma=1.0)
    # every column's first neighbour is column 0, column 0's is column 1
    expected = np.zeros((5, 5), dtype=bool)
    for i in range(1, 5):
        expected[i, 0] = expected[0, i] = True
    expected[0, 1] = expected[1, 0] = True
    np.testing.assert_array_equal(g.affinity > 0, expected)


def test_no_self_loops(rng):
    Y = (rng.random((3, 20)) > 0.5).astype(float)
    g = build_label_graph(Y, q=4)
    assert np.all(np.diag(g.affinity) == 0)


def test_laplacian_rows_sum_to_zero(rng):
    Y = (rng.random((3, 30)) > 0.5).astype(float)
    g = build_label_graph(Y, q=5)
    assert np.max(np.abs(g.laplacian.sum(axis=1))) < 1e-10
    np.testing.assert_array_equal(g.degree, g.affinity.sum(axis=1))
    assert np.array_equal(g.affinity, g.affinity.T)
    assert g.affinity.min() >= 0 and g.affinity.max() <= 1


@pytest.mark.parametrize("q,sigma", [(3, 1.0), (4, 0.0), (1, -1.0)])
def test_invalid_parameters(q, sigma):
    Y = np.eye(3)
    with pytest.raises(ValueError):
        build_label_graph(Y, q=q, sigma=sigma)


def test_quadratic_zero_on_constant_rows():
    Y = np.array([[1, 0, 1, 0], [0, 1, 1, 0]])
    g = build_label_graph(Y, q=2)
    U = np.tile([0.3, 2.0], (4, 1))
    assert laplacian_quadratic(U, g) == pytest.approx(0.0, abs=1e-12)


def test_quadratic_matches_pairwise_oracle_toy():
    Y = np.array([[1, 0, 1], [0, 1, 1]])
    g = build_label_graph(Y, q=1)
    U = np.eye(3)[:, :2]
    assert laplacian_quadratic(U, g) == pytest.approx(pairwise_quadratic(U, g.affinity), rel=1e-12)
    assert laplacian_quadratic(U, g) == pytest.approx(np.trace(U.T @ g.laplacian @ U))


def test_quadratic_empty_graph_is_zero(rng):
    assert laplacian_quadratic(rng.random((6, 2)), empty_graph(6)) == 0.0


def test_quadratic_shape_check():
    g = empty_graph(4)
    with pytest.raises(ValueError):
        laplacian_quadratic(np.ones((3, 2)), g)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), q=st.integers(1, 6),
       U=arrays(np.float64, (12, 3), elements=st.floats(-10, 10)))
def test_quadratic_psd_and_matches_oracle(seed, q, U):
    Y = (np.random.default_rng(seed).random((3, 12)) > 0.5).astype(float)
    g = build_label_graph(Y, q=q)
    val = laplacian_quadratic(U, g)
    oracle = pairwise_quadratic(U, g.affinity)
    assert val >= -1e-9 * (1 + abs(oracle))
    assert val == pytest.approx(oracle, rel=1e-9, abs=1e-9)
