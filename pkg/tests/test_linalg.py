import numpy as np
import pytest

from mwh import linalg as la


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_matmul_hand_and_identity(np_rng):
    assert la.matmul([[1, 2], [3, 4]], [[1], [1]]).tolist() == [[3], [7]]
    a = np_rng.normal(size=(4, 4))
    assert np.array_equal(la.matmul(np.eye(4), a), a)


def test_matmul_matches_triple_loop(np_rng):
    a, b = np_rng.normal(size=(5, 7)), np_rng.normal(size=(7, 3))
    np.testing.assert_allclose(la.matmul(a, b), naive_matmul(a, b), atol=1e-12)


def test_matmul_associative(np_rng):
    a, b, c = (np_rng.normal(size=s) for s in [(4, 6), (6, 5), (5, 3)])
    left = la.matmul(la.matmul(a, b), c)
    right = la.matmul(a, la.matmul(b, c))
    assert np.max(np.abs(left - right)) / np.max(np.abs(left)) < 1e-9


def test_shape_errors():
    with pytest.raises(ValueError):
        la.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        la.add(np.ones((2, 3)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        la.hadamard(np.ones((2, 3)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        la.broadcast_add_row(np.ones((2, 3)), np.ones((1, 2)))


def test_elementwise():
    assert la.relu([-1.0, 0.0, 2.0]).tolist() == [[0.0, 0.0, 2.0]]
    assert la.relu_grad_mask([-1.0, 0.0, 2.0]).tolist() == [[0.0, 0.0, 1.0]]
    a = np.arange(6.0).reshape(2, 3)
    assert not la.scale(a, 0).any()
    assert la.transpose(a).shape == (3, 2)
    assert la.row_sum(a).tolist() == [[3.0, 5.0, 7.0]]
    assert la.broadcast_add_row(a, [[1, 1, 1]]).tolist() == [[1, 2, 3], [4, 5, 6]]


def test_hadamard_matches_loop(np_rng):
    a, b = np_rng.normal(size=(4, 5)), np_rng.normal(size=(4, 5))
    expected = np.array([[a[i, j] * b[i, j] for j in range(5)] for i in range(4)])
    assert np.array_equal(la.hadamard(a, b), expected)


def test_softmax_rows():
    np.testing.assert_array_equal(la.softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]])
    big = la.softmax_rows([[1000.0, 0.0]])
    assert np.all(np.isfinite(big))
    assert big[0, 0] == pytest.approx(1.0) and big[0, 1] < 1e-300 + 1e-400
    x = np.random.default_rng(0).normal(scale=20, size=(200, 7))
    s = la.softmax_rows(x)
    assert np.all(s >= 0)
    assert np.max(np.abs(s.sum(axis=1) - 1)) < 1e-12


def test_check_finite():
    with pytest.raises(FloatingPointError):
        la.check_finite(np.array([[1.0, np.nan]]))
