import math

import numpy as np
import pytest

from mwh import model
from mwh.augment import one_hot
from mwh.rng import RngStream

from conftest import random_simplex_rows


def loss_at(state, x, y):
    probs, _ = model.forward(state, x)
    return model.loss_ce_soft(probs, y)


def finite_difference_grads(state, x, y, h=1e-5):
    """Central differences over every weight and bias entry."""
    grads = []
    for param in state.params():
        g = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + h
            up = loss_at(state, x, y)
            param[idx] = old - h
            down = loss_at(state, x, y)
            param[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def test_init_he_statistics_and_zero_bias():
    spec = model.MlpSpec((128, 256, 64))
    st = model.init(spec, RngStream(0))
    assert all(not b.any() for b in st.biases)
    std = st.weights[0].std()
    assert abs(std - math.sqrt(2 / 128)) / math.sqrt(2 / 128) < 0.1
    st2 = model.init(spec, RngStream(0))
    assert all(np.array_equal(a, b) for a, b in zip(st.weights, st2.weights))


def test_init_torch_bounds():
    st = model.init(model.MlpSpec((16, 8, 3)), RngStream(0), scheme="torch")
    assert np.abs(st.weights[0]).max() <= 0.25 and np.abs(st.biases[0]).max() <= 0.25
    assert st.biases[0].any()
    with pytest.raises(ValueError):
        model.init(model.MlpSpec((2, 2)), RngStream(0), scheme="xavier")


def test_spec_validation():
    with pytest.raises(ValueError):
        model.MlpSpec((4,))
    with pytest.raises(ValueError):
        model.MlpSpec((4, 0, 2))


def test_zero_weights_give_uniform_probs():
    st = model.init(model.MlpSpec((3, 5, 4)), RngStream(0))
    for w in st.weights:
        w[:] = 0
    probs, _ = model.forward(st, np.random.default_rng(0).normal(size=(6, 3)))
    np.testing.assert_allclose(probs, 0.25)


def test_forward_hand_computed_2_2_2():
    w1 = np.array([[1.0, -1.0], [0.5, 2.0]])
    b1 = np.array([[0.0, 0.5]])
    w2 = np.array([[1.0, 0.0], [-1.0, 1.0]])
    b2 = np.array([[0.1, -0.1]])
    st = model.MlpState([w1, w2], [b1, b2])
    x = np.array([[1.0, 2.0]])
    # hidden pre = [1 + 1, -1 + 4 + 0.5] = [2, 3.5]; relu keeps both
    # logits = [2 - 3.5 + 0.1, 3.5 - 0.1] = [-1.4, 3.4]
    e = [math.exp(-1.4), math.exp(3.4)]
    expected = [e[0] / sum(e), e[1] / sum(e)]
    probs, cache = model.forward(st, x)
    np.testing.assert_allclose(probs[0], expected, rtol=0, atol=1e-12)
    np.testing.assert_allclose(cache.preacts[0], [[2.0, 3.5]])


def test_batch_forward_equals_stacked(np_rng):
    st = model.init(model.MlpSpec((4, 6, 3)), RngStream(1))
    x = np_rng.normal(size=(5, 4))
    batch, _ = model.forward(st, x)
    rows = np.vstack([model.forward(st, x[k:k + 1])[0] for k in range(5)])
    np.testing.assert_allclose(batch, rows, atol=1e-15)


def test_forward_shape_error():
    st = model.init(model.MlpSpec((4, 3)), RngStream(0))
    with pytest.raises(ValueError):
        model.forward(st, np.ones((2, 5)))


def test_loss_closed_forms():
    y = one_hot([0, 2, 1], 3)
    assert model.loss_ce_soft(y, y) < 1e-10
    uniform = np.full((3, 3), 1 / 3)
    soft = random_simplex_rows(np.random.default_rng(0), 3, 3)
    assert model.loss_ce_soft(uniform, soft) == pytest.approx(math.log(3))


def test_loss_linear_in_targets(np_rng):
    p = random_simplex_rows(np_rng, 8, 4)
    a = one_hot(np_rng.integers(0, 4, 8), 4)
    b = one_hot(np_rng.integers(0, 4, 8), 4)
    lam = 0.3
    mixed = model.loss_ce_soft(p, lam * a + (1 - lam) * b)
    split = lam * model.loss_ce_soft(p, a) + (1 - lam) * model.loss_ce_soft(p, b)
    assert abs(mixed - split) < 1e-10


def test_softmax_ce_never_nan():
    st = model.init(model.MlpSpec((2, 3)), RngStream(0))
    st.weights[0][:] = 1e4
    probs, _ = model.forward(st, np.array([[50.0, -50.0], [1e3, 1e3]]))
    assert np.isfinite(model.loss_ce_soft(probs, one_hot([1, 2], 3)))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    st = model.init(model.MlpSpec((4, 5, 3)), RngStream(7), scheme="torch")
    x = rng.normal(size=(6, 4))
    y = random_simplex_rows(rng, 6, 3)
    probs, cache = model.forward(st, x)
    analytic = model.backward(st, cache, y).params()
    numeric = finite_difference_grads(st, x, y)
    for a, n in zip(analytic, numeric):
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        assert rel.max() < 1e-4


def test_backward_stationary_point():
    st = model.init(model.MlpSpec((3, 4, 2)), RngStream(0))
    probs, cache = model.forward(st, np.ones((2, 3)))
    g = model.backward(st, cache, probs.copy())
    assert all(np.allclose(p, 0) for p in g.params())


def test_duplicated_sample_gradient_doubles_contribution(np_rng):
    st = model.init(model.MlpSpec((3, 4, 2)), RngStream(0))
    x = np_rng.normal(size=(1, 3))
    y = one_hot([1], 2)
    _, c1 = model.forward(st, x)
    g1 = model.backward(st, c1, y)
    _, c2 = model.forward(st, np.vstack([x, x]))
    g2 = model.backward(st, c2, np.vstack([y, y]))
    # undo the 1/n of the mean reduction to compare summed contributions
    for single, double in zip(g1.params(), g2.params()):
        np.testing.assert_allclose(double * 2, 2 * (single * 1), atol=1e-14)


def test_backward_rejects_mismatched_cache():
    a = model.init(model.MlpSpec((3, 4, 2)), RngStream(0))
    b = model.init(model.MlpSpec((3, 5, 2)), RngStream(0))
    _, cache = model.forward(a, np.ones((2, 3)))
    with pytest.raises(ValueError):
        model.backward(b, cache, one_hot([0, 1], 2))


def test_accuracy(np_rng):
    y = np.array([0, 1, 2, 1])
    assert model.accuracy(one_hot(y, 3), y) == 1.0
    assert model.accuracy(one_hot((y + 1) % 3, 3), y) == 0.0
    assert model.accuracy(np.full((4, 3), 1 / 3), [0, 0, 0, 0]) == 1.0  # ties -> lowest index
    p = random_simplex_rows(np_rng, 200, 5)
    labels = np_rng.integers(0, 5, 200)
    hits = 0
    for row, lab in zip(p, labels):
        best = 0
        for k in range(1, 5):
            if row[k] > row[best]:
                best = k
        hits += best == lab
    assert model.accuracy(p, labels) == hits / 200


def test_save_load_roundtrip(tmp_path):
    st = model.init(model.MlpSpec((4, 6, 3)), RngStream(2), scheme="torch")
    path = tmp_path / "m.npz"
    model.save_state(path, st, class_names=np.array(["a", "b", "c"]))
    back, extras = model.load_state(path)
    assert back.layer_sizes == (4, 6, 3)
    assert all(np.array_equal(a, b) for a, b in zip(st.params(), back.params()))
    assert extras["class_names"].tolist() == ["a", "b", "c"]
