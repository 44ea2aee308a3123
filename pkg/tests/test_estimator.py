import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from mwh.data import UnitScaler, make_toy_images, make_two_class
from mwh.estimator import MWhClassifier, evaluate
from mwh.exceptions import ConfigError, NumericError
from mwh.schedule import StrategySpec, stage_counts


@pytest.fixture(scope="module")
def separable():
    ds = make_two_class(n=200, n_features=2, separation=6.0, noise=0.7, seed=0)
    X = UnitScaler().fit_transform(ds.features)
    return X[:150], ds.labels[:150], X[150:], ds.labels[150:]


def test_sklearn_params_roundtrip():
    est = MWhClassifier(alpha=0.5, strategy="mixup", hidden_layer_sizes=(8,))
    params = est.get_params()
    assert params["alpha"] == 0.5 and params["hidden_layer_sizes"] == (8,)
    twin = clone(est).set_params(seed=3)
    assert twin.seed == 3 and twin.strategy == "mixup"


def test_baseline_learns_separable_task(separable):
    X, y, Xt, yt = separable
    est = MWhClassifier(strategy="baseline", epochs=50, batch_size=16, hidden_layer_sizes=(16, 16), seed=0)
    est.fit(X, y, eval_set=(Xt, yt))
    assert est.score(Xt, yt) >= 0.95
    assert len(est.history_) == 50
    assert est.history_[-1].test_accuracy == est.score(Xt, yt)


def test_string_labels_and_pipeline():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 1, (40, 3)), rng.normal(4, 1, (40, 3))]) * 10
    y = np.array(["cat"] * 40 + ["dog"] * 40)
    pipe = make_pipeline(UnitScaler(), MWhClassifier(epochs=30, batch_size=8, hidden_layer_sizes=(16,)))
    pipe.fit(X, y)
    assert set(pipe.predict(X)) <= {"cat", "dog"}
    assert pipe.score(X, y) > 0.9
    assert pipe.predict_proba(X).shape == (80, 2)


def test_mwh_mixed_batches_match_schedule(separable):
    X, y, _, _ = separable
    est = MWhClassifier(strategy="mwh", epochs=40, batch_size=16, hidden_layer_sizes=(8,), seed=4)
    est.fit(X, y)
    bpe = est.history_[0].n_batches
    m = 40 * bpe
    assert est.n_batches_ == m
    counts = stage_counts(StrategySpec("mwh").params(m))
    total_mixed = sum(r.n_mixed for r in est.history_)
    assert total_mixed == sum(round(r.mixed_fraction * r.n_batches) for r in est.history_)
    stage3_realized = sum(d.mix for d in est.decisions_ if d.stage == 3)
    assert total_mixed == counts["stage1"] + counts["stage2_mixed"] + stage3_realized


def test_refinement_appends_clean_epochs_at_final_lr(separable):
    X, y, _, _ = separable
    est = MWhClassifier(strategy="refinement", refine_epochs=3, epochs=6, batch_size=50,
                        optimizer="sgd", lr=0.1, lr_schedule="step", milestones=(2, 4),
                        hidden_layer_sizes=(8,))
    est.fit(X, y)
    hist = est.history_
    assert len(hist) == 9
    refine = [r for r in hist if r.phase == "refine"]
    assert len(refine) == 3 and all(r.n_mixed == 0 for r in refine)
    assert sum(r.n_batches for r in refine) == 3 * 3
    assert all(r.lr == pytest.approx(0.001) for r in refine)
    assert all(r.n_mixed == r.n_batches for r in hist if r.phase == "main")


def test_cutmix_mode_runs_with_and_without_label_mixing():
    imgs, labels = make_toy_images(60, 1, 6, 6, seed=1)
    X = imgs.reshape(60, -1)
    for lm in (True, False):
        est = MWhClassifier(augment="cutmix", image_shape=(1, 6, 6), label_mixing=lm,
                            basic_augment=True, alpha=1.0, epochs=5, batch_size=20,
                            hidden_layer_sizes=(8,))
        est.fit(X, labels)
        assert est.predict(X).shape == (60,)


def test_config_errors(separable):
    X, y, _, _ = separable
    for bad in (dict(alpha=0), dict(epochs=0), dict(augment="cutmix"),
                dict(augment="cutmix", image_shape=(1, 3, 3)), dict(strategy="nope"),
                dict(init="xavier")):
        with pytest.raises(ConfigError):
            MWhClassifier(**bad).fit(X, y)


def test_nan_loss_aborts(separable):
    X, y, _, _ = separable
    est = MWhClassifier(strategy="baseline", optimizer="sgd", lr=1e200, epochs=5,
                        hidden_layer_sizes=(8,))
    with np.errstate(all="ignore"), pytest.raises(NumericError) as info:
        est.fit(X * 1e100, y)
    assert info.value.epoch >= 1 and info.value.batch >= 1 and info.value.lr == 1e200


def test_evaluate_matches_model_loss(separable):
    from mwh import model
    from mwh.augment import one_hot

    X, y, Xt, yt = separable
    est = MWhClassifier(epochs=3, hidden_layer_sizes=(8,)).fit(X, y)
    r1 = evaluate(est.state_, Xt, yt, 2)
    r2 = evaluate(est.state_, Xt, yt, 2)
    assert r1 == r2
    probs, _ = model.forward(est.state_, Xt)
    assert r1["loss"] == model.loss_ce_soft(probs, one_hot(yt, 2))


def test_perfect_predictor_accuracy():
    from mwh import model

    st = model.MlpState([np.eye(2) * 50], [np.zeros((1, 2))])
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert evaluate(st, X, [0, 1], 2)["accuracy"] == 1.0


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        MWhClassifier().predict(np.ones((1, 2)))
