"""scikit-learn compatible classifier trained under a mixup schedule.

:class:`MWhClassifier` owns the training loop: for every global
mini-batch it asks the schedule whether to mix, applies mixup or
CutMix (or the clean/basic path), then runs forward, soft-label loss,
backward and one optimizer step.
"""
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import augment, model
from .data import BatchIterator
from .exceptions import ConfigError, NumericError
from .optim import LrSchedule, lr_at, make_optimizer
from .rng import RngStream
from .schedule import StrategySpec, strategy_decide

AUGMENTERS = ("mixup", "cutmix")


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    test_loss: float
    test_accuracy: float
    mixed_fraction: float
    lr: float
    n_batches: int
    n_mixed: int
    stage: Optional[int] = None  # stage of the epoch's last batch, staged strategies only
    phase: str = "main"          # "main" or "refine"

    def as_row(self):
        return asdict(self)


def evaluate(state, inputs, labels, n_classes):
    """Clean loss and accuracy on hard labels; no augmentation."""
    probs, _ = model.forward(state, inputs)
    targets = augment.one_hot(labels, n_classes)
    return {"loss": model.loss_ce_soft(probs, targets), "accuracy": model.accuracy(probs, labels)}


class MWhClassifier(ClassifierMixin, BaseEstimator):
    """ReLU MLP classifier trained with mixup, mWh or an ablation schedule.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Hidden widths; the default is two layers of 128 units.
    strategy : str
        One of ``baseline``, ``mixup``, ``first_half``, ``second_half``,
        ``refinement``, ``mwh``, ``stage_combo``.
    alpha : float
        Beta(alpha, alpha) parameter of the mixing coefficient.
    p, q : float
        Stage boundaries as fractions of the total mini-batch count.
    refine_epochs : int
        Clean epochs appended by the ``refinement`` strategy, run at the
        final main-phase learning rate.
    stage2, stage3 : str
        ``clean``, ``mixup`` or ``mwh`` policies for ``stage_combo``.
    augment : str
        ``mixup`` or ``cutmix``; ``cutmix`` needs ``image_shape``.
    label_mixing : bool
        CutMix only. When false each sample keeps the hard label of the
        image that contributes the larger area.
    image_shape : tuple of int, optional
        ``(channels, height, width)`` used to view flattened rows as images.
    basic_augment : bool
        Apply random flip and pad-crop to clean image batches.
    epochs, batch_size : int
    optimizer : str
        ``adam`` or ``sgd``.
    lr : float, optional
        Base learning rate; defaults to 0.001 for Adam and 0.1 for SGD.
    momentum : float
    lr_schedule : str
        ``constant``, ``step`` or ``cosine`` (per epoch).
    milestones : tuple of int
        Epochs at which the step schedule divides the rate by 10.
    init : str
        ``he`` (normal, zero biases) or ``torch`` (uniform weights and
        biases on +-1/sqrt(fan_in)).
    seed : int
        Seed of the single random stream used for the whole run.
    """

    def __init__(
        self,
        hidden_layer_sizes=(128, 128),
        strategy="mwh",
        alpha=0.2,
        p=0.6,
        q=0.9,
        refine_epochs=25,
        stage2="mwh",
        stage3="mwh",
        augment="mixup",
        label_mixing=True,
        image_shape=None,
        basic_augment=False,
        epochs=100,
        batch_size=128,
        optimizer="adam",
        lr=None,
        momentum=0.9,
        lr_schedule="constant",
        milestones=(),
        init="he",
        seed=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.strategy = strategy
        self.alpha = alpha
        self.p = p
        self.q = q
        self.refine_epochs = refine_epochs
        self.stage2 = stage2
        self.stage3 = stage3
        self.augment = augment
        self.label_mixing = label_mixing
        self.image_shape = image_shape
        self.basic_augment = basic_augment
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.lr = lr
        self.momentum = momentum
        self.lr_schedule = lr_schedule
        self.milestones = milestones
        self.init = init
        self.seed = seed

    def _validate_params(self, n_features):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.augment not in AUGMENTERS:
            raise ConfigError(f"augment must be one of {AUGMENTERS}, got {self.augment!r}")
        if self.init not in model.INIT_SCHEMES:
            raise ConfigError(f"init must be one of {model.INIT_SCHEMES}, got {self.init!r}")
        needs_images = self.augment == "cutmix" or self.basic_augment
        if needs_images:
            if self.image_shape is None:
                raise ConfigError("cutmix and basic augmentation need image_shape")
            if int(np.prod(self.image_shape)) != n_features:
                raise ConfigError(
                    f"image_shape {tuple(self.image_shape)} does not hold {n_features} features"
                )
        return StrategySpec(
            kind=self.strategy,
            p=self.p,
            q=self.q,
            refine_epochs=self.refine_epochs,
            stage2=self.stage2,
            stage3=self.stage3,
        )

    def _as_images(self, flat):
        return flat.reshape((flat.shape[0], *self.image_shape))

    def _mix(self, batch, stream):
        if self.augment == "mixup":
            return augment.mixup_batch(batch, self.alpha, stream)
        mixed = augment.cutmix_batch(
            self._as_images(batch.inputs), batch.targets, self.alpha, stream,
            label_mixing=self.label_mixing,
        )
        return augment.Batch(mixed.inputs.reshape(batch.inputs.shape), mixed.targets, mixed.mix_info)

    def _clean(self, batch, stream):
        if not self.basic_augment:
            return augment.identity_augment(batch)
        imgs = augment.basic_augment(self._as_images(batch.inputs), stream)
        return augment.Batch(imgs.reshape(batch.inputs.shape), batch.targets)

    def fit(self, X, y, eval_set=None, classes=None, callback=None):
        """Train from scratch.

        ``eval_set=(X_test, y_test)`` is evaluated clean after every epoch
        and recorded in ``history_``. ``classes`` fixes the label set when
        ``y`` may not contain every class. ``callback(record)`` is called
        with each epoch's :class:`MetricsRecord`.
        """
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        spec = self._validate_params(X.shape[1])
        self.classes_ = np.unique(y) if classes is None else np.asarray(classes)
        if not np.all(np.isin(y, self.classes_)):
            raise ValueError("y contains labels outside `classes`")
        n_classes = len(self.classes_)
        y_idx = np.searchsorted(self.classes_, y)
        self.n_features_in_ = X.shape[1]

        if eval_set is not None:
            X_ev = check_array(eval_set[0], dtype=np.float64)
            y_ev = np.searchsorted(self.classes_, np.asarray(eval_set[1]))

        stream = RngStream(self.seed)
        sizes = (X.shape[1], *tuple(self.hidden_layer_sizes), n_classes)
        state = model.init(model.MlpSpec(sizes), stream, scheme=self.init)
        opt = make_optimizer(self.optimizer, self.lr, self.momentum)
        schedule = LrSchedule(
            kind=self.lr_schedule,
            base_lr=opt.lr,
            milestones=tuple(self.milestones),
            total_epochs=self.epochs,
        )
        batches = BatchIterator(X, y_idx, n_classes, self.batch_size, stream)
        bpe = batches.batches_per_epoch
        m = self.epochs * bpe
        total_epochs = self.epochs + (spec.refine_epochs if spec.kind == "refinement" else 0)

        self.n_batches_ = m
        self.history_ = []
        self.decisions_ = []
        i = 0
        for epoch in range(total_epochs):
            # refinement epochs keep the final main-phase rate
            opt.lr = lr_at(schedule, min(epoch, self.epochs - 1))
            loss_sum, n_mixed, stage = 0.0, 0, None
            for batch in batches.epoch():
                i += 1
                decision = strategy_decide(i, spec, m, stream)
                self.decisions_.append(decision)
                if decision.mix:
                    batch = self._mix(batch, stream)
                    n_mixed += 1
                else:
                    batch = self._clean(batch, stream)
                stage = decision.stage
                probs, cache = model.forward(state, batch.inputs)
                loss = model.loss_ce_soft(probs, batch.targets)
                if not np.isfinite(loss):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch + 1}, batch {i}, lr {opt.lr}",
                        epoch=epoch + 1, batch=i, lr=opt.lr,
                    )
                grads = model.backward(state, cache, batch.targets)
                opt.step(state.params(), grads.params())
                loss_sum += loss

            test = {"loss": float("nan"), "accuracy": float("nan")}
            if eval_set is not None:
                test = evaluate(state, X_ev, y_ev, n_classes)
            record = MetricsRecord(
                epoch=epoch + 1,
                train_loss=loss_sum / bpe,
                test_loss=test["loss"],
                test_accuracy=test["accuracy"],
                mixed_fraction=n_mixed / bpe,
                lr=opt.lr,
                n_batches=bpe,
                n_mixed=n_mixed,
                stage=stage,
                phase="main" if epoch < self.epochs else "refine",
            )
            self.history_.append(record)
            if callback is not None:
                callback(record)

        self.state_ = state
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        probs, _ = model.forward(self.state_, X)
        return probs

    def predict(self, X):
        check_is_fitted(self, "state_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
