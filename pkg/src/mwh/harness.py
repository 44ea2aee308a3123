"""Experiment wiring: config files, training runs, sweeps and plots.

A run directory holds ``metrics.csv`` (one row per epoch),
``manifest.json`` (the resolved config plus schedule occupancy) and
``model.npz`` (weights plus the scaler and class names needed by
``mwh eval``).
"""
import configparser
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import model
from .data import (
    SplitSpec,
    UnitScaler,
    load_csv,
    load_iris,
    make_toy_images,
    make_two_class,
    read_images,
    split_indices,
    TabularDataset,
)
from .estimator import MetricsRecord, MWhClassifier, evaluate
from .exceptions import ConfigError
from .schedule import STRATEGIES, StrategySpec, stage_counts

logger = logging.getLogger(__name__)

__all__ = [
    "TrainConfig",
    "TrainResult",
    "load_config",
    "prepare_data",
    "run_training",
    "evaluate",
    "sweep",
    "read_metrics",
    "plot_metrics",
]

BUILTIN_DATASETS = ("iris", "two_class", "toy_images")
SWEEP_AXES = ("alpha", "p", "q", "strategy")
METRIC_FIELDS = [f.name for f in fields(MetricsRecord)]


@dataclass
class TrainConfig:
    # data
    dataset: str = "iris"
    label_column: str = "-1"
    train_fraction: float = 0.75
    stratified: bool = True
    split_seed: int = None  # defaults to seed
    n_samples: int = 400
    n_features: int = 2
    separation: float = 2.0
    noise: float = 1.0
    data_seed: int = None  # synthetic generators; defaults to seed
    image_shape: tuple = (1, 8, 8)
    # model
    hidden: tuple = (128, 128)
    init: str = "he"
    # optimizer
    optimizer: str = "adam"
    lr: float = None
    momentum: float = 0.9
    schedule: str = "constant"
    milestones: tuple = ()
    # training
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0
    # strategy
    strategy: str = "mwh"
    alpha: float = 0.2
    p: float = 0.6
    q: float = 0.9
    refine_epochs: int = 25
    stage2: str = "mwh"
    stage3: str = "mwh"
    augment: str = "mixup"
    label_mixing: bool = True
    basic_augment: bool = False
    # output
    out: str = "runs/default"
    base_dir: str = field(default=".", repr=False)

    def validate(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.dataset not in BUILTIN_DATASETS and not self.dataset_path().is_file():
            raise ConfigError(f"dataset file not found: {self.dataset_path()}")
        StrategySpec(self.strategy, self.p, self.q, self.refine_epochs, self.stage2, self.stage3)
        SplitSpec(self.train_fraction, self.stratified, 0)
        if self.init not in model.INIT_SCHEMES:
            raise ConfigError(f"init must be one of {model.INIT_SCHEMES}")
        return self

    def dataset_path(self):
        p = Path(self.dataset)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def is_image_data(self):
        return self.dataset == "toy_images" or self.dataset.endswith(".mwhi")

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_SECTIONS = {
    "data": ("dataset", "label_column", "train_fraction", "stratified", "split_seed",
             "n_samples", "n_features", "separation", "noise", "data_seed", "image_shape"),
    "model": ("hidden", "init"),
    "optim": ("optimizer", "lr", "momentum", "schedule", "milestones"),
    "train": ("epochs", "batch_size", "seed"),
    "strategy": ("strategy", "alpha", "p", "q", "refine_epochs", "stage2", "stage3",
                 "augment", "label_mixing", "basic_augment"),
    "output": ("out",),
}
_INT_TUPLES = {"hidden", "milestones", "image_shape"}
_BOOLS = {"stratified", "label_mixing", "basic_augment"}
_INTS = {"split_seed", "n_samples", "n_features", "data_seed", "epochs", "batch_size",
         "seed", "refine_epochs"}
_FLOATS = {"train_fraction", "separation", "noise", "lr", "momentum", "alpha", "p", "q"}


def _coerce(key, raw):
    raw = raw.strip()
    try:
        if key in _INT_TUPLES:
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if key in _BOOLS:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key in _INTS:
            return None if raw.lower() in ("", "none") else int(raw)
        if key in _FLOATS:
            return None if raw.lower() in ("", "none") else float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None
    return raw


def config_from_mapping(mapping, base_dir="."):
    """Build a config from a flat ``{key: value}`` mapping (strings are coerced)."""
    known = {f.name for f in fields(TrainConfig)} - {"base_dir"}
    values = {}
    for key, value in mapping.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    return TrainConfig(base_dir=str(base_dir), **values)


def load_config(path):
    """Parse an INI-style file with sections data/model/optim/train/strategy/output."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    flat = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{path}: key {key!r} does not belong in [{section}]")
            flat[key] = value
    return config_from_mapping(flat, base_dir=path.parent)


@dataclass
class PreparedData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    n_classes: int
    class_names: list
    scaler: UnitScaler = None
    image_shape: tuple = None


def _load_dataset(config):
    seed = config.seed if config.data_seed is None else config.data_seed
    if config.dataset == "iris":
        return load_iris()
    if config.dataset == "two_class":
        return make_two_class(config.n_samples, config.n_features, config.separation,
                              config.noise, seed=seed)
    if config.dataset == "toy_images":
        c, h, w = config.image_shape
        imgs, labels = make_toy_images(config.n_samples, c, h, w, seed=seed)
        return imgs, labels
    path = config.dataset_path()
    if path.suffix == ".mwhi":
        imgs, labels = read_images(path)
        if labels is None:
            raise ConfigError(f"{path} has no label block")
        return imgs, labels
    label = config.label_column
    return load_csv(path, label_column=int(label) if label.lstrip("-").isdigit() else label)


def prepare_data(config):
    """Load, split (train-only scaling for tabular data) and flatten images."""
    loaded = _load_dataset(config)
    split_seed = config.seed if config.split_seed is None else config.split_seed
    spec = SplitSpec(config.train_fraction, config.stratified, split_seed)
    if isinstance(loaded, TabularDataset):
        tr, te = split_indices(loaded.labels, spec)
        scaler = UnitScaler().fit(loaded.features[tr])
        return PreparedData(
            scaler.transform(loaded.features[tr]), loaded.labels[tr],
            scaler.transform(loaded.features[te]), loaded.labels[te],
            loaded.n_classes, list(loaded.class_names), scaler=scaler,
        )
    imgs, labels = loaded
    tr, te = split_indices(labels, spec)
    flat = imgs.reshape(imgs.shape[0], -1)
    n_classes = int(labels.max()) + 1
    return PreparedData(
        flat[tr], labels[tr], flat[te], labels[te], n_classes,
        [str(k) for k in range(n_classes)], image_shape=tuple(imgs.shape[1:]),
    )


def build_estimator(config, image_shape=None):
    return MWhClassifier(
        hidden_layer_sizes=tuple(config.hidden),
        strategy=config.strategy,
        alpha=config.alpha,
        p=config.p,
        q=config.q,
        refine_epochs=config.refine_epochs,
        stage2=config.stage2,
        stage3=config.stage3,
        augment=config.augment,
        label_mixing=config.label_mixing,
        image_shape=image_shape,
        basic_augment=config.basic_augment,
        epochs=config.epochs,
        batch_size=config.batch_size,
        optimizer=config.optimizer,
        lr=config.lr,
        momentum=config.momentum,
        lr_schedule=config.schedule,
        milestones=tuple(config.milestones),
        init=config.init,
        seed=config.seed,
    )


@dataclass
class TrainResult:
    final: MetricsRecord
    history: list
    estimator: MWhClassifier
    out_dir: Path
    metrics_path: Path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for rec in history:
            row = rec.as_row()
            w.writerow([_fmt(row[k]) for k in METRIC_FIELDS])


def read_metrics(path):
    """Parse a metrics CSV back into a list of :class:`MetricsRecord`."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(MetricsRecord(
                epoch=int(row["epoch"]),
                train_loss=float(row["train_loss"]),
                test_loss=float(row["test_loss"]),
                test_accuracy=float(row["test_accuracy"]),
                mixed_fraction=float(row["mixed_fraction"]),
                lr=float(row["lr"]),
                n_batches=int(row["n_batches"]),
                n_mixed=int(row["n_mixed"]),
                stage=int(row["stage"]) if row["stage"] else None,
                phase=row["phase"],
            ))
    return out


def run_training(config, out_dir=None, save_model=True):
    """Train one run end to end and write its metrics, manifest and model."""
    config.validate()
    data = prepare_data(config)
    est = build_estimator(config, data.image_shape)
    est.fit(data.X_train, data.y_train, eval_set=(data.X_test, data.y_test),
            classes=np.arange(data.n_classes))

    out = Path(out_dir if out_dir is not None else config.out)
    if not out.is_absolute() and out_dir is None:
        out = Path(config.base_dir) / out
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    write_metrics(metrics_path, est.history_)

    spec = StrategySpec(config.strategy, config.p, config.q, config.refine_epochs,
                        config.stage2, config.stage3)
    manifest = {
        "config": config.to_dict(),
        "n_train": int(data.X_train.shape[0]),
        "n_test": int(data.X_test.shape[0]),
        "n_classes": data.n_classes,
        "batches_per_epoch": est.history_[0].n_batches,
        "main_batches": est.n_batches_,
        "mixed_batches": int(sum(d.mix for d in est.decisions_)),
    }
    if spec.staged:
        manifest["stage_counts"] = stage_counts(spec.params(est.n_batches_, config.alpha))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if save_model:
        extras = {"class_names": np.array(data.class_names)}
        if data.scaler is not None:
            extras["scale_min"] = data.scaler.data_min_
            extras["scale_range"] = data.scaler.data_range_
            extras["label_column"] = np.array(config.label_column)
        model.save_state(out / "model.npz", est.state_, **extras)

    final = est.history_[-1]
    logger.info("run finished: epoch %d test_acc %.4f test_loss %.4f",
                final.epoch, final.test_accuracy, final.test_loss)
    return TrainResult(final, est.history_, est, out, metrics_path)


def evaluate_saved(model_path, data_path, label_column=None):
    """Score a saved model on a CSV or image file using its stored scaler."""
    state, extras = model.load_state(model_path)
    class_names = [str(c) for c in extras["class_names"]]
    data_path = Path(data_path)
    if data_path.suffix == ".mwhi":
        imgs, labels = read_images(data_path)
        if labels is None:
            raise ConfigError(f"{data_path} has no label block")
        X = imgs.reshape(imgs.shape[0], -1)
    else:
        if label_column is None:
            label_column = str(extras.get("label_column", "-1"))
        col = int(label_column) if label_column.lstrip("-").isdigit() else label_column
        ds = load_csv(data_path, label_column=col)
        lookup = {name: k for k, name in enumerate(class_names)}
        unknown = sorted(set(ds.class_names) - set(lookup))
        if unknown:
            raise ConfigError(f"labels {unknown} were not seen in training")
        labels = np.array([lookup[ds.class_names[i]] for i in ds.labels])
        X = ds.features
        if "scale_min" in extras:
            scaler = UnitScaler()
            scaler.data_min_ = extras["scale_min"]
            scaler.data_range_ = extras["scale_range"]
            scaler.n_features_in_ = X.shape[1]
            X = scaler.transform(X)
    return evaluate(state, X, labels, len(class_names))


def _axis_value(axis, raw):
    if axis == "strategy":
        if StrategySpec(kind=str(raw)).kind not in STRATEGIES:
            raise ConfigError(f"unknown strategy {raw!r}")
        return str(raw)
    return float(raw)


def sweep(config, axis, values, seeds=None, out_dir=None):
    """One training run per (value, seed); failures are recorded, not raised.

    Writes ``sweep.csv`` with columns axis, value, seed, status,
    final_test_accuracy, final_test_loss, error.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = [_axis_value(axis, v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    seeds = [config.seed] if seeds is None else [int(s) for s in seeds]
    root = Path(out_dir if out_dir is not None else config.out)
    root.mkdir(parents=True, exist_ok=True)

    rows = []
    for value in values:
        for seed in seeds:
            run_cfg = replace(config, seed=seed, **{axis: value})
            row = {"axis": axis, "value": value, "seed": seed}
            try:
                res = run_training(run_cfg, out_dir=root / f"{axis}={value}" / f"seed={seed}")
                row.update(status="ok", final_test_accuracy=res.final.test_accuracy,
                           final_test_loss=res.final.test_loss, error="")
            except Exception as exc:  # noqa: BLE001 - partial results are the contract
                logger.warning("sweep run %s=%s seed=%s failed: %s", axis, value, seed, exc)
                row.update(status="failed", final_test_accuracy=math.nan,
                           final_test_loss=math.nan, error=str(exc))
            rows.append(row)

    cols = ["axis", "value", "seed", "status", "final_test_accuracy", "final_test_loss", "error"]
    with open(root / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in cols})
    return rows


def _stage_spans(history):
    """(stage, first_epoch, last_epoch, mixed_fraction) for consecutive stage runs."""
    spans = []
    for rec in history:
        if rec.stage is None:
            continue
        if spans and spans[-1][0] == rec.stage:
            s, a, _, mixed, total = spans[-1]
            spans[-1] = (s, a, rec.epoch, mixed + rec.n_mixed, total + rec.n_batches)
        else:
            spans.append((rec.stage, rec.epoch, rec.epoch, rec.n_mixed, rec.n_batches))
    return [(s, a, b, mixed / total) for s, a, b, mixed, total in spans]


def plot_metrics(paths, out, labels=None):
    """Test loss and accuracy against epoch for each run, written as SVG or PDF."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("plot_metrics needs at least one metrics file")
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.fonttype"] = "none"  # keep text as text
    matplotlib.rcParams["svg.hashsalt"] = "mwh"
    import matplotlib.pyplot as plt

    labels = labels or [p.parent.name or p.stem for p in paths]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(11, 4))
    for path, label in zip(paths, labels):
        hist = read_metrics(path)
        epochs = [r.epoch for r in hist]
        ax_loss.plot(epochs, [r.test_loss for r in hist], label=label)
        ax_acc.plot(epochs, [r.test_accuracy for r in hist], label=label)
        for stage, a, b, frac in _stage_spans(hist):
            ax_loss.axvspan(a - 0.5, b + 0.5, alpha=0.06 * stage, color="gray", lw=0)
            ax_loss.annotate(f"{label} s{stage}: {frac:.2f} mixed", xy=((a + b) / 2, 1.0),
                             xycoords=("data", "axes fraction"), ha="center", va="top",
                             fontsize=7, rotation=90)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("clean test loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("clean test accuracy")
    ax_loss.legend()
    ax_acc.legend()
    fig.tight_layout()
    out = Path(out)
    fmt = out.suffix.lstrip(".").lower() or "svg"
    if fmt not in ("svg", "pdf", "eps"):
        raise ValueError(f"plot output must be a vector format (svg, pdf, eps), got {fmt!r}")
    fig.savefig(out, format=fmt)
    plt.close(fig)
    return out
