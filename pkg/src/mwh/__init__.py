"""mixup Without hesitation (mWh): mixup scheduling on a small numpy MLP."""
from .augment import Batch, basic_augment, cutmix_batch, identity_augment, mixup_batch
from .estimator import MetricsRecord, MWhClassifier
from .exceptions import ConfigError, DataError, NumericError
from .rng import RngStream
from .schedule import ScheduleParams, StrategySpec, mwh_decide, strategy_decide

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ConfigError",
    "DataError",
    "MetricsRecord",
    "MWhClassifier",
    "NumericError",
    "RngStream",
    "ScheduleParams",
    "StrategySpec",
    "basic_augment",
    "cutmix_batch",
    "identity_augment",
    "mixup_batch",
    "mwh_decide",
    "strategy_decide",
]
