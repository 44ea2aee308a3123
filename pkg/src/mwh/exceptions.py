class ConfigError(ValueError):
    """Invalid configuration or hyper-parameter; rejected before training."""


class NumericError(RuntimeError):
    """Non-finite loss or parameters during training."""

    def __init__(self, message, epoch=None, batch=None, lr=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.lr = lr


class DataError(ValueError):
    """Base class for dataset ingestion failures."""


class EmptyDatasetError(DataError):
    pass


class NonNumericFeatureError(DataError):
    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)


class MalformedImageFileError(DataError):
    pass
