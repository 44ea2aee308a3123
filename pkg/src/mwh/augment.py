"""Batch augmenters: mixup, CutMix, flip/pad-crop and the identity.

Image batches are 4-D arrays laid out (batch, channels, height, width).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigError
from .rng import permutation, sample_beta, uniform01


@dataclass(frozen=True)
class MixInfo:
    lam: float
    pairing: np.ndarray
    label_mixing: bool = True
    box: Optional[tuple] = None  # (y1, y2, x1, x2), CutMix only


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray
    mix_info: Optional[MixInfo] = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"inputs have {self.inputs.shape[0]} rows but targets have {self.targets.shape[0]}"
            )

    @property
    def size(self):
        return self.inputs.shape[0]

    @property
    def mixed(self):
        return self.mix_info is not None


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _check_alpha(alpha):
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")


def mixup_batch(batch, alpha, stream, lam=None, pairing=None):
    """Mix every sample with a partner from the same batch.

    One coefficient is drawn for the whole batch, then a pairing
    permutation. ``lam`` and ``pairing`` override the draws (test hooks).
    """
    _check_alpha(alpha)
    n = batch.size
    if n < 1:
        raise ValueError("cannot mix an empty batch")
    if lam is None:
        lam = sample_beta(stream, alpha)
    if pairing is None:
        pairing = permutation(stream, n)
    pairing = np.asarray(pairing)
    x, y = batch.inputs, batch.targets
    xp = x[pairing]
    # rounding can push lam*a + (1-lam)*a one ulp outside [a, a]
    inputs = np.clip(lam * x + (1.0 - lam) * xp, np.minimum(x, xp), np.maximum(x, xp))
    targets = lam * y + (1.0 - lam) * y[pairing]
    return Batch(inputs, targets, MixInfo(float(lam), pairing))


def sample_box(height, width, lam, stream):
    """Box of side ratio sqrt(1 - lam) around a uniform center, clipped to the image."""
    cut_rat = np.sqrt(1.0 - lam)
    cut_h = int(height * cut_rat)
    cut_w = int(width * cut_rat)
    cy = int(stream.integers(height))
    cx = int(stream.integers(width))
    y1 = int(np.clip(cy - cut_h // 2, 0, height))
    y2 = int(np.clip(cy + cut_h // 2, 0, height))
    x1 = int(np.clip(cx - cut_w // 2, 0, width))
    x2 = int(np.clip(cx + cut_w // 2, 0, width))
    return y1, y2, x1, x2


def cutmix_batch(images, targets, alpha, stream, label_mixing=True,
                 lam=None, pairing=None, box=None):
    """Paste a rectangle from each sample's partner and adjust the labels.

    The coefficient actually applied is recomputed from the box area,
    ``1 - area / (H * W)``. Without label mixing each sample keeps the
    hard label of whichever image contributes the larger share.
    """
    _check_alpha(alpha)
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise ValueError(f"images must be (batch, channels, H, W), got {images.shape}")
    n, _, h, w = images.shape
    if h < 1 or w < 1:
        raise ValueError("image height and width must be >= 1")
    targets = np.asarray(targets, dtype=np.float64)
    if lam is None:
        lam = sample_beta(stream, alpha)
    if pairing is None:
        pairing = permutation(stream, n)
    pairing = np.asarray(pairing)
    if box is None:
        box = sample_box(h, w, lam, stream)
    y1, y2, x1, x2 = box
    area = max(y2 - y1, 0) * max(x2 - x1, 0)

    out = images.copy()
    if area:
        out[:, :, y1:y2, x1:x2] = images[pairing, :, y1:y2, x1:x2]
    adj = 1.0 - area / (h * w)

    if label_mixing:
        new_targets = adj * targets + (1.0 - adj) * targets[pairing]
    elif adj >= 0.5:
        new_targets = targets.copy()
    else:
        new_targets = targets[pairing].copy()
    info = MixInfo(adj, pairing, label_mixing=label_mixing, box=(y1, y2, x1, x2))
    return Batch(out, new_targets, info)


def basic_augment(images, stream, flip_prob=0.5, pad=4):
    """Random horizontal flip, then zero-pad and crop back to size.

    Draw order: all flip coins for the batch, then all (row, col) offsets.
    """
    images = np.asarray(images, dtype=np.float64)
    n, c, h, w = images.shape
    flips = uniform01(stream, n) < flip_prob
    offsets = stream.integers(2 * pad + 1, size=(n, 2))
    out = np.where(flips[:, None, None, None], images[..., ::-1], images)
    if pad == 0:
        return out.copy()
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    padded[:, :, pad:pad + h, pad:pad + w] = out
    result = np.empty_like(images)
    for k, (oy, ox) in enumerate(offsets):
        result[k] = padded[k, :, oy:oy + h, ox:ox + w]
    return result


def identity_augment(batch):
    return batch
