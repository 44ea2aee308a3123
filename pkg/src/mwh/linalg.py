"""Dense float64 matrix helpers with explicit shape checks.

Matrices are plain 2-D numpy arrays. The helpers never mutate their
arguments; they exist so shape errors surface as ``ValueError`` with a
readable message instead of a broadcast surprise deep in backprop.
"""
import numpy as np

DTYPE = np.float64


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=DTYPE)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def check_finite(a, name="matrix"):
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{name} contains NaN or Inf")
    return a


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def add(a, b):
    a, b = as_matrix(a), as_matrix(b)
    _same_shape(a, b, "add")
    return a + b


def scale(a, s):
    return as_matrix(a) * float(s)


def hadamard(a, b):
    a, b = as_matrix(a), as_matrix(b)
    _same_shape(a, b, "hadamard")
    return a * b


def relu(a):
    return np.maximum(as_matrix(a), 0.0)


def relu_grad_mask(pre):
    """1 where the pre-activation is strictly positive, else 0."""
    return (as_matrix(pre) > 0).astype(DTYPE)


def transpose(a):
    return as_matrix(a).T.copy()


def row_sum(a):
    """Column-wise sum over rows, returned as a 1 x cols row vector."""
    return as_matrix(a).sum(axis=0, keepdims=True)


def broadcast_add_row(a, row):
    a = as_matrix(a)
    row = as_matrix(row, "row")
    if row.shape != (1, a.shape[1]):
        raise ValueError(f"broadcast_add_row: row {row.shape} does not fit {a.shape}")
    return a + row


def softmax_rows(logits):
    z = as_matrix(logits, "logits")
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
