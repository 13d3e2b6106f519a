"""Tempered softmax, cross-entropy, and the tempered KL distillation
objective, with analytic gradients.

All operations take 2-D float64 logit arrays of shape (batch, classes),
validate their inputs, and dispatch to the selected kernel backend
(see ``tempkd._kernels``). Losses are averaged over the batch so their
magnitudes do not depend on batch size. Every function here is pure.

Gradient conventions, with P(T) the tempered softmax of a logit row:

* ``cross_entropy_grad``: (P(1) - one_hot(labels)) / batch
* ``kd_loss_grad``:       T * (P_student(T) - P_teacher(T)) / batch,
  the exact gradient of ``kd_loss`` (which carries a T**2 factor) with
  respect to the student logits.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels


def as_matrix(arr, name: str = "matrix") -> np.ndarray:
    """Coerce to a validated 2-D C-contiguous float64 array."""
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(
            f"{name} must be a non-empty 2-D array, got shape {np.shape(arr)}"
        )
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_labels(labels, num_classes: int, name: str = "labels") -> np.ndarray:
    """Coerce to a validated 1-D int64 label array with entries in [0, C)."""
    out = np.ascontiguousarray(labels, dtype=np.int64)
    if out.ndim != 1 or out.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty 1-D integer array")
    if out.min() < 0 or out.max() >= num_classes:
        raise ValueError(
            f"{name} must lie in [0, {num_classes}), got range "
            f"[{out.min()}, {out.max()}]"
        )
    return out


def check_temperature(temperature) -> float:
    t = float(temperature)
    if not math.isfinite(t) or t <= 0.0:
        raise ValueError(
            f"temperature must be positive and finite, got {temperature!r}"
        )
    return t


def _paired_logits(teacher_logits, student_logits):
    t = as_matrix(teacher_logits, "teacher_logits")
    s = as_matrix(student_logits, "student_logits")
    if t.shape != s.shape:
        raise ValueError(
            f"teacher/student logit shapes differ: {t.shape} vs {s.shape}"
        )
    return t, s


def _labelled_logits(logits, labels):
    z = as_matrix(logits, "logits")
    y = as_labels(labels, z.shape[1])
    if y.shape[0] != z.shape[0]:
        raise ValueError(
            f"got {z.shape[0]} logit rows but {y.shape[0]} labels"
        )
    return z, y


def softmax_t(logits, temperature) -> np.ndarray:
    """Row-wise softmax of logits / temperature.

    Higher temperatures flatten each row toward uniform; lower ones
    sharpen it toward the argmax. Rows sum to 1.
    """
    z = as_matrix(logits, "logits")
    t = check_temperature(temperature)
    return _kernels.active_backend().softmax_rows(z, t)


def cross_entropy(logits, labels) -> float:
    """Mean negative log-likelihood of the labels under softmax(logits)."""
    z, y = _labelled_logits(logits, labels)
    return float(_kernels.active_backend().cross_entropy(z, y))


def cross_entropy_grad(logits, labels) -> np.ndarray:
    """Gradient of ``cross_entropy`` with respect to the logits."""
    z, y = _labelled_logits(logits, labels)
    return _kernels.active_backend().cross_entropy_grad(z, y)


def kd_loss(teacher_logits, student_logits, temperature) -> float:
    """Tempered distillation loss between teacher and student logits.

    Mean over rows of T**2 * KL(P_teacher(T) || P_student(T)). The T**2
    factor keeps gradient magnitudes comparable across temperatures.
    Always >= 0, and 0 exactly when the softened rows coincide.
    """
    t_logits, s_logits = _paired_logits(teacher_logits, student_logits)
    t = check_temperature(temperature)
    return float(_kernels.active_backend().kd_value(t_logits, s_logits, t))


def kd_loss_grad(teacher_logits, student_logits, temperature) -> np.ndarray:
    """Gradient of ``kd_loss`` with respect to the student logits."""
    t_logits, s_logits = _paired_logits(teacher_logits, student_logits)
    t = check_temperature(temperature)
    return _kernels.active_backend().kd_grad(t_logits, s_logits, t)
