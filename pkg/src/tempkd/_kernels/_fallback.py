"""NumPy implementations of the per-batch loss kernels.

Fallback backend used when the compiled extension is unavailable or
disabled. Signatures and semantics match ``tempkd._kernels._core``;
inputs are assumed pre-validated by the wrappers in ``tempkd.numerics``
(2-D C-contiguous float64 logits, int64 labels, positive temperature).
"""

import numpy as np

NAME = "python"


def softmax_rows(logits, temperature):
    # Per-row max subtraction keeps exp() from overflowing at low temperature.
    shifted = (logits - logits.max(axis=1, keepdims=True)) / temperature
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_rows(logits, temperature):
    shifted = (logits - logits.max(axis=1, keepdims=True)) / temperature
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels):
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    picked = logits[np.arange(logits.shape[0]), labels]
    return float(np.mean(lse - picked))


def cross_entropy_grad(logits, labels):
    grad = softmax_rows(logits, 1.0)
    grad[np.arange(logits.shape[0]), labels] -= 1.0
    grad /= logits.shape[0]
    return grad


def kd_value(teacher_logits, student_logits, temperature):
    # All-log-space: stays finite even where probabilities underflow to 0,
    # and 0*log0 terms come out as exact zeros.
    log_pt = _log_softmax_rows(teacher_logits, temperature)
    log_ps = _log_softmax_rows(student_logits, temperature)
    pt = np.exp(log_pt)
    per_row = (pt * (log_pt - log_ps)).sum(axis=1)
    value = temperature * temperature * float(per_row.mean())
    # KL >= 0 mathematically; rounding can leave a ~1e-17 negative residue.
    return value if value > 0.0 else 0.0


def kd_grad(teacher_logits, student_logits, temperature):
    ps = softmax_rows(student_logits, temperature)
    pt = softmax_rows(teacher_logits, temperature)
    return temperature * (ps - pt) / teacher_logits.shape[0]
